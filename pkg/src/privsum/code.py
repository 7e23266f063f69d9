"""Systematic Reed-Solomon codes over GF(p).

The code is the evaluation code of polynomials of degree < l at the fixed
points 0, 1, ..., n-1, with the generator row-reduced to standard form
``[I | A]``.  Codewords are row vectors: ``c = m @ G``.

Decoding uses Gao's algorithm (interpolate, then a partial extended
Euclidean algorithm against the vanishing polynomial of the evaluation
points).  It corrects any pattern of at most ``(d - 1) // 2`` symbol errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .field import (
    PrimeField,
    inv_mod,
    mat_inv,
    mat_mul,
    poly_deg,
    poly_divmod,
    poly_eval,
    poly_from_roots,
    poly_mul,
    poly_sub,
    poly_trim,
)


class InvalidParams(ValueError):
    pass


class DecodeFailure(Exception):
    """The decoder could not find a codeword within the decoding radius."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class CodeParams:
    n: int
    l: int
    p: int

    @property
    def d(self) -> int:
        # MDS: Singleton bound met with equality
        return self.n - self.l + 1

    @property
    def radius(self) -> int:
        return (self.d - 1) // 2

    @property
    def redundancy(self) -> float:
        return (self.n - self.l) / self.l


class Decoded(NamedTuple):
    message: np.ndarray
    errors_corrected: int


class ReedSolomonCode:
    """An ``[n, l, n - l + 1]`` systematic RS code over GF(p).

    Parameters
    ----------
    p : int
        Field characteristic (prime).
    n : int
        Codeword length, ``n <= p``.
    l : int
        Message length, ``1 <= l <= n``.
    """

    def __init__(self, p: int, n: int, l: int):
        self.field = PrimeField(p)
        if not 1 <= l <= n:
            raise InvalidParams(f"need 1 <= l <= n, got l={l}, n={n}")
        if n > p:
            raise InvalidParams(f"need n <= p for distinct evaluation points, got n={n}, p={p}")
        self.params = CodeParams(n=n, l=l, p=p)
        self.dtype = self.field.dtype(n)

        self.points = np.arange(n, dtype=self.dtype)
        vander = np.ones((n, n), dtype=self.dtype)
        for j in range(1, n):
            vander[:, j] = vander[:, j - 1] * self.points % p
        self._vander = vander
        self._interp = mat_inv(vander, p)
        # rows = monomials x^0..x^{l-1} evaluated at every point
        g_eval = vander[:, :l].T.copy()
        self.generator = mat_mul(mat_inv(g_eval[:, :l], p), g_eval, p)
        self.generator.setflags(write=False)
        self._vanishing = poly_from_roots(range(n), p, dtype=self.dtype)

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def l(self) -> int:
        return self.params.l

    @property
    def p(self) -> int:
        return self.params.p

    @property
    def d(self) -> int:
        return self.params.d

    def __repr__(self):
        return f"ReedSolomonCode(p={self.p}, n={self.n}, l={self.l})"

    def _as_symbols(self, x, length: int, what: str) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1:] != (length,):
            raise ValueError(f"{what} must have length {length}, got shape {x.shape}")
        if x.dtype == object or not np.issubdtype(x.dtype, np.integer):
            x = np.array(x.tolist(), dtype=self.dtype)
        return x.astype(self.dtype, copy=False) % self.p

    def encode(self, message) -> np.ndarray:
        """Encode one message (shape ``(l,)``) or a stack (shape ``(k, l)``)."""
        m = self._as_symbols(message, self.l, "message")
        return mat_mul(m, self.generator, self.p)

    def is_codeword(self, word) -> bool:
        c = self._as_symbols(word, self.n, "codeword")
        return bool(np.array_equal(self.encode(c[: self.l]), c))

    def decode(self, word) -> Decoded:
        """Bounded-distance decode; raises :class:`DecodeFailure` past the radius.

        Past the radius a wrong codeword may occasionally be returned; that is
        unavoidable for any bounded-distance decoder.
        """
        r = self._as_symbols(word, self.n, "codeword")
        n, l, p = self.n, self.l, self.p
        g1 = poly_trim(mat_mul(self._interp, r, p))
        if poly_deg(g1) < l:
            return Decoded(r[:l].copy(), 0)

        r0, r1 = self._vanishing, g1
        v0 = np.zeros(0, dtype=self.dtype)
        v1 = np.ones(1, dtype=self.dtype)
        while 2 * poly_deg(r1) >= n + l:
            q, rem = poly_divmod(r0, r1, p)
            r0, r1 = r1, rem
            v0, v1 = v1, poly_sub(v0, poly_mul(q, v1, p), p)

        # v1 is the error locator: its roots among the evaluation points are
        # the error positions.  At a simple root a, g = f v gives
        # f(a) = g'(a) / v'(a), the symbol the codeword should hold there.
        n_loc = poly_deg(v1)
        if n_loc > self.params.radius:
            raise DecodeFailure(f"error locator has degree {n_loc} > radius {self.params.radius}")
        where = np.flatnonzero(poly_eval(v1, self.points, p) == 0)
        if len(where) != n_loc:
            raise DecodeFailure("error locator does not split over the evaluation points")
        corrected = r.copy()
        if n_loc:
            dg = _derivative(r1, p)
            dv = _derivative(v1, p)
            num = mat_mul(self._vander[where, : len(dg)], dg, p) if len(dg) else np.zeros(n_loc, dtype=self.dtype)
            den = poly_eval(dv, self.points[where], p)
            if np.any(den == 0):
                raise DecodeFailure("error locator has a repeated root")
            den_inv = np.array([inv_mod(int(x), p) for x in den], dtype=self.dtype)
            corrected[where] = num * den_inv % p
        if poly_deg(poly_trim(mat_mul(self._interp, corrected, p))) >= l:
            raise DecodeFailure("corrected word is not a codeword")
        n_err = int(np.count_nonzero(corrected != r))
        return Decoded(corrected[:l], n_err)

    def naive_decode(self, word, payload_len: int) -> np.ndarray:
        """Read the first ``payload_len`` symbols verbatim (valid for systematic G)."""
        if payload_len > self.n:
            raise ValueError(f"payload_len {payload_len} exceeds codeword length {self.n}")
        r = self._as_symbols(word, self.n, "codeword")
        return r[:payload_len].copy()

    def sum_codewords(self, words) -> np.ndarray:
        ws = self._as_symbols(words, self.n, "codeword")
        if ws.ndim != 2 or ws.shape[0] == 0:
            raise ValueError("need a non-empty stack of codewords")
        return ws.sum(axis=0) % self.p


def _derivative(a: np.ndarray, p: int) -> np.ndarray:
    return poly_trim(a[1:] * np.arange(1, len(a), dtype=a.dtype) % p)


@lru_cache(maxsize=32)
def make_rs_code(p: int, n: int, l: int) -> ReedSolomonCode:
    """Build (or fetch the cached, immutable) code for ``(p, n, l)``."""
    return ReedSolomonCode(p, n, l)


def hamming_distance(a, b) -> int:
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))
