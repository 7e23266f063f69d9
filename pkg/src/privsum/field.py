"""Arithmetic in the prime field GF(p).

Two layers live here.  :class:`PrimeField` / :class:`FieldElement` give exact
scalar arithmetic with field-mismatch checking.  The ``poly_*`` and ``mat_*``
helpers work on integer numpy arrays holding canonical residues and are what
the code and protocol modules use on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FieldError(ValueError):
    """Invalid field construction or mixed-field arithmetic."""


class ZeroInverse(ZeroDivisionError):
    """Raised when inverting the zero element."""


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(p: int) -> bool:
    """Deterministic Miller-Rabin; these bases are exact for every p < 3.3e24."""
    if p < 2:
        return False
    for q in _MR_BASES:
        if p % q == 0:
            return p == q
    d, s = p - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(s - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


def inv_mod(a: int, p: int) -> int:
    """Inverse of ``a`` modulo ``p`` via the extended Euclidean algorithm."""
    a %= p
    if a == 0:
        raise ZeroInverse(f"0 has no inverse in GF({p})")
    old_r, r = a, p
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    return old_s % p


@dataclass(frozen=True)
class PrimeField:
    """The field of integers modulo a prime ``p``."""

    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or isinstance(self.p, bool):
            raise FieldError(f"characteristic must be an integer, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        if self.p >= 2**64:
            raise FieldError("characteristic must fit in 64 bits")
        if not is_prime(self.p):
            raise FieldError(f"{self.p} is not prime")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.p, self)

    @property
    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    @property
    def one(self) -> FieldElement:
        return FieldElement(1, self)

    def elements(self):
        for v in range(self.p):
            yield FieldElement(v, self)

    def dtype(self, n_terms: int = 1):
        """Array dtype able to hold sums of ``n_terms`` products of residues."""
        if n_terms * (self.p - 1) ** 2 < 2**63:
            return np.int64
        return object

    def __repr__(self):
        return f"GF({self.p})"


class FieldElement:
    """A canonical residue in ``[0, p-1]`` bound to its field."""

    __slots__ = ("value", "field")

    def __init__(self, value: int, field: PrimeField):
        value = int(value)
        if not 0 <= value < field.p:
            raise FieldError(f"{value} is not a canonical residue of {field}")
        self.value = value
        self.field = field

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldError(f"cannot combine {self.field} and {other.field} elements")
            return other.value
        if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
            return int(other) % self.field.p
        return NotImplemented

    def _new(self, value: int) -> FieldElement:
        return FieldElement(value % self.field.p, self.field)

    def __add__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self._new(self.value + b)

    __radd__ = __add__

    def __sub__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self._new(self.value + (self.field.p - b))

    def __rsub__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self._new(b + (self.field.p - self.value))

    def __neg__(self):
        return self._new(self.field.p - self.value)

    def __mul__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        # python ints are unbounded, so the product never overflows
        return self._new(self.value * b)

    __rmul__ = __mul__

    def inv(self) -> FieldElement:
        return FieldElement(inv_mod(self.value, self.field.p), self.field)

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is NotImplemented:
            return b
        return self * FieldElement(b, self.field).inv()

    def __pow__(self, e: int) -> FieldElement:
        """Square-and-multiply; ``0 ** 0`` is defined as 1."""
        e = int(e)
        if e < 0:
            return self.inv() ** (-e)
        result, base = 1, self.value
        p = self.field.p
        while e:
            if e & 1:
                result = result * base % p
            base = base * base % p
            e >>= 1
        return FieldElement(result, self.field)

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
            return self.value == int(other) % self.field.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field.p))

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.field.p})"


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return a - b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inv()


def power(a: FieldElement, e: int) -> FieldElement:
    if e < 0:
        raise ValueError("exponent must be non-negative")
    return a**e


def centered(values, p: int) -> np.ndarray:
    """Lift residues to their centred representatives in ``(-p/2, p/2]``."""
    v = np.asarray(values, dtype=np.int64) % p
    return np.where(v > p // 2, v - p, v)


# --- vectorised polynomial helpers --------------------------------------------
# Polynomials are 1-D integer arrays of residues, lowest degree first.


def poly_trim(a: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(a)
    if nz.size == 0:
        return a[:0]
    return a[: nz[-1] + 1]


def poly_deg(a: np.ndarray) -> int:
    """Degree of a trimmed polynomial; the zero polynomial has degree -1."""
    return len(a) - 1


def poly_add(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    if len(a) < len(b):
        a, b = b, a
    out = a.copy()
    out[: len(b)] = (out[: len(b)] + b) % p
    return poly_trim(out)


def poly_sub(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    size = max(len(a), len(b))
    out = np.zeros(size, dtype=np.result_type(a, b))
    out[: len(a)] += a
    out[: len(b)] -= b
    return poly_trim(out % p)


def poly_mul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return a[:0]
    if a.dtype == object or b.dtype == object or min(len(a), len(b)) * (p - 1) ** 2 >= 2**63:
        out = np.convolve(a.astype(object), b.astype(object))
    else:
        out = np.convolve(a, b)
    return poly_trim(out % p)


def poly_divmod(a: np.ndarray, b: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Long division over GF(p); ``b`` must be nonzero and trimmed."""
    if len(b) == 0:
        raise ZeroInverse("polynomial division by zero")
    r = a.copy()
    db = len(b) - 1
    lead_inv = inv_mod(int(b[-1]), p)
    if len(r) <= db:
        return r[:0], poly_trim(r)
    q = np.zeros(len(r) - db, dtype=r.dtype)
    for k in range(len(r) - 1, db - 1, -1):
        c = int(r[k]) * lead_inv % p
        if c:
            q[k - db] = c
            r[k - db : k + 1] = (r[k - db : k + 1] - c * b) % p
    return poly_trim(q), poly_trim(r[:db])


def poly_eval(a: np.ndarray, points: np.ndarray, p: int) -> np.ndarray:
    """Horner evaluation of ``a`` at every entry of ``points``."""
    points = np.asarray(points)
    out = np.zeros(points.shape, dtype=np.result_type(a, points))
    for c in a[::-1]:
        out = (out * points + c) % p
    return out


def poly_from_roots(roots, p: int, dtype=np.int64) -> np.ndarray:
    out = np.ones(1, dtype=dtype)
    for r in roots:
        out = poly_mul(out, np.array([(-int(r)) % p, 1], dtype=dtype), p)
    return out


# --- vectorised linear algebra ---------------------------------------------------


def mat_inv(a: np.ndarray, p: int) -> np.ndarray:
    """Inverse of a square matrix over GF(p) by Gauss-Jordan elimination."""
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    aug = np.concatenate([np.asarray(a) % p, np.eye(n, dtype=a.dtype)], axis=1)
    for col in range(n):
        pivots = np.flatnonzero(aug[col:, col]) + col
        if pivots.size == 0:
            raise ZeroInverse("matrix is singular over GF(p)")
        piv = pivots[0]
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] * inv_mod(int(aug[col, col]), p) % p
        factors = aug[:, col].copy()
        factors[col] = 0
        aug = (aug - np.outer(factors, aug[col])) % p
    return aug[:, n:]


def mat_mul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """``a @ b mod p`` for residue arrays.

    Uses a float64 product (BLAS) whenever every partial sum stays below 2**53
    and is therefore exact; integer or object arithmetic otherwise.
    """
    inner = a.shape[-1]
    if a.dtype != object and b.dtype != object and inner * (p - 1) ** 2 < 2**53:
        out = np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64)
        return out.astype(np.int64) % p
    return (a @ b) % p
