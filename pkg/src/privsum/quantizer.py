"""Uniform mid-tread quantization of real vectors into GF(p) messages.

Real values in ``[-y, y]`` map to integer level indices in
``[-(L-1)/2, (L-1)/2]``, which are embedded into GF(p) by reduction mod p.
Dequantization lifts each residue to its centred representative, so a modular
sum of messages dequantizes to the sum of the individual values as long as the
summed level indices never leave ``[-(p-1)/2, (p-1)/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .field import PrimeField, centered


class OutOfRange(ValueError):
    """An observation lies outside the quantizer range ``[-y, y]``."""


def largest_odd_levels(p: int) -> int:
    return p if p % 2 else p - 1


def levels_for_task(p: int, max_nodes: int) -> int:
    """Largest odd level count whose index sum over ``max_nodes`` cannot wrap."""
    if max_nodes < 1:
        raise ValueError("max_nodes must be >= 1")
    half = (p - 1) // 2 // max_nodes
    if half < 1:
        raise ValueError(f"GF({p}) cannot hold a sum over {max_nodes} nodes")
    return 2 * half + 1


@dataclass(frozen=True)
class QuantizerConfig:
    p: int
    half_range: float
    levels: int | None = None

    def __post_init__(self):
        PrimeField(self.p)
        if not self.half_range > 0:
            raise ValueError("half_range must be positive")
        if self.levels is None:
            object.__setattr__(self, "levels", largest_odd_levels(self.p))
        if self.levels < 3 or self.levels % 2 == 0 or self.levels > self.p:
            raise ValueError(f"levels must be odd and in [3, p], got {self.levels}")

    @property
    def step(self) -> float:
        return 2.0 * self.half_range / (self.levels - 1)

    @property
    def max_index(self) -> int:
        return (self.levels - 1) // 2


def quantize_levels(cfg: QuantizerConfig, u) -> np.ndarray:
    """Signed level indices; exact midpoints round toward zero."""
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > cfg.half_range):
        worst = float(np.max(np.abs(u)))
        raise OutOfRange(f"|u| reaches {worst:.6g} > y = {cfg.half_range:.6g}")
    mag = np.ceil(np.abs(u) / cfg.step - 0.5)
    idx = (np.sign(u) * mag).astype(np.int64)
    return np.clip(idx, -cfg.max_index, cfg.max_index)


def quantize(cfg: QuantizerConfig, u) -> np.ndarray:
    return quantize_levels(cfg, u) % cfg.p


def dequantize(cfg: QuantizerConfig, m) -> np.ndarray:
    return centered(m, cfg.p) * cfg.step


def overflow_guard(cfg: QuantizerConfig, k: int, messages) -> bool:
    """True iff ``k`` times the largest centred magnitude stays within ``(p-1)/2``.

    This is stricter than ``<= p``: signed data wraps the centred lift as soon
    as a partial sum exceeds ``(p-1)/2`` in magnitude.
    """
    m = np.asarray(messages)
    if m.size == 0:
        return True
    return int(k) * int(np.max(np.abs(centered(m, cfg.p)))) <= (cfg.p - 1) // 2


class UniformQuantizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :class:`QuantizerConfig`.

    ``fit`` sets the half-range from the data when ``half_range`` is None.
    ``transform`` returns residues in ``[0, p-1]``; ``inverse_transform``
    maps residues (or modular sums of them) back to reals.

    Parameters
    ----------
    p : int
        Field characteristic.
    levels : int, optional
        Odd number of quantization levels; defaults to the largest odd ``<= p``.
    half_range : float, optional
        The ``y`` in ``[-y, y]``.  Learned as ``max |X|`` when omitted.
    """

    def __init__(self, p=251, levels=None, half_range=None):
        self.p = p
        self.levels = levels
        self.half_range = half_range

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False, allow_nd=True)
        y_ = self.half_range
        if y_ is None:
            y_ = float(np.max(np.abs(X))) if X.size else 0.0
            if y_ == 0.0:
                y_ = 1.0
        self.config_ = QuantizerConfig(p=self.p, half_range=float(y_), levels=self.levels)
        self.step_ = self.config_.step
        self.levels_ = self.config_.levels
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, ensure_2d=False, allow_nd=True)
        return quantize(self.config_, X)

    def inverse_transform(self, M):
        check_is_fitted(self, "config_")
        return dequantize(self.config_, M)

    def overflow_guard(self, k, messages) -> bool:
        check_is_fitted(self, "config_")
        return overflow_guard(self.config_, k, messages)
