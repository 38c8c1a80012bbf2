"""Plug-in (histogram) entropy, mutual information and normalized mutual information.

All quantities are in bits. Inputs are discrete: either a :class:`QuantizedBand`
or a plain array of non-negative integer codes such as class labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "UndefinedNMIError",
    "QuantizedBand",
    "JointHistogram",
    "minmax_normalize",
    "quantize",
    "entropy",
    "joint_histogram",
    "joint_entropy",
    "nmi",
    "mutual_information",
]


class UndefinedNMIError(ArithmeticError):
    """Both variables are constant, so the joint entropy is zero."""


@dataclass(frozen=True)
class QuantizedBand:
    levels: np.ndarray
    bins: int

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("bins must be positive")
        if self.levels.size and (self.levels.min() < 0 or self.levels.max() >= self.bins):
            raise ValueError(f"levels must lie in [0, {self.bins - 1}]")

    def __len__(self):
        return self.levels.size


@dataclass(frozen=True)
class JointHistogram:
    counts: np.ndarray
    total: int

    def merged(self, other: JointHistogram) -> JointHistogram:
        """Histogram of the concatenation of both samples."""
        if self.counts.shape != other.counts.shape:
            raise ValueError(f"cannot merge histograms of shape {self.counts.shape} and {other.counts.shape}")
        return JointHistogram(self.counts + other.counts, self.total + other.total)

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.counts.sum(axis=1), self.counts.sum(axis=0)


def minmax_normalize(values) -> np.ndarray:
    """Scale ``values`` linearly onto [0, 1]; a constant input maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def quantize(band_values, bins: int = 256) -> QuantizedBand:
    """Map values onto ``bins`` equal-width levels spanning their own [min, max]."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    v = np.asarray(band_values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    levels = np.floor(minmax_normalize(v) * bins).astype(np.int64)
    np.minimum(levels, bins - 1, out=levels)
    return QuantizedBand(levels, bins)


def _codes(x) -> tuple[np.ndarray, int]:
    if isinstance(x, QuantizedBand):
        return x.levels, x.bins
    arr = np.asarray(x)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise TypeError("expected integer codes or a QuantizedBand")
    arr = arr.astype(np.int64).ravel()
    if arr.size and arr.min() < 0:
        raise ValueError("codes must be non-negative")
    return arr, int(arr.max()) + 1 if arr.size else 1


def entropy(counts) -> float:
    """Shannon entropy in bits of a histogram of counts.

    Nonzero counts are summed in ascending order of magnitude, so the result
    depends only on the multiset of counts. That makes it invariant, bit for
    bit, under any permutation or transposition of the histogram cells.
    """
    c = np.asarray(counts, dtype=np.float64).ravel()
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("entropy of an all-zero histogram is undefined")
    p = np.sort(c[c > 0]) / total
    h = -np.sum(p * np.log2(p))
    return max(float(h), 0.0)


def joint_histogram(a, b) -> JointHistogram:
    """Contingency table of two equally long discrete samples."""
    ca, na = _codes(a)
    cb, nb = _codes(b)
    if ca.size != cb.size:
        raise ValueError(f"length mismatch: {ca.size} vs {cb.size}")
    counts = np.bincount(ca * nb + cb, minlength=na * nb).reshape(na, nb)
    return JointHistogram(counts, int(ca.size))


def _entropies(a, b) -> tuple[float, float, float]:
    jh = joint_histogram(a, b)
    if jh.total == 0:
        raise ValueError("empty sample")
    row, col = jh.marginals()
    return entropy(row), entropy(col), entropy(jh.counts)


def joint_entropy(a, b) -> float:
    return _entropies(a, b)[2]


def nmi(a, b) -> float:
    """``(H(a) + H(b)) / H(a, b)``, between 1 (independent) and 2 (one-to-one)."""
    ha, hb, hab = _entropies(a, b)
    if hab == 0.0:
        raise UndefinedNMIError("joint entropy is zero: both inputs are constant")
    return (ha + hb) / hab


def mutual_information(a, b) -> float:
    ha, hb, hab = _entropies(a, b)
    if hab == 0.0:
        raise UndefinedNMIError("joint entropy is zero: both inputs are constant")
    return max(ha + hb - hab, 0.0)
