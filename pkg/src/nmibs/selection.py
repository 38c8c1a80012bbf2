"""Greedy band selection: NMIBS plus the MIM and MRMR baselines.

Every statistic is computed over labeled pixels only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .datacube import GroundTruth, HyperCube
from .infotheory import UndefinedNMIError, minmax_normalize, mutual_information, nmi, quantize

__all__ = [
    "SelectionError",
    "SelectionConfig",
    "TraceRow",
    "SelectionResult",
    "UNDEFINED_SCORE",
    "labeled_band_matrix",
    "rank_bands_by_nmi",
    "nmibs_select",
    "mim_select",
    "mrmr_select",
    "METHODS",
]

UNDEFINED_SCORE = -math.inf


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionConfig:
    k: int
    th: float = 0.0
    bins: int = 256
    max_iterations: int | None = None

    def validate(self, n_bands: int) -> int:
        """Check the config against a cube with ``n_bands`` bands; return the iteration cap."""
        if not 1 <= self.k <= n_bands:
            raise SelectionError(f"k must lie in [1, {n_bands}], got {self.k}")
        if self.bins < 2:
            raise SelectionError(f"bins must be >= 2, got {self.bins}")
        if math.isnan(self.th):
            raise SelectionError("th must not be NaN")
        cap = n_bands - 1
        if self.max_iterations is None:
            return cap
        if not 0 <= self.max_iterations <= cap:
            raise SelectionError(f"max_iterations must lie in [0, {cap}], got {self.max_iterations}")
        return self.max_iterations


@dataclass(frozen=True)
class TraceRow:
    band: int
    score: float
    nmi_est: float | None
    accepted: bool


@dataclass
class SelectionResult:
    method: str
    selected: list[int]
    trace: list[TraceRow] = field(default_factory=list)
    iterations_used: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or not math.isfinite(x) else x

        return {
            "method": self.method,
            "config": self.config,
            "selected": list(self.selected),
            "iterations_used": self.iterations_used,
            "trace": [
                {**asdict(row), "score": clean(row.score), "nmi_est": clean(row.nmi_est)} for row in self.trace
            ],
        }


def labeled_band_matrix(cube: HyperCube, gt: GroundTruth) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(bands, labels)``: a ``(n_bands, n_labeled)`` value matrix and the label vector."""
    gt.check_compatible(cube)
    idx = gt.labeled_indices
    if idx.size == 0:
        raise SelectionError("no labeled pixels")
    bands = cube.values.reshape(cube.n_bands, -1)[:, idx].astype(np.float64)
    return bands, gt.labeled_values


def _safe_nmi(labels, q) -> float:
    try:
        return nmi(labels, q)
    except UndefinedNMIError:
        return UNDEFINED_SCORE


def _safe_mi(a, b) -> float:
    try:
        return mutual_information(a, b)
    except UndefinedNMIError:
        return 0.0


def _ranked(scores) -> list[tuple[int, float]]:
    # descending score, then ascending band index; -inf sorts last
    return sorted(enumerate(scores), key=lambda item: (-item[1], item[0]))


def rank_bands_by_nmi(cube: HyperCube, gt: GroundTruth, bins: int = 256) -> list[tuple[int, float]]:
    bands, labels = labeled_band_matrix(cube, gt)
    scores = [_safe_nmi(labels, quantize(band, bins)) for band in bands]
    return [(b, float(s)) for b, s in _ranked(scores)]


def nmibs_select(cube: HyperCube, gt: GroundTruth, config: SelectionConfig) -> SelectionResult:
    """Select bands by growing an averaged reference image.

    The band with the highest NMI against the ground truth seeds the
    reference image. Remaining bands are visited once each, in descending
    NMI order. A candidate is averaged into the reference image and kept
    only if that raises NMI(ground truth, reference) by more than ``th``.
    Rejected candidates are discarded.
    """
    cap = config.validate(cube.n_bands)
    bands, labels = labeled_band_matrix(cube, gt)
    ranking = rank_bands_by_nmi(cube, gt, config.bins)
    if all(score == UNDEFINED_SCORE for _, score in ranking):
        raise SelectionError("no informative bands")

    first, first_score = ranking[0]
    selected = [first]
    estimate = minmax_normalize(bands[first])
    best = _safe_nmi(labels, quantize(estimate, config.bins))
    trace = [TraceRow(first, first_score, best, True)]

    pool = [b for b, _ in ranking[1:]]
    scores = dict(ranking)
    z = 0
    while len(selected) < config.k and z < cap:
        candidate = pool.pop(0)
        trial = (estimate + minmax_normalize(bands[candidate])) / 2
        value = _safe_nmi(labels, quantize(trial, config.bins))
        accepted = value > best + config.th
        if accepted:
            best = value
            estimate = trial
            selected.append(candidate)
        trace.append(TraceRow(candidate, scores[candidate], value, accepted))
        z += 1

    return SelectionResult(
        method="nmibs",
        selected=selected,
        trace=trace,
        iterations_used=z,
        config={"k": config.k, "th": config.th, "bins": config.bins, "max_iterations": cap},
    )


def _check_k(k: int, n_bands: int) -> None:
    if not 1 <= k <= n_bands:
        raise SelectionError(f"k must lie in [1, {n_bands}], got {k}")


def mim_select(cube: HyperCube, gt: GroundTruth, k: int, bins: int = 256) -> SelectionResult:
    """Top-``k`` bands by mutual information with the ground truth."""
    _check_k(k, cube.n_bands)
    bands, labels = labeled_band_matrix(cube, gt)
    relevance = [_safe_mi(labels, quantize(band, bins)) for band in bands]
    top = _ranked(relevance)[:k]
    return SelectionResult(
        method="mim",
        selected=[b for b, _ in top],
        trace=[TraceRow(b, s, None, True) for b, s in top],
        iterations_used=k,
        config={"k": k, "bins": bins},
    )


def mrmr_select(cube: HyperCube, gt: GroundTruth, k: int, bins: int = 256) -> SelectionResult:
    """Greedy max-relevance min-redundancy (difference form).

    Each step picks the band maximizing ``I(band; GT) - mean_s I(band; s)``
    over the already selected bands ``s``.
    """
    _check_k(k, cube.n_bands)
    bands, labels = labeled_band_matrix(cube, gt)
    quantized = [quantize(band, bins) for band in bands]
    relevance = np.array([_safe_mi(labels, q) for q in quantized])
    redundancy = np.zeros(len(quantized))

    first, first_score = _ranked(relevance)[0]
    selected = [first]
    trace = [TraceRow(first, float(first_score), None, True)]
    remaining = [b for b in range(len(quantized)) if b != first]
    while len(selected) < k:
        last = quantized[selected[-1]]
        for b in remaining:
            redundancy[b] += _safe_mi(quantized[b], last)
        scores = [relevance[b] - redundancy[b] / len(selected) for b in remaining]
        best = max(range(len(remaining)), key=lambda i: (scores[i], -remaining[i]))
        band = remaining.pop(best)
        selected.append(band)
        trace.append(TraceRow(band, float(scores[best]), None, True))

    return SelectionResult(
        method="mrmr",
        selected=selected,
        trace=trace,
        iterations_used=len(selected) - 1,
        config={"k": k, "bins": bins},
    )


METHODS = {
    "nmibs": lambda cube, gt, k, th, bins: nmibs_select(cube, gt, SelectionConfig(k=k, th=th, bins=bins)),
    "mim": lambda cube, gt, k, th, bins: mim_select(cube, gt, k, bins),
    "mrmr": lambda cube, gt, k, th, bins: mrmr_select(cube, gt, k, bins),
}
