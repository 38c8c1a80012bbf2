"""Select, split, train, predict and score, for one or many (method, k, fraction) runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datacube import GroundTruth, HyperCube, stratified_split
from .evaluation import EvalReport, evaluate, run_timed
from .selection import METHODS, SelectionResult
from .svm import KernelParams, MulticlassModel, predict, train_multiclass

__all__ = ["PipelineError", "RunResult", "classify", "run_pipeline", "ALL_BANDS"]

ALL_BANDS = "all-bands"


class PipelineError(RuntimeError):
    """Wraps a failure with the name of the stage that raised it."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


@dataclass
class RunResult:
    method: str
    k: int
    train_fraction: float
    bands: list[int]
    report: EvalReport
    class_map: np.ndarray = field(repr=False)
    selection: SelectionResult | None = None

    def csv_row(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "train_fraction": self.train_fraction,
            "oa_pct": f"{100 * self.report.oa:.2f}",
            "aa_pct": f"{100 * self.report.aa:.2f}",
            "time_s": f"{self.report.elapsed_seconds:.3f}",
        }


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # re-raised with stage context
        raise PipelineError(name, exc) from exc


def classify(
    cube: HyperCube,
    gt: GroundTruth,
    bands: list[int],
    train_fraction: float,
    seed: int,
    c: float = 100.0,
    gamma: float | None = None,
) -> tuple[np.ndarray, EvalReport, MulticlassModel]:
    """Train on a stratified split using ``bands``, predict every pixel, score the test pixels.

    Returns the full-scene class map, the report (timing not yet filled in) and the model.
    """
    pixels = cube.pixel_matrix()[:, bands]
    flat = gt.labels.ravel()
    split = _stage("split", stratified_split, gt, train_fraction, seed)
    params = _stage("train", KernelParams.default, len(bands), gamma=gamma, c=c)
    model = _stage("train", train_multiclass, pixels[split.train_indices], flat[split.train_indices], params, seed)
    predicted = _stage("predict", predict, model, pixels)
    report = _stage(
        "evaluate",
        evaluate,
        flat[split.test_indices],
        predicted[split.test_indices],
        [int(c) for c in gt.classes],
        selected_band_count=len(bands),
        train_fraction=train_fraction,
    )
    return predicted.reshape(gt.shape), report, model


def run_pipeline(
    cube: HyperCube,
    gt: GroundTruth,
    methods: list[str],
    k: int,
    fractions: list[float],
    *,
    th: float = 0.0,
    bins: int = 256,
    seed: int = 0,
    c: float = 100.0,
    gamma: float | None = None,
) -> list[RunResult]:
    """Run every (method, fraction) combination on a shared seed.

    Selection uses the full ground truth and is done once per method; each
    row's elapsed time is selection time plus that row's training and prediction.
    ``ALL_BANDS`` as a method skips selection and uses every band.
    """
    _stage("load", gt.check_compatible, cube)
    results = []
    for method in methods:
        if method == ALL_BANDS:
            selection, select_time = None, 0.0
            bands = list(range(cube.n_bands))
        else:
            if method not in METHODS:
                raise PipelineError("select", ValueError(f"unknown method {method!r}"))
            selection, select_time = _stage("select", run_timed, METHODS[method], cube, gt, k, th, bins)
            bands = list(selection.selected)
        for fraction in fractions:
            (class_map, report, _), elapsed = run_timed(classify, cube, gt, bands, fraction, seed, c, gamma)
            report.elapsed_seconds = select_time + elapsed
            k_used = len(bands) if method == ALL_BANDS else k
            report.extra = {"method": method, "k": k_used, "bands": bands, "seed": seed}
            results.append(RunResult(method, k_used, fraction, bands, report, class_map, selection))
    return results
