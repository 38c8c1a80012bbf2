"""Synthetic cubes with planted label-correlated bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datacube import CubeHeader, GroundTruth, HyperCube

__all__ = ["PlantedCube", "planted_cube", "trend_cube"]


@dataclass(frozen=True)
class PlantedCube:
    cube: HyperCube
    gt: GroundTruth
    signal_bands: list[int]
    # (original, copy) pairs when signal bands were duplicated
    duplicates: list[tuple[int, int]]


def _signal_band(labels, rng, noise):
    # every signal band follows one monotone class profile, with its own gain, offset and noise
    level = labels.astype(np.float64) - 1.0
    gain = rng.uniform(0.8, 1.2)
    offset = rng.uniform(0.0, 5.0)
    return offset + gain * (level + noise * rng.uniform(-1.0, 1.0, labels.shape))


def planted_cube(
    n_signal: int,
    n_noise: int,
    *,
    n_classes: int = 4,
    shape: tuple[int, int] = (10, 20),
    noise: float = 0.6,
    duplicate_signal: bool = False,
    background: float = 0.0,
    seed: int = 0,
) -> PlantedCube:
    """Cube whose signal bands depend on the label and whose remaining bands are pure noise.

    Band positions are shuffled, so signal bands are not simply the first indices.
    With ``duplicate_signal`` every signal band gets an exact copy elsewhere in the cube.
    ``background`` is the fraction of pixels left unlabeled (label 0).
    """
    rng = np.random.default_rng(seed)
    lines, samples = shape
    n_pixels = lines * samples
    labels = np.resize(np.arange(1, n_classes + 1), n_pixels)
    rng.shuffle(labels)
    if background > 0:
        labels[rng.random(n_pixels) < background] = 0
        # keep every class present
        for c in range(1, n_classes + 1):
            if not np.any(labels == c):
                labels[rng.integers(n_pixels)] = c
    hidden = np.where(labels > 0, labels, rng.integers(1, n_classes + 1, n_pixels))

    bands = [_signal_band(hidden, rng, noise) for _ in range(n_signal)]
    kinds = ["signal"] * n_signal
    if duplicate_signal:
        bands += [b.copy() for b in bands]
        kinds += ["copy"] * n_signal
    bands += [rng.uniform(0.0, 5.0, n_pixels) for _ in range(n_noise)]
    kinds += ["noise"] * n_noise

    order = rng.permutation(len(bands))
    position = np.empty_like(order)
    position[order] = np.arange(order.size)
    values = np.stack([bands[i] for i in order]).reshape(len(bands), lines, samples)
    signal = sorted(int(position[i]) for i in range(n_signal))
    duplicates = []
    if duplicate_signal:
        duplicates = [tuple(sorted((int(position[i]), int(position[i + n_signal])))) for i in range(n_signal)]

    header = CubeHeader(samples=samples, lines=lines, bands=len(bands), dtype="float32")
    values = values.astype(np.float32)
    return PlantedCube(HyperCube(header, values), GroundTruth(labels.reshape(lines, samples)), signal, duplicates)


def trend_cube(seed: int = 0) -> PlantedCube:
    """32 x 32 pixels, 60 bands (8 signal + 52 noise), 4 classes."""
    return planted_cube(8, 52, n_classes=4, shape=(32, 32), noise=1.2, background=0.1, seed=seed)
