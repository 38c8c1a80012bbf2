"""Hyperspectral cube and ground-truth I/O.

Cubes are stored as an ENVI-style text header plus a raw band-sequential
little-endian payload. Ground truth is a raw unsigned-16 label raster with
the same width and height; label 0 marks unlabeled background.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "CubeError",
    "HeaderParseError",
    "CubeHeader",
    "HyperCube",
    "GroundTruth",
    "SplitAssignment",
    "parse_header",
    "format_header",
    "load_cube",
    "write_cube",
    "load_ground_truth",
    "write_ground_truth",
    "load_csv_fixture",
    "stratified_split",
]

# ENVI "data type" codes we accept.
_ENVI_DTYPES = {12: "uint16", 4: "float32"}
_DTYPE_CODES = {v: k for k, v in _ENVI_DTYPES.items()}
_NUMPY_DTYPES = {"uint16": np.dtype("<u2"), "float32": np.dtype("<f4")}


class CubeError(ValueError):
    """Raised when a cube, label raster or split cannot be built."""


class HeaderParseError(CubeError):
    pass


@dataclass(frozen=True)
class CubeHeader:
    samples: int
    lines: int
    bands: int
    dtype: str = "float32"
    interleave: str = "bsq"
    byte_order: int = 0

    def __post_init__(self):
        for name in ("samples", "lines", "bands"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise CubeError(f"header field {name!r} must be a positive integer, got {value!r}")
        if self.dtype not in _NUMPY_DTYPES:
            raise CubeError(f"unsupported dtype {self.dtype!r}; expected one of {sorted(_NUMPY_DTYPES)}")
        if self.interleave != "bsq":
            raise CubeError(f"unsupported interleave {self.interleave!r}; only 'bsq' is supported")
        if self.byte_order != 0:
            raise CubeError("only little-endian payloads (byte order = 0) are supported")

    @property
    def numpy_dtype(self) -> np.dtype:
        return _NUMPY_DTYPES[self.dtype]

    @property
    def n_pixels(self) -> int:
        return self.samples * self.lines

    @property
    def payload_bytes(self) -> int:
        return self.n_pixels * self.bands * self.numpy_dtype.itemsize


@dataclass(frozen=True)
class HyperCube:
    """A band-sequential cube; ``values`` has shape ``(bands, lines, samples)``."""

    header: CubeHeader
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", np.array(self.values, copy=True))
        h = self.header
        expected = (h.bands, h.lines, h.samples)
        if self.values.shape != expected:
            raise CubeError(f"cube values have shape {self.values.shape}, header implies {expected}")
        if not np.all(np.isfinite(self.values)):
            b, r, c = np.argwhere(~np.isfinite(self.values))[0]
            raise CubeError(f"non-finite value at band {b}, row {r}, col {c}")
        self.values.setflags(write=False)

    @property
    def n_bands(self) -> int:
        return self.header.bands

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial shape ``(lines, samples)``."""
        return self.header.lines, self.header.samples

    def band(self, index: int) -> np.ndarray:
        return self.values[index]

    def pixel_matrix(self) -> np.ndarray:
        """All pixels as rows, shape ``(lines * samples, bands)``, row-major pixel order."""
        return self.values.reshape(self.n_bands, -1).T.astype(np.float64)


@dataclass(frozen=True)
class GroundTruth:
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 2:
            raise CubeError(f"label raster must be 2-D, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise CubeError("labels must be non-negative")
        if not np.any(labels > 0):
            raise CubeError("no labeled samples")
        if labels.max() > self.class_count:
            raise CubeError(
                f"labels must lie in [0, class_count]; found label {int(labels.max())} "
                f"with only {self.class_count} distinct classes"
            )
        labels.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @cached_property
    def classes(self) -> np.ndarray:
        """Sorted distinct nonzero labels."""
        flat = self.labels.ravel()
        return np.unique(flat[flat > 0])

    @property
    def class_count(self) -> int:
        return int(self.classes.size)

    @cached_property
    def labeled_indices(self) -> np.ndarray:
        """Flat (row-major) indices of every labeled pixel, ascending."""
        return np.flatnonzero(self.labels.ravel() > 0)

    @property
    def labeled_values(self) -> np.ndarray:
        return self.labels.ravel()[self.labeled_indices].astype(np.int64)

    def check_compatible(self, cube: HyperCube) -> None:
        if self.shape != cube.shape:
            raise CubeError(f"ground truth shape {self.shape} does not match cube shape {cube.shape}")


@dataclass(frozen=True)
class SplitAssignment:
    train_indices: np.ndarray
    test_indices: np.ndarray
    fraction: float
    seed: int


def parse_header(text: str) -> CubeHeader:
    """Parse an ENVI-style header.

    Only the keys needed to decode a BSQ payload are interpreted; anything
    else (wavelength lists, descriptions) is skipped, including ``{...}``
    blocks that span several lines.
    """
    fields: dict[str, str] = {}
    depth = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if depth:
            depth += line.count("{") - line.count("}")
            continue
        if not line or line == "ENVI" or line.startswith(";"):
            continue
        if "=" not in line:
            raise HeaderParseError(f"malformed header line {lineno}: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise HeaderParseError(f"malformed header line {lineno}: {raw!r}")
        depth = value.count("{") - value.count("}")
        fields[key.lower()] = value

    def integer(key: str, default: int | None = None) -> int:
        if key not in fields:
            if default is None:
                raise HeaderParseError(f"header is missing required key {key!r}")
            return default
        try:
            return int(fields[key])
        except ValueError:
            raise HeaderParseError(f"header key {key!r} is not an integer: {fields[key]!r}") from None

    code = integer("data type")
    if code not in _ENVI_DTYPES:
        raise HeaderParseError(f"unsupported data type {code}; expected 12 (uint16) or 4 (float32)")
    return CubeHeader(
        samples=integer("samples"),
        lines=integer("lines"),
        bands=integer("bands"),
        dtype=_ENVI_DTYPES[code],
        interleave=fields.get("interleave", "bsq").lower(),
        byte_order=integer("byte order", 0),
    )


def format_header(header: CubeHeader) -> str:
    return (
        "ENVI\n"
        f"samples = {header.samples}\n"
        f"lines = {header.lines}\n"
        f"bands = {header.bands}\n"
        "header offset = 0\n"
        "file type = ENVI Standard\n"
        f"data type = {_DTYPE_CODES[header.dtype]}\n"
        f"interleave = {header.interleave}\n"
        f"byte order = {header.byte_order}\n"
    )


def _read_payload(path: Path, expected: int) -> bytes:
    payload = Path(path).read_bytes()
    if len(payload) != expected:
        raise CubeError(f"{path}: size mismatch, expected {expected} bytes but found {len(payload)}")
    return payload


def load_cube(header_path, raw_path) -> HyperCube:
    header = parse_header(Path(header_path).read_text())
    payload = _read_payload(raw_path, header.payload_bytes)
    values = np.frombuffer(payload, dtype=header.numpy_dtype)
    values = values.reshape(header.bands, header.lines, header.samples).astype(header.dtype)
    if header.dtype == "float32" and not np.all(np.isfinite(values)):
        b, r, c = np.argwhere(~np.isfinite(values))[0]
        raise CubeError(f"{raw_path}: non-finite value at band {b}, row {r}, col {c}")
    return HyperCube(header, values)


def write_cube(cube: HyperCube, header_path, raw_path) -> None:
    h = cube.header
    Path(header_path).write_text(format_header(h))
    Path(raw_path).write_bytes(np.ascontiguousarray(cube.values, dtype=h.numpy_dtype).tobytes())


def load_ground_truth(path, header: CubeHeader) -> GroundTruth:
    payload = _read_payload(path, header.n_pixels * 2)
    labels = np.frombuffer(payload, dtype="<u2").reshape(header.lines, header.samples)
    return GroundTruth(labels.astype(np.int64))


def write_ground_truth(gt: GroundTruth, path) -> None:
    Path(path).write_bytes(np.ascontiguousarray(gt.labels, dtype="<u2").tobytes())


def load_csv_fixture(path) -> tuple[HyperCube, GroundTruth]:
    """Read a one-pixel-per-row CSV: band values, then an integer label."""
    rows = []
    with open(path, newline="") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            parsed = []
            for colno, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CubeError(f"{path}: non-numeric cell {cell!r} at row {rowno}, column {colno}") from None
            if rows and len(parsed) != len(rows[0]):
                raise CubeError(f"{path}: ragged row {rowno} has {len(parsed)} columns, expected {len(rows[0])}")
            rows.append(parsed)
    if not rows:
        raise CubeError(f"{path}: empty fixture")
    table = np.array(rows, dtype=np.float64)
    if table.shape[1] < 2:
        raise CubeError(f"{path}: need at least one band column and a label column")
    labels = table[:, -1]
    if not np.all(labels == np.round(labels)):
        raise CubeError(f"{path}: label column must hold integers")
    if not np.all(np.isfinite(table[:, :-1])):
        r, c = np.argwhere(~np.isfinite(table[:, :-1]))[0]
        raise CubeError(f"{path}: non-finite value at row {r + 1}, column {c + 1}")
    n_pixels, n_bands = table.shape[0], table.shape[1] - 1
    header = CubeHeader(samples=n_pixels, lines=1, bands=n_bands, dtype="float32")
    values = table[:, :-1].T.reshape(n_bands, 1, n_pixels).copy()
    return HyperCube(header, values), GroundTruth(labels.astype(np.int64).reshape(1, n_pixels))


def _train_count(fraction: float, size: int) -> int:
    # round half up, at least one sample per non-empty class
    return max(1, math.floor(fraction * size + 0.5))


def stratified_split(gt: GroundTruth, fraction: float, seed: int) -> SplitAssignment:
    """Per-class random split of the labeled pixels into train and test sets."""
    if not 0.0 < fraction < 1.0:
        raise CubeError(f"train fraction must lie in (0, 1), got {fraction}")
    flat = gt.labels.ravel()
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in range(1, gt.class_count + 1):
        members = np.flatnonzero(flat == label)
        if members.size == 0:
            raise CubeError(f"class {label} has no labeled pixels")
        n_train = min(_train_count(fraction, members.size), members.size)
        chosen = rng.permutation(members)
        train.append(chosen[:n_train])
        test.append(chosen[n_train:])
    return SplitAssignment(
        train_indices=np.sort(np.concatenate(train)),
        test_indices=np.sort(np.concatenate(test)),
        fraction=fraction,
        seed=seed,
    )
