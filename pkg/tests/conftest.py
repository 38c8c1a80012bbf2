import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nmibs.datacube import CubeHeader, GroundTruth, HyperCube  # noqa: E402


def make_cube(bands, labels):
    """Build a 1 x P cube and label raster from per-pixel band lists."""
    values = np.asarray(bands, dtype=np.float64)
    n_bands, n_pixels = values.shape
    header = CubeHeader(samples=n_pixels, lines=1, bands=n_bands, dtype="float32")
    cube = HyperCube(header, values.reshape(n_bands, 1, n_pixels))
    gt = GroundTruth(np.asarray(labels, dtype=np.int64).reshape(1, n_pixels))
    return cube, gt


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
