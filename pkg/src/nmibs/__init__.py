"""Normalized-mutual-information band selection (NMIBS) for hyperspectral cubes,
with MIM/MRMR baselines and an RBF-SVM validation harness."""

__version__ = "0.1.0"
