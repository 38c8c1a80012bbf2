"""Soft-margin RBF-kernel SVM trained by SMO, with one-vs-one multiclass voting."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

__all__ = [
    "SVMError",
    "KernelParams",
    "BinaryModel",
    "MulticlassModel",
    "rbf_kernel",
    "rbf_gram",
    "dual_objective",
    "solve_dual",
    "train_binary",
    "train_multiclass",
    "predict",
    "decision_values",
    "save_model",
    "load_model",
]


class SVMError(ValueError):
    pass


@dataclass(frozen=True)
class KernelParams:
    gamma: float
    c: float = 100.0
    tolerance: float = 1e-3
    max_passes: int = 5

    def __post_init__(self):
        if not self.gamma > 0:
            raise SVMError(f"gamma must be positive, got {self.gamma}")
        if not self.c > 0:
            raise SVMError(f"c must be positive, got {self.c}")
        if not self.tolerance > 0:
            raise SVMError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise SVMError(f"max_passes must be >= 1, got {self.max_passes}")

    @classmethod
    def default(cls, n_features: int, **overrides) -> KernelParams:
        """Defaults with ``gamma = 1 / n_features``."""
        gamma = overrides.pop("gamma", None) or 1.0 / n_features
        return cls(gamma=gamma, **overrides)


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise SVMError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not gamma > 0:
        raise SVMError("gamma must be positive")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def rbf_gram(a, b, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * |a_i - b_j|^2)``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise SVMError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return np.exp(-gamma * _sq_dists(a, b))


def dual_objective(alphas, labels, gram) -> float:
    """``sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij``."""
    ay = np.asarray(alphas) * np.asarray(labels)
    return float(np.sum(alphas) - 0.5 * ay @ gram @ ay)


@dataclass
class BinaryModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    signs: np.ndarray
    bias: float
    gamma: float

    def decision_function(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.alphas.size == 0:
            return np.full(x.shape[0], self.bias)
        return rbf_gram(x, self.support_vectors, self.gamma) @ (self.alphas * self.signs) + self.bias

    def predict(self, features) -> np.ndarray:
        return np.where(self.decision_function(features) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "signs": self.signs.astype(int).tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BinaryModel:
        n_features = len(d["support_vectors"][0]) if d["support_vectors"] else 0
        return cls(
            support_vectors=np.array(d["support_vectors"], dtype=np.float64).reshape(-1, n_features),
            alphas=np.array(d["alphas"], dtype=np.float64),
            signs=np.array(d["signs"], dtype=np.int64),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
        )


class _SMO:
    """Platt-style SMO over a dense Gram matrix with a full error cache."""

    def __init__(self, gram, y, c, tol, rng):
        self.K = gram
        self.y = y
        self.c = c
        self.tol = tol
        self.rng = rng
        n = y.size
        self.alpha = np.zeros(n)
        self.f = np.zeros(n)  # sum_j alpha_j y_j K_ij, i.e. the decision value without bias
        self.b = 0.0
        self.eps = 1e-12 * max(1.0, c)

    def error(self, i):
        return self.f[i] + self.b - self.y[i]

    def violates(self, i) -> bool:
        r = self.error(i) * self.y[i]
        a = self.alpha[i]
        return (r < -self.tol and a < self.c) or (r > self.tol and a > 0)

    def take_step(self, i, j) -> bool:
        if i == j:
            return False
        K, y, c = self.K, self.y, self.c
        ai, aj = self.alpha[i], self.alpha[j]
        yi, yj = y[i], y[j]
        ei, ej = self.error(i), self.error(j)
        s = yi * yj
        if s < 0:
            lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
        if hi - lo < self.eps:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-12:
            new_aj = min(max(aj + yj * (ei - ej) / eta, lo), hi)
        else:
            # flat direction: objective is linear in alpha_j, take the better end
            slope = yj * (ei - ej)
            if abs(slope) * (hi - lo) < self.eps:
                return False
            new_aj = hi if slope > 0 else lo
        if abs(new_aj - aj) < self.eps * (new_aj + aj + self.eps):
            return False
        if new_aj < self.eps:
            new_aj = 0.0
        elif new_aj > c - self.eps:
            new_aj = c
        new_ai = ai + s * (aj - new_aj)
        if new_ai < self.eps:
            new_ai = 0.0
        elif new_ai > c - self.eps:
            new_ai = c
        di, dj = new_ai - ai, new_aj - aj
        self.f += di * yi * K[i] + dj * yj * K[j]
        self.alpha[i], self.alpha[j] = new_ai, new_aj
        self._update_bias()
        return True

    def _update_bias(self):
        """Bias from the free support vectors, else the midpoint of the feasible interval."""
        a, y, c = self.alpha, self.y, self.c
        g = y - self.f  # y_i - sum_j alpha_j y_j K_ij ; a free SV has b = g_i
        free = (a > 0) & (a < c)
        if free.any():
            self.b = float(np.mean(g[free]))
            return
        # every bound point constrains b from one side
        lower_mask = ((y > 0) & (a == 0)) | ((y < 0) & (a == c))
        upper_mask = ((y > 0) & (a == c)) | ((y < 0) & (a == 0))
        lo = g[lower_mask].max() if lower_mask.any() else -np.inf
        hi = g[upper_mask].min() if upper_mask.any() else np.inf
        if np.isfinite(lo) and np.isfinite(hi):
            self.b = float((lo + hi) / 2)
        elif np.isfinite(lo):
            self.b = float(lo)
        elif np.isfinite(hi):
            self.b = float(hi)

    def examine(self, i) -> bool:
        if not self.violates(i):
            return False
        errors = self.f + self.b - self.y
        ei = errors[i]
        gaps = np.abs(ei - errors)
        gaps[i] = -1.0
        j = int(np.argmax(gaps))
        if self.take_step(i, j):
            return True
        for j in self.rng.permutation(self.y.size):
            if self.take_step(i, int(j)):
                return True
        return False

    def run(self, max_passes: int, max_sweeps: int = 100_000) -> None:
        n = self.y.size
        quiet = 0
        for _ in range(max_sweeps):
            changed = 0
            for i in self.rng.permutation(n):
                changed += self.examine(int(i))
            if changed == 0:
                quiet += 1
                if quiet >= max_passes or not any(self.violates(i) for i in range(n)):
                    break
            else:
                quiet = 0


def _check_features(features) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise SVMError("features contain non-finite values")
    return x


def solve_dual(features, labels, params: KernelParams, seed=0) -> tuple[np.ndarray, float]:
    """Run SMO on one binary problem; return the full alpha vector and the bias."""
    x = _check_features(features)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if y.size != x.shape[0]:
        raise SVMError(f"{x.shape[0]} feature rows but {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SVMError("binary labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SVMError("training labels contain a single sign; need both +1 and -1")
    smo = _SMO(rbf_gram(x, x, params.gamma), y, params.c, params.tolerance, np.random.default_rng(seed))
    smo._update_bias()
    smo.run(params.max_passes)
    return smo.alpha, smo.b


def train_binary(features, labels, params: KernelParams, seed=0) -> BinaryModel:
    x = _check_features(features)
    alphas, bias = solve_dual(x, labels, params, seed)
    keep = alphas > 0
    return BinaryModel(
        support_vectors=x[keep].copy(),
        alphas=alphas[keep].copy(),
        signs=np.where(np.asarray(labels).ravel()[keep] > 0, 1, -1),
        bias=bias,
        gamma=params.gamma,
    )


@dataclass
class MulticlassModel:
    class_labels: list[int]
    pairwise: dict[tuple[int, int], BinaryModel]
    params: KernelParams
    feature_min: np.ndarray
    feature_max: np.ndarray

    @property
    def n_features(self) -> int:
        return self.feature_min.size

    def scale(self, features) -> np.ndarray:
        x = _check_features(features)
        if x.shape[1] != self.n_features:
            raise SVMError(f"feature width {x.shape[1]} does not match model width {self.n_features}")
        span = self.feature_max - self.feature_min
        span = np.where(span > 0, span, 1.0)
        return (x - self.feature_min) / span

    def to_dict(self) -> dict:
        return {
            "class_labels": [int(c) for c in self.class_labels],
            "params": {
                "gamma": self.params.gamma,
                "c": self.params.c,
                "tolerance": self.params.tolerance,
                "max_passes": self.params.max_passes,
            },
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "pairwise": [
                {"positive": int(a), "negative": int(b), "model": m.to_dict()} for (a, b), m in self.pairwise.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> MulticlassModel:
        return cls(
            class_labels=[int(c) for c in d["class_labels"]],
            pairwise={
                (int(p["positive"]), int(p["negative"])): BinaryModel.from_dict(p["model"]) for p in d["pairwise"]
            },
            params=KernelParams(**d["params"]),
            feature_min=np.array(d["feature_min"], dtype=np.float64),
            feature_max=np.array(d["feature_max"], dtype=np.float64),
        )


def train_multiclass(features, labels, params: KernelParams, seed: int = 0) -> MulticlassModel:
    """One binary model per class pair; the lower class id is the positive side."""
    x = _check_features(features)
    y = np.asarray(labels).ravel().astype(np.int64)
    if y.size != x.shape[0]:
        raise SVMError(f"{x.shape[0]} feature rows but {y.size} labels")
    classes = sorted(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise SVMError(f"need at least 2 classes in the training set, got {classes}")
    lo, hi = x.min(axis=0), x.max(axis=0)
    model = MulticlassModel(classes, {}, params, lo, hi)
    xs = model.scale(x)
    for pos, neg in combinations(classes, 2):
        mask = (y == pos) | (y == neg)
        signs = np.where(y[mask] == pos, 1, -1)
        model.pairwise[(pos, neg)] = train_binary(xs[mask], signs, params, seed=[seed, pos, neg])
    return model


def decision_values(model: MulticlassModel, features) -> np.ndarray:
    """Pairwise decision values, shape ``(n_samples, n_pairs)`` in ``model.pairwise`` order."""
    xs = model.scale(features)
    return np.column_stack([m.decision_function(xs) for m in model.pairwise.values()])


def predict(model: MulticlassModel, features, batch_size: int = 4096) -> np.ndarray:
    """One-vs-one voting.

    Ties in vote count go to the tied class with the largest summed margin
    over its pairwise decisions, then to the lower class id.
    """
    x = _check_features(features)
    if x.shape[1] != model.n_features:
        raise SVMError(f"feature width {x.shape[1]} does not match model width {model.n_features}")
    classes = model.class_labels
    pos_col = {c: i for i, c in enumerate(classes)}
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], batch_size):
        dv = decision_values(model, x[start : start + batch_size])
        votes = np.zeros((dv.shape[0], len(classes)))
        margins = np.zeros_like(votes)
        for col, (a, b) in enumerate(model.pairwise):
            f = dv[:, col]
            win_a = f >= 0
            votes[:, pos_col[a]] += win_a
            votes[:, pos_col[b]] += ~win_a
            margins[:, pos_col[a]] += f
            margins[:, pos_col[b]] -= f
        top = votes == votes.max(axis=1, keepdims=True)
        # lexicographic: votes, then margin sum, then lower class id (argmax takes the first)
        masked = np.where(top, margins, -np.inf)
        best = masked == masked.max(axis=1, keepdims=True)
        out[start : start + batch_size] = np.asarray(classes)[np.argmax(best, axis=1)]
    return out


def save_model(model: MulticlassModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_model(path) -> MulticlassModel:
    return MulticlassModel.from_dict(json.loads(Path(path).read_text()))
