"""
Soft-margin kernel SVM.

The binary solver maximizes the usual dual

    W(a) = sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

with sequential minimal optimization, always updating the maximal
violating pair. Multiclass problems are handled one-vs-one with voting
(one-vs-rest is available for comparison).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np

KERNELS = ("linear", "polynomial", "rbf", "sigmoid")
MODEL_FORMAT_VERSION = 1
TAU = 1e-12


class ConvergenceError(RuntimeError):
    """SMO hit its iteration limit; ``diagnostics`` holds the best iterate."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    degree: int = 3
    gamma: float | str = "scale"
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError(f"gamma must be positive or 'scale', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def resolve(self, X: np.ndarray) -> "KernelSpec":
        """Fix ``gamma='scale'`` to ``1 / (n_features * X.var())`` for training data X."""
        if self.gamma != "scale":
            return self
        X = np.asarray(X, dtype=float)
        var = X.var() if X.size else 0.0
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return replace(self, gamma=float(gamma))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree, "gamma": self.gamma, "coef0": self.coef0}


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind != "linear" and spec.gamma == "scale":
        raise ValueError("resolve gamma='scale' against training data first")
    dot = A @ B.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "polynomial":
        return (spec.gamma * dot + spec.coef0) ** spec.degree
    if spec.kind == "sigmoid":
        return np.tanh(spec.gamma * dot + spec.coef0)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * dot
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, x.reshape(1, -1), y.reshape(1, -1))[0, 0])


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


@dataclass
class DualSolution:
    alpha: np.ndarray
    intercept: float
    n_iter: int
    gap: float


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
               max_iter: int = 100_000,
               callback: Callable[[int, np.ndarray], None] | None = None) -> DualSolution:
    """SMO on a precomputed Gram matrix with labels in {-1, +1}.

    Stops once the maximal KKT violation ``m(a) - M(a)`` drops below
    ``tol``. ``callback(iteration, alpha)`` is called after each update.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q = K * np.outer(y, y)
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos, neg = y > 0, y < 0
    gap = np.inf
    for it in range(max_iter + 1):
        yG = -y * G
        at_upper, at_lower = alpha >= C, alpha <= 0
        up = (pos & ~at_upper) | (neg & ~at_lower)
        low = (pos & ~at_lower) | (neg & ~at_upper)
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, yG, -np.inf)))
        j = int(np.argmin(np.where(low, yG, np.inf)))
        gap = yG[i] - yG[j]
        if gap < tol:
            break
        if it == max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (gap {gap:.3g})",
                {"alpha": alpha.copy(), "gap": float(gap), "n_iter": it,
                 "objective": dual_objective(alpha, y, K)})

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            else:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, total
                if alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, total
        G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        if callback is not None:
            callback(it, alpha)

    # intercept: average over free vectors, else midpoint of the feasible range
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        upper_bound = alpha >= C
        ub_mask = (upper_bound & neg) | (~upper_bound & pos)
        lb_mask = (upper_bound & pos) | (~upper_bound & neg)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(
            ub if np.isfinite(ub) else lb)
    return DualSolution(alpha, -rho, it, float(gap))


@dataclass
class BinaryModel:
    """Trained two-class SVM; ``decision(x) >= 0`` means the positive class."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray          # alpha_i * y_i for each support vector
    intercept: float
    kernel: KernelSpec
    C: float
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"dimension mismatch: model has {self.support_vectors.shape[1]} features, got {X.shape[1]}")
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.intercept)
        return kernel_matrix(self.kernel, X, self.support_vectors) @ self.dual_coef + self.intercept

    def alpha(self, n_samples: int) -> np.ndarray:
        """Full dual vector over the training set (zeros for non-support)."""
        a = np.zeros(n_samples)
        a[self.support] = np.abs(self.dual_coef)
        return a

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "intercept": self.intercept,
            "dual_coef": self.dual_coef.tolist(),
            "support": self.support.tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BinaryModel":
        n_features = len(d["support_vectors"][0]) if d["support_vectors"] else d.get("n_features", 0)
        return cls(np.asarray(d["support_vectors"], dtype=float).reshape(-1, n_features),
                   np.asarray(d["dual_coef"], dtype=float), float(d["intercept"]),
                   KernelSpec(**d["kernel"]), float(d["C"]),
                   np.asarray(d["support"], dtype=int))


def train_binary_svm(X, y, spec: KernelSpec = KernelSpec(), C: float = 1.0, tol: float = 1e-3,
                     max_iter: int = 100_000, gram: np.ndarray | None = None,
                     callback=None) -> BinaryModel:
    """Fit a binary soft-margin SVM on labels in {-1, +1}.

    ``gram`` may supply the precomputed kernel matrix of X (with the same,
    already resolved, kernel).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if not C > 0:
        raise ValueError("C must be positive")
    if len(X) != len(y):
        raise ValueError("X and y differ in length")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training data must contain both classes")
    spec = spec.resolve(X)
    K = kernel_matrix(spec, X, X) if gram is None else gram
    sol = solve_dual(K, y, C, tol, max_iter, callback)
    sv = np.flatnonzero(sol.alpha > 0)
    return BinaryModel(X[sv], sol.alpha[sv] * y[sv], sol.intercept, spec, C, sv, sol.n_iter)


@dataclass
class MulticlassModel:
    """Pairwise (``ovo``) or one-vs-rest (``ovr``) ensemble of binary SVMs.

    In ``ovo`` mode the model for pair (a, b), a sorted before b, treats a
    as the positive class. Vote ties go to the class sorted first.
    """

    classes: tuple[str, ...]
    models: dict
    kernel: KernelSpec
    strategy: str = "ovo"
    tie_break: str = "sorted-first"

    def decision_votes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        index = {c: i for i, c in enumerate(self.classes)}
        if self.strategy == "ovr":
            scores = np.empty((len(X), len(self.classes)))
            for c, m in self.models.items():
                scores[:, index[c]] = m.decision_function(X)
            return scores
        votes = np.zeros((len(X), len(self.classes)))
        for (a, b), m in self.models.items():
            positive = m.decision_function(X) >= 0
            votes[positive, index[a]] += 1
            votes[~positive, index[b]] += 1
        return votes

    def predict(self, X) -> list[str]:
        # argmax returns the first maximum: the sorted-first class wins ties
        return [self.classes[i] for i in np.argmax(self.decision_votes(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "strategy": self.strategy,
            "tie_break": self.tie_break,
            "kernel": self.kernel.to_dict(),
            "classes": list(self.classes),
            "models": [{"classes": list(k) if isinstance(k, tuple) else [k], **m.to_dict()}
                       for k, m in self.models.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping) -> "MulticlassModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        models = {}
        for entry in d["models"]:
            key = tuple(entry["classes"]) if d["strategy"] == "ovo" else entry["classes"][0]
            models[key] = BinaryModel.from_dict(entry)
        return cls(tuple(d["classes"]), models, KernelSpec(**d["kernel"]), d["strategy"],
                   d.get("tie_break", "sorted-first"))

    @classmethod
    def from_json(cls, text: str) -> "MulticlassModel":
        return cls.from_dict(json.loads(text))


ModelOvO = MulticlassModel


def train_multiclass(X, labels: Sequence, spec: KernelSpec = KernelSpec(), C: float = 1.0,
                     tol: float = 1e-3, strategy: str = "ovo",
                     max_iter: int = 100_000) -> MulticlassModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray([str(label) for label in labels])
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    if strategy not in ("ovo", "ovr"):
        raise ValueError(f"unknown multiclass strategy {strategy!r}")
    spec = spec.resolve(X)
    K = kernel_matrix(spec, X, X)
    models = {}
    if strategy == "ovo":
        for a, b in combinations(classes, 2):
            rows = np.flatnonzero((labels == a) | (labels == b))
            y = np.where(labels[rows] == a, 1.0, -1.0)
            models[a, b] = train_binary_svm(X[rows], y, spec, C, tol, max_iter,
                                            gram=K[np.ix_(rows, rows)])
    else:
        for c in classes:
            y = np.where(labels == c, 1.0, -1.0)
            models[c] = train_binary_svm(X, y, spec, C, tol, max_iter, gram=K)
    return MulticlassModel(classes, models, spec, strategy)


def predict(model: MulticlassModel, x) -> str | list[str]:
    """Predict one label for a vector, or a list of labels for a matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return model.predict(x.reshape(1, -1))[0]
    return model.predict(x)
