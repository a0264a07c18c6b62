"""Multinomial logistic regression fitted by full-batch gradient descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..io import FORMAT_VERSION

log = logging.getLogger(__name__)

GRAD_TOL = 1e-6
MAX_ITER = 10_000
ARMIJO_C = 1e-4


def add_bias(X) -> np.ndarray:
    """Append the always-one column that carries the intercept row of W."""
    X = np.asarray(X, dtype=np.float64)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def log_softmax_rows(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


def objective(W: np.ndarray, Xb: np.ndarray, Y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||_F^2`` and its gradient.

    ``Xb`` already carries the bias column; ``Y`` is one-hot (n x z).
    """
    n = Xb.shape[0]
    logp = log_softmax_rows(Xb @ W)
    f = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W * W)
    grad = Xb.T @ (np.exp(logp) - Y) / n + l2 * W
    return float(f), grad


@dataclass(frozen=True)
class LogisticModel:
    W: np.ndarray
    class_order: tuple[str, ...]
    converged: bool = True
    n_iter: int = 0
    trained_with_bias: bool = True

    def logits(self, X) -> np.ndarray:
        return add_bias(X) @ self.W

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(log_softmax_rows(self.logits(X)))

    def predict(self, X) -> np.ndarray:
        return np.array(self.class_order)[np.argmax(self.logits(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "format_version": FORMAT_VERSION,
            "class_order": list(self.class_order),
            "shape": list(self.W.shape),
            "W": [float(v) for v in self.W.ravel()],
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        if d.get("kind") != "logistic" or d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported logistic artifact: kind={d.get('kind')!r} "
                             f"format_version={d.get('format_version')!r}")
        W = np.array(d["W"], dtype=np.float64).reshape(d["shape"])
        return cls(W, tuple(d["class_order"]), d["converged"], d["n_iter"])


def fit_logistic(X, y, l2: float = 1e-2, max_iter: int = MAX_ITER, tol: float = GRAD_TOL,
                 class_order=None) -> LogisticModel:
    """Softmax regression with an intercept, started from ``W = 0``.

    Each step is a gradient step whose length is found by Armijo
    backtracking, starting from twice the previously accepted length.
    Stops when the gradient's max-norm reaches ``tol`` or after
    ``max_iter`` steps; ``converged`` records which.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(str)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X rows ({X.shape[0]}) do not match labels ({len(y)})")
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    if class_order is None:
        class_order = sorted(set(y.tolist()))
    class_order = tuple(class_order)
    if len(set(y.tolist())) < 2:
        raise ValueError("logistic regression needs at least two distinct classes")
    col = {c: j for j, c in enumerate(class_order)}
    missing = set(y.tolist()) - set(col)
    if missing:
        raise ValueError(f"labels {sorted(missing)} not in class_order")
    Xb = add_bias(X)
    Y = np.zeros((len(y), len(class_order)))
    Y[np.arange(len(y)), [col[c] for c in y]] = 1.0

    W = np.zeros((Xb.shape[1], len(class_order)))
    f, g = objective(W, Xb, Y, l2)
    step = 1.0
    n_iter = 0
    while n_iter < max_iter and np.max(np.abs(g)) > tol:
        gg = float(np.sum(g * g))
        step *= 2.0
        while True:
            W_new = W - step * g
            f_new, g_new = objective(W_new, Xb, Y, l2)
            if f_new <= f - ARMIJO_C * step * gg or step < 1e-20:
                break
            step *= 0.5
        if f_new > f:
            # no representable decrease left
            break
        W, f, g = W_new, f_new, g_new
        n_iter += 1
    converged = bool(np.max(np.abs(g)) <= tol)
    if not converged:
        log.warning("logistic regression stopped after %d iterations (|grad|_inf=%.3g)",
                    n_iter, float(np.max(np.abs(g))))
    return LogisticModel(W, class_order, converged, n_iter)
