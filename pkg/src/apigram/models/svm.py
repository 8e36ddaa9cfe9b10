"""Linear SVM: one-vs-rest hinge loss trained by SGD.

Each class head runs the 1/(lambda*t) step-size schedule over seeded
per-epoch shuffles; the bias rides along as an augmented constant
feature. Prediction is the argmax margin; margin ties resolve to the
lower class ordinal. No probability output.
"""
from __future__ import annotations

import numpy as np

from ..vectorize import FeatureMatrix
from .base import Learner


class LinearSvmLearner(Learner):
    def __init__(self, heads: list[int], weights: list[list[float]], bias: list[float]):
        self.heads = heads
        self.weights = weights
        self.bias = bias
        self._W = np.array(weights, dtype=np.float64)
        self._b = np.array(bias, dtype=np.float64)

    def predict_ordinal(self, x: np.ndarray) -> int:
        margins = self._W @ x + self._b
        return self.heads[int(np.argmax(margins))]

    def to_payload(self) -> dict:
        return {"heads": self.heads, "weights": self.weights, "bias": self.bias}

    @classmethod
    def from_payload(cls, payload: dict, dim: int) -> "LinearSvmLearner":
        return cls(
            heads=list(payload["heads"]),
            weights=payload["weights"],
            bias=list(payload["bias"]),
        )


def fit(matrix: FeatureMatrix, y: np.ndarray, params: dict, seed: int) -> LinearSvmLearner:
    lam = float(params["reg_lambda"])
    epochs = int(params["epochs"])
    X = matrix.to_dense()
    n, v = X.shape
    Xa = np.concatenate([X, np.ones((n, 1))], axis=1)

    heads = sorted(int(c) for c in np.unique(y))
    weights: list[list[float]] = []
    bias: list[float] = []
    for c in heads:
        sign = np.where(y == c, 1.0, -1.0)
        w = np.zeros(v + 1, dtype=np.float64)
        rng = np.random.default_rng([abs(seed), c])
        t = 0
        for _ in range(epochs):
            for i in rng.permutation(n):
                t += 1
                lr = 1.0 / (lam * t)
                margin = sign[i] * float(w @ Xa[i])
                w *= 1.0 - lr * lam
                if margin < 1.0:
                    w += lr * sign[i] * Xa[i]
        weights.append([float(val) for val in w[:v]])
        bias.append(float(w[v]))
    return LinearSvmLearner(heads=heads, weights=weights, bias=bias)
