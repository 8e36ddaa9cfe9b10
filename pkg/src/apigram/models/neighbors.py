"""k-nearest-neighbors with cosine distance.

Training rows are memorized sparsely; prediction ranks neighbors by
cosine distance with a stable sort, so equal distances resolve to the
lower training-row index, and neighbor-vote ties resolve to the lower
class ordinal. Zero rows have similarity 0 with everything.
"""
from __future__ import annotations

import numpy as np

from ..labels import N_CLASSES
from ..vectorize import FeatureMatrix
from .base import Learner


class KNearestNeighborsLearner(Learner):
    def __init__(self, rows: list[list[list[float]]], labels: list[int], k: int, dim: int):
        self.rows = rows
        self.labels = labels
        self.k = k
        self.dim = dim
        dense = np.zeros((len(rows), dim), dtype=np.float64)
        for i, pairs in enumerate(rows):
            for j, w in pairs:
                dense[i, int(j)] = w
        norms = np.sqrt((dense ** 2).sum(axis=1))
        norms[norms == 0.0] = 1.0
        self._unit = dense / norms[:, np.newaxis]
        self._y = np.array(labels, dtype=np.int64)

    def _neighbor_votes(self, x: np.ndarray) -> np.ndarray:
        norm = float(np.sqrt((x ** 2).sum()))
        xu = x / norm if norm > 0.0 else x
        distances = 1.0 - self._unit @ xu
        k = min(self.k, distances.size)
        nearest = np.argsort(distances, kind="stable")[:k]
        votes = np.zeros(N_CLASSES, dtype=np.int64)
        for i in nearest:
            votes[self._y[i]] += 1
        return votes

    def predict_ordinal(self, x: np.ndarray) -> int:
        return int(np.argmax(self._neighbor_votes(x)))

    def predict_proba_vector(self, x: np.ndarray) -> np.ndarray:
        votes = self._neighbor_votes(x)
        return votes.astype(np.float64) / votes.sum()

    def to_payload(self) -> dict:
        return {"rows": self.rows, "labels": self.labels, "k": self.k, "dim": self.dim}

    @classmethod
    def from_payload(cls, payload: dict, dim: int) -> "KNearestNeighborsLearner":
        return cls(
            rows=payload["rows"],
            labels=list(payload["labels"]),
            k=int(payload["k"]),
            dim=int(payload["dim"]),
        )


def fit(matrix: FeatureMatrix, y: np.ndarray, params: dict, seed: int) -> KNearestNeighborsLearner:
    rows = [
        [[j, row[j]] for j in sorted(row)]
        for row in matrix.rows
    ]
    return KNearestNeighborsLearner(
        rows=rows,
        labels=[int(c) for c in y],
        k=int(params["k"]),
        dim=matrix.n_cols,
    )
