"""Finite truncations of the weighted sequence spaces h^alpha.

A vector stores pairs ``z_k = (x_k, y_k)`` for ``k = 1..K``; every index past K
is zero.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BirkhoffVector:
    pairs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pairs, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(arr)):
            raise ValueError("Birkhoff coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "pairs", arr)

    @property
    def K(self) -> int:
        return len(self.pairs)

    def __getitem__(self, k: int) -> np.ndarray:
        """Pair ``z_k`` with 1-based ``k``."""
        if not 1 <= k <= self.K:
            raise IndexError(f"mode {k} outside 1..{self.K}")
        return self.pairs[k - 1]

    def __mul__(self, c: float) -> "BirkhoffVector":
        return BirkhoffVector(c * self.pairs)

    __rmul__ = __mul__

    def with_pair(self, k: int, pair) -> "BirkhoffVector":
        arr = self.pairs.copy()
        arr[k - 1] = pair
        return BirkhoffVector(arr)

    def angles(self) -> np.ndarray:
        """Arguments of ``x_k + i y_k`` in (-pi, pi]."""
        ang = np.arctan2(self.pairs[:, 1], self.pairs[:, 0])
        # signed zeros give atan2 = -pi; fold onto the closed end
        return np.where(ang <= -math.pi, ang + 2 * math.pi, ang)

    def to_json(self) -> str:
        return json.dumps({"pairs": self.pairs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "BirkhoffVector":
        data = json.loads(text)
        if not isinstance(data, dict) or "pairs" not in data:
            raise ValueError('Birkhoff JSON must be {"pairs": [[x, y], ...]}')
        pairs = data["pairs"]
        if any(len(p) != 2 for p in pairs):
            raise ValueError("each Birkhoff pair needs exactly two entries")
        return cls(np.array(pairs, dtype=float).reshape(-1, 2))


def zeros(K: int) -> BirkhoffVector:
    return BirkhoffVector(np.zeros((K, 2)))


def seq_norm(z: BirkhoffVector, alpha: float) -> float:
    """``(sum_k k^(2 alpha) (x_k^2 + y_k^2))^(1/2)`` over the stored pairs."""
    k = np.arange(1, z.K + 1, dtype=float)
    return math.sqrt(float(np.sum(k ** (2 * alpha) * np.sum(z.pairs**2, axis=1))))


def actions_of(z: BirkhoffVector) -> np.ndarray:
    return 0.5 * np.sum(z.pairs**2, axis=1)


def from_polar(actions, theta) -> BirkhoffVector:
    actions = np.asarray(actions, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if actions.shape != theta.shape:
        raise ValueError("actions and angles must have the same length")
    if np.any(actions < 0):
        raise ValueError("actions must be non-negative")
    r = np.sqrt(2 * actions)
    return BirkhoffVector(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
