"""Order instances on a unit-circumference carousel and their uniform spacings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import ArgumentError, as_generator


@dataclass(frozen=True)
class OrderInstance:
    """Item positions in [0, 1); the picker starts at 0."""

    positions: tuple[float, ...]
    origin: float = field(default=0.0, init=False)

    def __init__(self, positions):
        pos = tuple(float(p) for p in positions)
        for p in pos:
            if not (0.0 <= p < 1.0):
                raise ArgumentError(f"position {p!r} outside [0, 1)")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return len(self.positions)

    def sorted_positions(self) -> np.ndarray:
        return np.sort(np.asarray(self.positions, dtype=float))

    def order(self) -> np.ndarray:
        """Item indices sorted by clockwise position (stable for duplicates)."""
        return np.argsort(np.asarray(self.positions, dtype=float), kind="stable")


@dataclass(frozen=True)
class SpacingVector:
    spacings: np.ndarray

    def __len__(self):
        return len(self.spacings)

    def __getitem__(self, i):
        return self.spacings[i]


@dataclass(frozen=True)
class ExponentialRepresentation:
    raw: np.ndarray
    partial_sums: np.ndarray


def sample_order(n: int, rng) -> OrderInstance:
    if n < 0:
        raise ArgumentError("n must be non-negative")
    return OrderInstance(as_generator(rng).random(n))


def spacings(instance: OrderInstance) -> SpacingVector:
    u = np.concatenate([[0.0], instance.sorted_positions(), [1.0]])
    return SpacingVector(np.diff(u))


def spacings_via_exponentials(n: int, rng) -> tuple[SpacingVector, ExponentialRepresentation]:
    """D_i = X_i / S_{n+1} with X_1..X_{n+1} iid unit exponentials."""
    if n < 0:
        raise ArgumentError("n must be non-negative")
    x = as_generator(rng).standard_exponential(n + 1)
    s = np.cumsum(x)
    return SpacingVector(x / s[-1]), ExponentialRepresentation(x, s)


# Batch forms: one instance per row.


def sample_sorted_positions(size: int, n: int, rng) -> np.ndarray:
    """``size`` x ``n`` array of sorted uniform positions."""
    u = as_generator(rng).random((size, n))
    u.sort(axis=1)
    return u


def spacings_matrix(sorted_positions: np.ndarray) -> np.ndarray:
    size = sorted_positions.shape[0]
    u = np.hstack([np.zeros((size, 1)), sorted_positions, np.ones((size, 1))])
    return np.diff(u, axis=1)


def exponential_spacings_matrix(size: int, n: int, rng) -> np.ndarray:
    x = as_generator(rng).standard_exponential((size, n + 1))
    return x / x.sum(axis=1, keepdims=True)
