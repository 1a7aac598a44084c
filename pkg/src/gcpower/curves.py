"""Sampled SCGF and rate curves with provenance metadata."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _validated_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a nonempty 1-D array")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    return grid


@dataclass
class ScgfCurve:
    """Samples of lambda -> e(lambda)."""

    lambdas: np.ndarray
    values: np.ndarray
    provenance: str  # "mc" | "spectral"
    stderr: Optional[np.ndarray] = None
    reliable: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambdas = _validated_grid(self.lambdas)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.lambdas.shape:
            raise ValueError("values must match the lambda grid")
        if self.reliable is None:
            self.reliable = np.ones_like(self.values, dtype=bool)
        else:
            self.reliable = np.asarray(self.reliable, dtype=bool)

    def second_differences(self) -> np.ndarray:
        return np.diff(self.values, 2)


@dataclass
class RateCurve:
    """Samples of q -> rate(q)."""

    q_grid: np.ndarray
    values: np.ndarray
    provenance: str  # "variational" | "legendre-of-scgf" | "empirical"
    boundary_active: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)
    columns: dict = field(default_factory=dict)  # extra per-q data (argmin_T, ...)

    def __post_init__(self):
        self.q_grid = _validated_grid(self.q_grid)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.q_grid.shape:
            raise ValueError("values must match the q grid")
        if self.boundary_active is None:
            self.boundary_active = np.zeros_like(self.values, dtype=bool)
        else:
            self.boundary_active = np.asarray(self.boundary_active, dtype=bool)

    def second_differences(self) -> np.ndarray:
        return np.diff(self.values, 2)
