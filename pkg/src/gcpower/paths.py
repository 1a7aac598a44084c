"""Piecewise-linear deterministic paths on a uniform time grid."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DiscretePath:
    """A path phi_0 ... phi_M with uniform node spacing dt (duration T = M*dt)."""

    dt: float
    nodes: np.ndarray  # shape (M+1, 2)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise ValueError("nodes must have shape (M+1, 2) with M >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("path nodes must be finite")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def duration(self) -> float:
        return self.n_segments * self.dt

    @property
    def start(self) -> np.ndarray:
        return self.nodes[0]

    @property
    def end(self) -> np.ndarray:
        return self.nodes[-1]

    @property
    def closed(self) -> bool:
        # Exact equality on purpose: closure is a structural property, and the
        # reversal/concatenation identities below rely on it holding exactly.
        return bool(np.all(self.nodes[0] == self.nodes[-1]))

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nodes.shape[0])


def reverse_path(path: DiscretePath) -> DiscretePath:
    """Time reversal phi*_t = phi_{T-t}; preserves closure."""
    return DiscretePath(dt=path.dt, nodes=path.nodes[::-1].copy())


def concatenate_paths(first: DiscretePath, second: DiscretePath) -> DiscretePath:
    """Join two paths sharing a common dt and matching junction node."""
    if abs(first.dt - second.dt) > 1e-12 * first.dt:
        raise ValueError("paths must share the same node spacing")
    if not np.allclose(first.end, second.start, atol=1e-12):
        raise ValueError("end of first path must coincide with start of second")
    nodes = np.vstack([first.nodes, second.nodes[1:]])
    return DiscretePath(dt=first.dt, nodes=nodes)


def constant_path(point, T: float, dt: float) -> DiscretePath:
    point = np.asarray(point, dtype=float)
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(T, 1.0) or n < 1:
        raise ValueError("T must be a positive integer multiple of dt")
    return DiscretePath(dt=dt, nodes=np.tile(point, (n + 1, 1)))
