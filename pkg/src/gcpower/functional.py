"""Dissipated-power functionals along trajectories and deterministic paths.

The time-averaged observable is W_T = (2/T) int <b(X), o dX> (Stratonovich);
its Ito form carries the eps * div b correction.  Both discretizations are
provided so they can cross-check each other.
"""
from __future__ import annotations

import numpy as np

from .models import VectorFieldModel
from .paths import DiscretePath
from .sde import Trajectory


class DimensionMismatch(ValueError):
    pass


def _check(traj_states: np.ndarray, model: VectorFieldModel):
    if traj_states.shape[-1] != model.dim:
        raise DimensionMismatch("trajectory dimension does not match model")


def w_ito(traj: Trajectory, model: VectorFieldModel) -> float:
    """Left-endpoint (Ito) discretization of W_T, with the divergence term."""
    x = traj.states
    _check(x, model)
    T = traj.duration
    delta = x[1:] - x[:-1]
    b = model.nonconservative(x[:-1])
    work = float(np.sum(b * delta))
    div = float(np.sum(model.div_nonconservative(x[:-1]))) * traj.dt
    return (2.0 * work + traj.epsilon * div) / T


def w_strat(traj: Trajectory, model: VectorFieldModel) -> float:
    """Midpoint (Stratonovich) discretization of W_T."""
    x = traj.states
    _check(x, model)
    T = traj.duration
    mid = 0.5 * (x[:-1] + x[1:])
    delta = x[1:] - x[:-1]
    return 2.0 * float(np.sum(model.nonconservative(mid) * delta)) / T


def martingale_part(traj: Trajectory, model: VectorFieldModel) -> float:
    """M_T = sum <b(X_k), dX_k - b(X_k) dt>; mean zero under the SDE law."""
    x = traj.states
    _check(x, model)
    delta = x[1:] - x[:-1]
    b = model.nonconservative(x[:-1])
    return float(np.sum(b * delta) - np.sum(b * b) * traj.dt)


def power_deterministic(path: DiscretePath, model: VectorFieldModel) -> float:
    """L_T(phi) = (2/T) sum <b(midpoint), delta phi> on a deterministic path."""
    _check(path.nodes, model)
    T = path.duration
    if T <= 0:
        raise ValueError("degenerate path with zero duration")
    mid = 0.5 * (path.nodes[:-1] + path.nodes[1:])
    delta = path.nodes[1:] - path.nodes[:-1]
    return 2.0 * float(np.sum(model.nonconservative(mid) * delta)) / T


def path_work(path: DiscretePath, model: VectorFieldModel) -> float:
    """T * L_T / 2: the reparameterization-invariant work of b along the path."""
    mid = 0.5 * (path.nodes[:-1] + path.nodes[1:])
    delta = path.nodes[1:] - path.nodes[:-1]
    return float(np.sum(model.nonconservative(mid) * delta))
