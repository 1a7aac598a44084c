"""Integration of the diffusion dX = c(X) dt + sqrt(eps) dB and its zero-noise flow.

Noise is drawn from counter-based Philox streams keyed by (master seed,
trajectory index), so ensembles are reproducible independently of chunking or
worker scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import VectorFieldModel


class IntegratorError(RuntimeError):
    pass


class InvalidTimeStep(ValueError):
    pass


def trajectory_rng(master_seed: int, trajectory_index: int = 0) -> np.random.Generator:
    """Counter-based stream for one trajectory."""
    key = (int(master_seed) << 64) | int(trajectory_index)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Trajectory:
    epsilon: float
    dt: float
    states: np.ndarray  # (K+1, 2)
    seed: tuple  # (master_seed, trajectory_index); (None, None) for flows
    scheme: str

    @property
    def duration(self) -> float:
        return (self.states.shape[0] - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])


def _n_steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise InvalidTimeStep(f"T={T} must be a positive integer multiple of dt={dt}")
    return n


def dt_max(model: VectorFieldModel, radius: Optional[float] = None, epsilon: float = 1.0) -> float:
    """Explicit-scheme stability bound 0.1 / Lip(c) on the sampling box."""
    if radius is None:
        radius = model.sampling_radius(epsilon)
    lip = model.drift_lipschitz(radius)
    return 0.1 / max(lip, 1e-12)


def _check_dt(model, dt, epsilon, x0=None):
    radius = model.sampling_radius(epsilon)
    if x0 is not None:
        radius = max(radius, 1.1 * float(np.linalg.norm(x0)))
    bound = dt_max(model, radius, epsilon)
    if dt > bound * (1.0 + 1e-12):
        raise InvalidTimeStep(
            f"dt={dt} exceeds the stability bound {bound:.3e} for this model"
        )


def simulate(
    model: VectorFieldModel,
    epsilon: float,
    x0,
    T: float,
    dt: float,
    seed: int,
    trajectory_index: int = 0,
) -> Trajectory:
    """Euler-Maruyama integration of dX = c(X) dt + sqrt(eps) dB."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    n = _n_steps(T, dt)
    _check_dt(model, dt, epsilon, x0)
    x0 = np.asarray(x0, dtype=float)
    states = np.empty((n + 1, 2))
    states[0] = x0
    if epsilon > 0:
        rng = trajectory_rng(seed, trajectory_index)
        noise = math.sqrt(epsilon * dt) * rng.standard_normal((n, 2))
    else:
        noise = np.zeros((n, 2))
    x1, x2 = float(x0[0]), float(x0[1])
    drift = model.drift_scalar
    for k in range(n):
        c1, c2 = drift(x1, x2)
        x1 = x1 + c1 * dt + noise[k, 0]
        x2 = x2 + c2 * dt + noise[k, 1]
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise IntegratorError(f"non-finite state at step {k + 1}")
        states[k + 1, 0] = x1
        states[k + 1, 1] = x2
    return Trajectory(
        epsilon=float(epsilon),
        dt=float(dt),
        states=states,
        seed=(int(seed), int(trajectory_index)),
        scheme="euler_maruyama",
    )


def _rk4_step(drift, x1, x2, dt):
    a1, a2 = drift(x1, x2)
    b1, b2 = drift(x1 + 0.5 * dt * a1, x2 + 0.5 * dt * a2)
    c1, c2 = drift(x1 + 0.5 * dt * b1, x2 + 0.5 * dt * b2)
    d1, d2 = drift(x1 + dt * c1, x2 + dt * c2)
    return (
        x1 + dt * (a1 + 2 * b1 + 2 * c1 + d1) / 6.0,
        x2 + dt * (a2 + 2 * b2 + 2 * c2 + d2) / 6.0,
    )


def flow(model: VectorFieldModel, x0, T: float, dt: float) -> Trajectory:
    """Classical RK4 integration of the zero-noise flow x' = c(x)."""
    n = _n_steps(T, dt)
    x0 = np.asarray(x0, dtype=float)
    # RK4 tolerates larger steps than Euler; reuse the same safety margin.
    radius = max(model.sampling_radius(0.0), 1.1 * float(np.linalg.norm(x0)))
    if dt > 2.5 / max(model.drift_lipschitz(radius), 1e-12):
        raise InvalidTimeStep("dt too large for a stable RK4 flow at this |x0|")
    states = np.empty((n + 1, 2))
    states[0] = x0
    x1, x2 = float(x0[0]), float(x0[1])
    drift = model.drift_scalar
    for k in range(n):
        x1, x2 = _rk4_step(drift, x1, x2, dt)
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise IntegratorError(f"non-finite state at step {k + 1}")
        states[k + 1] = (x1, x2)
    return Trajectory(epsilon=0.0, dt=float(dt), states=states, seed=(None, None), scheme="rk4")


def default_k_radius(model: VectorFieldModel) -> float:
    """Smallest R with U'(r)/2 - sup|b| >= 1 for all r >= R."""
    r = np.linspace(0.0, 50.0, 50001)
    margin = 0.5 * model.radial_potential.deriv(r) - model.b_sup
    ok = margin >= 1.0
    # last index where the condition fails
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        return float(r[1])
    if bad[-1] == r.size - 1:
        raise ValueError("confinement margin never reaches 1 on the probe grid")
    return float(r[bad[-1] + 1])


def hitting_time(
    model: VectorFieldModel,
    y,
    K_radius: float,
    dt: float,
    T_max: float,
) -> Optional[float]:
    """First time the zero-noise flow from y enters {|x| <= K_radius}.

    Returns None when the flow has not hit within T_max.  The flow is stiff in
    the far field (|c| grows like r^3 for the quartic well), so an adaptive
    integrator with a crossing event is used; dt caps the step size near the
    target radius.
    """
    from scipy.integrate import solve_ivp

    y = np.asarray(y, dtype=float)
    if float(np.linalg.norm(y)) <= K_radius:
        return 0.0

    def rhs(t, x):
        return model.drift_scalar(x[0], x[1])

    def crossing(t, x):
        return math.hypot(x[0], x[1]) - K_radius

    crossing.terminal = True
    crossing.direction = -1
    sol = solve_ivp(
        rhs,
        (0.0, T_max),
        y,
        events=crossing,
        rtol=1e-10,
        atol=1e-12,
        max_step=max(dt, 1e-6),
    )
    if not sol.success:
        raise IntegratorError(f"flow integration failed: {sol.message}")
    if sol.t_events[0].size == 0:
        return None
    return float(sol.t_events[0][0])


def sample_stationary(
    model: VectorFieldModel,
    epsilon: float,
    burn_in_T: float,
    n_samples: int,
    spacing_T: float,
    dt: float,
    seed: int,
) -> np.ndarray:
    """Approximate draws from the stationary measure.

    One long Euler-Maruyama chain started at the potential minimum; states are
    recorded every spacing_T after burn_in_T.  Burn-in and spacing defaults are
    heuristic and should be well above the relaxation time.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_dt(model, dt, epsilon)
    n_burn = _n_steps(burn_in_T, dt) if burn_in_T > 0 else 0
    n_space = _n_steps(spacing_T, dt)
    total = n_burn + n_samples * n_space
    rng = trajectory_rng(seed, 0)
    out = np.empty((n_samples, 2))
    x1, x2 = 0.0, 0.0
    drift = model.drift_scalar
    amp = math.sqrt(epsilon * dt)
    chunk = 65536
    done = 0
    taken = 0
    while done < total:
        m = min(chunk, total - done)
        noise = amp * rng.standard_normal((m, 2))
        for k in range(m):
            c1, c2 = drift(x1, x2)
            x1 = x1 + c1 * dt + noise[k, 0]
            x2 = x2 + c2 * dt + noise[k, 1]
            step = done + k + 1
            if step > n_burn and (step - n_burn) % n_space == 0 and taken < n_samples:
                out[taken, 0] = x1
                out[taken, 1] = x2
                taken += 1
        if not (math.isfinite(x1) and math.isfinite(x2)):
            raise IntegratorError(f"non-finite state at step {done + m}")
        done += m
    return out


def default_burn_in(model: VectorFieldModel) -> float:
    """Heuristic 50 / (smallest well curvature); flagged in run metadata."""
    r0 = model.params.get("orbit_radius", 1.0)
    curv = min(
        float(model.radial_potential.second(0.0)),
        float(model.radial_potential.second(r0)),
    )
    return 50.0 / max(curv, 0.1)
