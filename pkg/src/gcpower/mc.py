"""Monte-Carlo estimation of the dissipated-power distribution.

All ensemble statistics are computed from per-trajectory Philox streams keyed
by (master_seed, trajectory_index); results are bitwise independent of chunk
size and worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .curves import ScgfCurve
from .models import VectorFieldModel
from .sde import (
    IntegratorError,
    _check_dt,
    _n_steps,
    default_burn_in,
    sample_stationary,
    trajectory_rng,
)


@dataclass
class McEstimate:
    value: float
    std_error: float
    n_samples: int
    ess: float

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")
        if self.ess > self.n_samples + 1e-9:
            raise ValueError("effective sample size cannot exceed n_samples")


@dataclass
class EnsembleFunctionals:
    """Per-trajectory functionals of one Euler-Maruyama ensemble."""

    w_ito: np.ndarray
    martingale: np.ndarray
    epsilon: float
    duration: float
    dt: float
    n_failed: int


def _chunk_functionals(model, epsilon, T, dt, x0s, master_seed, start_index, block=256):
    n = x0s.shape[0]
    K = _n_steps(T, dt)
    amp = math.sqrt(epsilon * dt)
    # one Philox stream per trajectory, consumed in step blocks so the memory
    # footprint stays at O(n * block) regardless of K
    rngs = [trajectory_rng(master_seed, start_index + i) for i in range(n)]
    X = x0s.copy()
    work = np.zeros(n)
    bsq_time = np.zeros(n)
    div_time = np.zeros(n)
    noise = np.empty((n, block, 2))
    fused = type(model) is VectorFieldModel  # radial-times-rotational fast path
    x1 = X[:, 0].copy()
    x2 = X[:, 1].copy()
    pot = model.radial_potential
    bump = model.amplitude
    done = 0
    while done < K:
        m = min(block, K - done)
        for i, rng in enumerate(rngs):
            noise[i, :m] = rng.standard_normal((m, 2))
        for k in range(m):
            if fused:
                r2 = x1 * x1 + x2 * x2
                r = np.sqrt(r2)
                a = np.asarray(bump.value(r))
                g = -0.5 * np.asarray(pot.deriv_over_r(r))
                b1 = a * x2
                b2 = -a * x1
                d1 = (g * x1 + b1) * dt + amp * noise[:, k, 0]
                d2 = (g * x2 + b2) * dt + amp * noise[:, k, 1]
                work += b1 * d1 + b2 * d2
                bsq_time += a * a * r2 * dt
                x1 = x1 + d1
                x2 = x2 + d2
            else:
                X = np.stack([x1, x2], axis=1)
                b = model.nonconservative(X)
                grad = model.grad_potential(X)
                delta = (-0.5 * grad + b) * dt + amp * noise[:, k]
                work += np.einsum("ij,ij->i", b, delta)
                bsq_time += np.einsum("ij,ij->i", b, b) * dt
                div_time += model.div_nonconservative(X) * dt
                x1 = x1 + delta[:, 0]
                x2 = x2 + delta[:, 1]
        done += m
    finite = np.isfinite(x1) & np.isfinite(x2) & np.isfinite(work)
    w_ito = (2.0 * work + epsilon * div_time) / T
    mart = work - bsq_time
    return w_ito, mart, finite


def ensemble_functionals(
    model: VectorFieldModel,
    epsilon: float,
    T: float,
    dt: float,
    x0s: np.ndarray,
    master_seed: int,
    chunk: int = 32768,
    workers: int = 1,
) -> EnsembleFunctionals:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_dt(model, dt, epsilon)
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    n = x0s.shape[0]
    tasks = [
        (model, epsilon, T, dt, x0s[lo : lo + chunk], master_seed, lo)
        for lo in range(0, n, chunk)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_chunk_call, tasks))
    else:
        results = [_chunk_call(t) for t in tasks]
    w = np.concatenate([r[0] for r in results])
    mart = np.concatenate([r[1] for r in results])
    finite = np.concatenate([r[2] for r in results])
    n_failed = int((~finite).sum())
    if n_failed > 0.001 * n:
        raise IntegratorError(f"{n_failed}/{n} trajectories diverged; reduce dt")
    return EnsembleFunctionals(
        w_ito=w[finite],
        martingale=mart[finite],
        epsilon=epsilon,
        duration=T,
        dt=dt,
        n_failed=n_failed,
    )


def _chunk_call(args):
    return _chunk_functionals(*args)


def _initial_points(model, epsilon, init, n_samples, dt, seed):
    if isinstance(init, str):
        if init != "stationary":
            raise ValueError("init must be a point or 'stationary'")
        burn = math.ceil(default_burn_in(model) / dt) * dt
        return sample_stationary(
            model,
            epsilon,
            burn_in_T=burn,
            n_samples=n_samples,
            spacing_T=math.ceil(2.0 / dt) * dt,
            dt=dt,
            seed=seed ^ 0x5EED,
        )
    pt = np.asarray(init, dtype=float)
    return np.tile(pt, (n_samples, 1))


def estimate_mean_w(
    model: VectorFieldModel,
    epsilon: float,
    T: float,
    dt: float,
    init: Union[str, np.ndarray],
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> McEstimate:
    """Sample mean of W_T over independent trajectories."""
    x0s = _initial_points(model, epsilon, init, n_samples, dt, seed)
    ens = ensemble_functionals(model, epsilon, T, dt, x0s, seed, workers=workers)
    w = ens.w_ito
    n = w.size
    return McEstimate(
        value=float(w.mean()),
        std_error=float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        n_samples=n,
        ess=float(n),
    )


def scgf_from_samples(w: np.ndarray, T: float, lambda_grid) -> ScgfCurve:
    """Reweighted SCGF estimate e_hat(lam) = (1/T) log mean exp(lam T W)."""
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    n = w.size
    tw = T * w
    values = np.empty_like(lambda_grid)
    stderr = np.empty_like(lambda_grid)
    ess = np.empty_like(lambda_grid)
    for i, lam in enumerate(lambda_grid):
        a = lam * tw
        shift = a.max()
        z = np.exp(a - shift)
        mz = z.mean()
        values[i] = (shift + math.log(mz)) / T
        ess[i] = z.sum() ** 2 / np.sum(z * z)
        stderr[i] = float(z.std(ddof=1) / (mz * math.sqrt(n))) / T if n > 1 else 0.0
    # lam = 0 is a normalization identity, not an estimate
    exact0 = lambda_grid == 0.0
    values[exact0] = 0.0
    stderr[exact0] = 0.0
    reliable = ess >= 100.0
    return ScgfCurve(
        lambdas=lambda_grid,
        values=values,
        provenance="mc",
        stderr=stderr,
        reliable=reliable,
        metadata={"T": T, "n_samples": int(n), "ess": ess},
    )


def estimate_scgf(
    model: VectorFieldModel,
    epsilon: float,
    T: float,
    dt: float,
    lambda_grid,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> ScgfCurve:
    """Empirical SCGF by exponential reweighting of one stationary ensemble."""
    x0s = _initial_points(model, epsilon, "stationary", n_samples, dt, seed)
    ens = ensemble_functionals(model, epsilon, T, dt, x0s, seed, workers=workers)
    curve = scgf_from_samples(ens.w_ito, T, lambda_grid)
    curve.metadata.update({"epsilon": epsilon, "dt": dt, "seed": seed})
    return curve


def empirical_rate_ratio(
    model: VectorFieldModel,
    epsilon: float,
    T: float,
    dt: float,
    n_samples: int,
    bins: int,
    seed: int,
    workers: int = 1,
    min_count: int = 25,
) -> np.ndarray:
    """Log probability ratios log P(W ~ q) - log P(W ~ -q) per symmetric bin pair.

    Returns rows (q_center, log_ratio, std_error, n_plus, n_minus).  The
    finite-T fluctuation relation predicts log_ratio = q T / eps.
    """
    x0s = _initial_points(model, epsilon, "stationary", n_samples, dt, seed)
    ens = ensemble_functionals(model, epsilon, T, dt, x0s, seed, workers=workers)
    w = ens.w_ito
    qmax = float(np.abs(w).max())
    if qmax == 0.0:
        return np.empty((0, 5))
    edges = np.linspace(-qmax, qmax, 2 * bins + 1)
    counts, _ = np.histogram(w, bins=edges)
    rows = []
    for j in range(bins):
        n_plus = counts[bins + j]
        n_minus = counts[bins - 1 - j]
        if n_plus >= min_count and n_minus >= min_count:
            q = 0.5 * (edges[bins + j] + edges[bins + j + 1])
            rows.append(
                (
                    q,
                    math.log(n_plus / n_minus),
                    math.sqrt(1.0 / n_plus + 1.0 / n_minus),
                    n_plus,
                    n_minus,
                )
            )
    return np.array(rows) if rows else np.empty((0, 5))


def default_ell_grid(model: VectorFieldModel, epsilon: float, T: float, n: int = 6) -> np.ndarray:
    scale = math.sqrt(2.0 * epsilon * model.b_sup_sq / T)
    return scale * np.linspace(0.25, 2.5, n)


def tightness_check(
    model: VectorFieldModel,
    epsilon: float,
    T: float,
    dt: float,
    ell_grid,
    n_samples: int,
    seed: int,
    x0=None,
    workers: int = 1,
    z: float = 1.96,
) -> np.ndarray:
    """Martingale tail frequencies against the Bernstein bound 2 exp(-l^2 T / (2 eps B)).

    Returns rows (ell, p_hat, wilson_upper, bound).
    """
    if x0 is None:
        x0 = model.reference_loop.nodes[0] if model.reference_loop is not None else (0.0, 0.0)
    x0s = np.tile(np.asarray(x0, dtype=float), (n_samples, 1))
    ens = ensemble_functionals(model, epsilon, T, dt, x0s, seed, workers=workers)
    m = np.abs(ens.martingale)
    B = model.b_sup_sq
    n = m.size
    rows = []
    for ell in np.asarray(ell_grid, dtype=float):
        p_hat = float(np.mean(m > ell * T))
        denom = 1.0 + z * z / n
        center = p_hat + z * z / (2 * n)
        half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4 * n * n))
        upper = (center + half) / denom
        bound = 2.0 * math.exp(-(ell * ell) * T / (2.0 * epsilon * B))
        rows.append((ell, p_hat, upper, bound))
    return np.array(rows)


def stationary_quadrature_mean(
    model: VectorFieldModel, epsilon: float, half_width: float = None, n: int = 400
) -> float:
    """Quadrature of int (2|b|^2 + eps div b) Z^-1 exp(-V/eps) dx.

    Valid as the stationary mean of W only when div b = 0, in which case
    Z^-1 exp(-V/eps) solves the stationary Fokker-Planck equation.
    """
    if half_width is None:
        half_width = model.sampling_radius(epsilon) * 1.3
    ax = np.linspace(-half_width, half_width, n)
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([gx, gy], axis=-1)
    v = model.potential(pts)
    dens = np.exp(-(v - v.min()) / epsilon)
    obs = 2.0 * np.sum(model.nonconservative(pts) ** 2, axis=-1) + epsilon * model.div_nonconservative(pts)
    return float(np.sum(obs * dens) / np.sum(dens))
