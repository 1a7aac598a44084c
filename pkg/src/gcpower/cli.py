"""Command-line interface: configs in, reproducible CSV/JSON artifacts out.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 verification
failure.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__, action, functional, mc, models, sde, spectral, transform
from .curves import RateCurve, ScgfCurve
from .paths import DiscretePath

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULT_CONFIG = {
    "model": {
        "name": "circle_double_well",
        "params": {},
    },
    "run": {
        "epsilon": 0.5,
        "T": 8.0,
        "dt": 0.002,
        "n_samples": 20000,
        "seed": 1,
        "workers": 1,
        "init": "stationary",
        "x0": [1.0, 0.0],
    },
    "grids": {
        "lambda_min": -1.5,
        "lambda_max": 0.5,
        "lambda_points": 41,
        "q_min": -2.0,
        "q_max": 2.0,
        "q_points": 21,
        "T_grid": [120.0],
        "M_per_unit_T": 24,
        "ell_points": 6,
    },
    "spectral": {
        "half_width": None,
        "spacing": None,
        "target_m": 201,
        "advection": "adjoint",
    },
    "hitting": {
        "radii_over_R0": [10.0, 20.0, 40.0, 80.0],
        "dt": 0.01,
        "T_max": 400.0,
    },
    "tolerances": {
        "orthogonality": 1e-8,
        "ft_spectral": 1e-4,
        "subadditivity": -1e-6,
    },
}


def _merge_validate(base: dict, override: dict, path: str = "") -> dict:
    out = {}
    for key, val in base.items():
        if key in override:
            o = override[key]
            if isinstance(val, dict) and key != "params":
                if not isinstance(o, dict):
                    raise ConfigError(f"section '{path}{key}' must be a mapping")
                out[key] = _merge_validate(val, o, f"{path}{key}.")
            else:
                out[key] = o
        else:
            out[key] = val
    unknown = set(override) - set(base)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(path + k for k in unknown)}")
    return out


def _apply_override(cfg: dict, spec_kv: str):
    if "=" not in spec_kv:
        raise ConfigError(f"--override expects KEY=VALUE, got {spec_kv!r}")
    key, raw = spec_kv.split("=", 1)
    value = yaml.safe_load(raw)
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config section {key!r}")
        node = node[p]
    if parts[-1] not in node and parts[-2:-1] != ["params"]:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def load_config(config_path, overrides, seed, workers) -> dict:
    cfg = json.loads(json.dumps(_DEFAULT_CONFIG))  # deep copy
    if config_path:
        with open(config_path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError("config file must contain a mapping")
        cfg = _merge_validate(cfg, user)
    for kv in overrides:
        _apply_override(cfg, kv)
    if seed is not None:
        cfg["run"]["seed"] = int(seed)
    if workers is not None:
        cfg["run"]["workers"] = int(workers)
    _check_positive(cfg)
    return cfg


def _check_positive(cfg):
    run = cfg["run"]
    for key in ("epsilon", "T", "dt"):
        if not (isinstance(run[key], (int, float)) and run[key] > 0):
            raise ConfigError(f"run.{key} must be a positive number")
    if int(run["n_samples"]) < 1:
        raise ConfigError("run.n_samples must be >= 1")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_model(cfg) -> models.VectorFieldModel:
    try:
        return models.builtin(cfg["model"]["name"], cfg["model"]["params"] or None)
    except models.ModelError as exc:
        raise ConfigError(str(exc)) from exc


def _refuse_unstable_dt(model, cfg):
    eps = cfg["run"]["epsilon"]
    bound = sde.dt_max(model, epsilon=eps)
    if cfg["run"]["dt"] > bound:
        raise ConfigError(
            f"run.dt={cfg['run']['dt']} exceeds the explicit-scheme stability "
            f"bound {bound:.4e} for this model at epsilon={eps}"
        )


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------


def _out_dir(out) -> Path:
    if out is None:
        out = os.environ.get("GCPOWER_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _meta_lines(cfg):
    return {
        "tool": f"gcpower {__version__}",
        "config_hash": config_hash(cfg),
        "master_seed": cfg["run"]["seed"],
    }


def write_csv(path: Path, columns: dict, cfg: dict, extra_meta: dict = None):
    meta = _meta_lines(cfg)
    meta.update(extra_meta or {})
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        fh.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_json(path: Path, payload: dict, cfg: dict):
    doc = {"meta": _meta_lines(cfg), "config": cfg, **payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _lambda_grid(cfg):
    g = cfg["grids"]
    return np.linspace(g["lambda_min"], g["lambda_max"], int(g["lambda_points"]))


def _q_grid(cfg):
    g = cfg["grids"]
    return np.linspace(g["q_min"], g["q_max"], int(g["q_points"]))


def _grid_spec(model, cfg):
    sp = cfg["spectral"]
    eps = cfg["run"]["epsilon"]
    if sp["half_width"] and sp["spacing"]:
        return spectral.GridSpec(half_width=sp["half_width"], spacing=sp["spacing"])
    return spectral.default_grid(model, eps, target_m=int(sp["target_m"]))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


_shared_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--seed", type=int, default=None, help="Master seed override."),
    click.option("--out", type=click.Path(), default=None, help="Output directory."),
    click.option("--workers", type=int, default=None),
    click.option("--override", "overrides", multiple=True, help="KEY=VALUE config override."),
]


def shared_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main():
    """Dissipated-power statistics of small-noise diffusions."""


def _setup(config_path, overrides, seed, workers, out):
    try:
        cfg = load_config(config_path, overrides, seed, workers)
        model = build_model(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    return cfg, model, _out_dir(out)


@main.command()
@shared_options
def verify(config_path, seed, out, workers, overrides):
    """Run the cross-module invariant checks and write a JSON report."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    try:
        _refuse_unstable_dt(model, cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    eps = cfg["run"]["epsilon"]
    master = int(cfg["run"]["seed"])

    def check_assumptions_():
        half = model.sampling_radius(eps)
        rep = models.check_assumptions(model, box=(-half, half, -half, half), lattice_step=0.05)
        return {"passed": rep.passed, "detail": asdict(rep)}

    def check_gradient():
        err = _gradient_check(model, np.random.default_rng(master))
        return {"passed": err <= 1e-6, "max_rel_err": err}

    def check_ft_identity():
        err = _discrete_ft_identity(model, np.random.default_rng(master + 1), n_paths=20)
        return {"passed": err <= 1e-10, "max_rel_err": err}

    def check_adjoint():
        grid = _grid_spec(model, cfg)
        adj = spectral.adjoint_check(model, eps, 0.25, grid)
        return {
            "passed": adj.residual_adjoint <= 1e-10 and 3.0 <= adj.central_ratio <= 5.0,
            "residual_adjoint": adj.residual_adjoint,
            "central_ratio": adj.central_ratio,
        }

    def check_symmetry():
        grid = _grid_spec(model, cfg)
        sym = _eigen_symmetry(model, eps, grid)
        return {"passed": sym <= 2e-6, "max_rel_err": sym}

    def check_ground_state():
        grid = _grid_spec(model, cfg)
        ev_w, ev_s = spectral.ground_state_check(model, eps, grid, k=3)
        diff = float(np.abs(ev_w - ev_s).max())
        return {
            "passed": diff <= 50.0 * grid.spacing**2,
            "eigs_weighted": ev_w,
            "eigs_schrodinger": ev_s,
            "max_abs_diff": diff,
        }

    def check_subadditivity():
        sub = action.subadditivity_check(model, q=1.0, T1=5.0, T2=5.0, M_per_unit_T=32)
        return {
            "passed": sub[3] >= cfg["tolerances"]["subadditivity"],
            "S_T1": sub[0],
            "S_T2": sub[1],
            "S_T1_plus_T2": sub[2],
            "slack": sub[3],
        }

    def check_tightness():
        rows = mc.tightness_check(
            model,
            eps,
            cfg["run"]["T"],
            cfg["run"]["dt"],
            mc.default_ell_grid(model, eps, cfg["run"]["T"], int(cfg["grids"]["ell_points"])),
            n_samples=min(int(cfg["run"]["n_samples"]), 20000),
            seed=master,
            workers=int(cfg["run"]["workers"]),
        )
        return {"passed": bool(np.all(rows[:, 2] <= rows[:, 3])), "rows": rows}

    suite = [
        ("assumptions", check_assumptions_),
        ("action_gradient_fd", check_gradient),
        ("discrete_ft_identity", check_ft_identity),
        ("adjoint_identity", check_adjoint),
        ("scgf_symmetry", check_symmetry),
        ("ground_state", check_ground_state),
        ("subadditivity", check_subadditivity),
        ("bernstein_tightness", check_tightness),
    ]
    checks = {}
    failed = None
    for name, fn in suite:
        try:
            result = fn()
        except (sde.IntegratorError, action.ActionError, spectral.SpectralError, np.linalg.LinAlgError) as exc:
            click.echo(f"numerical failure in {name}: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)
        checks[name] = result
        click.echo(f"{'PASS' if result['passed'] else 'FAIL'}  {name}")
        if not result["passed"]:
            failed = name
            break  # later checks assume the invariants established earlier
    write_json(outdir / "verify.json", {"checks": checks, "passed": failed is None}, cfg)
    if failed is not None:
        click.echo(f"verification failed at: {failed}", err=True)
        sys.exit(EXIT_VERIFY)


def _gradient_check(model, rng, n_paths=3):
    worst = 0.0
    for _ in range(n_paths):
        nodes = rng.normal(scale=1.2, size=(24, 2))
        p = DiscretePath(dt=0.05, nodes=nodes)
        g = action.grad_action(p, model)
        h = 1e-5
        for i in (0, 11, 23):
            for d in range(2):
                n1 = nodes.copy()
                n1[i, d] += h
                n2 = nodes.copy()
                n2[i, d] -= h
                fd = (
                    action.action_value(DiscretePath(dt=0.05, nodes=n1), model)
                    - action.action_value(DiscretePath(dt=0.05, nodes=n2), model)
                ) / (2 * h)
                worst = max(worst, abs(fd - g[i, d]) / max(1.0, abs(fd)))
    return worst


def _discrete_ft_identity(model, rng, n_paths=20):
    worst = 0.0
    for _ in range(n_paths):
        nodes = rng.normal(scale=1.3, size=(40, 2))
        nodes[-1] = nodes[0]
        p = DiscretePath(dt=0.05, nodes=nodes)
        lhs = action.action_value(p, model) - action.action_value(action.reverse_path(p), model)
        rhs = -p.duration * functional.power_deterministic(p, model)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def _eigen_symmetry(model, eps, grid):
    worst = 0.0
    for lam in (-0.5, 0.25):
        e1 = spectral.dominant_eig(spectral.assemble(model, eps, lam, grid)).eigenvalue
        e2 = spectral.dominant_eig(
            spectral.assemble(model, eps, -1.0 / eps - lam, grid)
        ).eigenvalue
        worst = max(worst, abs(e1 - e2) / (1.0 + abs(e1)))
    return worst


@main.command()
@shared_options
def simulate(config_path, seed, out, workers, overrides):
    """Integrate one trajectory and write its states and functionals."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    run = cfg["run"]
    try:
        traj = sde.simulate(
            model, run["epsilon"], run["x0"], run["T"], run["dt"], int(run["seed"])
        )
    except (sde.InvalidTimeStep,) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except sde.IntegratorError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    write_csv(
        outdir / "trajectory.csv",
        {"t": traj.times(), "x1": traj.states[:, 0], "x2": traj.states[:, 1]},
        cfg,
    )
    write_json(
        outdir / "simulate.json",
        {
            "w_ito": functional.w_ito(traj, model),
            "w_strat": functional.w_strat(traj, model),
            "martingale": functional.martingale_part(traj, model),
        },
        cfg,
    )
    click.echo(f"wrote {outdir / 'trajectory.csv'}")


@main.command("gc-stats")
@shared_options
def gc_stats(config_path, seed, out, workers, overrides):
    """Ensemble W statistics, histogram ratios, and the Bernstein check."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    run = cfg["run"]
    eps, T, dt = run["epsilon"], run["T"], run["dt"]
    master, n = int(run["seed"]), int(run["n_samples"])
    nworkers = int(run["workers"])
    try:
        est = mc.estimate_mean_w(model, eps, T, dt, run["init"], n, master, workers=nworkers)
        ratio_rows = mc.empirical_rate_ratio(model, eps, T, dt, n, bins=16, seed=master, workers=nworkers)
        tight = mc.tightness_check(
            model, eps, T, dt, mc.default_ell_grid(model, eps, T), min(n, 20000), master, workers=nworkers
        )
    except (sde.InvalidTimeStep, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except sde.IntegratorError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    if ratio_rows.size:
        write_csv(
            outdir / "rate_ratio.csv",
            {
                "q": ratio_rows[:, 0],
                "log_ratio": ratio_rows[:, 1],
                "std_error": ratio_rows[:, 2],
                "n_plus": ratio_rows[:, 3].astype(int),
                "n_minus": ratio_rows[:, 4].astype(int),
            },
            cfg,
        )
    write_csv(
        outdir / "tightness.csv",
        {
            "ell": tight[:, 0],
            "p_hat": tight[:, 1],
            "wilson_upper": tight[:, 2],
            "bernstein_bound": tight[:, 3],
        },
        cfg,
    )
    write_json(
        outdir / "gc_stats.json",
        {
            "mean_w": est.value,
            "std_error": est.std_error,
            "n_samples": est.n_samples,
            "ft_slope_prediction": T / eps,
            "tightness_ok": bool(np.all(tight[:, 2] <= tight[:, 3])),
        },
        cfg,
    )
    click.echo(f"mean W = {est.value:.6f} +- {est.std_error:.6f}")


@main.command()
@click.option("--method", type=click.Choice(["mc", "spectral"]), default="spectral")
@shared_options
def scgf(method, config_path, seed, out, workers, overrides):
    """SCGF curve by Monte Carlo reweighting or the tilted-generator eigenvalue."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    run = cfg["run"]
    lams = _lambda_grid(cfg)
    try:
        if method == "spectral":
            grid = _grid_spec(model, cfg)
            curve = spectral.scgf_curve_spectral(model, run["epsilon"], lams, grid=grid)
        else:
            curve = mc.estimate_scgf(
                model,
                run["epsilon"],
                run["T"],
                run["dt"],
                lams,
                int(run["n_samples"]),
                int(run["seed"]),
                workers=int(run["workers"]),
            )
    except (sde.InvalidTimeStep, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (sde.IntegratorError, spectral.SpectralError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    cols = {"lambda": curve.lambdas, "e": curve.values, "reliable": curve.reliable.astype(int)}
    if curve.stderr is not None:
        cols["std_error"] = curve.stderr
    write_csv(outdir / f"scgf_{method}.csv", cols, cfg, {"provenance": curve.provenance})
    click.echo(f"wrote {outdir / f'scgf_{method}.csv'}")


@main.command()
@click.option("--method", type=click.Choice(["variational", "legendre"]), default="variational")
@shared_options
def rate(method, config_path, seed, out, workers, overrides):
    """Rate curve: constrained action minima, or Legendre of the spectral SCGF."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    qs = _q_grid(cfg)
    try:
        if method == "variational":
            curve = action.s_curve(
                model,
                qs,
                T_grid=cfg["grids"]["T_grid"],
                M_per_unit_T=int(cfg["grids"]["M_per_unit_T"]),
                workers=int(cfg["run"]["workers"]),
            )
            cols = {
                "q": curve.q_grid,
                "s": curve.values,
                "argmin_T": curve.columns["argmin_T"],
                "action": curve.columns["action"],
                "residual": curve.columns["residual"],
                "status": curve.columns["status"],
            }
            summary = {"ft_residual": transform.ft_residual(curve, 1.0) if _symmetric(qs) else None}
        else:
            grid = _grid_spec(model, cfg)
            eps = cfg["run"]["epsilon"]
            scgf_curve = spectral.scgf_curve_spectral(model, eps, _lambda_grid(cfg), grid=grid)
            curve = transform.legendre(scgf_curve, qs)
            cols = {
                "q": curve.q_grid,
                "rate": curve.values,
                "boundary_active": curve.boundary_active.astype(int),
                "argmax_lambda": curve.columns["argmax_lambda"],
            }
            summary = {
                "ft_residual": transform.ft_residual(curve, 1.0 / eps) if _symmetric(qs) else None,
                "convexity_residual": transform.convexity_residual(curve),
            }
    except (action.ActionError, spectral.SpectralError, transform.TransformError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    write_csv(outdir / f"rate_{method}.csv", cols, cfg, {"provenance": curve.provenance})
    write_json(outdir / f"rate_{method}.json", {"summary": summary, "metadata": curve.metadata}, cfg)
    click.echo(f"wrote {outdir / f'rate_{method}.csv'}")


def _symmetric(qs):
    return np.allclose(qs + qs[::-1], 0.0, atol=1e-12)


def _read_curve_csv(path):
    # strip the commented metadata block first: genfromtxt mis-parses comment
    # lines that themselves contain commas
    import io

    with open(path) as fh:
        body = "".join(line for line in fh if not line.startswith("#"))
    return np.genfromtxt(io.StringIO(body), delimiter=",", names=True)


@main.command("transform")
@click.option("--scgf-csv", type=click.Path(exists=True), required=True)
@shared_options
def transform_cmd(scgf_csv, config_path, seed, out, workers, overrides):
    """Legendre-transform a previously written SCGF CSV into a rate curve."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    try:
        data = _read_curve_csv(scgf_csv)
        curve = ScgfCurve(
            lambdas=np.atleast_1d(data["lambda"]),
            values=np.atleast_1d(data["e"]),
            provenance="file",
            reliable=np.atleast_1d(data["reliable"]).astype(bool)
            if "reliable" in (data.dtype.names or ())
            else None,
        )
        qs = _q_grid(cfg)
        rate_curve = transform.legendre(curve, qs)
    except (ValueError, KeyError, transform.TransformError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    eps = cfg["run"]["epsilon"]
    write_csv(
        outdir / "rate_transform.csv",
        {
            "q": rate_curve.q_grid,
            "rate": rate_curve.values,
            "boundary_active": rate_curve.boundary_active.astype(int),
        },
        cfg,
        {"provenance": rate_curve.provenance},
    )
    summary = {"ft_residual": transform.ft_residual(rate_curve, 1.0 / eps) if _symmetric(qs) else None}
    write_json(outdir / "rate_transform.json", {"summary": summary}, cfg)
    click.echo(f"wrote {outdir / 'rate_transform.csv'}")


@main.command()
@shared_options
def hitting(config_path, seed, out, workers, overrides):
    """Hitting times of the zero-noise flow into the confinement ball."""
    cfg, model, outdir = _setup(config_path, overrides, seed, workers, out)
    h = cfg["hitting"]
    R0 = model.params.get("orbit_radius", 1.0)
    K = sde.default_k_radius(model)
    rows = []
    try:
        for mult in h["radii_over_R0"]:
            y = np.array([mult * R0, 0.0])
            t = sde.hitting_time(model, y, K, h["dt"], h["T_max"])
            if t is None:
                click.echo(f"numerical failure: no hit within T_max from |y|={mult * R0}", err=True)
                sys.exit(EXIT_NUMERICAL)
            rows.append((mult * R0, t, t / (mult * R0)))
    except sde.IntegratorError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    arr = np.array(rows)
    write_csv(
        outdir / "hitting.csv",
        {"abs_y": arr[:, 0], "sigma_K": arr[:, 1], "sigma_over_y": arr[:, 2]},
        cfg,
        {"K_radius": K},
    )
    click.echo(f"wrote {outdir / 'hitting.csv'}")


if __name__ == "__main__":
    main()
