#!/usr/bin/env python3
"""Martingale tail frequencies against the Bernstein bound
2 exp(-l^2 T / (2 eps B)) for a grid of thresholds and (eps, T) pairs.

Each cell simulates n trajectories; Wilson upper confidence limits are
compared with the bound.  Writes tightness.csv.
"""
import argparse
import itertools
import pathlib

import numpy as np

from gcpower import mc, models
from gcpower.cli import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("out"))
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.5, 1.0])
    ap.add_argument("--horizons", type=float, nargs="+", default=[4.0, 8.0])
    ap.add_argument("--dt", type=float, default=0.002)
    ap.add_argument("--n-samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20260823)
    args = ap.parse_args()

    model = models.builtin("circle_double_well")
    out_rows = []
    for eps, T in itertools.product(args.epsilons, args.horizons):
        rows = mc.tightness_check(
            model,
            eps,
            T,
            dt=args.dt,
            ell_grid=mc.default_ell_grid(model, eps, T),
            n_samples=args.n_samples,
            seed=args.seed,
        )
        for ell, p_hat, upper, bound in rows:
            out_rows.append((eps, T, ell, p_hat, upper, bound))
            status = "ok" if upper <= bound else "VIOLATED"
        print(f"eps={eps} T={T}: worst slack "
              f"{min(b - u for *_, u, b in rows):.3e} [{status}]")
    args.out.mkdir(parents=True, exist_ok=True)
    data = np.array(out_rows)
    cfg = {"run": {"seed": args.seed}} | {
        k: v for k, v in vars(args).items() if k != "out"
    }
    write_csv(
        args.out / "tightness.csv",
        dict(
            zip(
                ["epsilon", "T", "ell", "p_hat", "wilson_upper", "bernstein_bound"],
                data.T,
            )
        ),
        cfg,
    )


if __name__ == "__main__":
    main()
