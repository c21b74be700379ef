"""Command-line entry points: twin, sweep, qmc and smoother subcommands."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from . import filters, harness
from .core import ObservationModel


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="experiment config file")
    parser.add_argument("--seed", type=int, default=None, help="override RNG seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def _load(args):
    cfg = harness.load_config(args.config) if args.config else harness.default_l63_config()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_twin(args):
    cfg = _load(args)
    summary = harness.run_twin_experiment(cfg, out_dir=args.out)
    print(json.dumps({
        "rmse": summary.rmse,
        "mean_ess": summary.mean_ess,
        "cycles_run": summary.cycles_run,
        "diverged": summary.diverged,
        "wall_time_s": summary.wall_time_s,
        "csv": summary.csv_path,
    }, indent=2))
    return 0


def cmd_sweep(args):
    cfg = _load(args)
    values = [float(v) for v in args.values.split(",")] if args.values else None
    results = harness.sweep_parameter(cfg, values=values, out_dir=args.out)
    best_value, best_rmse = harness.best_sweep_rmse(results)
    for value, summary in results:
        flag = " (diverged)" if summary.diverged else ""
        print(f"param={value:g} rmse={summary.rmse:.6g}{flag}")
    print(f"best: param={best_value} rmse={best_rmse:.6g}")
    return 0


def cmd_qmc(args):
    seed = args.seed if args.seed is not None else 0
    result = harness.qmc_single_step_experiment(
        m_ref=2**args.log2_ref, seed=seed, out_dir=args.out)
    for row in result["table"]:
        print(f"M={row['m']:6d} etpf_mean={row['etpf_mean']:.3e} "
              f"resample_mean={row['resample_mean']:.3e}")
    print(json.dumps({k: float(v) for k, v in result["slopes"].items()}, indent=2))
    return 0


def cmd_smoother(args):
    # scalar linear-Gaussian demo problem: z' = a z, obs of z with variance r
    seed = args.seed if args.seed is not None else 0
    a, r, n_obs = args.decay, args.obs_variance, args.n_obs
    prior_mean, prior_var = 0.0, 1.0
    om = ObservationModel(r_diag=np.array([r]), obs_indices=np.array([0]))
    rng = filters.rng_stream(seed, 0)
    truth0 = prior_mean + np.sqrt(prior_var) * rng.standard_normal()
    obs_seq = [a ** (n + 1) * truth0 + np.sqrt(r) * rng.standard_normal()
               for n in range(n_obs)]

    step = lambda z: a * z
    is_result = harness.path_importance_sampler(
        step,
        lambda n, g: prior_mean + np.sqrt(prior_var) * g.standard_normal((1, n)),
        obs_seq, om, args.members, filters.rng_stream(seed, 1))
    is_mean = float(is_result["paths"][0][0] @ is_result["weights"])

    mcmc_result = harness.mcmc_path_sampler(
        step, lambda z: -0.5 * (z[0] - prior_mean) ** 2 / prior_var,
        obs_seq, om, proposal_std=1.0, n_samples=args.members,
        rng=filters.rng_stream(seed, 2), z0_init=np.array([prior_mean]))
    print(json.dumps({
        "importance_mean": is_mean,
        "importance_ess": float(is_result["ess"]),
        "mcmc_mean": float(mcmc_result["samples"][:, 0].mean()),
        "mcmc_acceptance": mcmc_result["acceptance_rate"],
    }, indent=2))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="letf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_twin = sub.add_parser("twin", help="run a single twin experiment")
    _add_common(p_twin)
    p_twin.set_defaults(func=cmd_twin)

    p_sweep = sub.add_parser("sweep", help="sweep the filter's tunable parameter")
    _add_common(p_sweep)
    p_sweep.add_argument("--values", help="comma-separated parameter values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_qmc = sub.add_parser("qmc", help="QMC single-step convergence study")
    _add_common(p_qmc)
    p_qmc.add_argument("--log2-ref", type=int, default=22,
                       help="log2 of the reference sample size")
    p_qmc.set_defaults(func=cmd_qmc)

    p_smoother = sub.add_parser("smoother", help="path-space IS and MCMC baselines")
    _add_common(p_smoother)
    p_smoother.add_argument("--members", type=int, default=2000)
    p_smoother.add_argument("--decay", type=float, default=0.9)
    p_smoother.add_argument("--obs-variance", type=float, default=0.5)
    p_smoother.add_argument("--n-obs", type=int, default=2)
    p_smoother.set_defaults(func=cmd_smoother)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
