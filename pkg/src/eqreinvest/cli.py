"""Command-line front end: solve, check, simulate, sweep, reproduce.

Every run writes a manifest.json next to its outputs with the resolved
config snapshot; re-running a subcommand from that manifest reproduces
the data files byte-identically (timings aside).

Exit codes: 0 ok, 1 config error, 2 solver blow-up, 3 admissibility failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import __version__
from .config import ConfigError, build_model, load_config, model_to_config_dict
from .csvio import (
    fmt,
    write_admissibility_csv,
    write_csv,
    write_g_csv,
    write_simulation_csv,
    write_strategy_csv,
)
from .model import HestonParams, InsuranceParams, ValidationError, validate_config
from .montecarlo import estimate_reward, simulate_paths
from .odes import BlowUpError, solve_g
from .presets import CASES, XI, baseline_model
from .strategy import (
    check_admissibility,
    equilibrium_strategy,
    q_hat as strategy_q_hat,
    regime_classification,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_ADMISSIBILITY = 3

SWEEPABLE = {
    "eta1": "ins", "eta2": "ins", "lambda1": "ins", "mu1": "ins", "mu2": "ins",
    "r": "heston", "xi": "heston", "kappa": "heston", "theta": "heston",
    "sigma": "heston", "rho": "heston", "v0": "heston",
}

REPRODUCE_SWEEPS = {
    # figure id -> (param, values, observable, heston overrides)
    "fig1": ("r", [0.03, 0.05, 0.07], "pi_hat", {}),
    "fig2": ("xi", [0.3, XI, 0.6], "pi_hat", {}),
    "fig31": ("kappa", [4.0, 5.0, 6.0], "pi_diff", {"rho": -0.5}),
    "fig32": ("kappa", [4.0, 5.0, 6.0], "pi_diff", {"rho": 0.5}),
    "fig41": ("sigma", [0.15, 0.25, 0.35], "pi_diff", {"rho": -0.5}),
    "fig42": ("sigma", [0.15, 0.25, 0.35], "pi_diff", {"rho": 0.5}),
    "fig51": ("rho", [-0.5, 0.0, 0.5], "pi_diff", {}),
    "fig7": ("r", [0.03, 0.05, 0.07], "q_hat", {}),
    "fig8": ("eta2", [0.4, 0.5, 0.6], "q_hat", {}),
    "fig9": ("lambda1", [0.5, 1.0, 2.0], "q_hat", {}),
    "fig10": ("mu1", [0.08, 0.1, 0.12], "q_hat", {}),
    "fig11": ("mu2", [0.15, 0.2, 0.25], "q_hat", {}),
}


def _valid_case_ids():
    ids = []
    for fig in REPRODUCE_SWEEPS:
        for horizon in ("T10", "T100"):
            for case in ("caseI", "caseII"):
                ids.append(f"{fig}/{horizon}/{case}")
    return ids


def _parse_value(token):
    if "/" in token:
        return float(Fraction(token))
    return float(token)


def _override_model(model, param, value):
    kind = SWEEPABLE[param]
    if kind == "ins":
        ins = InsuranceParams(**{**model.ins.__dict__, param: value})
        return validate_config(ins, model.heston, model.dist, model.horizon)
    heston = HestonParams(**{**model.heston.__dict__, param: value})
    return validate_config(model.ins, heston, model.dist, model.horizon)


def _write_manifest(outdir, subcommand, config_dict, flags, timings):
    manifest = {
        "tool": "eqreinvest",
        "version": __version__,
        "subcommand": subcommand,
        "out": os.path.abspath(outdir),
        "config": config_dict,
        "flags": flags,
        "timings": timings,
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_model(args):
    """Model + seed + flags, from --from-manifest or --config."""
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        cfg = dict(manifest["config"])
        model, seed = build_model(cfg)
        return model, seed, manifest.get("flags", {})
    if not args.config:
        raise ConfigError("--config (or --from-manifest) is required")
    model, seed = load_config(args.config)
    return model, seed, {}


def cmd_solve(args):
    t0 = time.perf_counter()
    model, seed, _ = _resolve_model(args)
    timings = {"validate": time.perf_counter() - t0}

    t0 = time.perf_counter()
    gsol = solve_g(model)
    timings["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spath = equilibrium_strategy(model, gsol)
    regime = regime_classification(model)
    os.makedirs(args.out, exist_ok=True)
    write_g_csv(os.path.join(args.out, "g_functions.csv"), model, gsol)
    write_strategy_csv(os.path.join(args.out, "strategy.csv"), spath)
    with open(os.path.join(args.out, "regime.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "retention_ratio": regime.ratio,
                "crossover_time_to_maturity": regime.crossover_tau,
                "reinsurance_throughout": regime.reinsurance_throughout,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    timings["emit"] = time.perf_counter() - t0
    _write_manifest(args.out, "solve", model_to_config_dict(model, seed), {}, timings)
    return EXIT_OK


def cmd_check(args):
    t0 = time.perf_counter()
    model, seed, _ = _resolve_model(args)
    gsol = solve_g(model)
    report = check_admissibility(model, gsol)
    timings = {"check": time.perf_counter() - t0}
    os.makedirs(args.out, exist_ok=True)
    write_admissibility_csv(os.path.join(args.out, "admissibility.csv"), model, report)
    _write_manifest(args.out, "check", model_to_config_dict(model, seed), {}, timings)
    if not report.passed:
        print(
            f"admissibility FAILED: first violation atom={report.first_violation[0]} "
            f"grid_index={report.first_violation[1]} (max lhs {report.max_lhs:.6g} "
            f"vs rhs {report.rhs:.6g})",
            file=sys.stderr,
        )
        return EXIT_ADMISSIBILITY
    print(f"admissibility passed (max lhs {report.max_lhs:.6g} vs rhs {report.rhs:.6g})")
    return EXIT_OK


def _parse_strategy_flag(model, token):
    if token == "equilibrium":
        return equilibrium_strategy(model, solve_g(model))
    if token == "zero":
        return "zero"
    if token.startswith("const:"):
        parts = token[len("const:"):].split(",")
        if len(parts) != 2:
            raise ConfigError(f"const strategy must be const:q,pi, got {token!r}")
        return (_parse_value(parts[0]), _parse_value(parts[1]))
    raise ConfigError(f"unknown strategy {token!r}")


def cmd_simulate(args):
    t0 = time.perf_counter()
    model, seed, saved_flags = _resolve_model(args)
    flags = dict(saved_flags)
    if args.paths is not None:
        flags["paths"] = args.paths
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.horizon is not None:
        flags["horizon"] = args.horizon
    if args.strategy is not None:
        flags["strategy"] = args.strategy
    flags.setdefault("paths", 10000)
    flags.setdefault("seed", seed)
    flags.setdefault("strategy", "equilibrium")
    if "horizon" in flags and flags["horizon"] != model.horizon.T:
        # keep the grid step, rescale the number of steps
        step = model.horizon.l
        T = float(flags["horizon"])
        from .model import Horizon

        hz = Horizon(T=T, M=max(1, int(round(T / step))), x0=model.horizon.x0)
        model = validate_config(model.ins, model.heston, model.dist, hz)
    strategy = _parse_strategy_flag(model, flags["strategy"])
    batch = simulate_paths(model, strategy, int(flags["paths"]), int(flags["seed"]))
    result = estimate_reward(model, batch)
    timings = {"simulate": time.perf_counter() - t0}
    os.makedirs(args.out, exist_ok=True)
    write_simulation_csv(os.path.join(args.out, "simulation.csv"), result)
    _write_manifest(args.out, "simulate", model_to_config_dict(model, flags["seed"]), flags, timings)
    return EXIT_OK


def _sweep_cell(model, param, value, observable):
    cell = _override_model(model, param, value)
    grid = cell.horizon.grid()
    if observable == "q_hat":
        # analytic, no ODE solve needed
        return grid, strategy_q_hat(cell, grid)
    spath = equilibrium_strategy(cell, solve_g(cell))
    return grid, spath.pi_hat


def run_sweep(model, param, values, observable, threads=1):
    """Evaluate the observable over the parameter grid.

    Returns rows (param, value, t, observable, result). In pi_diff mode
    the first value is the baseline and rows hold pi_hat(t; value) -
    pi_hat(t; baseline) for the remaining values.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    if observable not in ("q_hat", "pi_hat", "pi_diff"):
        raise ConfigError(f"unknown observable {observable!r}")
    base_obs = "pi_hat" if observable == "pi_diff" else observable
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        cells = list(
            pool.map(lambda v: _sweep_cell(model, param, v, base_obs), values)
        )
    rows = []
    if observable == "pi_diff":
        grid0, baseline = cells[0]
        for value, (grid, curve) in zip(values[1:], cells[1:]):
            for t, dv in zip(grid, curve - baseline):
                rows.append((param, value, t, "pi_hat_diff", dv))
    else:
        for value, (grid, curve) in zip(values, cells):
            for t, obs in zip(grid, curve):
                rows.append((param, value, t, observable, obs))
    return rows


def cmd_sweep(args):
    t0 = time.perf_counter()
    model, seed, saved_flags = _resolve_model(args)
    flags = dict(saved_flags)
    if args.param is not None:
        flags["param"] = args.param
    if args.values is not None:
        flags["values"] = args.values
    if args.observable is not None:
        flags["observable"] = args.observable
    for key in ("param", "values", "observable"):
        if key not in flags:
            raise ConfigError(f"sweep requires --{key}")
    values = (
        [_parse_value(tok) for tok in flags["values"].split(",")]
        if isinstance(flags["values"], str)
        else [float(v) for v in flags["values"]]
    )
    rows = run_sweep(model, flags["param"], values, flags["observable"], threads=args.threads)
    timings = {"sweep": time.perf_counter() - t0}
    os.makedirs(args.out, exist_ok=True)
    write_csv(
        os.path.join(args.out, "sweep.csv"),
        ["param", "value", "t", "observable", "result"],
        rows,
    )
    _write_manifest(args.out, "sweep", model_to_config_dict(model, seed), flags, timings)
    return EXIT_OK


def cmd_reproduce(args):
    case_id = args.case
    parts = case_id.split("/")
    valid = _valid_case_ids()
    if case_id not in valid:
        print(
            f"unknown case id {case_id!r}; valid ids:\n" + "\n".join(valid),
            file=sys.stderr,
        )
        return EXIT_CONFIG
    fig, horizon_tag, case = parts
    param, values, observable, overrides = REPRODUCE_SWEEPS[fig]
    T = 10.0 if horizon_tag == "T10" else 100.0
    t0 = time.perf_counter()
    model = baseline_model(case=case, T=T, **overrides)
    rows = run_sweep(model, param, values, observable, threads=args.threads)
    timings = {"reproduce": time.perf_counter() - t0}
    os.makedirs(args.out, exist_ok=True)
    name = case_id.replace("/", "_") + ".csv"
    write_csv(
        os.path.join(args.out, name),
        ["param", "value", "t", "observable", "result"],
        rows,
    )
    _write_manifest(
        args.out,
        "reproduce",
        model_to_config_dict(model, 0),
        {"case": case_id, "param": param, "values": values, "observable": observable},
        timings,
    )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eqreinvest",
        description="Equilibrium reinsurance and investment strategies under "
        "stochastic volatility with randomly distributed risk aversion.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--from-manifest", help="re-run from a previously written manifest")

    p = sub.add_parser("solve", help="solve the exponent ODEs and emit strategy CSVs")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="evaluate the admissibility condition")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of utilities and reward")
    common(p)
    p.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    p.add_argument("--horizon", type=float, help="override horizon T, keeping the grid step")
    p.add_argument(
        "--strategy",
        help="equilibrium | zero | const:q,pi",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep of an observable")
    common(p)
    p.add_argument("--param", help="parameter name to sweep")
    p.add_argument("--values", help="comma-separated values (rationals allowed)")
    p.add_argument("--observable", help="q_hat | pi_hat | pi_diff")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="emit the data behind a benchmark figure")
    common(p)
    p.add_argument("--case", required=True, help="e.g. fig7/T10/caseI")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
