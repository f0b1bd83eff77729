"""Command-line entry point: config parsing, subcommand dispatch, reports.

Subcommands: simulate | inflate | prob-strichartz | remainder |
gibbs-invariance | quasi-moments | regularized-convergence | picard.
Each reads one JSON config, runs the corresponding experiment, and writes
report.csv (RFC 4180) plus report.json into the output directory.

Exit codes: 0 when every verdict passes, 2 on a verdict failure, 1 on any
error (bad config, runtime failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import energy
from .errors import ConfigError, ConstraintViolation, NlwaveError, UnknownKey
from .experiments import (
    ExperimentReport,
    InflationConfig,
    make_base_pair,
    run_gibbs_invariance,
    run_inflation,
    run_prob_strichartz,
    run_quasi_moments,
    run_regularized_convergence,
    run_remainder_growth,
)
from .propagator import TimeGrid, picard_iterate
from .randomize import CoefficientDistribution, SeedSpec, randomize_pair, sample_mu_sd
from .snapshots import write_state
from .solver import SolveConfig, evolve_split
from .spectral import BumpSpec, ModeGrid, SpectralField, StatePair, sobolev_norm

__all__ = ["main", "parse_config", "run"]


# ---------------------------------------------------------------------------
# config schemas
# ---------------------------------------------------------------------------

def _positive(name):
    def check(v):
        if v <= 0:
            raise ConstraintViolation(f"{name} must be positive, got {v}")
    return check


def _in_range(name, lo, hi):
    def check(v):
        if not lo < v < hi:
            raise ConstraintViolation(f"{name} must lie in ({lo}, {hi}), got {v}")
    return check


_REQUIRED = object()

_SCHEMAS = {
    "simulate": {
        "dim": (int, 3, None),
        "modes": (int, 16, _positive("modes")),
        "T": (float, 1.0, _positive("T")),
        "dt": (float, 1e-2, _positive("dt")),
        "sample_every": (int, 10, _positive("sample_every")),
        "data": (dict, {"kind": "zero"}, None),
        "snapshots": (bool, False, None),
    },
    "picard": {
        "dim": (int, 3, None),
        "modes": (int, 16, _positive("modes")),
        "T": (float, 0.2, _positive("T")),
        "steps": (int, 128, _positive("steps")),
        "k_max": (int, 6, _positive("k_max")),
        "data": (dict, {"kind": "zero"}, None),
    },
    "inflate": {
        "s": (float, 0.3, _in_range("s", 0.0, 0.5)),
        "delta1": (float, 0.1, _positive("delta1")),
        "delta2": (float, 0.4, _positive("delta2")),
        "n_list": (list, [4, 8, 16, 32], None),
        "dim": (int, 3, None),
        "pde_compare": (bool, False, None),
        "pde_n_list": (list, [4, 8], None),
        "pde_modes": (int, 64, _positive("pde_modes")),
        "pde_dt": (float, 2e-3, _positive("pde_dt")),
        "closed_form_bandwidth": (float, 12.0, _positive("closed_form_bandwidth")),
    },
    "prob-strichartz": {
        "s": (float, 0.4, _in_range("s", 0.0, 1.0)),
        "dist": (str, "gaussian", None),
        "p_list": (list, [2, 4, 8, 16, 32, 64], None),
        "p1": (float, 2.0, _positive("p1")),
        "p2": (float, 6.0, _positive("p2")),
        "delta": (float, 1.6, _positive("delta")),
        "samples": (int, 1000, _positive("samples")),
        "modes": (int, 32, _positive("modes")),
        "dim": (int, 3, None),
        "t_max": (float, 16.0, _positive("t_max")),
        "slope_bound": (float, 0.6, _positive("slope_bound")),
    },
    "remainder": {
        "s": (float, 0.4, _in_range("s", 0.0, 1.0)),
        "samples": (int, 20, _positive("samples")),
        "T": (float, 50.0, _positive("T")),
        "modes": (int, 32, _positive("modes")),
        "dim": (int, 3, None),
        "dt": (float, 0.025, _positive("dt")),
        "sample_every": (int, 10, _positive("sample_every")),
        "q": (float, 8.0, _positive("q")),
        "dist": (str, "gaussian", None),
    },
    "gibbs-invariance": {
        "alpha": (float, 2.0, _in_range("alpha", 0.0, 4.0)),
        "N": (int, 32, _positive("N")),
        "t": (float, 1.0, None),
        "samples": (int, 5000, _positive("samples")),
        "modes": (int, 64, _positive("modes")),
        "dt": (float, 0.01, _positive("dt")),
        "nonlinear": (bool, True, None),
    },
    "quasi-moments": {
        "N_list": (list, [16, 32, 64], None),
        "r": (float, None, None),
        "p_list": (list, [2, 4, 8, 16, 32], None),
        "samples": (int, 10000, _positive("samples")),
        "modes": (int, 128, _positive("modes")),
        "pilot": (int, 400, _positive("pilot")),
        "r_quantile": (float, 0.5, _in_range("r_quantile", 0.0, 1.0)),
    },
    "regularized-convergence": {
        "s": (float, 0.3, _in_range("s", 0.0, 0.5)),
        "n_list": (list, [4, 8, 16, 32], None),
        "T": (float, 1.0, _positive("T")),
        "modes": (int, 64, _positive("modes")),
        "dim": (int, 3, None),
        "dt": (float, 0.01, _positive("dt")),
        "families": (list, ["sharp", "fejer"], None),
        "dist": (str, "gaussian", None),
    },
}


def parse_config(path, subcommand: str) -> dict:
    """Load and strictly validate a JSON experiment config.

    Unknown keys are errors; types are checked against the schema; defaults
    fill unspecified keys.  Cross-field constraints (like delta1 < delta2)
    are enforced here so failures surface before any computation.
    """
    schema = _SCHEMAS[subcommand]
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in schema:
            raise UnknownKey(f"unknown config key {key!r} for {subcommand!r}")
    out = {}
    for key, (typ, default, validator) in schema.items():
        if key in raw:
            val = raw[key]
            if typ is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if val is not None and not isinstance(val, typ):
                raise TypeError(f"config key {key!r} expects {typ.__name__}, "
                                f"got {type(val).__name__}")
            if isinstance(val, bool) and typ is not bool:
                raise TypeError(f"config key {key!r} expects {typ.__name__}, got bool")
        else:
            if default is _REQUIRED:
                raise ConfigError(f"missing required config key {key!r}")
            val = default
        if validator is not None and val is not None:
            validator(val)
        out[key] = val
    if subcommand == "inflate" and out["delta1"] >= out["delta2"]:
        raise ConstraintViolation(
            f"delta1 must be < delta2, got delta1={out['delta1']}, delta2={out['delta2']}")
    return out


# ---------------------------------------------------------------------------
# simulate / picard helpers
# ---------------------------------------------------------------------------

def _build_data(spec: dict, grid: ModeGrid, seed: int) -> StatePair:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return StatePair.zeros(grid)
    if kind == "constant":
        return StatePair(SpectralField.constant(grid, float(spec.get("u", 1.0))),
                         SpectralField.constant(grid, float(spec.get("v", 0.0))))
    if kind == "random-smooth":
        base = make_base_pair(grid, float(spec.get("decay", 2.0)),
                              amplitude=float(spec.get("amplitude", 1.0)))
        return randomize_pair(base, CoefficientDistribution("gaussian"),
                              SeedSpec(seed, "simulate-data"))
    if kind == "mu":
        return sample_mu_sd(float(spec.get("s", 0.4)), grid.dim, grid,
                            SeedSpec(seed, "simulate-data"))
    raise ConstraintViolation(f"unknown data kind {kind!r}")


def _simulate(cfg: dict, outdir: Path, seed: int, threads: int) -> ExperimentReport:
    grid = ModeGrid(cfg["dim"], cfg["modes"])
    state = _build_data(cfg["data"], grid, seed)
    report = ExperimentReport("simulate", cfg, seed)
    scfg = SolveConfig(dt=cfg["dt"])
    rows = []

    def observer(t: float, st: StatePair) -> None:
        step = round(t / cfg["dt"])
        if step % cfg["sample_every"] and t != cfg["T"]:
            return
        rows.append({"t": t, "H": energy(st),
                     "u_h1": sobolev_norm(st.u, 1.0),
                     "v_l2": sobolev_norm(st.v, 0.0)})
        if cfg["snapshots"]:
            write_state(st, outdir / f"state_{len(rows) - 1:05d}.snap")

    final = evolve_split(state, cfg["T"], scfg, observer=observer)
    report.rows = rows
    drift = abs(rows[-1]["H"] - rows[0]["H"]) / max(rows[0]["H"], 1e-300)
    report.metadata["relative_H_drift"] = drift
    report.add_verdict("finite_fields", final.is_finite(), "")
    return report


def _picard(cfg: dict, outdir: Path, seed: int, threads: int) -> ExperimentReport:
    grid = ModeGrid(cfg["dim"], cfg["modes"])
    state = _build_data(cfg["data"], grid, seed)
    report = ExperimentReport("picard", cfg, seed)
    tg = TimeGrid(0.0, cfg["T"], cfg["steps"], "trapezoid")
    traj = picard_iterate(state, cfg["k_max"], tg)
    prev = None
    for k, d in enumerate(traj.diffs, start=1):
        ratio = d / prev if (prev and prev > 0) else float("nan")
        report.rows.append({"k": k, "update_h1": d, "ratio": ratio})
        prev = d
    tail = [r["ratio"] for r in report.rows[2:] if math.isfinite(r["ratio"])]
    geom = bool(tail) and all(r < 1.0 for r in tail)
    report.add_verdict("updates_contract", geom,
                       f"update ratios {[round(r['ratio'], 4) for r in report.rows]}")
    return report


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _dispatch(subcommand: str, cfg: dict, outdir: Path, seed: int,
              threads: int) -> ExperimentReport:
    if subcommand == "simulate":
        return _simulate(cfg, outdir, seed, threads)
    if subcommand == "picard":
        return _picard(cfg, outdir, seed, threads)
    if subcommand == "inflate":
        icfg = InflationConfig(
            s=cfg["s"], delta1=cfg["delta1"], delta2=cfg["delta2"],
            n_list=tuple(cfg["n_list"]), dim=cfg["dim"],
            pde_compare=cfg["pde_compare"], pde_n_list=tuple(cfg["pde_n_list"]),
            pde_modes=cfg["pde_modes"], pde_dt=cfg["pde_dt"],
            closed_form_bandwidth=cfg["closed_form_bandwidth"])
        return run_inflation(icfg, seed=seed, threads=threads)
    if subcommand == "prob-strichartz":
        return run_prob_strichartz(
            s=cfg["s"], dist_family=cfg["dist"], p_list=cfg["p_list"],
            p1=cfg["p1"], p2=cfg["p2"], delta=cfg["delta"],
            samples=cfg["samples"], seed=seed, modes=cfg["modes"],
            dim=cfg["dim"], t_max=cfg["t_max"], slope_bound=cfg["slope_bound"],
            threads=threads)
    if subcommand == "remainder":
        return run_remainder_growth(
            s=cfg["s"], samples=cfg["samples"], T=cfg["T"], seed=seed,
            modes=cfg["modes"], dim=cfg["dim"], dt=cfg["dt"],
            sample_every=cfg["sample_every"], q=cfg["q"],
            dist_family=cfg["dist"], threads=threads)
    if subcommand == "gibbs-invariance":
        return run_gibbs_invariance(
            alpha=cfg["alpha"], N=cfg["N"], t=cfg["t"], samples=cfg["samples"],
            seed=seed, modes=cfg["modes"], dt=cfg["dt"],
            nonlinear=cfg["nonlinear"], threads=threads)
    if subcommand == "quasi-moments":
        return run_quasi_moments(
            N_list=cfg["N_list"], r=cfg["r"], p_list=cfg["p_list"],
            samples=cfg["samples"], seed=seed, modes=cfg["modes"],
            pilot=cfg["pilot"], r_quantile=cfg["r_quantile"], threads=threads)
    if subcommand == "regularized-convergence":
        return run_regularized_convergence(
            s=cfg["s"], n_list=cfg["n_list"], T=cfg["T"], seed=seed,
            modes=cfg["modes"], dim=cfg["dim"], dt=cfg["dt"],
            families=cfg["families"], dist_family=cfg["dist"], threads=threads)
    raise ConfigError(f"unknown subcommand {subcommand!r}")


def run(subcommand: str, config_path, out_dir, seed: int = 0, threads: int = 1,
        force: bool = False, verbose: bool = False) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        cfg = parse_config(config_path, subcommand)
        outdir = Path(out_dir)
        if outdir.exists() and (outdir / "report.json").exists() and not force:
            raise ConfigError(
                f"output directory {outdir} already holds a report (use --force)")
        outdir.mkdir(parents=True, exist_ok=True)
        report = _dispatch(subcommand, cfg, outdir, seed, threads)
        report.metadata["library_version"] = __version__
        report.metadata["threads_hint"] = "outputs are independent of --threads"
        report.write(outdir)
        if verbose:
            for v in report.verdicts:
                status = "PASS" if v["passed"] else "FAIL"
                print(f"[{status}] {v['criterion']}: {v['detail']}", file=sys.stderr)
            print(f"wall clock: {report.wall_clock:.1f}s", file=sys.stderr)
        return 0 if report.passed else 2
    except (NlwaveError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlwave",
        description="Wave-equation simulator and statistical experiment runner")
    parser.add_argument("subcommand", choices=sorted(_SCHEMAS.keys()))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("--force", action="store_true",
                        help="allow overwriting an existing report directory")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.out, seed=args.seed,
               threads=args.threads, force=args.force, verbose=args.verbose)


if __name__ == "__main__":
    raise SystemExit(main())
