"""Command-line driver: JSON experiment configs in, JSON/CSV artifacts out.

Subcommands: design, simulate, compare, sweep-theta, sweep-lambda, tune.
Exit codes: 0 success, 1 malformed config, 2 assumption violation,
3 solver non-convergence. The WDRC_NUM_THREADS environment variable sets the
default Monte Carlo thread count; outputs do not depend on it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import design as design_mod
from . import serialize, sim
from .exceptions import AssumptionViolated, ConfigError, NoAdmissibleLambda, NoConvergence
from .model import (
    DisturbanceModel,
    distribution_from_json,
    empirical_moments,
    NominalMoments,
    synthetic_power_grid,
    system_from_json,
    weights_from_json,
    zoh_discretize,
    build_power_system,
    ring_chords_laplacian,
)

__all__ = ["ExperimentConfig", "run_experiment", "emit_outputs", "main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSUMPTION = 2
EXIT_NO_CONVERGENCE = 3

SUMMARY_HEADER = ["method", "runs", "mean_cost", "std_cost", "wall_time_s"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description; exactly one of lam/theta is set."""

    system: object
    weights: object
    truth: DisturbanceModel
    x0: Optional[DisturbanceModel]
    nominal: NominalMoments
    lam: Optional[float]
    theta: Optional[float]
    lambda_grid: Optional[np.ndarray]
    thetas: Optional[list]
    sample_sizes: Optional[list]
    dataset_draws: int
    horizon: int
    runs: int
    seed: int
    traces: int
    method: str
    out_dir: str
    digest: str
    raw: dict


def _require(obj, key, path):
    if key not in obj:
        raise ConfigError("%s.%s" % (path, key) if path else key, "missing required key")
    return obj[key]


def _build_system(raw, path="system"):
    if "power_grid" in raw:
        g = raw["power_grid"]
        n_gen = int(_require(g, "n_gen", path + ".power_grid"))
        observed = int(g.get("observed_gens", n_gen))
        dt = float(g.get("dt", 0.1))
        try:
            if "inertia" in g or "damping" in g or "laplacian" in g:
                lap = g.get("laplacian")
                system, weights = build_power_system(
                    n_gen,
                    g.get("inertia", np.ones(n_gen)),
                    g.get("damping", np.ones(n_gen)),
                    ring_chords_laplacian(n_gen) if lap is None else lap,
                    observed,
                    measurement_cov=g.get("M"),
                    m0=g.get("m0"),
                    M0=g.get("M0"),
                )
                A_d, B_d = zoh_discretize(system.A, system.B, dt)
                system = system.replace(A=A_d, B=B_d)
            else:
                system, weights = synthetic_power_grid(
                    n_gen, observed, dt,
                    measurement_cov=g.get("M"), m0=g.get("m0"), M0=g.get("M0"),
                )
        except ValueError as exc:
            raise ConfigError(path + ".power_grid", str(exc))
        return system, weights
    try:
        return system_from_json(raw), None
    except KeyError as exc:
        raise ConfigError(path, "missing matrix %s" % exc)
    except ValueError as exc:
        raise ConfigError(path, str(exc))


def _build_nominal(raw, truth, seed, jitter, path="nominal"):
    if "mean" in raw or "cov" in raw:
        try:
            return NominalMoments(w_hat=_require(raw, "mean", path),
                                  sigma_hat=_require(raw, "cov", path))
        except ValueError as exc:
            raise ConfigError(path, str(exc))
    if "samples" in raw:
        try:
            return empirical_moments(raw["samples"], jitter=raw.get("jitter", jitter))
        except ValueError as exc:
            raise ConfigError(path + ".samples", str(exc))
    if "sample_count" in raw:
        count = int(raw["sample_count"])
        if count < 1:
            raise ConfigError(path + ".sample_count", "must be >= 1")
        # dedicated substream so the nominal does not perturb simulation draws
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
        samples = np.atleast_2d(truth.sample(rng, count))
        return empirical_moments(samples, jitter=raw.get("jitter", jitter))
    raise ConfigError(path, "expected one of: (mean, cov) | samples | sample_count")


def load_config(path, overrides=None):
    """Parse and validate a config file, applying CLI overrides."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", "cannot read %s: %s" % (path, exc))
    except json.JSONDecodeError as exc:
        raise ConfigError("config", "invalid JSON at line %d column %d: %s"
                          % (exc.lineno, exc.colno, exc.msg))
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")

    overrides = overrides or {}
    if overrides.get("lam") is not None and overrides.get("theta") is not None:
        raise ConfigError("config", "pass at most one of --lambda and --theta")
    if overrides.get("lam") is not None:
        raw["lambda"] = overrides["lam"]
        raw.pop("theta", None)
    if overrides.get("theta") is not None:
        raw["theta"] = overrides["theta"]
        raw.pop("lambda", None)
    for key in ("seed", "runs", "horizon", "out_dir"):
        if overrides.get(key) is not None:
            raw[key] = overrides[key]

    system, default_weights = _build_system(_require(raw, "system", ""))
    if "weights" in raw:
        try:
            weights = weights_from_json(raw["weights"])
        except KeyError as exc:
            raise ConfigError("weights", "missing matrix %s" % exc)
        except ValueError as exc:
            raise ConfigError("weights", str(exc))
    elif default_weights is not None:
        weights = default_weights
    else:
        raise ConfigError("weights", "missing required key")

    try:
        truth = distribution_from_json(_require(raw, "truth", ""), "truth")
    except ValueError as exc:
        raise ConfigError("truth", str(exc))
    x0 = None
    if raw.get("x0") is not None:
        try:
            x0 = distribution_from_json(raw["x0"], "x0")
        except ValueError as exc:
            raise ConfigError("x0", str(exc))

    has_lam = raw.get("lambda") is not None
    has_theta = raw.get("theta") is not None
    if has_lam == has_theta:
        raise ConfigError("lambda/theta", "exactly one of 'lambda' or 'theta' must be set")
    lam = float(raw["lambda"]) if has_lam else None
    theta = float(raw["theta"]) if has_theta else None
    if lam is not None and lam <= 0:
        raise ConfigError("lambda", "must be positive")
    if theta is not None and theta < 0:
        raise ConfigError("theta", "must be nonnegative")

    seed = int(raw.get("seed", 0))
    jitter = float(raw.get("jitter", 1e-8))
    nominal = _build_nominal(_require(raw, "nominal", ""), truth, seed, jitter)

    grid = None
    if raw.get("lambda_grid") is not None:
        g = raw["lambda_grid"]
        if isinstance(g, dict):
            grid = design_mod.default_lambda_grid(
                system, weights, points=int(g.get("points", 40)),
                lam_hi=float(g.get("hi", 1e6)))
        else:
            grid = np.asarray(g, dtype=float)
            if grid.ndim != 1 or grid.size == 0:
                raise ConfigError("lambda_grid", "must be a nonempty list of penalties")

    horizon = int(raw.get("horizon", 100))
    runs = int(raw.get("runs", 100))
    if horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    if runs < 1:
        raise ConfigError("runs", "must be >= 1")
    method = str(raw.get("method", "WDRC")).upper()
    if method not in ("WDRC", "LQG"):
        raise ConfigError("method", "must be WDRC or LQG")

    hashed = {k: v for k, v in raw.items() if k not in ("out_dir", "traces")}
    digest = hashlib.sha256(
        json.dumps(hashed, sort_keys=True, default=str).encode()).hexdigest()
    return ExperimentConfig(
        system=system, weights=weights, truth=truth, x0=x0, nominal=nominal,
        lam=lam, theta=theta, lambda_grid=grid,
        thetas=raw.get("thetas"), sample_sizes=raw.get("sample_sizes"),
        dataset_draws=int(raw.get("dataset_draws", 20)),
        horizon=horizon, runs=runs, seed=seed, traces=int(raw.get("traces", 0)),
        method=method, out_dir=str(raw.get("out_dir", "out")), digest=digest, raw=raw,
    )


def _resolve_design(config):
    """(bundle, bound report) for the config's lambda- or theta-mode."""
    if config.theta is not None:
        lam, report = design_mod.tune_lambda(
            config.system, config.weights, config.nominal, config.theta,
            grid=config.lambda_grid)
    else:
        lam = config.lam
        report = None
    bundle = design_mod.design_wdrc(config.system, config.weights,
                                    config.nominal, lam, theta=config.theta,
                                    seed=config.seed)
    if report is None:
        report = design_mod.guaranteed_bound(0.0, lam, bundle.steady.rho)
    return bundle, report


def emit_outputs(results, out_dir):
    """Write the artifact dict to disk; returns the written paths.

    results keys: 'solution' (JSON-able dict), 'summary' (list of row
    tuples), 'traces' (list of SimulationTrace), plus optional named CSV
    tables under 'tables' as (header, rows) pairs.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "solution" in results:
        path = os.path.join(out_dir, "solution.json")
        serialize.write_json(path, results["solution"])
        written.append(path)
    if "summary" in results:
        path = os.path.join(out_dir, "summary.csv")
        serialize.write_csv(path, SUMMARY_HEADER, results["summary"])
        written.append(path)
    for idx, trace in enumerate(results.get("traces", [])):
        path = os.path.join(out_dir, "trace_%03d.csv" % idx)
        sim.write_trace_csv(path, trace)
        written.append(path)
    for name, (header, rows) in results.get("tables", {}).items():
        path = os.path.join(out_dir, name)
        serialize.write_csv(path, header, rows)
        written.append(path)
    return written


def _solution_doc(config, bundle, report):
    return {
        "bundle": serialize.bundle_to_dict(bundle),
        "bound": None if report is None else serialize.bound_to_dict(report),
        "config_sha256": config.digest,
        "seed": config.seed,
    }


def _summary_row(method, summary):
    return (method, summary.runs, summary.mean_total_cost,
            summary.std_total_cost, summary.wall_time)


def run_experiment(config, mode="simulate"):
    """Execute one experiment mode; returns the paths written."""
    results = {}
    if mode == "design":
        bundle, report = _resolve_design(config)
        results["solution"] = _solution_doc(config, bundle, report)
    elif mode == "simulate":
        if config.method == "LQG":
            bundle = design_mod.design_lqg(config.system, config.weights,
                                           config.nominal, seed=config.seed)
            report = None
        else:
            bundle, report = _resolve_design(config)
        summary = sim.monte_carlo_summary(bundle, config.truth, config.horizon,
                                          config.runs, config.seed,
                                          x0_model=config.x0)
        results["solution"] = _solution_doc(config, bundle, report)
        results["summary"] = [_summary_row(bundle.method, summary)]
        if config.traces > 0:
            children = np.random.SeedSequence(config.seed).spawn(min(config.traces, config.runs))
            results["traces"] = [
                sim.run_closed_loop(bundle, config.truth, config.horizon, child,
                                    x0_model=config.x0)
                for child in children
            ]
    elif mode == "compare":
        bundle, report = _resolve_design(config)
        baseline = design_mod.design_lqg(config.system, config.weights,
                                         config.nominal, seed=config.seed)
        kw = dict(x0_model=config.x0)
        s_wdrc = sim.monte_carlo_summary(bundle, config.truth, config.horizon,
                                         config.runs, config.seed, **kw)
        s_lqg = sim.monte_carlo_summary(baseline, config.truth, config.horizon,
                                        config.runs, config.seed, **kw)
        results["solution"] = _solution_doc(config, bundle, report)
        results["summary"] = [_summary_row("WDRC", s_wdrc), _summary_row("LQG", s_lqg)]
    elif mode == "sweep-theta":
        thetas = config.thetas or ([config.theta] if config.theta is not None else None)
        if not thetas:
            raise ConfigError("thetas", "sweep-theta needs a nonempty 'thetas' list")
        sizes = config.sample_sizes
        if not sizes:
            raise ConfigError("sample_sizes", "sweep-theta needs a nonempty 'sample_sizes' list")
        rows = sim.out_of_sample_curve(
            config.system, config.weights, config.truth, sizes, thetas,
            config.runs, config.seed, dataset_draws=config.dataset_draws,
            horizon=config.horizon, lambda_grid=config.lambda_grid,
            x0_model=config.x0)
        header = ["n_samples", "theta", "mean_cost", "mean_bound",
                  "violation_fraction", "draws", "failures"]
        results["tables"] = {"oos_curve.csv": (header, [[r[k] for k in header] for r in rows])}
    elif mode == "sweep-lambda":
        grid = config.lambda_grid
        if grid is None:
            grid = design_mod.default_lambda_grid(config.system, config.weights)
        theta = config.theta if config.theta is not None else 0.0
        rows = design_mod.evaluate_lambda_grid(config.system, config.weights,
                                               config.nominal, theta, grid)
        header = ["lam", "rho", "bound", "status"]
        results["tables"] = {"lambda_curve.csv": (header, [[r[k] for k in header] for r in rows])}
    elif mode == "tune":
        if config.theta is None:
            raise ConfigError("theta", "tune mode requires 'theta'")
        grid = config.lambda_grid
        if grid is None:
            grid = design_mod.default_lambda_grid(config.system, config.weights)
        rows = design_mod.evaluate_lambda_grid(config.system, config.weights,
                                               config.nominal, config.theta, grid)
        admissible = [r for r in rows if r["status"] == "ok"]
        if not admissible:
            raise NoAdmissibleLambda("no admissible penalty on the supplied grid")
        best = min(admissible, key=lambda r: (r["bound"], r["lam"]))
        report = design_mod.guaranteed_bound(config.theta, best["lam"], best["rho"])
        doc = {"lambda_star": best["lam"],
               "report": serialize.bound_to_dict(report),
               "curve": [{k: r[k] for k in ("lam", "rho", "bound", "status")} for r in rows]}
        os.makedirs(config.out_dir, exist_ok=True)
        path = os.path.join(config.out_dir, "tune.json")
        serialize.write_json(path, doc)
        return [path]
    else:
        raise ValueError("unknown mode %r" % mode)
    return emit_outputs(results, config.out_dir)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wdrc",
        description="Distributionally robust LQ control experiments.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in ("design", "simulate", "compare", "sweep-theta", "sweep-lambda", "tune"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--out", dest="out_dir", default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "runs", "horizon", "theta", "lam", "out_dir")}
    try:
        config = load_config(args.config, overrides)
        written = run_experiment(config, args.mode)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolated as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ASSUMPTION
    except NoAdmissibleLambda as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ASSUMPTION
    except NoConvergence as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
