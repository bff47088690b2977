"""Closed-loop Monte Carlo execution, cost accounting, and stability diagnostics.

Every run is a deterministic function of (bundle, truth, horizon, seed); a
Monte Carlo summary derives one independent substream per run from the base
seed, so results do not depend on execution order or thread count. Draw
order inside a run is fixed: initial state, then all process disturbances,
then all measurement noises.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._linalg import psd_sqrt, spectral_radius, sym
from .ambiguity import bures_squared
from .design import design_wdrc, tune_lambda
from .estimator import BeliefState, filter_step
from .exceptions import AssumptionViolated, NoAdmissibleLambda, NoConvergence
from .model import Gaussian, empirical_moments

__all__ = [
    "SimulationTrace",
    "CostSummary",
    "StabilityReport",
    "MeanStateResult",
    "run_closed_loop",
    "monte_carlo_summary",
    "penalized_average_cost",
    "out_of_sample_curve",
    "stability_report",
    "mean_state_trajectory",
    "write_trace_csv",
]

THREADS_ENV_VAR = "WDRC_NUM_THREADS"


@dataclass(frozen=True)
class SimulationTrace:
    """Per-step states, estimates, inputs, outputs, and cost accounting."""

    horizon: int
    x: np.ndarray
    x_hat: np.ndarray
    u: np.ndarray
    y: np.ndarray
    stage_cost: np.ndarray
    penalized_stage_cost: np.ndarray
    terminal_cost: float

    def __post_init__(self):
        T = self.horizon
        if not (len(self.x) == len(self.x_hat) == len(self.y) == T + 1
                and len(self.u) == len(self.stage_cost) == T):
            raise ValueError("trace array lengths inconsistent with horizon")
        values = np.concatenate([self.stage_cost, [self.terminal_cost]])
        if not np.all(np.isfinite(values)):
            raise ValueError("trace costs must be finite")

    @property
    def total_cost(self):
        return float(self.stage_cost.sum() + self.terminal_cost)

    @property
    def average_cost(self):
        return float(self.stage_cost.mean())

    @property
    def penalized_average_cost(self):
        return float(self.penalized_stage_cost.mean())


@dataclass(frozen=True)
class CostSummary:
    mean_total_cost: float
    std_total_cost: float
    mean_avg_cost: float
    runs: int
    wall_time: float

    def __post_init__(self):
        if self.std_total_cost < 0:
            raise ValueError("std must be nonnegative")


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _gelbrich_penalty_parts(bundle):
    """(lam, w_hat, constant covariance part of the per-stage penalty)."""
    st = bundle.steady
    cov_part = bures_squared(st.Sigma_star, bundle.nominal.sigma_hat)
    return st.lam, bundle.nominal.w_hat, cov_part


def run_closed_loop(bundle, truth, horizon, seed, x0_model=None, v_model=None):
    """Simulate the plant under the bundle's policy for ``horizon`` steps.

    Disturbances come from ``truth``; measurement noise defaults to
    N(0, M) and the initial state to N(m0, M0) (override with zero-covariance
    models for deterministic runs). The estimator runs in steady mode with
    the bundle's gain, fed the method's disturbance mean each step.
    """
    system = bundle.system
    weights = bundle.weights
    A, B, C = system.A, system.B, system.C
    n, nu, ny = system.n_x, system.n_u, system.n_y
    T = int(horizon)
    if T < 1:
        raise ValueError("horizon must be >= 1")

    rng = np.random.default_rng(_seed_sequence(seed))
    x0_model = x0_model or Gaussian(system.m0, system.M0)
    v_model = v_model or Gaussian(np.zeros(ny), system.M)
    x0 = x0_model.sample(rng)
    w_draws = np.atleast_2d(truth.sample(rng, T))
    v_draws = np.atleast_2d(v_model.sample(rng, T + 1))
    if w_draws.shape != (T, n) or v_draws.shape != (T + 1, ny):
        raise ValueError("disturbance model dimension mismatch with the plant")

    x_cov_ss = bundle.steady.X_post if bundle.method == "WDRC" else bundle.lqg.X_post
    gain = bundle.estimator_gain
    is_wdrc = bundle.method == "WDRC"
    if is_wdrc:
        lam, w_hat, pen_cov = _gelbrich_penalty_parts(bundle)

    x = np.zeros((T + 1, n))
    x_hat = np.zeros((T + 1, n))
    u = np.zeros((T, nu))
    y = np.zeros((T + 1, ny))
    stage = np.zeros(T)
    penalized = np.zeros(T)

    x[0] = x0
    y[0] = C @ x0 + v_draws[0]
    x_hat[0] = system.m0 + gain @ (y[0] - C @ system.m0)
    belief = BeliefState(x_hat[0], x_cov_ss)

    for t in range(T):
        u[t] = bundle.control(belief.x_bar)
        stage[t] = x[t] @ weights.Q @ x[t] + u[t] @ weights.R @ u[t]
        w_bar = bundle.disturbance_mean(belief.x_bar)
        if is_wdrc:
            penalized[t] = stage[t] - lam * (float(np.sum((w_bar - w_hat) ** 2)) + pen_cov)
        else:
            penalized[t] = stage[t]
        x[t + 1] = A @ x[t] + B @ u[t] + w_draws[t]
        y[t + 1] = C @ x[t + 1] + v_draws[t + 1]
        belief = filter_step(belief, u[t], w_bar, y[t + 1], system,
                             x_cov_ss=x_cov_ss, gain=gain)
        x_hat[t + 1] = belief.x_bar

    terminal = float(x[T] @ weights.Qf @ x[T])
    return SimulationTrace(horizon=T, x=x, x_hat=x_hat, u=u, y=y,
                           stage_cost=stage, penalized_stage_cost=penalized,
                           terminal_cost=terminal)


def _default_threads():
    value = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def monte_carlo_summary(bundle, truth, horizon, runs, base_seed, threads=None,
                        x0_model=None, v_model=None):
    """Cost statistics over independent runs; deterministic given base_seed."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    children = _seed_sequence(base_seed).spawn(runs)
    threads = _default_threads() if threads is None else max(1, int(threads))
    start = time.perf_counter()

    def one(child):
        trace = run_closed_loop(bundle, truth, horizon, child,
                                x0_model=x0_model, v_model=v_model)
        return trace.total_cost, trace.average_cost

    if threads == 1:
        results = [one(child) for child in children]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, children))  # run-indexed order
    totals = np.array([r[0] for r in results])
    averages = np.array([r[1] for r in results])
    wall = time.perf_counter() - start
    std = float(totals.std(ddof=1)) if runs > 1 else 0.0
    return CostSummary(mean_total_cost=float(totals.mean()), std_total_cost=std,
                       mean_avg_cost=float(averages.mean()), runs=runs, wall_time=wall)


def penalized_average_cost(bundle, horizon, runs, base_seed, x0_model=None):
    """Monte Carlo estimate of the stationary penalized average cost.

    Simulates under the worst-case policy pair (disturbances Gaussian with
    the adversarial mean and covariance), subtracting the analytic per-stage
    moment-distance penalty; the time-averaged mean over runs estimates the
    design-time value rho.
    """
    if bundle.method != "WDRC":
        raise ValueError("penalized average cost is defined for WDRC bundles")
    system = bundle.system
    weights = bundle.weights
    A, B, C = system.A, system.B, system.C
    n, ny = system.n_x, system.n_y
    T = int(horizon)
    st = bundle.steady
    lam, w_hat, pen_cov = _gelbrich_penalty_parts(bundle)
    noise_root = psd_sqrt(st.Sigma_star)
    gain = bundle.estimator_gain
    x0_model = x0_model or Gaussian(system.m0, system.M0)

    values = np.zeros(runs)
    for i, child in enumerate(_seed_sequence(base_seed).spawn(runs)):
        rng = np.random.default_rng(child)
        x = x0_model.sample(rng)
        z = rng.standard_normal((T, n))
        v = rng.standard_normal((T + 1, ny)) @ psd_sqrt(system.M).T
        y0 = C @ x + v[0]
        x_hat = system.m0 + gain @ (y0 - C @ system.m0)
        acc = 0.0
        for t in range(T):
            u = st.K @ x_hat + st.L
            w_bar = st.H @ x_hat + st.G
            acc += x @ weights.Q @ x + u @ weights.R @ u
            acc -= lam * (float(np.sum((w_bar - w_hat) ** 2)) + pen_cov)
            x = A @ x + B @ u + w_bar + noise_root @ z[t]
            y = C @ x + v[t + 1]
            x_pred = A @ x_hat + B @ u + w_bar
            x_hat = x_pred + gain @ (y - C @ x_pred)
        values[i] = acc / T
    return float(values.mean())


def out_of_sample_curve(system, weights, truth, sample_sizes, thetas, runs,
                        base_seed, dataset_draws=20, horizon=500,
                        lambda_grid=None, jitter=1e-8, x0_model=None):
    """Out-of-sample cost table over (sample size, radius) cells.

    Each cell repeats ``dataset_draws`` times: draw N training samples from
    the truth, build the empirical nominal, tune the penalty for the radius,
    design, and estimate the average cost under the truth by Monte Carlo.
    Reports the mean cost, the mean certified bound, and the fraction of
    draws whose realized cost exceeded their bound. Design failures are
    recorded per cell rather than raised.
    """
    base = _seed_sequence(base_seed)
    rows = []
    for i, n_samples in enumerate(sample_sizes):
        for j, theta in enumerate(thetas):
            costs, bounds, failures = [], [], 0
            for d in range(dataset_draws):
                train_seed = np.random.SeedSequence(entropy=base.entropy,
                                                    spawn_key=(i, j, d, 0))
                eval_seed = np.random.SeedSequence(entropy=base.entropy,
                                                   spawn_key=(i, j, d, 1))
                rng = np.random.default_rng(train_seed)
                samples = np.atleast_2d(truth.sample(rng, int(n_samples)))
                nominal = empirical_moments(samples, jitter=jitter)
                try:
                    lam, report = tune_lambda(system, weights, nominal, theta,
                                              grid=lambda_grid)
                    bundle = design_wdrc(system, weights, nominal, lam, theta=theta)
                    summary = monte_carlo_summary(bundle, truth, horizon, runs,
                                                  eval_seed, x0_model=x0_model)
                except (AssumptionViolated, NoConvergence, NoAdmissibleLambda):
                    failures += 1
                    continue
                costs.append(summary.mean_avg_cost)
                bounds.append(report.bound)
            n_ok = len(costs)
            violations = sum(c > b for c, b in zip(costs, bounds))
            rows.append({
                "n_samples": int(n_samples),
                "theta": float(theta),
                "mean_cost": float(np.mean(costs)) if n_ok else None,
                "mean_bound": float(np.mean(bounds)) if n_ok else None,
                "violation_fraction": violations / n_ok if n_ok else None,
                "draws": dataset_draws,
                "failures": failures,
            })
    return rows


def write_trace_csv(path, trace):
    """Export one trace as CSV: t, states, estimates, inputs, outputs, stage cost."""
    from .serialize import write_csv

    n = trace.x.shape[1]
    nu = trace.u.shape[1]
    ny = trace.y.shape[1]
    header = (["t"]
              + ["x_%d" % i for i in range(n)]
              + ["xhat_%d" % i for i in range(n)]
              + ["u_%d" % i for i in range(nu)]
              + ["y_%d" % i for i in range(ny)]
              + ["stage_cost"])
    rows = [[t, *trace.x[t], *trace.x_hat[t], *trace.u[t], *trace.y[t],
             trace.stage_cost[t]] for t in range(trace.horizon)]
    write_csv(path, header, rows)


@dataclass(frozen=True)
class StabilityReport:
    """Spectral radii of the three closed loops plus the mean-state limit."""

    rho_closed_loop: float
    rho_penalized_loop: float
    rho_filter_loop: float
    mean_state_limit: np.ndarray


def _mean_limit(system, steady, w_hat):
    """Closed form of the mean-state limit under the stationary policy pair."""
    A = system.A
    n = system.n_x
    eye = np.eye(n)
    P, phi = steady.P, steady.Phi
    lhs = eye - np.linalg.solve(eye + phi @ P, A)
    rhs = (eye - phi @ np.linalg.solve(eye + P @ phi - A.T, P)) @ w_hat
    return np.linalg.solve(lhs, rhs)


def stability_report(bundle):
    """Closed-loop spectral radii and the mean-state fixed point (WDRC only)."""
    if bundle.method != "WDRC":
        raise ValueError("stability diagnostics apply to WDRC bundles")
    system = bundle.system
    st = bundle.steady
    A, B, C, M = system.A, system.B, system.C, system.M
    eye = np.eye(system.n_x)

    rho_cl = spectral_radius(A + B @ st.K)
    penalized_map = np.linalg.solve((eye + st.P @ st.Phi).T, A).T  # A'(I+P Phi)^-1
    rho_pen = spectral_radius(penalized_map)
    innov = sym(C @ st.X_prior @ C.T + M)
    gain_prior = np.linalg.solve(innov, C @ st.X_prior).T
    rho_filt = spectral_radius(A - gain_prior @ (C @ A))
    limit = _mean_limit(system, st, bundle.nominal.w_hat)
    return StabilityReport(rho_closed_loop=rho_cl, rho_penalized_loop=rho_pen,
                           rho_filter_loop=rho_filt, mean_state_limit=limit)


@dataclass(frozen=True)
class MeanStateResult:
    states: np.ndarray
    estimates: np.ndarray
    limit: np.ndarray
    limit_error: float
    estimation_error: float


def mean_state_trajectory(bundle, x0_mean, horizon, estimate0=None):
    """Deterministic mean-state recursion under the worst-case policy pair.

    Iterates the expected closed loop (plant mean, estimate mean) from
    ``x0_mean``; the initial estimate mean defaults to the filter update of
    m0 against the expected first measurement. Returns the trajectory, the
    closed-form limit, and the terminal distances to the limit and between
    state and estimate means.
    """
    if bundle.method != "WDRC":
        raise ValueError("mean-state diagnostics apply to WDRC bundles")
    system = bundle.system
    st = bundle.steady
    A, B, C = system.A, system.B, system.C
    T = int(horizon)
    gain = bundle.estimator_gain

    x0_mean = np.asarray(x0_mean, dtype=float).reshape(-1)
    states = np.zeros((T + 1, system.n_x))
    estimates = np.zeros((T + 1, system.n_x))
    states[0] = x0_mean
    if estimate0 is None:
        estimates[0] = system.m0 + gain @ (C @ x0_mean - C @ system.m0)
    else:
        estimates[0] = np.asarray(estimate0, dtype=float).reshape(-1)

    feed = B @ st.L + st.G
    for t in range(T):
        coupled = (B @ st.K + st.H) @ estimates[t]
        states[t + 1] = A @ states[t] + coupled + feed
        pred = A @ estimates[t] + coupled + feed
        estimates[t + 1] = pred + gain @ (C @ states[t + 1] - C @ pred)

    limit = _mean_limit(system, st, bundle.nominal.w_hat)
    return MeanStateResult(
        states=states,
        estimates=estimates,
        limit=limit,
        limit_error=float(np.linalg.norm(states[T] - limit)),
        estimation_error=float(np.linalg.norm(states[T] - estimates[T])),
    )
