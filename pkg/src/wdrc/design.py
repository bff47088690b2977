"""Offline controller synthesis, the LQG baseline, cost bounds, and tuning.

``design_wdrc`` runs the offline stage end to end: steady-state Riccati
solve, closed-form policy parameters, worst-case covariance program, and the
stationary filter, bundling everything needed to run online with no further
solves. ``design_lqg`` builds the certainty-equivalent baseline that plugs
the nominal moments directly into both the controller and the estimator.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._linalg import is_detectable, is_stabilizable, max_eigval, psd_sqrt, sym
from .ambiguity import _filter_fixpoint, bures_squared, solve_filter_are, worst_case_cov_steady
from .estimator import _measurement_update, steady_gain
from .exceptions import AssumptionViolated, NoAdmissibleLambda, NoConvergence
from .riccati import (
    SteadyStateSolution,
    compute_phi,
    solve_are,
    steady_state_policy_params,
)

__all__ = [
    "BoundReport",
    "LqgSolution",
    "PolicyBundle",
    "design_wdrc",
    "design_lqg",
    "evaluate_rho",
    "guaranteed_bound",
    "default_lambda_grid",
    "evaluate_lambda_grid",
    "tune_lambda",
    "radius_from_samples",
    "bellman_residual",
    "bellman_suboptimality_gap",
]


@dataclass(frozen=True)
class BoundReport:
    """Certified average-cost bound theta^2 * lam + rho for radius theta."""

    lam: float
    theta: float
    rho: float
    bound: float

    def __post_init__(self):
        if self.theta >= 0 and self.bound < self.rho - 1e-12:
            raise ValueError("bound must dominate rho for nonnegative theta")


@dataclass(frozen=True)
class LqgSolution:
    """Certainty-equivalent Riccati solution and its nominal filter."""

    P: np.ndarray
    K: np.ndarray
    L: np.ndarray
    r: np.ndarray
    X_prior: np.ndarray
    X_post: np.ndarray


@dataclass(frozen=True)
class PolicyBundle:
    """Everything the online loop needs: method tag, plant, weights, nominal
    moments, the solved policy, the steady estimator gain, and provenance
    (input digest + seed) for reproducibility."""

    method: str
    system: object
    weights: object
    nominal: object
    steady: Optional[SteadyStateSolution]
    lqg: Optional[LqgSolution]
    estimator_gain: np.ndarray
    provenance: dict

    def control(self, x_bar):
        """u = K x_bar + L for the bundle's method."""
        if self.method == "WDRC":
            return self.steady.K @ x_bar + self.steady.L
        return self.lqg.K @ x_bar + self.lqg.L

    def disturbance_mean(self, x_bar):
        """Disturbance mean fed to the estimator's prediction step."""
        if self.method == "WDRC":
            return self.steady.H @ x_bar + self.steady.G
        return self.nominal.w_hat


def _input_digest(system, weights, nominal, lam):
    h = hashlib.sha256()
    for a in (system.A, system.B, system.C, system.M, system.m0, system.M0,
              weights.Q, weights.Qf, weights.R, nominal.w_hat, nominal.sigma_hat):
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    h.update(np.float64(lam).tobytes())
    return h.hexdigest()


def evaluate_rho(steady, nominal):
    """Stationary penalized average cost of the optimal policy pair.

    rho = (2 w_hat - Phi r)'(I + P Phi)^-1 r - lam Tr[Sigma_hat]
          + w_hat'(I + P Phi)^-1 P w_hat + z.
    """
    P, phi, r = steady.P, steady.Phi, steady.r
    w_hat, sigma_hat = nominal.w_hat, nominal.sigma_hat
    T1 = np.eye(P.shape[0]) + P @ phi
    inv1_r = np.linalg.solve(T1, r)
    inv1_Pw = np.linalg.solve(T1, P @ w_hat)
    value = (2.0 * w_hat - phi @ r) @ inv1_r
    value += w_hat @ inv1_Pw
    value -= steady.lam * float(np.trace(sigma_hat))
    return float(value + steady.z)


def design_wdrc(system, weights, nominal, lam, theta=None, seed=None,
                wc_tol=1e-7, wc_max_iter=10_000):
    """Offline synthesis of the robust policy pair at penalty ``lam``.

    Pipeline: steady-state Riccati solve, policy parameters, worst-case
    covariance program, stationary filter. Raises AssumptionViolated or
    NoConvergence from whichever stage fails, naming the broken condition.
    """
    phi = compute_phi(system, weights, lam).matrix
    P = solve_are(system, weights, lam)
    params = steady_state_policy_params(system, weights, nominal, lam, P)
    wc = worst_case_cov_steady(system, params.S, P, nominal.sigma_hat, lam,
                               tol=wc_tol, max_iter=wc_max_iter)
    X_prior, X_post = solve_filter_are(system, wc.sigma_star)
    if np.abs(X_post - wc.x_cov).max() > 1e-6 * (1.0 + np.abs(X_post).max()):
        raise NoConvergence("filter covariance mismatch between the covariance "
                            "program and the stationary filter solve")

    steady = SteadyStateSolution(
        lam=float(lam), theta=None if theta is None else float(theta),
        P=P, S=params.S, r=params.r, K=params.K, L=params.L, H=params.H,
        G=params.G, Phi=phi, Sigma_star=wc.sigma_star, X_prior=X_prior,
        X_post=X_post, z=wc.objective, rho=0.0,
    )
    steady = dataclasses.replace(steady, rho=evaluate_rho(steady, nominal))
    gain = steady_gain(X_post, system, x_cov_prior=X_prior)
    provenance = {"input_sha256": _input_digest(system, weights, nominal, lam),
                  "seed": seed}
    return PolicyBundle(method="WDRC", system=system, weights=weights,
                        nominal=nominal, steady=steady, lqg=None,
                        estimator_gain=gain, provenance=provenance)


def _dare_fixed_point(A, B, Q, R, tol=1e-13, max_iter=200_000):
    P = sym(Q.copy())
    for _ in range(max_iter):
        BtP = B.T @ P
        gain = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = sym(Q + A.T @ P @ A - A.T @ P @ B @ gain)
        delta = np.linalg.norm(P_next - P, "fro")
        P = P_next
        if delta < tol:
            return P
    raise NoConvergence("certainty-equivalent Riccati iteration hit %d iterations" % max_iter)


def design_lqg(system, weights, nominal, seed=None):
    """Certainty-equivalent baseline: standard Riccati gain plus a Kalman
    filter built directly from the nominal moments."""
    A, B = system.A, system.B
    Q, R = weights.Q, weights.R
    if not is_stabilizable(A, B):
        raise NoConvergence("(A, B) is not stabilizable; no stabilizing baseline gain")
    if not is_detectable(A, psd_sqrt(Q)):
        raise NoConvergence("(A, Q^1/2) is not detectable; baseline Riccati solution may not exist")
    try:
        P = sym(scipy.linalg.solve_discrete_are(A, B, Q, R))
    except Exception:
        P = _dare_fixed_point(A, B, Q, R)  # handles degenerate B (e.g. B = 0)

    BtP = B.T @ P
    gain_den = R + BtP @ B
    K = -np.linalg.solve(gain_den, BtP @ A)
    w_hat = nominal.w_hat
    A_cl = A + B @ K
    r = np.linalg.solve(np.eye(system.n_x) - A_cl.T, A_cl.T @ (P @ w_hat))
    L = -np.linalg.solve(gain_den, B.T @ (P @ w_hat + r))

    X_prior = _filter_fixpoint(A, system.C, system.M, nominal.sigma_hat,
                               np.zeros_like(P), 1e-12, 100_000)
    X_post = _measurement_update(X_prior, system.C, system.M)[0]
    lqg = LqgSolution(P=P, K=K, L=L, r=r, X_prior=X_prior, X_post=X_post)
    gain = steady_gain(X_post, system, x_cov_prior=X_prior)
    provenance = {"input_sha256": _input_digest(system, weights, nominal, 0.0),
                  "seed": seed}
    return PolicyBundle(method="LQG", system=system, weights=weights,
                        nominal=nominal, steady=None, lqg=lqg,
                        estimator_gain=gain, provenance=provenance)


def guaranteed_bound(theta, lam, rho):
    """Average-cost guarantee theta^2 * lam + rho over the radius-theta ball."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    return BoundReport(lam=float(lam), theta=float(theta), rho=float(rho),
                       bound=float(theta * theta * lam + rho))


def default_lambda_grid(system, weights, points=40, lam_hi=1e6):
    """Log-spaced penalty grid from just above the admissibility floor
    (estimated at the large-penalty Riccati solution) up to ``lam_hi``."""
    P_hi = solve_are(system, weights, lam_hi)
    lo = 1.05 * max_eigval(P_hi)
    if lo <= 0:
        lo = min(1.0, lam_hi / 2.0)
    if lo >= lam_hi:
        return np.array([lam_hi])
    return np.geomspace(lo, lam_hi, points)


def evaluate_lambda_grid(system, weights, nominal, theta, grid):
    """Bound curve over a penalty grid; inadmissible points are recorded,
    not fatal. Returns a list of dict rows (lam, rho, bound, status)."""
    rows = []
    for lam in np.asarray(grid, dtype=float):
        row = {"lam": float(lam), "rho": None, "bound": None, "status": "ok"}
        try:
            bundle = design_wdrc(system, weights, nominal, lam, theta=theta)
            row["rho"] = bundle.steady.rho
            row["bound"] = float(theta * theta * lam + bundle.steady.rho)
        except AssumptionViolated as exc:
            row["status"] = "assumption: %s" % exc
        except NoConvergence as exc:
            row["status"] = "no-convergence: %s" % exc
        rows.append(row)
    return rows


def tune_lambda(system, weights, nominal, theta, grid=None):
    """Pick the admissible grid penalty minimizing theta^2 lam + rho(lam).

    Ties break toward the smaller penalty. Raises NoAdmissibleLambda when the
    whole grid fails the admissibility checks.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if grid is None:
        grid = default_lambda_grid(system, weights)
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    rows = evaluate_lambda_grid(system, weights, nominal, theta, grid)
    best = None
    for row in rows:
        if row["status"] != "ok":
            continue
        if best is None or row["bound"] < best["bound"]:
            best = row
    if best is None:
        raise NoAdmissibleLambda(
            "no admissible penalty on the grid [%g, %g] (%d points)"
            % (grid[0], grid[-1], grid.size)
        )
    return best["lam"], guaranteed_bound(theta, best["lam"], best["rho"])


def _bisect_increasing(func, target, lo=1e-12, hi=1.0, tol=1e-12, max_iter=400):
    """Solve func(x) = target for increasing func by bracketing + bisection."""
    while func(hi) < target:
        hi *= 2.0
        if hi > 1e18:
            raise ValueError("failed to bracket the implicit radius equation")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if func(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def radius_from_samples(n_samples, n_x, beta, constants=(1.0, 1.0, 3.0),
                        compact_support_half_diameter=None):
    """Ambiguity radius for an N-sample nominal at confidence 1 - beta.

    ``constants`` supplies (c1, c2, c); c1 = c2 = 1 are illustrative defaults
    since the measure-concentration constants are problem dependent, and c > 2
    is the light-tail exponent. With a compact support half-diameter the
    tighter three-branch rule applies (c unused). The n_x = 4 branch solves
    its implicit equation by bisection to 1e-12.
    """
    c1, c2, c = constants
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if c1 <= 0 or c2 <= 0:
        raise ValueError("c1 and c2 must be positive")
    if beta >= c1:
        raise ValueError("beta must be below c1 for a positive radius")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    log_term = np.log(c1 / beta)
    base = log_term / (c2 * n_samples)

    xi = compact_support_half_diameter
    if xi is not None:
        if xi <= 0:
            raise ValueError("support half-diameter must be positive")
        if n_x < 4:
            return float(xi * base ** 0.25)
        if n_x > 4:
            return float(xi * base ** (1.0 / n_x))
        target = np.sqrt(base)
        xi2 = xi * xi
        return float(_bisect_increasing(
            lambda t: t * t / (xi2 * np.log(2.0 + xi2 / (t * t))), target))

    if c <= 2:
        raise ValueError("light-tail exponent c must exceed 2")
    if n_samples < log_term / c2:
        return float(base ** (2.0 / c))
    if n_x < 4:
        return float(np.sqrt(base))
    if n_x > 4:
        return float(base ** (2.0 / n_x))
    if n_samples >= (np.log(3.0) ** 2) * log_term / c2:
        target = np.sqrt(base)
        return float(_bisect_increasing(lambda t: t / np.log(2.0 + 1.0 / t), target))
    raise ValueError(
        "radius rule undefined for n_x = 4 with N in the gap between "
        "log(c1/beta)/c2 and (log 3)^2 log(c1/beta)/c2; increase N"
    )


def _bellman_rhs(bundle, nominal, x_bar, K_used):
    """Right side of the stationary optimality equation at belief mean x_bar,
    with control gain K_used and the adversary's best mean response."""
    st = bundle.steady
    sys_, w = bundle.system, bundle.weights
    A, B = sys_.A, sys_.B
    w_hat, sigma_hat = nominal.w_hat, nominal.sigma_hat
    lam = st.lam

    u = K_used @ x_bar + st.L
    lamP = lam * np.eye(sys_.n_x) - st.P
    w_bar = np.linalg.solve(lamP, st.P @ (A @ x_bar + B @ u) + st.r + lam * w_hat)
    x_pred = A @ x_bar + B @ u + w_bar

    penalty = lam * (float(np.sum((w_bar - w_hat) ** 2))
                     + bures_squared(st.Sigma_star, sigma_hat))
    value = x_bar @ w.Q @ x_bar + float(np.sum(w.Q * st.X_post))
    value += u @ w.R @ u - penalty
    value += x_pred @ st.P @ x_pred + 2.0 * st.r @ x_pred
    value += float(np.sum(st.P * st.X_prior)) + float(np.sum(st.S * st.X_post))
    return float(value)


def _bellman_lhs(bundle, x_bar):
    st = bundle.steady
    h = x_bar @ st.P @ x_bar + 2.0 * st.r @ x_bar + float(np.sum((st.S + st.P) * st.X_post))
    return float(st.rho + h)


def bellman_residual(bundle, nominal, belief_mean):
    """|LHS - RHS| of the stationary optimality equation at a belief mean.

    The right side is evaluated analytically at the optimal policy pair; a
    residual at float resolution certifies that the synthesized quantities
    actually solve the fixed-point equation.
    """
    x_bar = np.asarray(belief_mean, dtype=float).reshape(-1)
    rhs = _bellman_rhs(bundle, nominal, x_bar, bundle.steady.K)
    return abs(_bellman_lhs(bundle, x_bar) - rhs)


def bellman_suboptimality_gap(bundle, nominal, belief_mean, gain_offset):
    """RHS - LHS when the control gain is perturbed by ``gain_offset``.

    Strictly positive for any nonzero perturbation at a nonzero belief mean,
    since the optimal control is the unique minimizer of the (re-maximized)
    right side.
    """
    x_bar = np.asarray(belief_mean, dtype=float).reshape(-1)
    K_pert = bundle.steady.K + gain_offset
    rhs = _bellman_rhs(bundle, nominal, x_bar, K_pert)
    return float(rhs - _bellman_lhs(bundle, x_bar))
