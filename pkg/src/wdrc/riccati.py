"""Backward Riccati recursion, its steady-state equation, and policy parameters.

The value function of the penalized minimax problem stays quadratic in the
state and the estimation error, with coefficients (P, S, r, q) propagated
backward by a Riccati-type recursion in which the penalty parameter ``lam``
enters through Phi = B R^-1 B' - (1/lam) I. The controller gain/bias (K, L)
and the adversarial disturbance-mean parameters (H, G) are closed forms in
those coefficients. Steady-state quantities are the fixed points reached as
the horizon grows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._linalg import (
    is_psd,
    max_eigval,
    min_eigval,
    psd_project,
    psd_sqrt,
    is_observable,
    is_stabilizable,
    solve_checked,
    spectral_radius,
    sym,
)
from .exceptions import AssumptionViolated, NoConvergence

__all__ = [
    "FiniteHorizonSolution",
    "SteadyStateSolution",
    "PhiResult",
    "SteadyPolicyParams",
    "LambdaCheck",
    "compute_phi",
    "backward_pass",
    "finite_horizon_recursion",
    "solve_are",
    "steady_state_policy_params",
    "check_lambda",
]


@dataclass(frozen=True)
class FiniteHorizonSolution:
    """Stagewise solution over horizon T.

    Value-function coefficients P, S (T+1, n, n), r (T+1, n), q (T+1,) are
    indexed by stage with the terminal entries last; gains K (T, n_u, n),
    L (T, n_u), adversary parameters H (T, n, n), G (T, n), worst-case
    covariances Sigma_star (T, n, n), belief covariances X_post (T+1, n, n),
    and per-stage adversary values z (T,) follow the same indexing.
    """

    horizon: int
    lam: float
    P: np.ndarray
    S: np.ndarray
    r: np.ndarray
    q: np.ndarray
    K: np.ndarray
    L: np.ndarray
    H: np.ndarray
    G: np.ndarray
    Sigma_star: Optional[np.ndarray]
    X_post: Optional[np.ndarray]
    z: Optional[np.ndarray]


@dataclass(frozen=True)
class SteadyStateSolution:
    """Stationary policy pair and the quantities needed to certify it."""

    lam: float
    theta: Optional[float]
    P: np.ndarray
    S: np.ndarray
    r: np.ndarray
    K: np.ndarray
    L: np.ndarray
    H: np.ndarray
    G: np.ndarray
    Phi: np.ndarray
    Sigma_star: np.ndarray
    X_prior: np.ndarray
    X_post: np.ndarray
    z: float
    rho: float


class PhiResult(NamedTuple):
    matrix: np.ndarray
    is_psd: bool


class SteadyPolicyParams(NamedTuple):
    S: np.ndarray
    r: np.ndarray
    K: np.ndarray
    L: np.ndarray
    H: np.ndarray
    G: np.ndarray


class LambdaCheck(NamedTuple):
    passed: bool
    gap: float
    lam_max: float


def compute_phi(system, weights, lam):
    """Phi = B R^-1 B' - (1/lam) I, with a flag for Phi >= 0.

    A negative part no larger than 1/lam is unavoidable whenever the input
    matrix has fewer columns than states, so callers decide how strictly to
    treat the flag.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    B = system.B
    phi = sym(B @ solve_checked(weights.R, B.T, what="R") - np.eye(system.n_x) / lam)
    return PhiResult(phi, is_psd(phi))


def _stage_update(A, B, Q, R, phi, lam, w_hat, tr_sigma_hat, P1, r1, q1, stage_label):
    """One backward step of the coupled (P, S, r, q) recursion plus gains."""
    n = A.shape[0]
    if min_eigval(lam * np.eye(n) - P1) <= 0.0:
        raise AssumptionViolated(
            "1 (penalty dominance)",
            "lam*I - P is not positive definite at stage %s; increase lam" % stage_label,
        )
    T1 = np.eye(n) + P1 @ phi
    inv1_PA = np.linalg.solve(T1, P1 @ A)
    inv1_r = np.linalg.solve(T1, r1)
    inv1_Pw = np.linalg.solve(T1, P1 @ w_hat)
    inv1_rw = inv1_r + inv1_Pw

    P0 = sym(A.T @ inv1_PA + Q)
    S0 = sym(Q + A.T @ P1 @ A - P0)
    r0 = A.T @ inv1_rw
    q0 = q1 + (2.0 * w_hat - phi @ r1) @ inv1_r + w_hat @ inv1_Pw - lam * tr_sigma_hat

    K = -np.linalg.solve(R, B.T @ inv1_PA)
    L = -np.linalg.solve(R, B.T @ inv1_rw)
    lamP = lam * np.eye(n) - P1
    H = np.linalg.solve(lamP, P1 @ (A + B @ K))
    G = np.linalg.solve(lamP, P1 @ (B @ L) + r1 + lam * w_hat)
    return P0, S0, r0, q0, K, L, H, G


def backward_pass(system, weights, nominal, lam, horizon):
    """Backward recursion from the terminal stage; no adversary covariances.

    Returns arrays (P, S, r, q, K, L, H, G) with P, S, r, q covering stages
    0..T and the policy arrays covering stages 0..T-1. Raises
    AssumptionViolated if lam*I - P loses positive definiteness at any stage
    where the recursion uses it (stages 1..T).
    """
    A, B = system.A, system.B
    n, nu = system.n_x, system.n_u
    T = int(horizon)
    if T < 1:
        raise ValueError("horizon must be >= 1")
    phi = compute_phi(system, weights, lam).matrix
    w_hat = nominal.w_hat
    tr_sigma_hat = float(np.trace(nominal.sigma_hat))

    P = np.zeros((T + 1, n, n))
    S = np.zeros((T + 1, n, n))
    r = np.zeros((T + 1, n))
    q = np.zeros(T + 1)
    K = np.zeros((T, nu, n))
    L = np.zeros((T, nu))
    H = np.zeros((T, n, n))
    G = np.zeros((T, n))

    P[T] = sym(weights.Qf)
    for t in range(T - 1, -1, -1):
        P[t], S[t], r[t], q[t], K[t], L[t], H[t], G[t] = _stage_update(
            A, B, weights.Q, weights.R, phi, lam, w_hat, tr_sigma_hat,
            P[t + 1], r[t + 1], q[t + 1], "t=%d" % (t + 1),
        )
    return P, S, r, q, K, L, H, G


def finite_horizon_recursion(system, weights, nominal, lam, horizon, wc_cov_solver=None):
    """Full finite-horizon solution: backward pass plus the forward pass that
    interleaves the worst-case covariance program with the belief-covariance
    recursion (both are offline quantities).

    ``wc_cov_solver`` defaults to ambiguity.worst_case_cov_finite and must
    accept (system, S_next, P_next, sigma_hat, lam, x_cov).
    """
    if wc_cov_solver is None:
        from .ambiguity import worst_case_cov_finite
        wc_cov_solver = worst_case_cov_finite
    from .estimator import _measurement_update

    P, S, r, q, K, L, H, G = backward_pass(system, weights, nominal, lam, horizon)
    T = int(horizon)
    n = system.n_x

    Sigma_star = np.zeros((T, n, n))
    X_post = np.zeros((T + 1, n, n))
    z = np.zeros(T)
    X_post[0] = _measurement_update(system.M0, system.C, system.M)[0]
    for t in range(T):
        res = wc_cov_solver(system, S[t + 1], P[t + 1], nominal.sigma_hat, lam, X_post[t])
        Sigma_star[t] = res.sigma_star
        X_post[t + 1] = res.x_cov
        z[t] = res.objective

    return FiniteHorizonSolution(
        horizon=T, lam=float(lam), P=P, S=S, r=r, q=q, K=K, L=L, H=H, G=G,
        Sigma_star=Sigma_star, X_post=X_post, z=z,
    )


def solve_are(system, weights, lam, p0=None, tol=1e-12, max_iter=100_000,
              residual_tol=1e-9, require_psd_phi=False):
    """Steady-state P solving P = Q + A'(I + P Phi)^-1 P A.

    Solved by fixed-point iteration from a PSD seed (default Q), which
    converges whenever the regularity conditions hold. Checks performed:
    (A, Q^1/2) observable and (A, proj_psd(Phi)^1/2) stabilizable up front
    (PBH rank tests); after convergence, residual below ``residual_tol``,
    lam*I - P positive definite, and the penalized closed-loop map
    A'(I + P Phi)^-1 strictly stable. With ``require_psd_phi`` the flag from
    compute_phi is enforced as a hard error; by default it is not, since any
    system with fewer inputs than states has Phi indefinite by exactly 1/lam.
    """
    A = system.A
    n = system.n_x
    Q = weights.Q
    if lam <= max_eigval(Q):
        raise AssumptionViolated(
            "1 (penalty dominance)",
            "lam=%.6g does not exceed max eig Q=%.6g, and P_ss >= Q" % (lam, max_eigval(Q)),
        )
    phi, phi_psd = compute_phi(system, weights, lam)
    if require_psd_phi and not phi_psd:
        raise AssumptionViolated("3 (control regularity)", "Phi has negative eigenvalues")
    if not is_stabilizable(A, psd_sqrt(psd_project(phi))):
        raise AssumptionViolated("3 (control regularity)", "(A, Phi^1/2) is not stabilizable")
    if not is_observable(A, psd_sqrt(Q)):
        raise AssumptionViolated("3 (control regularity)", "(A, Q^1/2) is not observable")

    eye = np.eye(n)
    P = sym(np.array(Q if p0 is None else p0, dtype=float))
    if not is_psd(P):
        raise ValueError("p0 must be positive semidefinite")
    for _ in range(max_iter):
        P_next = sym(Q + A.T @ np.linalg.solve(eye + P @ phi, P @ A))
        delta = np.linalg.norm(P_next - P, "fro")
        P = P_next
        if delta < tol:
            break
    else:
        raise NoConvergence("value iteration for the steady-state equation hit %d iterations" % max_iter)

    residual = np.linalg.norm(P - Q - A.T @ np.linalg.solve(eye + P @ phi, P @ A), "fro")
    if residual >= residual_tol:
        raise NoConvergence("steady-state equation residual %.3e above %.1e" % (residual, residual_tol))
    if min_eigval(lam * eye - P) <= 0.0:
        raise AssumptionViolated(
            "1 (penalty dominance)",
            "lam*I - P_ss is not positive definite (lam=%.6g, max eig P=%.6g)" % (lam, max_eigval(P)),
        )
    closed = np.linalg.solve((eye + P @ phi).T, A).T  # A'(I + P Phi)^-1
    if spectral_radius(closed) >= 1.0:
        raise AssumptionViolated("3 (control regularity)", "penalized closed-loop map is not stable")
    return P


def steady_state_policy_params(system, weights, nominal, lam, P_ss):
    """Closed-form steady-state S, r and policy parameters K, L, H, G."""
    A, B = system.A, system.B
    n = system.n_x
    eye = np.eye(n)
    if min_eigval(lam * eye - P_ss) <= 0.0:
        raise AssumptionViolated("1 (penalty dominance)", "lam*I - P_ss is not positive definite")
    phi = compute_phi(system, weights, lam).matrix
    w_hat = nominal.w_hat

    T1 = eye + P_ss @ phi
    S = sym(weights.Q + A.T @ P_ss @ A - P_ss)
    W = solve_checked(T1.T, A, what="I + P Phi").T  # A'(I + P Phi)^-1
    try:
        r = np.linalg.solve(eye - W, W @ (P_ss @ w_hat))
    except np.linalg.LinAlgError:
        raise AssumptionViolated(
            "3 (control regularity)",
            "resolvent I - A'(I + P Phi)^-1 is singular; steady-state bias undefined",
        )
    inv1_PA = solve_checked(T1, P_ss @ A, what="I + P Phi")
    inv1_rw = np.linalg.solve(T1, r + P_ss @ w_hat)
    K = -solve_checked(weights.R, B.T @ inv1_PA, what="R")
    L = -np.linalg.solve(weights.R, B.T @ inv1_rw)
    lamP = lam * eye - P_ss
    H = solve_checked(lamP, P_ss @ (A + B @ K), what="lam*I - P")
    G = np.linalg.solve(lamP, P_ss @ (B @ L) + r + lam * w_hat)
    return SteadyPolicyParams(S=S, r=r, K=K, L=L, H=H, G=G)


def check_lambda(lam, P, margin=0.0):
    """Penalty admissibility report: passes iff lam >= (1+margin) * max eig P."""
    lam_max = max_eigval(P)
    passed = bool(lam > 0 and lam >= (1.0 + margin) * lam_max)
    return LambdaCheck(passed=passed, gap=float(lam - lam_max), lam_max=lam_max)
