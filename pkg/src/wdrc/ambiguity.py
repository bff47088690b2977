"""Moment-based distribution distance and the worst-case covariance programs.

The adversary's covariance solves, in the stationary case,

    max_{Sigma >= 0}  Tr[S X(Sigma) + (P - lam I) Sigma
                         + 2 lam (Sh^1/2 Sigma Sh^1/2)^1/2]

where X(Sigma) is the stationary filtered covariance induced by process
noise Sigma, i.e. the pair

    X_prior = A X A' + Sigma,
    X       = X_prior - X_prior C'(C X_prior C' + M)^-1 C X_prior.

The finite-horizon variant replaces the stationary coupling by
X_prior = A X_t A' + Sigma with the current belief covariance X_t held
fixed. Both are concave in Sigma (S >= 0 and lam I > P), and are solved
here by projected gradient ascent on Sigma alone: the filter-constrained X
is eliminated analytically at each iterate, the gradient of the trace-root
term comes from an exact eigendecomposition, PSD feasibility is kept by
eigenvalue clamping, and steps use Armijo halving so the objective sequence
is nondecreasing by construction. A stationarity fixed-point candidate

    Sigma <- lam^2 W^-1 Sh W^-1,   W = lam I - P - Omega(Sigma)

(Omega is the adjoint sensitivity of Tr[S X(Sigma)]) is tried first each
sweep and kept only when it does not decrease the objective; it typically
cuts the iteration count by orders of magnitude. The equivalent LMI form of
the program is written out in the README for anyone who prefers to plug in
an interior-point SDP solver instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    dlyap,
    is_detectable,
    is_stabilizable,
    min_eigval,
    psd_project,
    psd_sqrt,
    sym,
)
from .estimator import _measurement_update
from .exceptions import AssumptionViolated, NoConvergence
from .model import NominalMoments

__all__ = [
    "WorstCaseCovResult",
    "gelbrich_distance",
    "bures_squared",
    "worst_case_cov_steady",
    "worst_case_cov_finite",
    "solve_filter_are",
]


@dataclass(frozen=True)
class WorstCaseCovResult:
    """Maximizer Sigma_star, the induced filtered covariance, the optimal
    value, the first-order stationarity residual, and the iteration count."""

    sigma_star: np.ndarray
    x_cov: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int


def _as_moments(m):
    if isinstance(m, NominalMoments):
        return m.w_hat, m.sigma_hat
    mean, cov = m
    return np.asarray(mean, dtype=float).reshape(-1), np.asarray(cov, dtype=float)


def _check_psd_input(cov, name):
    w = np.linalg.eigvalsh(sym(cov))
    if w[0] < -1e-10:
        raise ValueError("%s must be PSD (min eigenvalue %.3e)" % (name, w[0]))


def bures_squared(cov_a, cov_b, sqrt_fn=None):
    """Squared Bures distance Tr[Sa + Sb - 2 (Sb^1/2 Sa Sb^1/2)^1/2] >= 0.

    Evaluated in the equivalent aligned-factor form |Ra - Rb U|_F^2 with
    U the orthogonal polar factor of Rb Ra (the cross trace equals the
    nuclear norm of Rb Ra), which is exact at coincident covariances where
    the trace form loses half the working precision to cancellation.
    ``sqrt_fn`` overrides the matrix square root (default: symmetric
    eigendecomposition with clamped eigenvalues), which lets tests drive the
    same computation through an independent root algorithm.
    """
    if sqrt_fn is None:
        sqrt_fn = psd_sqrt
    cov_a = sym(np.asarray(cov_a, dtype=float))
    cov_b = sym(np.asarray(cov_b, dtype=float))
    _check_psd_input(cov_a, "cov_a")
    _check_psd_input(cov_b, "cov_b")
    root_a = sqrt_fn(cov_a)
    root_b = sqrt_fn(cov_b)
    u, _, vt = np.linalg.svd(root_b @ root_a)
    align = u @ vt
    return float(np.sum((root_a - root_b @ align) ** 2))


def gelbrich_distance(moments_a, moments_b, sqrt_fn=None):
    """Moment distance sqrt(||m_a - m_b||^2 + B^2(Sigma_a, Sigma_b)).

    Depends on the two distributions only through their first two moments; it
    lower-bounds the 2-Wasserstein distance in general and equals it when both
    distributions are Gaussian.
    """
    mean_a, cov_a = _as_moments(moments_a)
    mean_b, cov_b = _as_moments(moments_b)
    b2 = bures_squared(cov_a, cov_b, sqrt_fn)
    return float(np.sqrt(np.sum((mean_a - mean_b) ** 2) + b2))


def _tr_sqrt_and_grad(sqrt_hat, sigma):
    """Tr[(Sh^1/2 Sigma Sh^1/2)^1/2] and its gradient in Sigma.

    The gradient is (1/2) Sh^1/2 H^-1/2 Sh^1/2 with H = Sh^1/2 Sigma Sh^1/2;
    eigenvalues of H at relative zero are excluded (pseudo-inverse), which
    restricts the transport term to the range of Sh for singular nominals.
    """
    h = sym(sqrt_hat @ sigma @ sqrt_hat)
    w, v = np.linalg.eigh(h)
    roots = np.sqrt(np.clip(w, 0.0, None))
    value = float(roots.sum())
    top = roots[-1] if roots.size else 0.0
    cutoff = 1e-12 * top
    inv_half = np.where(roots > cutoff, 0.5 / np.maximum(roots, 1e-300), 0.0)
    grad = sym(sqrt_hat @ ((v * inv_half) @ v.T) @ sqrt_hat)
    return value, grad


def _filter_fixpoint(A, C, M, sigma, start, tol, max_iter):
    """Stationary one-step-ahead covariance for process noise sigma.

    Iterates measure-then-propagate from ``start`` until the Frobenius change
    drops below tol. Convergence is geometric at the squared spectral radius
    of the filter loop.
    """
    x_prior = sym(np.asarray(start, dtype=float))
    for _ in range(max_iter):
        x_post = _measurement_update(x_prior, C, M)[0]
        x_next = sym(A @ x_post @ A.T + sigma)
        delta = np.linalg.norm(x_next - x_prior, "fro")
        x_prior = x_next
        if delta < tol:
            return x_prior
    raise NoConvergence("filter covariance recursion hit %d iterations" % max_iter)


def _ascend(sigma_hat, P, lam, coupling, tol, max_iter):
    """Shared projected-ascent loop; ``coupling`` maps Sigma to
    (Tr[S X], Omega, X) for the variant being solved.

    The stationarity residual is the projected-gradient mapping norm divided
    by max(1, lam): gradient entries are differences of O(lam) terms, so an
    absolute criterion is unreachable in doubles for large penalties.

    At a stationarity fixed-point candidate Sigma+ = lam^2 W^-1 Sh W^-1 the
    transport-term gradient equals W = lam I - P - Omega exactly on the range
    of Sh, so the gradient there is computed as Omega(Sigma+) + pm + R W R
    (R the range projector): a difference of small matrices, free of the
    lam-scale cancellation that limits the generic eigendecomposition form.
    """
    n = P.shape[0]
    eye = np.eye(n)
    pm = sym(P) - lam * eye
    sqrt_hat = psd_sqrt(sigma_hat)
    scale = max(1.0, lam)
    w_hat_eig, v_hat = np.linalg.eigh(sym(np.asarray(sigma_hat, dtype=float)))
    keep = w_hat_eig > 1e-12 * max(w_hat_eig[-1], 0.0)
    range_proj = sym((v_hat[:, keep]) @ (v_hat[:, keep]).T)

    def evaluate(sigma):
        tr_sx, omega, x_next = coupling(sigma)
        t_val, t_grad = _tr_sqrt_and_grad(sqrt_hat, sigma)
        f = tr_sx + float(np.sum(pm * sigma)) + 2.0 * lam * t_val
        g = sym(omega + pm + 2.0 * lam * t_grad)
        return f, g, x_next, omega

    def mapping_residual(sigma, g):
        return np.linalg.norm(psd_project(sigma + g) - sigma, "fro") / scale

    sigma = psd_project(sigma_hat)
    f, g, x_next, omega = evaluate(sigma)
    residual = mapping_residual(sigma, g)
    step = 1.0 / scale
    iterations = 0
    stalled = 0
    for iterations in range(1, max_iter + 1):
        if residual <= tol:
            return WorstCaseCovResult(sigma, x_next, f, residual, iterations)

        new = None
        w_mat = sym(lam * eye - P - omega)
        if min_eigval(w_mat) > 0.0:
            half = np.linalg.solve(w_mat, sigma_hat)
            cand = psd_project(lam * lam * np.linalg.solve(w_mat, half.T))
            tr_sx_c, omega_c, x_c = coupling(cand)
            t_val_c = _tr_sqrt_and_grad(sqrt_hat, cand)[0]
            fc = tr_sx_c + float(np.sum(pm * cand)) + 2.0 * lam * t_val_c
            gc = sym(omega_c + pm + range_proj @ w_mat @ range_proj)
            rc = mapping_residual(cand, gc)
            improved = fc > f + 1e-15 * (1.0 + abs(f))
            within_noise = fc >= f - 1e-9 * (1.0 + abs(f))
            if improved or (within_noise and rc < 0.9 * residual):
                new = (cand, fc, gc, x_c, omega_c, rc)

        if new is None:
            t = step
            while t > 1e-20:
                trial = psd_project(sigma + t * g)
                drift = trial - sigma
                if np.linalg.norm(drift, "fro") <= 1e-15 * (1.0 + np.linalg.norm(sigma, "fro")):
                    break
                ft, gt, xt, ot = evaluate(trial)
                if ft >= f + 1e-4 * float(np.sum(g * drift)):
                    new = (trial, ft, gt, xt, ot, mapping_residual(trial, gt))
                    step = 2.0 * t
                    break
                t *= 0.5

        if new is None:
            break  # no improving step exists at float resolution
        assert new[1] >= f - 1e-9 * (1.0 + abs(f)), "ascent objective must be nondecreasing"
        stalled = stalled + 1 if new[1] <= f + 1e-14 * (1.0 + abs(f)) else 0
        sigma, f, g, x_next, omega, residual = new
        if stalled >= 5:
            break  # progress below float resolution several sweeps in a row

    if residual <= tol:
        return WorstCaseCovResult(sigma, x_next, f, residual, iterations)
    raise NoConvergence(
        "worst-case covariance ascent stalled at normalized residual %.3e after %d iterations"
        % (residual, iterations)
    )


def worst_case_cov_steady(system, S_ss, P_ss, sigma_hat, lam, tol=1e-7,
                          max_iter=10_000, filter_tol=1e-12, filter_max_iter=100_000):
    """Stationary worst-case covariance coupled to its own steady filter.

    Raises AssumptionViolated when lam*I - P_ss is not PD (the program is
    unbounded there). On success the returned covariance pair satisfies the
    stationary filter constraints to the filter tolerance and the result's
    kkt_residual (projected-gradient norm over max(1, lam)) is at most
    ``tol``. S_ss is nominally PSD but is accepted with the O(|P|^2/lam)
    negative part that partially actuated plants produce; the ascent then
    certifies a stationary point rather than a global concave maximum.
    """
    A, C, M = system.A, system.C, system.M
    n = system.n_x
    if min_eigval(lam * np.eye(n) - P_ss) <= 0.0:
        raise AssumptionViolated(
            "1 (penalty dominance)",
            "lam*I - P_ss not positive definite; covariance program unbounded",
        )
    _check_psd_input(sigma_hat, "sigma_hat")
    S_ss = sym(S_ss)
    warm = {"x_prior": sym(np.asarray(sigma_hat, dtype=float)) + np.eye(n)}

    def coupling(sigma):
        x_prior = _filter_fixpoint(A, C, M, sigma, warm["x_prior"], filter_tol, filter_max_iter)
        warm["x_prior"] = x_prior
        x_post, _, ikc = _measurement_update(x_prior, C, M)
        loop = A @ ikc
        omega = dlyap(loop, sym(ikc.T @ S_ss @ ikc))
        return float(np.sum(S_ss * x_post)), omega, x_post

    return _ascend(sigma_hat, P_ss, lam, coupling, tol, max_iter)


def worst_case_cov_finite(system, S_next, P_next, sigma_hat, lam, x_cov,
                          tol=1e-7, max_iter=10_000):
    """Single-stage worst-case covariance given the current belief covariance.

    The one-step-ahead covariance is A x_cov A' + Sigma, so the filter part is
    a direct function of Sigma rather than a stationary fixed point. The
    returned x_cov is the belief covariance at the next stage under the
    maximizer, and the objective equals that stage's adversary value.
    """
    A, C, M = system.A, system.C, system.M
    n = system.n_x
    if min_eigval(lam * np.eye(n) - P_next) <= 0.0:
        raise AssumptionViolated(
            "1 (penalty dominance)",
            "lam*I - P not positive definite; covariance program unbounded",
        )
    _check_psd_input(sigma_hat, "sigma_hat")
    S_next = sym(S_next)
    propagated = sym(A @ sym(np.asarray(x_cov, dtype=float)) @ A.T)

    def coupling(sigma):
        x_prior = sym(propagated + sigma)
        x_post, _, ikc = _measurement_update(x_prior, C, M)
        omega = sym(ikc.T @ S_next @ ikc)
        return float(np.sum(S_next * x_post)), omega, x_post

    return _ascend(sigma_hat, P_next, lam, coupling, tol, max_iter)


def solve_filter_are(system, sigma_star, tol=1e-12, max_iter=100_000, residual_tol=1e-8):
    """Stationary (one-step-ahead, filtered) covariance pair for noise sigma_star.

    Checks the filter regularity conditions numerically ((A, C) detectable,
    (A, sigma_star^1/2) stabilizable), then iterates the covariance recursion
    from zero until the Frobenius change is below tol. The fixed-point
    residual of the stationary equation must come out below ``residual_tol``.
    """
    A, C, M = system.A, system.C, system.M
    sigma_star = sym(np.asarray(sigma_star, dtype=float))
    if not is_detectable(A, C):
        raise AssumptionViolated("4 (filter regularity)", "(A, C) is not detectable")
    if not is_stabilizable(A, psd_sqrt(psd_project(sigma_star))):
        raise AssumptionViolated("4 (filter regularity)", "(A, Sigma^1/2) is not stabilizable")

    x_prior = _filter_fixpoint(A, C, M, sigma_star, np.zeros_like(sigma_star), tol, max_iter)
    x_post = _measurement_update(x_prior, C, M)[0]
    residual = np.linalg.norm(x_prior - sym(A @ x_post @ A.T + sigma_star), "fro")
    if residual > residual_tol:
        raise NoConvergence("filter stationary-equation residual %.3e above %.1e" % (residual, residual_tol))
    return x_prior, x_post
