"""Shared fixtures-in-spirit: reference instances, random admissible systems,
and independent oracle implementations used by the tests."""

import numpy as np

import wdrc
from wdrc._linalg import max_eigval, sym


def scalar_system(a=1.0, b=1.0, c=1.0, m=1.0, m0=0.0, m0_cov=1.0):
    return wdrc.LinearSystem(A=[[a]], B=[[b]], C=[[c]], M=[[m]],
                             m0=[m0], M0=[[m0_cov]])


def scalar_weights(q=1.0, qf=None, r=1.0):
    qf = q if qf is None else qf
    return wdrc.CostWeights(Q=[[q]], Qf=[[qf]], R=[[r]])


def scalar_nominal(w=0.0, s=1.0):
    return wdrc.NominalMoments(w_hat=[w], sigma_hat=[[s]])


# canonical instances exercised throughout the spec examples
REF = dict(system=scalar_system(), weights=scalar_weights(), nominal=scalar_nominal(),
           lam=10.0)  # P=5/3, K=-2/3, S=1, H=1/15

ZERO_A = dict(system=scalar_system(a=0.0, m0_cov=0.0), weights=scalar_weights(),
              nominal=scalar_nominal(), lam=2.0)  # Sigma*=4, X-=4, X=0.8, rho=2


def random_psd(rng, n, scale=1.0):
    m = rng.standard_normal((n, n))
    return sym(m @ m.T) * scale / n


def random_system(rng, n_x, n_u=None, n_y=None, rho_target=None,
                  meas_scale=0.5, sigma_scale=0.5):
    """Random plant that is observable through Q = I and detectable.

    Dimensions default to full actuation/observation; the spectral radius of
    A is drawn in [0.3, 1.05] unless pinned by rho_target.
    """
    n_u = n_x if n_u is None else n_u
    n_y = n_x if n_y is None else n_y
    A = rng.standard_normal((n_x, n_x))
    radius = max(np.abs(np.linalg.eigvals(A)))
    target = rng.uniform(0.3, 1.05) if rho_target is None else rho_target
    A *= target / radius
    B = rng.standard_normal((n_x, n_u))
    C = rng.standard_normal((n_y, n_x))
    M = random_psd(rng, n_y, meas_scale) + meas_scale * np.eye(n_y)
    system = wdrc.LinearSystem(A=A, B=B, C=C, M=M,
                               m0=np.zeros(n_x), M0=0.1 * np.eye(n_x))
    weights = wdrc.CostWeights(Q=np.eye(n_x), Qf=np.eye(n_x),
                               R=np.eye(n_u))
    nominal = wdrc.NominalMoments(
        w_hat=0.1 * rng.standard_normal(n_x),
        sigma_hat=random_psd(rng, n_x, sigma_scale) + 0.05 * np.eye(n_x))
    return system, weights, nominal


def admissible_lambda(system, weights, factor=4.0):
    """A penalty comfortably above the admissibility floor for this plant."""
    p_inf = wdrc.solve_are(system, weights, 1e9)
    floor = max_eigval(p_inf)
    lam = max(factor * floor, 1.0)
    for _ in range(60):
        try:
            p = wdrc.solve_are(system, weights, lam)
            if wdrc.check_lambda(lam, p, margin=0.05).passed:
                return lam
        except wdrc.WdrcError:
            pass
        lam *= 2.0
    raise RuntimeError("no admissible penalty found")


def random_admissible(rng, n_x, **kwargs):
    """Random plant plus an admissible penalty (retries until design works)."""
    for _ in range(50):
        system, weights, nominal = random_system(rng, n_x, **kwargs)
        try:
            lam = admissible_lambda(system, weights)
            bundle = wdrc.design_wdrc(system, weights, nominal, lam)
            return system, weights, nominal, lam, bundle
        except (wdrc.WdrcError, RuntimeError):
            continue
    raise RuntimeError("could not draw an admissible random system")


def newton_sqrt(a, iters=100, tol=1e-14):
    """Denman-Beavers iteration for the PSD matrix square root.

    Independent of the eigendecomposition route used by the package; valid
    for PD inputs (tests use well-conditioned covariances).
    """
    a = np.asarray(a, dtype=float)
    y = a.copy()
    z = np.eye(a.shape[0])
    for _ in range(iters):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z_next = 0.5 * (z + np.linalg.inv(y))
        if np.linalg.norm(y_next - y, "fro") < tol * max(1.0, np.linalg.norm(y, "fro")):
            y = y_next
            break
        y, z = y_next, z_next
    return sym(y)


def taylor_expm(a, terms=30):
    """Truncated-series matrix exponential used as a discretization oracle."""
    a = np.asarray(a, dtype=float)
    acc = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms + 1):
        term = term @ a / k
        acc = acc + term
    return acc
