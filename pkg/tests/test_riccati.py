import numpy as np
import pytest

import wdrc
from wdrc import (
    AssumptionViolated,
    backward_pass,
    check_lambda,
    compute_phi,
    finite_horizon_recursion,
    solve_are,
    steady_state_policy_params,
)
from wdrc._linalg import spectral_radius

from helpers import (
    REF,
    admissible_lambda,
    random_system,
    scalar_nominal,
    scalar_system,
    scalar_weights,
)


class TestComputePhi:
    def test_scalar(self):
        res = compute_phi(scalar_system(), scalar_weights(), 10.0)
        assert abs(res.matrix[0, 0] - 0.9) < 1e-15
        assert res.is_psd

    def test_zero_input(self):
        system = scalar_system(b=0.0)
        res = compute_phi(system, scalar_weights(), 4.0)
        assert abs(res.matrix[0, 0] + 0.25) < 1e-15
        assert not res.is_psd

    def test_small_lambda(self):
        res = compute_phi(scalar_system(), scalar_weights(), 2.0)
        assert abs(res.matrix[0, 0] - 0.5) < 1e-15

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            compute_phi(scalar_system(), scalar_weights(), 0.0)


class TestBackwardPass:
    def test_one_stage_terminal_zero(self):
        system = scalar_system()
        weights = scalar_weights(qf=0.0)
        nominal = scalar_nominal(s=3.0)
        P, S, r, q, K, L, H, G = backward_pass(system, weights, nominal, 10.0, 1)
        assert abs(P[0, 0, 0] - 1.0) < 1e-15  # P_0 = Q
        assert abs(S[0, 0, 0]) < 1e-15
        assert abs(r[0, 0]) < 1e-15
        assert abs(q[0] + 10.0 * 3.0) < 1e-12  # -lam tr(sigma_hat)

    def test_two_stage_hand_recursion(self):
        P, *_ = backward_pass(scalar_system(), scalar_weights(qf=0.0),
                              scalar_nominal(), 10.0, 2)
        assert abs(P[1, 0, 0] - 1.0) < 1e-15
        assert abs(P[0, 0, 0] - (1.0 + 1.0 / 1.9)) < 1e-12

    def test_terminal_weight_violating_penalty(self):
        weights = scalar_weights(qf=20.0)  # Qf = 2 lam
        with pytest.raises(AssumptionViolated) as exc:
            backward_pass(scalar_system(), weights, scalar_nominal(), 10.0, 3)
        assert "assumption 1" in str(exc.value)

    def test_nonzero_mean_q_term(self):
        # q_0 for T=1 with Qf=0 reduces to -lam tr(sigma_hat) regardless of w_hat
        nominal = scalar_nominal(w=0.7, s=2.0)
        *_, q, K, L, H, G = backward_pass(scalar_system(), scalar_weights(qf=0.0),
                                          nominal, 5.0, 1)[3:]
        assert abs(q[0] + 10.0) < 1e-12


class TestSolveAre:
    def test_scalar_reference(self):
        P = solve_are(REF["system"], REF["weights"], REF["lam"])
        assert abs(P[0, 0] - 5.0 / 3.0) < 1e-11

    def test_zero_dynamics(self):
        P = solve_are(scalar_system(a=0.0), scalar_weights(q=3.0), 10.0)
        assert abs(P[0, 0] - 3.0) < 1e-12

    def test_zero_phi_lyapunov(self):
        # B chosen so B^2/R = 1/lam makes Phi = 0; P = Q + a^2 P
        lam = 2.0
        system = scalar_system(a=0.5, b=1.0 / np.sqrt(lam))
        P = solve_are(system, scalar_weights(), lam)
        assert abs(P[0, 0] - 4.0 / 3.0) < 1e-12

    def test_inadmissible_lambda(self):
        with pytest.raises(AssumptionViolated) as exc:
            solve_are(REF["system"], REF["weights"], 1.0)
        assert "assumption 1" in str(exc.value)

    def test_unobservable_rejected(self):
        system = scalar_system(a=2.0)
        weights = wdrc.CostWeights(Q=[[0.0]], Qf=[[0.0]], R=[[1.0]])
        with pytest.raises(AssumptionViolated) as exc:
            solve_are(system, weights, 50.0)
        assert "assumption 3" in str(exc.value)

    def test_finite_horizon_converges_to_steady_state(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            system, weights, nominal = random_system(rng, rng.integers(2, 5))
            lam = admissible_lambda(system, weights)
            P_ss = solve_are(system, weights, lam)
            P, *_ = backward_pass(system, weights, nominal, lam, 1000)
            assert np.linalg.norm(P[0] - P_ss, "fro") < 1e-6

    def test_stable_penalized_loop(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            system, weights, _ = random_system(rng, 3)
            lam = admissible_lambda(system, weights)
            P = solve_are(system, weights, lam)
            phi = compute_phi(system, weights, lam).matrix
            closed = system.A.T @ np.linalg.inv(np.eye(3) + P @ phi)
            assert spectral_radius(closed) < 1.0


class TestSteadyPolicyParams:
    def test_scalar_reference_values(self):
        P = solve_are(REF["system"], REF["weights"], REF["lam"])
        p = steady_state_policy_params(REF["system"], REF["weights"],
                                       REF["nominal"], REF["lam"], P)
        assert abs(p.K[0, 0] + 2.0 / 3.0) < 1e-11
        assert abs(p.S[0, 0] - 1.0) < 1e-11
        assert abs(p.H[0, 0] - 1.0 / 15.0) < 1e-11
        assert abs(p.r[0]) < 1e-14 and abs(p.L[0]) < 1e-14 and abs(p.G[0]) < 1e-14

    def test_zero_dynamics(self):
        system = scalar_system(a=0.0)
        P = solve_are(system, scalar_weights(), 10.0)
        p = steady_state_policy_params(system, scalar_weights(), scalar_nominal(), 10.0, P)
        for v in (p.K, p.L, p.H, p.G, p.S):
            assert np.abs(v).max() < 1e-14

    def test_bias_with_nonzero_mean(self):
        system = scalar_system(a=0.0)
        nominal = scalar_nominal(w=0.3)
        P = solve_are(system, scalar_weights(), 2.0)
        p = steady_state_policy_params(system, scalar_weights(), nominal, 2.0, P)
        assert abs(p.r[0]) < 1e-14
        assert abs(p.L[0] + 0.3 * 2.0 / 3.0) < 1e-14  # L = -(1/(1+Phi)) w_hat

    def test_adversary_mean_consistency(self):
        # H x + G must equal (1/lam)(I+P Phi)^-1 (P A x + P w_hat + r) + w_hat
        rng = np.random.default_rng(3)
        for _ in range(10):
            system, weights, nominal = random_system(rng, 3)
            lam = admissible_lambda(system, weights)
            P = solve_are(system, weights, lam)
            p = steady_state_policy_params(system, weights, nominal, lam, P)
            phi = compute_phi(system, weights, lam).matrix
            for _ in range(10):
                x = rng.standard_normal(3)
                lhs = p.H @ x + p.G
                g = np.linalg.solve(np.eye(3) + P @ phi,
                                    P @ (system.A @ x) + P @ nominal.w_hat + p.r)
                rhs = g / lam + nominal.w_hat
                assert np.abs(lhs - rhs).max() < 1e-10

    def test_mean_state_identities(self):
        # A + B K + H = (I + Phi P)^-1 A and B L + G = (I - Phi (I+P Phi-A')^-1 P) w_hat
        rng = np.random.default_rng(9)
        for _ in range(10):
            system, weights, nominal = random_system(rng, 3)
            lam = admissible_lambda(system, weights)
            P = solve_are(system, weights, lam)
            p = steady_state_policy_params(system, weights, nominal, lam, P)
            phi = compute_phi(system, weights, lam).matrix
            eye = np.eye(3)
            lhs = system.A + system.B @ p.K + p.H
            rhs = np.linalg.solve(eye + phi @ P, system.A)
            assert np.abs(lhs - rhs).max() < 1e-9
            lhs2 = system.B @ p.L + p.G
            rhs2 = (eye - phi @ np.linalg.solve(eye + P @ phi - system.A.T, P)) @ nominal.w_hat
            assert np.abs(lhs2 - rhs2).max() < 1e-9


class TestCheckLambda:
    def test_scalar_gap(self):
        res = check_lambda(10.0, np.array([[5.0 / 3.0]]))
        assert res.passed
        assert abs(res.gap - (10.0 - 5.0 / 3.0)) < 1e-12

    def test_boundary_fails_with_margin(self):
        P = np.diag([2.0, 1.0])
        assert check_lambda(2.0, P, margin=0.0).passed
        assert not check_lambda(2.0, P, margin=1e-6).passed

    def test_zero_matrix(self):
        assert check_lambda(1e-6, np.zeros((3, 3))).passed
        assert not check_lambda(0.0, np.zeros((2, 2))).passed


class TestFiniteHorizonRecursion:
    def test_full_solution_shapes_and_symmetry(self):
        sol = finite_horizon_recursion(REF["system"], REF["weights"],
                                       REF["nominal"], REF["lam"], 6)
        assert sol.P.shape == (7, 1, 1) and sol.z.shape == (6,)
        for arrays in (sol.P, sol.S, sol.Sigma_star, sol.X_post):
            for m in arrays:
                assert np.abs(m - m.T).max() < 1e-12

    def test_gains_converge_toward_steady_state(self):
        system, weights, nominal, lam = (REF["system"], REF["weights"],
                                         REF["nominal"], REF["lam"])
        sol = finite_horizon_recursion(system, weights, nominal, lam, 60)
        P_ss = solve_are(system, weights, lam)
        params = steady_state_policy_params(system, weights, nominal, lam, P_ss)
        assert np.abs(sol.K[0] - params.K).max() < 1e-8
        assert np.abs(sol.H[0] - params.H).max() < 1e-8
