from __future__ import annotations

import warnings

import numpy as np
import pytest

from cimpe.linalg_kit import pinv, spectral_radius
from cimpe.stage_game import (
    AffineRule, StageGameData, StageGameError, best_response_map, check_existence_conditions, expected_costs,
    first_order_residuals, iterate_best_responses, solve_stage_game,
)

from instances import random_assumption3_games, random_stage_game


def scalar_game(c23: float, e23: float, rho: float = 0.5) -> StageGameData:
    """x ~ N(0, 1); y_i = x + noise encoded in a 3-dim state (x, v1, v2)."""
    C = np.zeros((5, 5))
    E = np.zeros((5, 5))
    C[0, 0] = E[0, 0] = 1.0
    C[3, 3] = E[4, 4] = 1.0
    C[0, 3] = C[3, 0] = -0.5
    E[0, 4] = E[4, 0] = -0.5
    C[3, 4] = C[4, 3] = c23
    E[3, 4] = E[4, 3] = e23
    C[4, 4] = max(c23 ** 2, 1.0)
    E[3, 3] = max(e23 ** 2, 1.0)
    v = (1 - rho) / rho  # corr(y1, y2) = 1/(1+v) = rho
    sigma = np.diag([1.0, v, v])
    return StageGameData.static(C, E, sigma, [[1, 1, 0]], [[1, 0, 1]], 1, 1)


def test_scalar_k1():
    g = scalar_game(2.0, 2.0)
    rep = check_existence_conditions(g)
    assert rep.rho_k1 == pytest.approx(4.0)
    assert not rep.assumption3
    assert rep.rho_q == pytest.approx(0.25)


def test_scalar_stein_singularity_is_a_failure():
    # K1 = 4 and Q = 1/4, so the scalar Stein operator 1 - K1 Q vanishes
    g = scalar_game(2.0, 2.0, rho=0.5)
    rep = check_existence_conditions(g)
    assert rep.i_minus_k_invertible and not rep.stein_nonsingular and not rep.ok
    with pytest.raises(StageGameError):
        solve_stage_game(g)


def test_outside_assumption3_but_unique():
    g = scalar_game(2.0, 2.0, rho=0.3)
    rep = check_existence_conditions(g)
    assert not rep.assumption3 and rep.assumption5
    sol = solve_stage_game(g)
    assert max(sol.residuals.values()) < 1e-9


def test_decoupled_game_is_two_estimation_problems(rng):
    g = random_stage_game(rng, dims=(2, 2, 1, 1, 2), mean_terms=False)
    n = g.n
    u1, u2 = g.cut()[1], g.cut()[2]
    C, E = g.C.copy(), g.E.copy()
    C[u1, u2] = 0
    C[u2, u1] = 0
    E[u1, u2] = 0
    E[u2, u1] = 0
    g = StageGameData.static(C, E, g.sigma, g.H1, g.H2, 1, 2, d=g.ec, f=g.ee)
    sol = solve_stage_game(g)
    s = g.covs()
    t1 = -np.linalg.inv(C[u1, u1]) @ C[:n, u1].T @ s["x1"] @ pinv(s["11"])
    t2 = -np.linalg.inv(E[u2, u2]) @ E[:n, u2].T @ s["x2"] @ pinv(s["22"])
    assert np.allclose(sol.T1, t1, atol=1e-12) and np.allclose(sol.T2, t2, atol=1e-12)
    assert sol.report.rho_k1 == 0


def test_single_player_branch(rng):
    g = random_stage_game(rng, dims=(2, 1, 2, 2, 0), mean_terms=False)
    sol = solve_stage_game(g)
    assert sol.T2.shape == (0, 2) and sol.l2.shape == (0,)
    assert max(sol.residuals.values()) < 1e-9


def test_own_action_block_must_be_pd():
    g = scalar_game(0.0, 0.0)
    C = g.C.copy()
    C[3, 3] = 0.0
    with pytest.raises(ValueError):
        check_existence_conditions(StageGameData.static(C, g.E, g.sigma, g.H1, g.H2, 1, 1))


def test_solution_is_a_fixed_point_and_matches_iteration():
    for g in random_assumption3_games(1, 25):
        sol = solve_stage_game(g)
        assert max(sol.residuals.values()) < 1e-8
        m = np.full(g.n, 0.3)
        r1, r2, _ = iterate_best_responses(g, m)
        s = g.covs()
        assert np.allclose((sol.T1 - r1.T) @ s["11"], 0, atol=1e-8)
        assert np.allclose((sol.T2 - r2.T) @ s["22"], 0, atol=1e-8)
        assert np.allclose(sol.rule(1, m).b, r1.b, atol=1e-8)
        assert np.allclose(sol.rule(2, m).b, r2.b, atol=1e-8)


def test_no_profitable_affine_deviation(rng):
    for g in random_assumption3_games(2, 10):
        sol = solve_stage_game(g)
        m = rng.standard_normal(g.n)
        r = (sol.rule(1, m), sol.rule(2, m))
        base = expected_costs(g, *r, m)
        assert base[0] == pytest.approx(sol.value(1, m), rel=1e-9, abs=1e-9)
        assert base[1] == pytest.approx(sol.value(2, m), rel=1e-9, abs=1e-9)
        for _ in range(20):
            for i in (0, 1):
                dev = list(r)
                dev[i] = AffineRule(r[i].T + 1e-3 * rng.standard_normal(r[i].T.shape), r[i].b + 1e-3 * rng.standard_normal(r[i].b.shape))
                assert expected_costs(g, *dev, m)[i] >= base[i] - 1e-12


def test_best_response_map_improves(rng):
    g = random_stage_game(rng)
    m = rng.standard_normal(g.n)
    other = AffineRule(rng.standard_normal((g.nu2, g.H2.shape[0])), rng.standard_normal(g.nu2))
    mine = AffineRule(rng.standard_normal((g.nu1, g.H1.shape[0])), rng.standard_normal(g.nu1))
    br = best_response_map(g, 1, other, m)
    assert expected_costs(g, br, other, m)[0] <= expected_costs(g, mine, other, m)[0] + 1e-12


def test_rho_q_at_most_one(rng):
    for _ in range(200):
        g = random_stage_game(rng)
        assert check_existence_conditions(g).rho_q <= 1 + 1e-8


def test_value_matches_monte_carlo(rng):
    for g in random_assumption3_games(3, 5):
        sol = solve_stage_game(g)
        m = rng.standard_normal(g.n)
        x = m[:, None] + np.linalg.cholesky(g.sigma) @ rng.standard_normal((g.n, 100_000))
        w = np.vstack([x, sol.T1 @ g.H1 @ (x - m[:, None]) + sol.rule(1, m).b[:, None],
                       sol.T2 @ g.H2 @ (x - m[:, None]) + sol.rule(2, m).b[:, None]])
        d, f = g.linear_terms(m)
        consts = g.constants(m)
        for i, (cm, lin) in enumerate(((g.C, d), (g.E, f))):
            cost = np.einsum("in,ij,jn->n", w, cm, w) + 2 * lin @ w + consts[i]
            z = (cost.mean() - sol.value(i + 1, m)) / (cost.std(ddof=1) / np.sqrt(cost.size))
            assert abs(z) < 4.0


def test_from_joint_records_cross_residual(rng):
    g = random_stage_game(rng, dims=(2, 1, 1, 1, 1))
    j = g.joint_cov()
    back = StageGameData.from_joint(g.C, g.E, j, 2, 1, 1, 1, 1)
    assert back.cross_block_residual < 1e-10
    j2 = j.copy()
    j2[2, 3] += 0.1
    j2[3, 2] += 0.1
    assert StageGameData.from_joint(g.C, g.E, j2, 2, 1, 1, 1, 1).cross_block_residual == pytest.approx(0.1)


def test_near_singular_warning():
    # rho(K1) rho(Q) just below 1 triggers the conditioning warning
    g = scalar_game(2.0, 2.0 * (1 - 1e-10), rho=0.5)
    rep = check_existence_conditions(g)
    assert rep.near_singular
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        solve_stage_game(g, rep)
    assert any("within" in str(x.message) for x in w)


def test_value_coefficients_match_exact_expectation():
    """Value quadratic against the direct Gaussian expectation on the oracle instances."""
    rng = np.random.default_rng(12)
    for g in random_assumption3_games(0, 200):
        sol = solve_stage_game(g)
        m = rng.standard_normal(g.n)
        exact = expected_costs(g, sol.rule(1, m), sol.rule(2, m), m)
        for i in (1, 2):
            assert sol.value(i, m) == pytest.approx(exact[i - 1], rel=1e-9, abs=1e-9)
