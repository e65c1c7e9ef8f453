from __future__ import annotations

import numpy as np
import pytest

from cimpe import bundled
from cimpe.closed_loop import random_law
from cimpe.game_model import SpecError, build_info_maps, spec_from_dict
from cimpe.induction import (
    BeliefAssumptionError, ExistenceFailure, ValueQuadratic, evaluate_value, lift_costs, solve_cimpe, terminal_value,
)
from cimpe.stage_game import AffineRule, expected_costs
from cimpe.verifier import closed_form_costs, realize_control_laws

from instances import existence_failure_doc, random_delayed_sharing_doc

J1_SIX = 1.8459802
J2_SIX = 2.1383428


def test_six_stage2_rule(six_solution):
    st = six_solution[2].solution
    assert st.T1.shape == (0, 0)
    assert st.T2[0, 0] == pytest.approx(-2 / 7, abs=1e-12)
    # u = T2 (y - m_x) + L2 m, so the coefficient on the mean is L2[0] - T2
    assert st.L2[0, 0] - st.T2[0, 0] == pytest.approx(-3 / 14, abs=1e-12)
    assert st.L2[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_six_stage2_values(six_solution):
    v = six_solution.value(2)
    assert v.Phi[0][0, 0] == pytest.approx(1 / 4, abs=1e-12)
    assert v.Phi[1][0, 0] == pytest.approx(1 / 2, abs=1e-12)
    assert np.allclose(v.Phi[0][1:, :], 0, atol=1e-12) and np.allclose(v.Phi[1][:, 1:], 0, atol=1e-12)
    assert v.Upsilon[0] == pytest.approx(37 / 21, abs=1e-12)
    assert v.Upsilon[1] == pytest.approx(41 / 21, abs=1e-12)
    assert np.allclose(v.Xi[0], 0) and np.allclose(v.Xi[1], 0)


def test_six_stage1_gains(six_solution):
    st = six_solution[1].solution
    assert st.T1[0, 0] == pytest.approx(-5 / 59, abs=1e-12)
    assert st.T2[0, 0] == pytest.approx(-9 / 59, abs=1e-12)
    assert six_solution[1].report.rho_k1 == pytest.approx(1 / 15, abs=1e-12)
    assert six_solution[1].report.rho_q == pytest.approx(1 / 4, abs=1e-12)


def test_six_initial_values_regression(six_solution):
    v = six_solution.value(1)
    # M_1 = E[S_1] = 0 with no common information at stage 1
    j = evaluate_value(v, np.zeros(v.dim))
    assert j[0] == pytest.approx(J1_SIX, abs=5e-8)
    assert j[1] == pytest.approx(J2_SIX, abs=5e-8)


def test_terminal_value(six, six_maps):
    sigma = np.array([[0.5]])
    v = terminal_value(six[0], six_maps, sigma)
    assert v.Phi[0][0, 0] == 1.0 and v.Upsilon == (0.5, 0.5)
    assert evaluate_value(v, [2.0]) == (4.5, 4.5)


def test_evaluate_value_checks_dimension():
    with pytest.raises(ValueError):
        evaluate_value(ValueQuadratic.zero(2), [1.0])


def test_lift_with_zero_continuation_is_the_stage_cost(six, six_solution, six_maps):
    b = six_solution.beliefs[1]
    data = lift_costs(six[0], six_maps, b, ValueQuadratic.zero(1))
    r1, r2 = six[0].R[0][1], six[0].R[1][1]
    # w = (x, y22, u22); stage-2 costs are over (x, u22)
    assert data.C[0, 0] == r1[0, 0] and data.E[2, 2] == r2[1, 1]
    assert np.allclose(data.Dc, 0) and data.kc == 0


def test_lift_costs_match_monte_carlo(rng):
    """Stage cost plus continuation along simulated transitions."""
    spec, info = spec_from_dict(random_delayed_sharing_doc(np.random.default_rng(4), T=3))
    maps = build_info_maps(spec, info)
    sol = solve_cimpe(spec, info)
    t = 2
    belief = sol.beliefs[t - 1]
    V = sol.value(t + 1)
    data = lift_costs(spec, maps, belief, V)
    m = rng.standard_normal(data.n)
    rules = []
    for i, (nu, h) in enumerate(((data.nu1, data.H1), (data.nu2, data.H2))):
        rules.append(AffineRule(rng.standard_normal((nu, h.shape[0])), rng.standard_normal(nu)))
    exact = expected_costs(data, rules[0], rules[1], m)

    n = 200_000
    tr = belief.transition
    s = m[:, None] + np.linalg.cholesky(data.sigma + 1e-300 * np.eye(data.n)) @ rng.standard_normal((data.n, n))
    u = [r.T @ (h @ (s - m[:, None])) + r.b[:, None] for r, h in zip(rules, (data.H1, data.H2))]
    noise = np.linalg.cholesky(tr.noise_cov + 1e-12 * np.eye(tr.noise_cov.shape[0])) @ rng.standard_normal((tr.noise_cov.shape[0], n))
    z = tr.gamma_s @ s + tr.gamma_u[0] @ u[0] + tr.gamma_u[1] @ u[1] + tr.gamma_n @ noise
    m_next = belief.update(np.repeat(m[:, None], n, axis=1), z)
    nx = spec.nx(t)
    w = np.vstack([s[:nx], u[0], u[1]])
    for i in (0, 1):
        stage = np.einsum("in,ij,jn->n", w, spec.R[i][t - 1], w)
        cont = np.einsum("in,ij,jn->n", m_next, V.Phi[i], m_next) + V.Xi[i] @ m_next + V.Upsilon[i]
        tot = stage + cont
        zscore = (tot.mean() - exact[i]) / (tot.std(ddof=1) / np.sqrt(n))
        assert abs(zscore) < 4.0


@pytest.mark.parametrize("seed", range(6))
def test_dynamic_programming_consistency(seed):
    """The stage-1 value equals the exact closed-loop cost of the realized laws."""
    spec, info = spec_from_dict(random_delayed_sharing_doc(np.random.default_rng(seed), T=3 + seed % 2, nx=1 + seed % 2))
    sol = solve_cimpe(spec, info)
    laws = realize_control_laws(sol)
    j = closed_form_costs(spec, sol.maps, laws)
    v = evaluate_value(sol.value(1), np.zeros(sol.value(1).dim))
    assert np.allclose(j, v, rtol=1e-9, atol=1e-10)


def test_gains_independent_of_continuation_intercepts(six, six_maps, six_solution):
    """Xi and Upsilon of the continuation change intercepts only, never the gains."""
    b = six_solution.beliefs[0]
    V = six_solution.value(2)
    V2 = ValueQuadratic(V.Phi, (V.Xi[0] + 1.0, V.Xi[1] - 2.0), (V.Upsilon[0] + 5, V.Upsilon[1]))
    from cimpe.stage_game import solve_stage_game
    a = solve_stage_game(lift_costs(six[0], six_maps, b, V))
    c = solve_stage_game(lift_costs(six[0], six_maps, b, V2))
    assert np.allclose(a.T1, c.T1) and np.allclose(a.T2, c.T2)
    assert not np.allclose(a.l1, c.l1)


def test_action_costs_only_give_zero_laws():
    """Own-action cost only: every law is zero and every value is zero."""
    doc = random_delayed_sharing_doc(np.random.default_rng(1), T=3)
    doc["costs"]["R1"] = [np.diag([0, 0, 1, 0]).tolist()] * 2
    doc["costs"]["R2"] = [np.diag([0, 0, 0, 1]).tolist()] * 2
    doc["costs"]["terminal1"] = doc["costs"]["terminal2"] = np.zeros((2, 2)).tolist()
    sol = solve_cimpe(*spec_from_dict(doc))
    for rec in sol.stages.values():
        st = rec.solution
        for a in (st.T1, st.T2, st.l1, st.l2, st.L1, st.L2):
            assert np.all(a == 0)
        assert rec.value.Upsilon == (0.0, 0.0)


def test_existence_failure_is_reported():
    spec, info = spec_from_dict(existence_failure_doc())
    with pytest.raises(ExistenceFailure) as exc:
        solve_cimpe(spec, info)
    assert exc.value.stage == 1
    assert exc.value.report.rho_k1 == pytest.approx(4.0)
    assert exc.value.partial is not None and not exc.value.partial.complete


def test_belief_failure_and_override():
    spec, info = bundled.six_no_action_sharing()
    with pytest.raises(BeliefAssumptionError):
        solve_cimpe(spec, info)
    sol = solve_cimpe(spec, info, assume_independence=True)
    assert sol.independence_overridden and sol.complete


def test_invalid_spec_raises():
    doc = bundled.six_dict()
    doc["stages"][0]["W0"] = [[-1.0]]
    with pytest.raises(SpecError):
        solve_cimpe(*spec_from_dict(doc))


def test_six_is_fast(six):
    import time
    t0 = time.perf_counter()
    solve_cimpe(*six)
    assert time.perf_counter() - t0 < 1.0


def test_random_profiles_cost_more_for_the_deviator(six, six_maps, six_laws, rng):
    base = closed_form_costs(six[0], six_maps, six_laws)
    for _ in range(10):
        dev = random_law(six_maps, 1, rng, scale=0.3)
        j = closed_form_costs(six[0], six_maps, (dev, six_laws[1]))
        assert j[0] >= base[0] - 1e-12
