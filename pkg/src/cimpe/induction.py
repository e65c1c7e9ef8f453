"""Backward induction over one-stage Bayesian games.

Each controller's value at stage ``t`` is a quadratic in the belief mean
``m`` of ``S_t``. The continuation value is pushed through the mean update to
lift stage ``t`` into a static Gaussian game, that game is solved in closed
form, and its expected equilibrium costs become the stage-``t`` values.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefStage, IndependenceReport, check_strategy_independence, propagate_belief
from .game_model import GameSpec, InfoMaps, InfoStructure, SpecError, ValidationReport, build_info_maps, validate_spec
from .linalg_kit import symmetrize
from .stage_game import ConditionReport, StageGameData, StageSolution, check_existence_conditions, solve_stage_game

log = logging.getLogger("cimpe")


class ExistenceFailure(RuntimeError):
    """The one-stage game at ``stage`` has no unique affine equilibrium."""

    def __init__(self, stage: int, report: ConditionReport, partial: "EquilibriumSolution | None" = None):
        super().__init__(
            f"existence conditions fail at stage {stage}: rho(K1) = {report.rho_k1:.6g}, "
            f"I - K1 invertible = {report.i_minus_k_invertible}, Stein nonsingular = {report.stein_nonsingular}"
        )
        self.stage = stage
        self.report = report
        self.partial = partial


class BeliefAssumptionError(RuntimeError):
    """The belief depends on the strategy profile (numerical check failed)."""

    def __init__(self, report: IndependenceReport):
        super().__init__(
            f"belief is strategy dependent: max deviation {report.max_deviation:.3e} "
            f"over {report.trials} random profiles (tolerance {report.tol:g})"
        )
        self.report = report


@dataclass(frozen=True)
class ValueQuadratic:
    """``V^i(m) = m' Phi[i] m + Xi[i] m + Upsilon[i]`` for both controllers."""

    Phi: tuple[np.ndarray, np.ndarray]
    Xi: tuple[np.ndarray, np.ndarray]
    Upsilon: tuple[float, float]

    @property
    def dim(self) -> int:
        return self.Phi[0].shape[0]

    @classmethod
    def zero(cls, n: int) -> "ValueQuadratic":
        return cls((np.zeros((n, n)), np.zeros((n, n))), (np.zeros(n), np.zeros(n)), (0.0, 0.0))


def evaluate_value(V: ValueQuadratic, m) -> tuple[float, float]:
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.shape[0] != V.dim:
        raise ValueError(f"mean has dimension {m.shape[0]}, value expects {V.dim}")
    return tuple(float(m @ V.Phi[i] @ m + V.Xi[i] @ m + V.Upsilon[i]) for i in (0, 1))


def _embed_x(spec: GameSpec, t: int, n_state: int, r: np.ndarray) -> np.ndarray:
    out = np.zeros((n_state, n_state))
    nx = spec.nx(t)
    out[:nx, :nx] = r
    return out


def terminal_value(spec: GameSpec, maps: InfoMaps, sigma_T: np.ndarray) -> ValueQuadratic:
    T = spec.horizon
    n = maps.n_state(T)
    nx = spec.nx(T)
    phis, ups = [], []
    for i in (1, 2):
        r = spec.R_terminal[i - 1]
        phis.append(_embed_x(spec, T, n, r))
        ups.append(float(np.sum(r * sigma_T[:nx, :nx])))
    return ValueQuadratic(tuple(phis), (np.zeros(n), np.zeros(n)), tuple(ups))


def _embed_stage_cost(spec: GameSpec, maps: InfoMaps, t: int, r: np.ndarray) -> np.ndarray:
    """Stage cost over ``(x, u1, u2)`` rewritten over ``w = (S_t, u1, u2)``."""
    nx, ns = spec.nx(t), maps.n_state(t)
    nu = spec.nu(1, t) + spec.nu(2, t)
    idx = np.concatenate([np.arange(nx), ns + np.arange(nu)])
    out = np.zeros((ns + nu, ns + nu))
    out[np.ix_(idx, idx)] = r
    return out


def lift_costs(spec: GameSpec, maps: InfoMaps, belief: BeliefStage, V_next: ValueQuadratic) -> StageGameData:
    """Stage cost plus expected continuation, as a Gaussian game over ``(S_t, U^1_t, U^2_t)``."""
    t = belief.t
    if belief.transition is None:
        raise ValueError("no transition at the terminal stage")
    tr = belief.transition
    if V_next.dim != belief.F_M.shape[0]:
        raise ValueError(f"continuation value has dimension {V_next.dim}, expected {belief.F_M.shape[0]}")
    gm = belief.F_M
    hw = belief.F_Z @ tr.gamma_w
    fn = belief.F_Z @ tr.gamma_n
    psi = fn @ tr.noise_cov @ fn.T
    f0 = belief.F_0
    parts = []
    for i in (1, 2):
        phi, xi, ups = V_next.Phi[i - 1], V_next.Xi[i - 1], V_next.Upsilon[i - 1]
        r = _embed_stage_cost(spec, maps, t, spec.R[i - 1][t - 1])
        parts.append(dict(
            C=symmetrize(r + hw.T @ phi @ hw),
            D=gm.T @ phi @ hw,
            e=f0 @ phi @ hw + 0.5 * xi @ hw,
            G=symmetrize(gm.T @ phi @ gm),
            h=f0 @ phi @ gm + 0.5 * xi @ gm,
            k=float(f0 @ phi @ f0 + xi @ f0 + np.sum(phi * psi) + ups),
        ))
    a, b = parts
    return StageGameData(
        a["C"], b["C"], belief.sigma, maps.private_selector(1, t), maps.private_selector(2, t),
        spec.nu(1, t), spec.nu(2, t), a["D"], b["D"], a["e"], b["e"], a["G"], b["G"],
        a["h"], b["h"], a["k"], b["k"],
    )


@dataclass
class StageRecord:
    t: int
    data: StageGameData
    solution: StageSolution
    report: ConditionReport
    value: ValueQuadratic


@dataclass
class EquilibriumSolution:
    spec: GameSpec
    maps: InfoMaps
    beliefs: list[BeliefStage]
    terminal: ValueQuadratic
    stages: dict[int, StageRecord] = field(default_factory=dict)
    validation: ValidationReport | None = None
    independence: IndependenceReport | None = None
    independence_overridden: bool = False
    timings: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, t: int) -> StageRecord:
        return self.stages[t]

    def value(self, t: int) -> ValueQuadratic:
        if t == self.spec.horizon:
            return self.terminal
        return self.stages[t].value

    @property
    def complete(self) -> bool:
        return len(self.stages) == self.spec.horizon - 1


def backward_induction(spec: GameSpec, maps: InfoMaps, beliefs: list[BeliefStage], sol: EquilibriumSolution) -> EquilibriumSolution:
    V = sol.terminal
    for t in range(spec.horizon - 1, 0, -1):
        data = lift_costs(spec, maps, beliefs[t - 1], V)
        report = check_existence_conditions(data)
        log.debug("stage %d: rho(K1)=%.6g rho(Q)=%.6g", t, report.rho_k1, report.rho_q)
        if not report.ok:
            raise ExistenceFailure(t, report, sol)
        st = solve_stage_game(data, report)
        V = ValueQuadratic(st.Phi, st.Xi, st.Upsilon)
        sol.stages[t] = StageRecord(t, data, st, report, V)
    return sol


def solve_cimpe(
    spec: GameSpec,
    info: InfoStructure,
    assume_independence: bool = False,
    trials: int = 16,
    seed: int = 0,
) -> EquilibriumSolution:
    """Compute the equilibrium prescriptions and value functions.

    Raises ``SpecError`` on a failed validation, ``BeliefAssumptionError``
    when the belief-independence check fails (unless overridden) and
    ``ExistenceFailure`` when a stage game has no unique equilibrium.
    """
    clock = time.perf_counter()
    report = validate_spec(spec, info)
    if not report.ok:
        raise SpecError("; ".join(f"{c.name}: {c.detail}" for c in report.failures()))
    maps = build_info_maps(spec, info)
    beliefs = propagate_belief(spec, maps)
    t_belief = time.perf_counter()
    indep = check_strategy_independence(spec, maps, trials=trials, seed=seed, beliefs=beliefs)
    if not indep.passed:
        if not assume_independence:
            raise BeliefAssumptionError(indep)
        log.warning("belief independence check FAILED (max deviation %.3e); continuing on explicit override", indep.max_deviation)
    t_check = time.perf_counter()
    sol = EquilibriumSolution(
        spec, maps, beliefs, terminal_value(spec, maps, beliefs[-1].sigma),
        validation=report, independence=indep,
        independence_overridden=bool(assume_independence and not indep.passed),
    )
    backward_induction(spec, maps, beliefs, sol)
    done = time.perf_counter()
    sol.timings = {"belief": t_belief - clock, "independence": t_check - t_belief, "induction": done - t_check}
    return sol
