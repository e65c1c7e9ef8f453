"""Common-information belief on ``S_t = (X_t, P^1_t, P^2_t)``.

Given ``C_t`` the belief is Gaussian with mean ``M_t`` and a covariance
``Sigma_t`` that does not depend on the realization. The mean evolves as

    M_{t+1} = F_M @ M_t + F_Z @ Z_{t+1} + F_0.

Propagation runs under the zero action profile; shared actions re-enter
through the ``Z`` components that carry them. Whether the result is valid for
every affine profile is checked numerically by ``check_strategy_independence``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .closed_loop import build_history, random_law
from .game_model import (
    ACT, Component, GameSpec, InfoMaps, component_layout, selection_matrix,
)
from .linalg_kit import block_diag, pinv, repair_psd

INDEPENDENCE_TOL = 1e-8


@dataclass(frozen=True)
class Transition:
    """``Z_{t+1}`` and ``S_{t+1}`` as linear maps of ``(S_t, U^1_t, U^2_t, N)``.

    ``N = (W^0_t, W^1_{t+1}, W^2_{t+1})`` has covariance ``noise_cov``.
    """

    gamma_s: np.ndarray
    gamma_u: tuple[np.ndarray, np.ndarray]
    gamma_n: np.ndarray
    omega_s: np.ndarray
    omega_u: tuple[np.ndarray, np.ndarray]
    omega_n: np.ndarray
    noise_cov: np.ndarray

    @property
    def gamma_w(self) -> np.ndarray:
        """Coefficient of ``w = (S_t, U^1_t, U^2_t)`` in ``Z_{t+1}``."""
        return np.hstack([self.gamma_s, self.gamma_u[0], self.gamma_u[1]])


@dataclass(frozen=True)
class BeliefStage:
    t: int
    sigma: np.ndarray
    # M_t = Q @ c_t  (chained mean maps, strategy free)
    Q: np.ndarray
    F_M: np.ndarray | None = None
    F_Z: np.ndarray | None = None
    F_0: np.ndarray | None = None
    innovation_cov: np.ndarray | None = None
    transition: Transition | None = None

    def mean(self, c: np.ndarray) -> np.ndarray:
        return self.Q @ c

    def update(self, m: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.F_M @ m + self.F_Z @ z + (self.F_0 if m.ndim == 1 else self.F_0[:, None])


def _transition(spec: GameSpec, maps: InfoMaps, t: int) -> Transition:
    st = maps[t]
    nx, nx1 = spec.nx(t), spec.nx(t + 1)
    p1, p2 = maps.n_private(1, t), maps.n_private(2, t)
    ns = nx + p1 + p2
    nu = (spec.nu(1, t), spec.nu(2, t))
    ny = (spec.ny(1, t + 1), spec.ny(2, t + 1))
    ntheta = ns + nu[0] + nu[1] + nx1 + ny[0] + ny[1]
    cols = np.cumsum([0, ns, nu[0], nu[1], nx1, ny[0], ny[1]])
    theta = [slice(cols[k], cols[k + 1]) for k in range(6)]  # S, U1, U2, W0, W1, W2

    def block(rows: int, sl: slice, m: np.ndarray) -> np.ndarray:
        out = np.zeros((rows, ntheta))
        out[:, sl] = m
        return out

    x_next = block(nx1, theta[0], np.hstack([spec.A[t - 1], np.zeros((nx1, p1 + p2))]))
    x_next += block(nx1, theta[1], spec.B[0][t - 1]) + block(nx1, theta[2], spec.B[1][t - 1])
    x_next += block(nx1, theta[3], np.eye(nx1))
    y_next = [spec.H[j][t] @ x_next + block(ny[j], theta[4 + j], np.eye(ny[j])) for j in (0, 1)]
    priv = [
        block(p1, theta[0], np.eye(ns)[nx:nx + p1]),
        block(p2, theta[0], np.eye(ns)[nx + p1:]),
    ]
    u = [block(nu[j], theta[1 + j], np.eye(nu[j])) for j in (0, 1)]

    stacked = np.vstack([priv[0], priv[1], u[0], u[1], y_next[0], y_next[1]])
    gamma = st.zeta @ stacked
    s_next = [x_next]
    for j in (0, 1):
        s_next.append(st.xi[j] @ np.vstack([priv[j], u[j], y_next[j]]))
    omega = np.vstack(s_next)

    noise_cov = block_diag(spec.W0[t - 1], spec.V[0][t], spec.V[1][t])
    nsl = slice(cols[3], cols[6])
    return Transition(
        gamma[:, theta[0]], (gamma[:, theta[1]], gamma[:, theta[2]]), gamma[:, nsl],
        omega[:, theta[0]], (omega[:, theta[1]], omega[:, theta[2]]), omega[:, nsl],
        noise_cov,
    )


def _initial(spec: GameSpec, maps: InfoMaps) -> tuple[np.ndarray, np.ndarray]:
    """Gain ``Q_1`` and covariance ``Sigma_1`` of ``S_1`` given ``C_1``."""
    nx = spec.nx(1)
    obs = spec.all_obs(1, 1) + spec.all_obs(2, 1)
    lay = component_layout(spec, obs)
    ny = sum(spec.dim(c) for c in obs)
    # (X_1, Y^1_1, Y^2_1) = L @ (X_1, W^1_1, W^2_1)
    h = np.vstack([spec.H[0][0], spec.H[1][0]])
    lin = np.block([[np.eye(nx), np.zeros((nx, ny))], [h, np.eye(ny)]])
    cov = lin @ block_diag(spec.sigma_init, spec.V[0][0], spec.V[1][0]) @ lin.T
    st = maps[1]
    y_rows = np.hstack([np.zeros((ny, nx)), np.eye(ny)])  # picks Y out of (X, Y)
    s_sel = np.vstack([
        np.hstack([np.eye(nx), np.zeros((nx, ny))]),
        selection_matrix(spec, st.private[0], lay, ny) @ y_rows,
        selection_matrix(spec, st.private[1], lay, ny) @ y_rows,
    ])
    c_sel = selection_matrix(spec, st.common, lay, ny) @ y_rows
    s_c = s_sel @ cov @ c_sel.T
    gain = s_c @ pinv(c_sel @ cov @ c_sel.T)
    sigma = repair_psd(s_sel @ cov @ s_sel.T - gain @ s_c.T, what="initial belief covariance")
    return gain, sigma


def _shared_action_rows(spec: GameSpec, maps: InfoMaps, t: int) -> dict[int, np.ndarray]:
    """Rows of ``Z_{t+1}`` carrying ``U^j_t`` for each shared action."""
    inc = maps[t].increment
    lay = component_layout(spec, inc)
    out = {}
    for j in (1, 2):
        c = Component(t, ACT, j)
        if c in lay and spec.nu(j, t):
            out[j] = np.arange(lay[c].start, lay[c].stop)
    return out


def propagate_belief(spec: GameSpec, maps: InfoMaps) -> list[BeliefStage]:
    T = spec.horizon
    q, sigma = _initial(spec, maps)
    stages = []
    for t in range(1, T + 1):
        if t == T:
            stages.append(BeliefStage(t, sigma, q))
            break
        tr = _transition(spec, maps, t)
        nu1, nu2 = spec.nu(1, t), spec.nu(2, t)
        theta_cov = block_diag(sigma, np.zeros((nu1 + nu2, nu1 + nu2)), tr.noise_cov)
        gamma = np.hstack([tr.gamma_s, tr.gamma_u[0], tr.gamma_u[1], tr.gamma_n])
        omega = np.hstack([tr.omega_s, tr.omega_u[0], tr.omega_u[1], tr.omega_n])
        s_zz = gamma @ theta_cov @ gamma.T
        s_sz = omega @ theta_cov @ gamma.T
        g = s_sz @ pinv(s_zz)
        nz = gamma.shape[0]
        f_m = tr.omega_s - g @ tr.gamma_s
        f_z = g.copy()
        for j, rows in _shared_action_rows(spec, maps, t).items():
            pick = np.zeros((rows.size, nz))
            pick[np.arange(rows.size), rows] = 1.0
            f_z = f_z - g @ tr.gamma_u[j - 1] @ pick + tr.omega_u[j - 1] @ pick
        sigma_next = repair_psd(omega @ theta_cov @ omega.T - g @ s_sz.T, what=f"belief covariance at stage {t + 1}")
        stages.append(BeliefStage(t, sigma, q, f_m, f_z, np.zeros(f_m.shape[0]), s_zz, tr))
        st = maps[t]
        q = f_m @ q @ st.common_from_next + f_z @ st.increment_from_next
        sigma = sigma_next
    return stages


# --------------------------------------------------------------------------


@dataclass
class IndependenceReport:
    trials: int
    seed: int
    max_sigma_deviation: float
    max_map_deviation: float
    worst_stage: int | None
    tol: float = INDEPENDENCE_TOL
    per_stage: list[dict] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(self.max_sigma_deviation, self.max_map_deviation)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "max_sigma_deviation": self.max_sigma_deviation,
            "max_map_deviation": self.max_map_deviation,
            "worst_stage": self.worst_stage,
            "per_stage": self.per_stage,
        }


def exact_conditional(hist, t: int):
    """True ``(gain, offset, cov)`` of ``S_t`` given ``C_t`` for one closed loop."""
    s = hist.state(t)
    c = hist.common(t)
    # S C^T (C C^T)^+ == S C^+, without squaring the condition number
    gain = s.coef @ pinv(c.coef)
    offset = s.const - gain @ c.const
    resid = s.coef - gain @ c.coef
    return gain, offset, resid @ resid.T, c


def check_strategy_independence(
    spec: GameSpec,
    maps: InfoMaps,
    trials: int = 16,
    seed: int = 0,
    beliefs: list[BeliefStage] | None = None,
    tol: float = INDEPENDENCE_TOL,
) -> IndependenceReport:
    """Compare the strategy-free belief with the exact one under random affine profiles.

    Trial ``k`` draws its laws from ``default_rng([seed, k])``, so the report
    does not depend on evaluation order.
    """
    if beliefs is None:
        beliefs = propagate_belief(spec, maps)
    T = spec.horizon
    worst = {t: [0.0, 0.0] for t in range(1, T + 1)}
    for k in range(trials):
        rng = np.random.default_rng([seed, k])
        laws = (random_law(maps, 1, rng), random_law(maps, 2, rng))
        hist = build_history(spec, maps, laws)
        for t in range(1, T + 1):
            gain, offset, cov, c = exact_conditional(hist, t)
            b = beliefs[t - 1]
            d_sig = float(np.max(np.abs(cov - b.sigma), initial=0.0))
            diff = gain - b.Q
            d_map = max(
                float(np.max(np.abs(diff @ c.coef), initial=0.0)),
                float(np.max(np.abs(diff @ c.const + offset), initial=0.0)),
            )
            worst[t][0] = max(worst[t][0], d_sig)
            worst[t][1] = max(worst[t][1], d_map)
    max_sig = max(v[0] for v in worst.values())
    max_map = max(v[1] for v in worst.values())
    worst_stage = max(worst, key=lambda s: max(worst[s])) if trials else None
    per = [{"t": t, "sigma_deviation": v[0], "map_deviation": v[1]} for t, v in worst.items()]
    return IndependenceReport(trials, seed, max_sig, max_map, worst_stage, tol, per)


__all__ = [
    "BeliefStage", "IndependenceReport", "Transition", "check_strategy_independence",
    "exact_conditional", "propagate_belief",
]
