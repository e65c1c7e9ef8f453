"""Static two-player Bayesian game with Gaussian state and quadratic costs.

The state ``X ~ N(m, Sigma)`` is observed through ``Y^i = H^i X``. With
``w = (X, U^1, U^2)`` the costs are

    c^1 = w' C w + 2 d(m) w + r^1(m),    d(m) = m' D_c + e_c,
    c^2 = w' E w + 2 f(m) w + r^2(m),    f(m) = m' D_e + e_e,

with ``r^i(m) = m' G_i m + 2 h_i m + kappa_i``. A plain static game has
``D = G = 0``; the lifted games produced by backward induction couple the
linear terms to the belief mean.

Equilibrium rules are ``u^i = T^i (y^i - H^i m) + l^i + L^i m`` and the
expected costs are ``m' Phi^i m + Xi^i m + Upsilon^i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg_kit import (
    NoUniqueSolution, gaussian_condition, is_pd, pinv, solve_stein, spectral_radius,
    stein_operator, symmetrize,
)

ASSUMPTION_MARGIN = 1e-9
CONDITIONING_BAND = 1e-6


class ConditioningWarning(UserWarning):
    """The coupled gain equation is close to losing uniqueness."""


class StageGameError(NoUniqueSolution):
    def __init__(self, message: str, smallest_singular_value: float, report: "ConditionReport"):
        super().__init__(message, smallest_singular_value)
        self.report = report


@dataclass(frozen=True)
class StageGameData:
    C: np.ndarray
    E: np.ndarray
    sigma: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    nu1: int
    nu2: int
    Dc: np.ndarray
    De: np.ndarray
    ec: np.ndarray
    ee: np.ndarray
    Gc: np.ndarray
    Ge: np.ndarray
    hc: np.ndarray
    he: np.ndarray
    kc: float = 0.0
    ke: float = 0.0
    cross_block_residual: float = 0.0

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def cut(self) -> tuple[slice, slice, slice]:
        n, a = self.n, self.nu1
        return slice(0, n), slice(n, n + a), slice(n + a, n + a + self.nu2)

    def blocks(self, which: str = "C") -> dict[str, np.ndarray]:
        m = self.C if which == "C" else self.E
        s = self.cut()
        return {f"{p + 1}{q + 1}": m[s[p], s[q]] for p in range(3) for q in range(3)}

    def cost(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
        if i == 1:
            return self.C, self.Dc, self.ec, self.Gc, self.hc, self.kc
        return self.E, self.De, self.ee, self.Ge, self.he, self.ke

    def linear_terms(self, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(d(m), f(m))`` as vectors over ``w``."""
        return m @ self.Dc + self.ec, m @ self.De + self.ee

    def constants(self, m: np.ndarray) -> tuple[float, float]:
        return (
            float(m @ self.Gc @ m + 2 * self.hc @ m + self.kc),
            float(m @ self.Ge @ m + 2 * self.he @ m + self.ke),
        )

    def joint_cov(self) -> np.ndarray:
        lift = np.vstack([np.eye(self.n), self.H1, self.H2])
        return lift @ self.sigma @ lift.T

    def covs(self):
        s, h1, h2 = self.sigma, self.H1, self.H2
        return {
            "11": h1 @ s @ h1.T, "22": h2 @ s @ h2.T, "12": h1 @ s @ h2.T,
            "x1": s @ h1.T, "x2": s @ h2.T,
        }

    @classmethod
    def static(
        cls, C, E, sigma, H1, H2, nu1: int, nu2: int,
        d=None, f=None, r1: float = 0.0, r2: float = 0.0,
    ) -> "StageGameData":
        """Game whose linear terms do not depend on the mean."""
        C, E, sigma = (np.asarray(a, dtype=float) for a in (C, E, sigma))
        n = sigma.shape[0]
        nw = n + nu1 + nu2
        z = np.zeros((n, nw))
        return cls(
            C, E, sigma, np.asarray(H1, dtype=float).reshape(-1, n), np.asarray(H2, dtype=float).reshape(-1, n),
            nu1, nu2, z, z.copy(),
            np.zeros(nw) if d is None else np.asarray(d, dtype=float).reshape(nw),
            np.zeros(nw) if f is None else np.asarray(f, dtype=float).reshape(nw),
            np.zeros((n, n)), np.zeros((n, n)), np.zeros(n), np.zeros(n), float(r1), float(r2),
        )

    @classmethod
    def from_joint(cls, C, E, joint_sigma, n: int, p1: int, p2: int, nu1: int, nu2: int, **kw) -> "StageGameData":
        """Build from the joint covariance of ``(X, Y^1, Y^2)``.

        ``H^i`` is recovered as ``Sigma_{y^i x} Sigma_xx^+`` and the residual of
        the cross blocks against ``H^i Sigma_xx H^j'`` is recorded.
        """
        j = np.asarray(joint_sigma, dtype=float)
        sx = j[:n, :n]
        h1 = j[n:n + p1, :n] @ pinv(sx)
        h2 = j[n + p1:n + p1 + p2, :n] @ pinv(sx)
        base = cls.static(C, E, sx, h1, h2, nu1, nu2, **kw)
        resid = float(np.max(np.abs(base.joint_cov() - j), initial=0.0))
        return cls(**{**base.__dict__, "cross_block_residual": resid})


@dataclass(frozen=True)
class AffineRule:
    """``u = T (y - H m) + b`` for one realized mean ``m``."""

    T: np.ndarray
    b: np.ndarray


@dataclass
class ConditionReport:
    rho_k1: float
    rho_k2: float
    rho_q: float
    assumption3: bool
    i_minus_k_invertible: bool
    stein_min_singular_value: float
    stein_nonsingular: bool
    near_singular: bool
    cross_block_residual: float = 0.0

    @property
    def assumption5(self) -> bool:
        return self.i_minus_k_invertible and self.stein_nonsingular

    @property
    def ok(self) -> bool:
        return self.assumption3 or self.assumption5

    def to_dict(self) -> dict:
        return {
            "rho_K1": self.rho_k1,
            "rho_K2": self.rho_k2,
            "rho_Q": self.rho_q,
            "assumption3": self.assumption3,
            "assumption5": self.assumption5,
            "i_minus_k_invertible": self.i_minus_k_invertible,
            "stein_min_singular_value": self.stein_min_singular_value,
            "near_singular": self.near_singular,
            "cross_block_residual": self.cross_block_residual,
            "ok": self.ok,
        }


@dataclass
class StageSolution:
    T1: np.ndarray
    T2: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    Phi: tuple[np.ndarray, np.ndarray]
    Xi: tuple[np.ndarray, np.ndarray]
    Upsilon: tuple[float, float]
    report: ConditionReport | None = None
    residuals: dict[str, float] = field(default_factory=dict)

    def gains(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.T1, self.l1, self.L1) if i == 1 else (self.T2, self.l2, self.L2)

    def rule(self, i: int, m: np.ndarray) -> AffineRule:
        T, l, L = self.gains(i)
        return AffineRule(T, l + L @ m)

    def value(self, i: int, m: np.ndarray) -> float:
        return float(m @ self.Phi[i - 1] @ m + self.Xi[i - 1] @ m + self.Upsilon[i - 1])


def _k_matrices(data: StageGameData):
    c, e = data.blocks("C"), data.blocks("E")
    c22i = np.linalg.inv(c["22"]) if data.nu1 else np.zeros((0, 0))
    e33i = np.linalg.inv(e["33"]) if data.nu2 else np.zeros((0, 0))
    k1 = c22i @ c["23"] @ e33i @ e["32"]
    k2 = e33i @ e["32"] @ c22i @ c["23"]
    return c, e, c22i, e33i, k1, k2


def _q_matrix(data: StageGameData) -> np.ndarray:
    s = data.covs()
    return s["12"] @ pinv(s["22"]) @ s["12"].T @ pinv(s["11"])


def check_existence_conditions(data: StageGameData) -> ConditionReport:
    for i, blk in ((1, data.blocks("C")["22"]), (2, data.blocks("E")["33"])):
        if blk.size and not is_pd(blk):
            raise ValueError(f"controller {i}'s own-action cost block is not positive definite")
    _, _, _, _, k1, k2 = _k_matrices(data)
    q = _q_matrix(data)
    rho1, rho2, rhoq = spectral_radius(k1), spectral_radius(k2), spectral_radius(q)
    eps = np.finfo(float).eps
    ik = np.eye(k1.shape[0]) - k1
    if ik.size:
        sv = np.linalg.svd(ik, compute_uv=False)
        ik_ok = bool(sv[-1] > ik.shape[0] * eps * max(sv[0], 1.0) * 1e3)
    else:
        ik_ok = True
    op = stein_operator(-k1, q)
    if op.size:
        sv = np.linalg.svd(op, compute_uv=False)
        smin = float(sv[-1])
        st_ok = bool(smin > op.shape[0] * eps * sv[0])
    else:
        smin, st_ok = float("inf"), True
    prod = rho1 * rhoq
    return ConditionReport(
        rho1, rho2, rhoq, bool(rho1 < 1.0 - ASSUMPTION_MARGIN), ik_ok, smin, st_ok,
        bool(1.0 - CONDITIONING_BAND <= prod < 1.0), data.cross_block_residual,
    )


def solve_stage_game(data: StageGameData, report: ConditionReport | None = None) -> StageSolution:
    if report is None:
        report = check_existence_conditions(data)
    if not report.ok:
        raise StageGameError(
            f"no unique affine equilibrium: rho(K1) = {report.rho_k1:.6g}, "
            f"I - K1 invertible = {report.i_minus_k_invertible}, Stein operator nonsingular = {report.stein_nonsingular}",
            report.stein_min_singular_value, report,
        )
    if report.near_singular:
        warnings.warn(
            f"rho(K1) * rho(Q) = {report.rho_k1 * report.rho_q:.12g} is within {CONDITIONING_BAND} of 1",
            ConditioningWarning, stacklevel=2,
        )
    c, e, c22i, e33i, k1, _ = _k_matrices(data)
    s = data.covs()
    s11p, s22p = pinv(s["11"]), pinv(s["22"])
    p1, p2 = data.H1.shape[0], data.H2.shape[0]
    nu1, nu2 = data.nu1, data.nu2

    if nu2 == 0:
        t1 = -c22i @ c["12"].T @ s["x1"] @ s11p
        t2 = np.zeros((0, p2))
    elif nu1 == 0:
        t1 = np.zeros((0, p1))
        t2 = -e33i @ e["13"].T @ s["x2"] @ s22p
    else:
        q = s["12"] @ s22p @ s["12"].T @ s11p
        p3 = -c22i @ c["12"].T @ s["x1"] @ s11p + c22i @ c["23"] @ e33i @ e["13"].T @ s["x2"] @ s22p @ s["12"].T @ s11p
        t1 = solve_stein(-k1, q, p3)
        t2 = -e33i @ (e["13"].T @ s["x2"] @ s22p + e["32"] @ t1 @ s["12"] @ s22p)

    # intercepts: M_b [b1; b2] = -(N m + n0)
    u1, u2 = data.cut()[1], data.cut()[2]
    mb = np.block([[c["22"], c["23"]], [e["32"], e["33"]]])
    nmat = np.vstack([c["12"].T + data.Dc[:, u1].T, e["13"].T + data.De[:, u2].T])
    n0 = np.concatenate([data.ec[u1], data.ee[u2]])
    if mb.size:
        try:
            sol = -np.linalg.solve(mb, np.column_stack([nmat, n0]))
        except np.linalg.LinAlgError as exc:
            raise StageGameError("intercept system is singular", 0.0, report) from exc
    else:
        sol = np.zeros((0, data.n + 1))
    big_l, small_l = sol[:, :-1], sol[:, -1]
    out = StageSolution(
        t1, t2, small_l[:nu1], small_l[nu1:], big_l[:nu1], big_l[nu1:],
        (np.zeros((0, 0)),) * 2, (np.zeros(0),) * 2, (0.0, 0.0), report,
    )
    phis, xis, ups = [], [], []
    for i in (1, 2):
        phi, xi, up = _value_coefficients(data, out, i)
        phis.append(phi)
        xis.append(xi)
        ups.append(up)
    out.Phi, out.Xi, out.Upsilon = tuple(phis), tuple(xis), tuple(ups)
    out.residuals = first_order_residuals(data, out)
    return out


def _assembly(data: StageGameData, sol: StageSolution):
    n = data.n
    tt = np.vstack([np.eye(n), sol.T1 @ data.H1, sol.T2 @ data.H2])
    a = np.vstack([np.eye(n), sol.L1, sol.L2])
    lt = np.concatenate([np.zeros(n), sol.l1, sol.l2])
    return tt, a, lt


def _value_coefficients(data: StageGameData, sol: StageSolution, i: int):
    cm, dm, ev, gm, hv, kap = data.cost(i)
    tt, a, lt = _assembly(data, sol)
    phi = a.T @ cm @ a + dm @ a + a.T @ dm.T + gm
    xi = 2 * lt @ cm @ a + 2 * dm @ lt + 2 * ev @ a + 2 * hv
    ups = float(lt @ cm @ lt + np.sum(cm * (tt @ data.sigma @ tt.T)) + 2 * ev @ lt + kap)
    return symmetrize(phi), xi, ups


def expected_costs(data: StageGameData, rule1: AffineRule, rule2: AffineRule, m: np.ndarray) -> tuple[float, float]:
    """Exact expected costs of both controllers under arbitrary affine rules."""
    n = data.n
    tt = np.vstack([np.eye(n), rule1.T @ data.H1, rule2.T @ data.H2])
    mu = np.concatenate([m, rule1.b, rule2.b])
    cov = tt @ data.sigma @ tt.T
    d, f = data.linear_terms(m)
    r1, r2 = data.constants(m)
    j1 = float(np.sum(data.C * cov) + mu @ data.C @ mu + 2 * d @ mu + r1)
    j2 = float(np.sum(data.E * cov) + mu @ data.E @ mu + 2 * f @ mu + r2)
    return j1, j2


def best_response_map(data: StageGameData, responder: int, opponent_rule: AffineRule, m: np.ndarray) -> AffineRule:
    """Exact affine best response of ``responder`` to the other's affine rule."""
    n = data.n
    p1, p2 = data.H1.shape[0], data.H2.shape[0]
    if responder == 1:
        cm, own_h, other_h = data.C, data.H1, data.H2
        own, other = data.cut()[1], data.cut()[2]
        lin = data.linear_terms(m)[0]
        own_idx = np.arange(n, n + p1)
        other_idx = np.arange(n + p1, n + p1 + p2)
    else:
        cm, own_h, other_h = data.E, data.H2, data.H1
        own, other = data.cut()[2], data.cut()[1]
        lin = data.linear_terms(m)[1]
        own_idx = np.arange(n + p1, n + p1 + p2)
        other_idx = np.arange(n, n + p1)
    r_uu = cm[own, own]
    if r_uu.size and not is_pd(r_uu):
        raise ValueError(f"controller {responder}'s own-action cost block is not positive definite")
    joint = data.joint_cov()
    mean = np.concatenate([m, data.H1 @ m, data.H2 @ m])
    target = np.concatenate([np.arange(n), other_idx])
    gain, offset, _ = gaussian_condition(mean, joint, target, own_idx)
    gx, ox = gain[:n], offset[:n]
    gy, oy = gain[n:], offset[n:]
    inv = np.linalg.inv(r_uu) if r_uu.size else np.zeros((0, 0))
    r_xu = cm[:n, own]
    r_uv = cm[own, other]
    coef = -inv @ (r_xu.T @ gx + r_uv @ opponent_rule.T @ gy)
    const = -inv @ (lin[own] + r_xu.T @ ox + r_uv @ (opponent_rule.T @ (oy - other_h @ m) + opponent_rule.b))
    return AffineRule(coef, coef @ own_h @ m + const)


def first_order_residuals(data: StageGameData, sol: StageSolution) -> dict[str, float]:
    """Distance of the solution from a best-response fixed point at ``m = 0`` and a unit ``m``."""
    out = {}
    rng = np.random.default_rng(0)
    for label, m in (("m0", np.zeros(data.n)), ("m1", rng.standard_normal(data.n))):
        r1, r2 = sol.rule(1, m), sol.rule(2, m)
        b1 = best_response_map(data, 1, r2, m)
        b2 = best_response_map(data, 2, r1, m)
        s = data.covs()
        # gains are only identified on the range of each observation covariance
        d1 = (b1.T - r1.T) @ s["11"] if b1.T.size else np.zeros(0)
        d2 = (b2.T - r2.T) @ s["22"] if b2.T.size else np.zeros(0)
        out[label] = float(max(
            np.max(np.abs(d1), initial=0.0), np.max(np.abs(d2), initial=0.0),
            np.max(np.abs(b1.b - r1.b), initial=0.0), np.max(np.abs(b2.b - r2.b), initial=0.0),
        ))
    return out


def iterate_best_responses(data: StageGameData, m: np.ndarray, tol: float = 1e-13, max_iter: int = 100000) -> tuple[AffineRule, AffineRule, int]:
    """Gauss-Seidel best-response iteration from the zero rule.

    Stops when the largest update falls below ``tol`` relative to the
    largest coefficient.

    Converges when the best-response composition is a contraction, which is
    the case under the spectral-radius condition.
    """
    p1, p2 = data.H1.shape[0], data.H2.shape[0]
    r1 = AffineRule(np.zeros((data.nu1, p1)), np.zeros(data.nu1))
    r2 = AffineRule(np.zeros((data.nu2, p2)), np.zeros(data.nu2))
    for k in range(max_iter):
        n1 = best_response_map(data, 1, r2, m)
        n2 = best_response_map(data, 2, n1, m)
        step = max(
            np.max(np.abs(n1.T - r1.T), initial=0.0), np.max(np.abs(n1.b - r1.b), initial=0.0),
            np.max(np.abs(n2.T - r2.T), initial=0.0), np.max(np.abs(n2.b - r2.b), initial=0.0),
        )
        r1, r2 = n1, n2
        scale = 1.0 + max(np.max(np.abs(a), initial=0.0) for a in (r1.T, r1.b, r2.T, r2.b))
        if step < tol * scale:
            return r1, r2, k + 1
    return r1, r2, max_iter
