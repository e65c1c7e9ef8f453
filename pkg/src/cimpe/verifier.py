"""Turn prescriptions into strategies, simulate, and test for profitable deviations."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .closed_loop import AffineControlLaw, StageLaw, build_history
from .game_model import ACT, GameSpec, InfoMaps
from .induction import EquilibriumSolution
from .linalg_kit import psd_sqrt

DEFAULT_CHUNK = 1 << 14


class DegenerateParameter(ValueError):
    """Parameter value at which a closed form is undefined."""


# --------------------------------------------------------------------------
# strategies <-> prescriptions


def realize_control_laws(sol: EquilibriumSolution) -> tuple[AffineControlLaw, AffineControlLaw]:
    """Compose the stage prescriptions with the mean map ``m_t = Q_t c_t``."""
    maps = sol.maps
    laws = []
    for i in (1, 2):
        stages = []
        for t in range(1, sol.spec.horizon):
            T, l, L = sol[t].solution.gains(i)
            h = maps.private_selector(i, t)
            q = sol.beliefs[t - 1].Q
            coupling = L - T @ h
            stages.append(StageLaw(T.copy(), coupling @ q, l.copy()))
        laws.append(AffineControlLaw(i, tuple(stages)))
    return laws[0], laws[1]


@dataclass(frozen=True)
class Prescription:
    """The map from private information to action fixed by common information."""

    gain: np.ndarray
    offset: np.ndarray

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.gain @ p + self.offset


@dataclass(frozen=True)
class PrescriptionStrategy:
    """A virtual player's strategy: common information to a prescription.

    Affine in ``c``: ``c -> (K, J c + k)``.
    """

    controller: int
    slope: tuple[np.ndarray, ...]
    intercept: tuple[np.ndarray, ...]
    gain: tuple[np.ndarray, ...]

    def __call__(self, t: int, c: np.ndarray) -> Prescription:
        off = self.slope[t - 1] @ c + (self.intercept[t - 1] if c.ndim == 1 else self.intercept[t - 1][:, None])
        return Prescription(self.gain[t - 1], off)


def to_prescriptions(law: AffineControlLaw) -> PrescriptionStrategy:
    """Partial application of a control law in its common-information argument."""
    return PrescriptionStrategy(
        law.controller,
        tuple(s.J for s in law.stages), tuple(s.k for s in law.stages), tuple(s.K for s in law.stages),
    )


def to_control_law(chi: PrescriptionStrategy) -> AffineControlLaw:
    """Inverse of ``to_prescriptions``: ``g(p, c) = chi(c)(p)``."""
    return AffineControlLaw(
        chi.controller,
        tuple(StageLaw(k_, j_, c_) for k_, j_, c_ in zip(chi.gain, chi.slope, chi.intercept)),
    )


# --------------------------------------------------------------------------
# costs


def closed_form_costs(spec: GameSpec, maps: InfoMaps, laws) -> tuple[float, float]:
    h = build_history(spec, maps, laws)
    return h.expected_cost(1), h.expected_cost(2)


@dataclass
class CostEstimate:
    mean: tuple[float, float]
    stderr: tuple[float, float]
    n: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "stderr": list(self.stderr), "samples": self.n, "seed": self.seed}


@dataclass
class Trajectories:
    """Per-stage sample arrays, columns are samples."""

    x: dict[int, np.ndarray] = field(default_factory=dict)
    y: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    u: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    c: dict[int, np.ndarray] = field(default_factory=dict)
    p: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    m: dict[int, np.ndarray] = field(default_factory=dict)
    cost: dict[int, np.ndarray] = field(default_factory=dict)

    def state(self, t: int) -> np.ndarray:
        return np.vstack([self.x[t], self.p[(1, t)], self.p[(2, t)]])

    @staticmethod
    def concat(parts: list["Trajectories"]) -> "Trajectories":
        out = Trajectories()
        for name in ("x", "y", "u", "c", "p", "m", "cost"):
            acc = getattr(out, name)
            for key in getattr(parts[0], name):
                acc[key] = np.concatenate([getattr(q, name)[key] for q in parts], axis=-1)
        return out


def _stack(spec: GameSpec, comps, y, u, n) -> np.ndarray:
    rows = []
    for c in comps:
        if c.kind == ACT:
            rows.append(u[(c.j, c.s)])
        else:
            rows.append(y[(c.j, c.s)][spec.block_slice(c.j, c.s, c.block)])
    return np.vstack(rows) if rows else np.zeros((0, n))


def _rollout(spec: GameSpec, maps: InfoMaps, n: int, rng: np.random.Generator, policy, roots) -> Trajectories:
    """Forward simulation of one chunk. ``policy(t, i, p, c, tr)`` returns actions."""
    sq_init, sq_v, sq_w = roots
    tr = Trajectories()
    x = sq_init @ rng.standard_normal((spec.nx(1), n))
    T = spec.horizon
    for t in range(1, T + 1):
        tr.x[t] = x
        for j in (1, 2):
            noise = rng.standard_normal((spec.ny(j, t), n))
            tr.y[(j, t)] = spec.H[j - 1][t - 1] @ x + sq_v[(j, t)] @ noise
        w0 = rng.standard_normal((spec.nx(t + 1), n)) if t < T else None
        c = _stack(spec, maps[t].common, tr.y, tr.u, n)
        tr.c[t] = c
        for i in (1, 2):
            tr.p[(i, t)] = _stack(spec, maps[t].private[i - 1], tr.y, tr.u, n)
        if t == T:
            break
        for i in (1, 2):
            tr.u[(i, t)] = policy(t, i, tr.p[(i, t)], c, tr)
        x = spec.A[t - 1] @ x + spec.B[0][t - 1] @ tr.u[(1, t)] + spec.B[1][t - 1] @ tr.u[(2, t)] + sq_w[t] @ w0
    for i in (1, 2):
        tot = np.zeros(n)
        for t in range(1, T):
            w = np.vstack([tr.x[t], tr.u[(1, t)], tr.u[(2, t)]])
            tot += np.einsum("in,ij,jn->n", w, spec.R[i - 1][t - 1], w)
        xt = tr.x[T]
        tot += np.einsum("in,ij,jn->n", xt, spec.R_terminal[i - 1], xt)
        tr.cost[i] = tot
    return tr


def _roots(spec: GameSpec):
    sq_v = {(j, t): psd_sqrt(spec.V[j - 1][t - 1]) for j in (1, 2) for t in range(1, spec.horizon + 1)}
    sq_w = {t: psd_sqrt(spec.W0[t - 1]) for t in range(1, spec.horizon)}
    return psd_sqrt(spec.sigma_init), sq_v, sq_w


def _law_policy(laws):
    def policy(t, i, p, c, tr):
        return laws[i - 1][t].apply(p, c)
    return policy


def _prescription_policy(chis):
    def policy(t, i, p, c, tr):
        return chis[i - 1](t, c)(p)
    return policy


def _virtual_policy(sol: EquilibriumSolution):
    """Mean-driven play: ``m_t`` from the belief recursion, rule from the stage solution."""
    maps = sol.maps

    def policy(t, i, p, c, tr):
        if i == 1:
            if t == 1:
                tr.m[1] = sol.beliefs[0].Q @ c
            else:
                z = maps[t - 1].increment_from_next @ c
                tr.m[t] = sol.beliefs[t - 2].update(tr.m[t - 1], z)
        m = tr.m[t]
        T, l, L = sol[t].solution.gains(i)
        h = maps.private_selector(i, t)
        return T @ (p - h @ m) + (l[:, None] + L @ m)
    return policy


def _chunk_stats(costs: dict[int, np.ndarray]):
    out = []
    for i in (1, 2):
        v = costs[i]
        mu = float(np.mean(v)) if v.size else 0.0
        out.append((v.size, mu, float(np.sum((v - mu) ** 2))))
    return out


def _combine(stats):
    """Chan et al. pairwise update, applied in chunk order."""
    n, mu, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mu
        mu += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mu, m2


def simulate(
    spec: GameSpec,
    maps: InfoMaps,
    laws=None,
    n: int = 100_000,
    seed: int = 0,
    *,
    prescriptions=None,
    solution: EquilibriumSolution | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    record: bool = False,
):
    """Monte-Carlo estimate of both expected costs.

    Exactly one of ``laws`` (control laws), ``prescriptions`` (virtual-player
    strategies) or ``solution`` (mean-driven play) selects the closed loop.
    Chunk ``k`` draws from ``default_rng([seed, k])`` and chunk statistics are
    merged in index order, so the estimate only depends on ``seed``,
    ``n`` and ``chunk_size``. With ``record=True`` the trajectories are
    returned as well.
    """
    if sum(x is not None for x in (laws, prescriptions, solution)) != 1:
        raise ValueError("pass exactly one of laws, prescriptions, solution")
    if laws is not None:
        for law in laws:
            law.check(maps)
        policy = _law_policy(laws)
    elif prescriptions is not None:
        policy = _prescription_policy(prescriptions)
    else:
        policy = _virtual_policy(solution)
    roots = _roots(spec)
    sizes = [min(chunk_size, n - k) for k in range(0, n, chunk_size)]

    def run(k: int) -> Trajectories:
        return _rollout(spec, maps, sizes[k], np.random.default_rng([seed, k]), policy, roots)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, range(len(sizes))))
    else:
        chunks = [run(k) for k in range(len(sizes))]
    stats = [_chunk_stats(ch.cost) for ch in chunks]
    means, ses = [], []
    for i in (0, 1):
        cnt, mu, m2 = _combine([s[i] for s in stats])
        means.append(mu)
        ses.append(math.sqrt(m2 / (cnt - 1)) / math.sqrt(cnt) if cnt > 1 else float("nan"))
    est = CostEstimate((means[0], means[1]), (ses[0], ses[1]), n, seed)
    if record:
        return est, Trajectories.concat(chunks)
    return est


def write_trajectory_csv(path: str | Path, spec: GameSpec, tr: Trajectories, max_samples: int | None = None) -> None:
    """One row per (sample, stage); vectors are ';'-joined."""
    n = tr.x[1].shape[1]
    if max_samples is not None:
        n = min(n, max_samples)

    def fmt(a: np.ndarray | None, k: int) -> str:
        if a is None or a.shape[0] == 0:
            return ""
        return ";".join(repr(float(v)) for v in a[:, k])

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y1", "y2", "u1", "u2", "sample_id"])
        for k in range(n):
            for t in range(1, spec.horizon + 1):
                w.writerow([
                    t, fmt(tr.x[t], k), fmt(tr.y[(1, t)], k), fmt(tr.y[(2, t)], k),
                    fmt(tr.u.get((1, t)), k), fmt(tr.u.get((2, t)), k), k,
                ])


# --------------------------------------------------------------------------
# deviation tests


@dataclass
class DeviationReport:
    deviator: int
    max_improvement: float
    random_improvement: float
    best_response_improvement: float
    per_stage: dict[int, float]
    n_directions: int
    magnitude: float

    def to_dict(self) -> dict:
        return {
            "deviator": self.deviator,
            "max_improvement": self.max_improvement,
            "random_improvement": self.random_improvement,
            "best_response_improvement": self.best_response_improvement,
            "per_stage": {str(k): v for k, v in self.per_stage.items()},
            "directions": self.n_directions,
            "magnitude": self.magnitude,
        }


def _with_law(laws, i: int, law: AffineControlLaw):
    return (law, laws[1]) if i == 1 else (laws[0], law)


def stage_quadratic(spec: GameSpec, maps: InfoMaps, laws, deviator: int, t: int):
    """Gradient and Hessian of the deviator's cost in its stage-``t`` parameters.

    All signals are affine in those parameters, so unit steps give the exact
    directional derivatives of every signal and the quadratic is assembled
    from them without finite-difference error.
    """
    own = laws[deviator - 1]
    base_stage = own[t]
    theta = base_stage.params()
    h0 = build_history(spec, maps, laws)
    stages = range(t, spec.horizon + 1)
    w0 = {s: h0.stage_vector(s) for s in stages}
    deltas = []
    for j in range(theta.size):
        th = theta.copy()
        th[j] += 1.0
        hj = build_history(spec, maps, _with_law(laws, deviator, own.replace_stage(t, base_stage.with_params(th))))
        deltas.append({s: (hj.stage_vector(s).coef - w0[s].coef, hj.stage_vector(s).const - w0[s].const) for s in stages})
    k = theta.size
    g, H = np.zeros(k), np.zeros((k, k))
    for s in stages:
        r = spec.R_terminal[deviator - 1] if s == spec.horizon else spec.R[deviator - 1][s - 1]
        for a in range(k):
            da, ca = deltas[a][s]
            g[a] += 2 * (np.sum((r @ w0[s].coef) * da) + w0[s].const @ r @ ca)
            for b in range(a, k):
                db, cb = deltas[b][s]
                H[a, b] += 2 * (np.sum((r @ da) * db) + ca @ r @ cb)
    H = np.triu(H) + np.triu(H, 1).T
    return g, H


def quadratic_improvement(g: np.ndarray, H: np.ndarray, rel_tol: float = 1e-10) -> float:
    """``max_d -(g'd + d'Hd/2)`` for PSD ``H``; ``inf`` when unbounded."""
    if g.size == 0:
        return 0.0
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    scale = max(float(np.max(np.abs(w))), 1.0)
    gp = v.T @ g
    keep = w > rel_tol * scale
    if np.any(w < -1e-8 * scale):
        return math.inf
    if np.any(np.abs(gp[~keep]) > 1e-8 * (1.0 + np.max(np.abs(g)))):
        return math.inf
    return float(0.5 * np.sum(gp[keep] ** 2 / w[keep]))


def deviation_test(
    spec: GameSpec,
    maps: InfoMaps,
    laws,
    deviator: int,
    n_directions: int = 200,
    magnitude: float = 1e-2,
    seed: int = 0,
) -> DeviationReport:
    """Largest cost decrease the deviator can obtain by changing its affine law.

    Two checks, both exact: random perturbations of all of the deviator's
    parameters (norm ``magnitude``) and the exact best response within each
    stage's affine parameters.
    """
    own = laws[deviator - 1]
    base = closed_form_costs(spec, maps, laws)[deviator - 1]
    theta = own.params()
    rand = -math.inf
    for k in range(n_directions):
        rng = np.random.default_rng([seed, deviator, k])
        d = rng.standard_normal(theta.size)
        nd = np.linalg.norm(d)
        if nd == 0:
            continue
        law = own.with_params(theta + magnitude * d / nd)
        rand = max(rand, base - closed_form_costs(spec, maps, _with_law(laws, deviator, law))[deviator - 1])
    if n_directions == 0 or theta.size == 0:
        rand = 0.0
    per = {}
    for t in range(1, spec.horizon):
        if own[t].n_params == 0:
            per[t] = 0.0
            continue
        g, H = stage_quadratic(spec, maps, laws, deviator, t)
        per[t] = quadratic_improvement(g, H)
    br = max(per.values(), default=0.0)
    return DeviationReport(deviator, max(rand, br), rand, br, per, n_directions, magnitude)


# --------------------------------------------------------------------------
# the one-parameter family of equilibria of the bundled two-stage game


@dataclass
class LambdaFamily:
    lam: float
    laws: tuple[AffineControlLaw, AffineControlLaw]
    J1: float
    J2: float


def lambda_gains(lam: float) -> tuple[float, float]:
    den = 22 * lam + 59
    if abs(lam + 59 / 22) < 1e-9:
        raise DegenerateParameter("lambda = -59/22 is excluded")
    return -(10 * lam + 5) / den, -(2 * lam + 9) / den


def lambda_costs(lam: float) -> tuple[float, float]:
    """Closed-form expected costs of the family member ``lam``."""
    lambda_gains(lam)
    den = 22 * lam + 59
    ex, ey = -8 * lam + 44, 16 * lam + 32
    m2 = 2 * (ex * ex + ey * ey + ex * ey) / (9 * den * den)
    j1 = m2 / 4 + 2 * (10 * lam + 5) ** 2 / den ** 2 + 37 / 21
    j2 = m2 / 2 + 2 * (2 * lam + 9) ** 2 / den ** 2 + 41 / 21
    return j1, j2


def lambda_costs_exact(lam: Fraction) -> tuple[Fraction, Fraction]:
    lam = Fraction(lam)
    den = 22 * lam + 59
    ex, ey = -8 * lam + 44, 16 * lam + 32
    m2 = Fraction(2) * (ex * ex + ey * ey + ex * ey) / (9 * den * den)
    return (
        m2 / 4 + 2 * (10 * lam + 5) ** 2 / den ** 2 + Fraction(37, 21),
        m2 / 2 + 2 * (2 * lam + 9) ** 2 / den ** 2 + Fraction(41, 21),
    )


def lambda_family(lam: float, maps: InfoMaps | None = None) -> LambdaFamily:
    """Hard-coded laws of the family on the bundled two-stage game.

    Common information at stage 2 is ordered ``(y^1_1, y^2_1, u^1_1, u^2_1)``
    and controller 2's private information is ``y^2_2``.
    """
    a, b = lambda_gains(lam)
    if maps is not None:
        labels = [c.label() for c in maps[2].common]
        if labels != ["Y1_1", "Y2_1", "U1_1", "U2_1"] or [c.label() for c in maps[2].private[1]] != ["Y2_2"]:
            raise ValueError("maps do not match the bundled two-stage game")
    # -1/2 (m + 4/7 (y - m)) + lam (u^1_1 - a y^1_1), m = (y11 + y21)/3 + u11 + u21
    mean = np.array([1 / 3, 1 / 3, 1.0, 1.0])
    j2 = -3 / 14 * mean + lam * np.array([-a, 0.0, 1.0, 0.0])
    law1 = AffineControlLaw(1, (
        StageLaw(np.array([[a]]), np.zeros((1, 0)), np.zeros(1)),
        StageLaw(np.zeros((0, 0)), np.zeros((0, 4)), np.zeros(0)),
    ))
    law2 = AffineControlLaw(2, (
        StageLaw(np.array([[b]]), np.zeros((1, 0)), np.zeros(1)),
        StageLaw(np.array([[-2 / 7]]), j2.reshape(1, 4), np.zeros(1)),
    ))
    j1c, j2c = lambda_costs(lam)
    return LambdaFamily(lam, (law1, law2), j1c, j2c)
