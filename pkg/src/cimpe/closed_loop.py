"""Affine control laws and the exact Gaussian closed loop they induce.

Under affine laws every signal in the game is an affine function of the
standardized primitive vector ``eps ~ N(0, I)``. ``build_history`` tracks that
map exactly, which gives closed-form moments with no sampling.

Primitive order inside ``eps``: ``X_1``, then for each stage ``t``:
``W^1_t``, ``W^2_t`` (observation noise) and ``W^0_t`` (state noise, t < T).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game_model import ACT, Component, GameSpec, InfoMaps
from .linalg_kit import psd_sqrt


@dataclass(frozen=True)
class StageLaw:
    """``u = K @ p + J @ c + k`` at one stage."""

    K: np.ndarray
    J: np.ndarray
    k: np.ndarray

    @property
    def n_params(self) -> int:
        return self.K.size + self.J.size + self.k.size

    def params(self) -> np.ndarray:
        return np.concatenate([self.K.reshape(-1), self.J.reshape(-1), self.k.reshape(-1)])

    def with_params(self, theta: np.ndarray) -> "StageLaw":
        a, b = self.K.size, self.K.size + self.J.size
        return StageLaw(
            theta[:a].reshape(self.K.shape),
            theta[a:b].reshape(self.J.shape),
            theta[b:].reshape(self.k.shape).copy(),
        )

    def apply(self, p: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Evaluate on column-stacked samples ``p (n_p, N)``, ``c (n_c, N)``."""
        return self.K @ p + (self.J @ c + self.k[:, None])


@dataclass(frozen=True)
class AffineControlLaw:
    """Controller ``i``'s strategy: one ``StageLaw`` for each ``t = 1..T-1``."""

    controller: int
    stages: tuple[StageLaw, ...]

    def __getitem__(self, t: int) -> StageLaw:
        return self.stages[t - 1]

    def params(self) -> np.ndarray:
        return np.concatenate([s.params() for s in self.stages]) if self.stages else np.zeros(0)

    def with_params(self, theta: np.ndarray) -> "AffineControlLaw":
        out, pos = [], 0
        for s in self.stages:
            out.append(s.with_params(theta[pos:pos + s.n_params]))
            pos += s.n_params
        return AffineControlLaw(self.controller, tuple(out))

    def replace_stage(self, t: int, law: StageLaw) -> "AffineControlLaw":
        st = list(self.stages)
        st[t - 1] = law
        return AffineControlLaw(self.controller, tuple(st))

    def check(self, maps: InfoMaps) -> None:
        spec = maps.spec
        if len(self.stages) != spec.horizon - 1:
            raise ValueError(f"law has {len(self.stages)} stages, expected {spec.horizon - 1}")
        i = self.controller
        for t, s in enumerate(self.stages, start=1):
            want = (spec.nu(i, t), maps.n_private(i, t), maps.n_common(t))
            got = (s.K.shape[0], s.K.shape[1], s.J.shape[1])
            if got != want or s.J.shape[0] != want[0] or s.k.shape != (want[0],):
                raise ValueError(f"controller {i} law at stage {t} has dims {got}, expected {want}")


def zero_law(maps: InfoMaps, i: int) -> AffineControlLaw:
    spec = maps.spec
    st = []
    for t in range(1, spec.horizon):
        nu = spec.nu(i, t)
        st.append(StageLaw(np.zeros((nu, maps.n_private(i, t))), np.zeros((nu, maps.n_common(t))), np.zeros(nu)))
    return AffineControlLaw(i, tuple(st))


def random_law(maps: InfoMaps, i: int, rng: np.random.Generator, scale: float = 0.5) -> AffineControlLaw:
    base = zero_law(maps, i)
    return base.with_params(scale * rng.standard_normal(base.params().size))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Primitives:
    """Slices of each primitive inside ``eps`` and the matching square roots."""

    n: int
    x1: slice
    obs_noise: dict[tuple[int, int], slice]
    state_noise: dict[int, slice]
    sqrt_sigma_init: np.ndarray
    sqrt_v: dict[tuple[int, int], np.ndarray]
    sqrt_w0: dict[int, np.ndarray]


def primitive_layout(spec: GameSpec) -> Primitives:
    pos = spec.nx(1)
    x1 = slice(0, pos)
    obs, state, sv, sw = {}, {}, {}, {}
    for t in range(1, spec.horizon + 1):
        for j in (1, 2):
            d = spec.ny(j, t)
            obs[(j, t)] = slice(pos, pos + d)
            sv[(j, t)] = psd_sqrt(spec.V[j - 1][t - 1])
            pos += d
        if t < spec.horizon:
            d = spec.nx(t + 1)
            state[t] = slice(pos, pos + d)
            sw[t] = psd_sqrt(spec.W0[t - 1])
            pos += d
    return Primitives(pos, x1, obs, state, psd_sqrt(spec.sigma_init), sv, sw)


@dataclass
class Affine:
    """A random vector ``coef @ eps + const``."""

    coef: np.ndarray
    const: np.ndarray

    @property
    def cov(self) -> np.ndarray:
        return self.coef @ self.coef.T

    def lin(self, m: np.ndarray) -> "Affine":
        return Affine(m @ self.coef, m @ self.const)

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.coef + other.coef, self.const + other.const)


def stack(parts: list[Affine], n_eps: int) -> Affine:
    if not parts:
        return Affine(np.zeros((0, n_eps)), np.zeros(0))
    return Affine(np.vstack([p.coef for p in parts]), np.concatenate([p.const for p in parts]))


@dataclass
class History:
    """Exact affine representation of every signal of one closed-loop run."""

    spec: GameSpec
    maps: InfoMaps
    prim: Primitives
    x: dict[int, Affine] = field(default_factory=dict)
    y: dict[tuple[int, int], Affine] = field(default_factory=dict)
    u: dict[tuple[int, int], Affine] = field(default_factory=dict)

    def component(self, c: Component) -> Affine:
        if c.kind == ACT:
            return self.u[(c.j, c.s)]
        sl = self.spec.block_slice(c.j, c.s, c.block)
        y = self.y[(c.j, c.s)]
        return Affine(y.coef[sl], y.const[sl])

    def gather(self, comps) -> Affine:
        return stack([self.component(c) for c in comps], self.prim.n)

    def common(self, t: int) -> Affine:
        return self.gather(self.maps[t].common)

    def private(self, i: int, t: int) -> Affine:
        return self.gather(self.maps[t].private[i - 1])

    def state(self, t: int) -> Affine:
        """``S_t = (X_t, P^1_t, P^2_t)``."""
        return stack([self.x[t], self.private(1, t), self.private(2, t)], self.prim.n)

    def stage_vector(self, t: int) -> Affine:
        """``(x_t, u^1_t, u^2_t)``; just ``x_T`` at the terminal stage."""
        if t == self.spec.horizon:
            return self.x[t]
        return stack([self.x[t], self.u[(1, t)], self.u[(2, t)]], self.prim.n)

    def stage_costs(self, i: int) -> np.ndarray:
        """Exact expected cost of controller ``i`` at each stage ``1..T``."""
        out = []
        for t in range(1, self.spec.horizon + 1):
            w = self.stage_vector(t)
            r = self.spec.R_terminal[i - 1] if t == self.spec.horizon else self.spec.R[i - 1][t - 1]
            out.append(float(np.sum(r * (w.coef @ w.coef.T)) + w.const @ r @ w.const))
        return np.array(out)

    def expected_cost(self, i: int) -> float:
        return float(np.sum(self.stage_costs(i)))


def build_history(spec: GameSpec, maps: InfoMaps, laws: tuple[AffineControlLaw, AffineControlLaw]) -> History:
    prim = primitive_layout(spec)
    n = prim.n
    h = History(spec, maps, prim)

    def noise(sl: slice, root: np.ndarray) -> Affine:
        coef = np.zeros((root.shape[0], n))
        coef[:, sl] = root
        return Affine(coef, np.zeros(root.shape[0]))

    h.x[1] = noise(prim.x1, prim.sqrt_sigma_init)
    for t in range(1, spec.horizon + 1):
        for j in (1, 2):
            h.y[(j, t)] = h.x[t].lin(spec.H[j - 1][t - 1]) + noise(prim.obs_noise[(j, t)], prim.sqrt_v[(j, t)])
        if t == spec.horizon:
            break
        c = h.common(t)
        for i in (1, 2):
            law = laws[i - 1][t]
            p = h.private(i, t)
            h.u[(i, t)] = Affine(law.K @ p.coef + law.J @ c.coef, law.K @ p.const + law.J @ c.const + law.k)
        nxt = h.x[t].lin(spec.A[t - 1]) + h.u[(1, t)].lin(spec.B[0][t - 1]) + h.u[(2, t)].lin(spec.B[1][t - 1])
        h.x[t + 1] = nxt + noise(prim.state_noise[t], prim.sqrt_w0[t])
    return h


def expected_costs(spec: GameSpec, maps: InfoMaps, laws) -> tuple[float, float]:
    h = build_history(spec, maps, laws)
    return h.expected_cost(1), h.expected_cost(2)
