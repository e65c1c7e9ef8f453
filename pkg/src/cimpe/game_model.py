"""Declarative two-controller linear-Gaussian game and its information structure.

Stages are numbered ``1..T``. Controllers act at ``t = 1..T-1``; stage ``T``
only carries the terminal cost and (optionally) terminal observations.

An observation ``Y^j_s`` may be split into blocks so that part of a vector can
be shared while the rest stays private. An information component is one of

* ``Component(s, OBS, j, k)`` -- block ``k`` of ``Y^j_s``;
* ``Component(s, ACT, j, 0)`` -- the action ``U^j_s``.

Sorting components gives the canonical ordering used for every stacked vector:
by time, then observations before actions, then controller, then block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import numpy as np

from .linalg_kit import is_pd, is_psd

OBS = 0
ACT = 1


class SpecError(ValueError):
    """Malformed game spec (bad JSON, NaN, non-square covariance...)."""


class RepresentabilityError(SpecError):
    """Common or private information cannot be built from the previous stage."""


class Component(NamedTuple):
    s: int
    kind: int
    j: int
    block: int = 0

    def label(self) -> str:
        if self.kind == ACT:
            return f"U{self.j}_{self.s}"
        return f"Y{self.j}_{self.s}" + (f"[{self.block}]" if self.block else "")


@dataclass(frozen=True)
class GameSpec:
    """Dynamics, observations, noise and quadratic costs of the game.

    Lists are 0-based: ``A[t-1]`` is ``A_t``. Per-controller lists are indexed
    ``[i-1][t-1]``. ``R[i-1][t-1]`` is the full symmetric cost matrix over
    ``(x_t, u^1_t, u^2_t)``; ``R_terminal[i-1]`` weights ``x_T``.
    """

    horizon: int
    sigma_init: np.ndarray
    A: list[np.ndarray]
    B: tuple[list[np.ndarray], list[np.ndarray]]
    W0: list[np.ndarray]
    H: tuple[list[np.ndarray], list[np.ndarray]]
    V: tuple[list[np.ndarray], list[np.ndarray]]
    obs_blocks: tuple[list[tuple[int, ...]], list[tuple[int, ...]]]
    R: tuple[list[np.ndarray], list[np.ndarray]]
    R_terminal: tuple[np.ndarray, np.ndarray]
    name: str = ""

    def nx(self, t: int) -> int:
        if t == 1:
            return self.sigma_init.shape[0]
        return self.A[t - 2].shape[0]

    def nu(self, i: int, t: int) -> int:
        if t >= self.horizon:
            return 0
        return self.B[i - 1][t - 1].shape[1]

    def ny(self, i: int, t: int) -> int:
        return self.H[i - 1][t - 1].shape[0]

    def block_slice(self, j: int, s: int, k: int) -> slice:
        sizes = self.obs_blocks[j - 1][s - 1]
        start = sum(sizes[:k])
        return slice(start, start + sizes[k])

    def dim(self, c: Component) -> int:
        if c.kind == ACT:
            return self.nu(c.j, c.s)
        return self.obs_blocks[c.j - 1][c.s - 1][c.block]

    def all_obs(self, j: int, s: int) -> list[Component]:
        sizes = self.obs_blocks[j - 1][s - 1]
        return [Component(s, OBS, j, k) for k in range(len(sizes)) if sizes[k] > 0]

    def cost_blocks(self, i: int, t: int) -> dict[str, np.ndarray]:
        """Named blocks ``R11, R12, ..., R33`` of ``R^i_t``."""
        r = self.R[i - 1][t - 1]
        n, a, b = self.nx(t), self.nu(1, t), self.nu(2, t)
        cuts = [slice(0, n), slice(n, n + a), slice(n + a, n + a + b)]
        return {f"R{p + 1}{q + 1}": r[cuts[p], cuts[q]] for p in range(3) for q in range(p, 3)}


@dataclass(frozen=True)
class InfoStructure:
    """Observation sets ``E^i_t`` and action sets ``F^i_t`` for ``t = 1..T``.

    Keys are ``(i, t)``. Observation sets hold ``OBS`` components (already
    expanded to blocks) and action sets hold ``ACT`` components.
    """

    E: dict[tuple[int, int], frozenset[Component]]
    F: dict[tuple[int, int], frozenset[Component]]
    check_recall: bool = True

    def known(self, i: int, t: int) -> frozenset[Component]:
        return self.E[(i, t)] | self.F[(i, t)]

    def common(self, t: int) -> frozenset[Component]:
        return self.known(1, t) & self.known(2, t)

    def private(self, i: int, t: int) -> frozenset[Component]:
        return self.known(i, t) - self.common(t)


@dataclass(frozen=True)
class StageMaps:
    """Info layout at stage ``t`` and the selections producing stage ``t + 1``.

    ``zeta`` picks ``Z_{t+1}`` out of ``(P^1_t, P^2_t, U^1_t, U^2_t, Y^1_{t+1},
    Y^2_{t+1})``; ``xi[i]`` picks ``P^i_{t+1}`` out of ``(P^i_t, U^i_t,
    Y^i_{t+1})``. The successor fields are ``None`` at ``t = T``.
    """

    t: int
    common: tuple[Component, ...]
    private: tuple[tuple[Component, ...], tuple[Component, ...]]
    increment_obs: tuple[Component, ...] | None = None
    increment_act: tuple[Component, ...] | None = None
    increment: tuple[Component, ...] | None = None
    zeta: np.ndarray | None = None
    xi: tuple[np.ndarray, np.ndarray] | None = None
    # c_t = common_from_next @ c_{t+1};  z_{t+1} = increment_from_next @ c_{t+1}
    common_from_next: np.ndarray | None = None
    increment_from_next: np.ndarray | None = None


@dataclass(frozen=True)
class InfoMaps:
    spec: GameSpec
    stages: tuple[StageMaps, ...]

    def __getitem__(self, t: int) -> StageMaps:
        return self.stages[t - 1]

    def dim(self, comps: Iterable[Component]) -> int:
        return sum(self.spec.dim(c) for c in comps)

    def n_common(self, t: int) -> int:
        return self.dim(self[t].common)

    def n_private(self, i: int, t: int) -> int:
        return self.dim(self[t].private[i - 1])

    def n_state(self, t: int) -> int:
        """Dimension of ``S_t = (X_t, P^1_t, P^2_t)``."""
        return self.spec.nx(t) + self.n_private(1, t) + self.n_private(2, t)

    def private_selector(self, i: int, t: int) -> np.ndarray:
        """Matrix ``H^i`` with ``P^i_t = H^i S_t``."""
        n, p1, p2 = self.spec.nx(t), self.n_private(1, t), self.n_private(2, t)
        out = np.zeros((p1 if i == 1 else p2, n + p1 + p2))
        start = n if i == 1 else n + p1
        out[:, start:start + out.shape[0]] = np.eye(out.shape[0])
        return out


# --------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _need_square(name: str, m: np.ndarray) -> None:
    if m.shape[0] != m.shape[1]:
        raise SpecError(f"{name} must be square, got {m.shape}")


def validate_spec(spec: GameSpec, info: InfoStructure) -> ValidationReport:
    """Run every structural and numerical check; never raises on a failed check.

    Malformed covariances (non-square) are hard errors.
    """
    rep = ValidationReport()
    T = spec.horizon
    _need_square("sigma_init", spec.sigma_init)
    for t in range(1, T):
        _need_square(f"W0 at stage {t}", spec.W0[t - 1])
    for i in (1, 2):
        for t in range(1, T + 1):
            _need_square(f"V{i} at stage {t}", spec.V[i - 1][t - 1])

    # dimensions
    problems = []
    for t in range(1, T):
        n, n_next = spec.nx(t), spec.nx(t + 1)
        if spec.A[t - 1].shape != (n_next, n):
            problems.append(f"A_{t} has shape {spec.A[t - 1].shape}, expected {(n_next, n)}")
        if spec.W0[t - 1].shape != (n_next, n_next):
            problems.append(f"W0_{t} has shape {spec.W0[t - 1].shape}")
        for i in (1, 2):
            if spec.B[i - 1][t - 1].shape[0] != n_next:
                problems.append(f"B{i}_{t} has {spec.B[i - 1][t - 1].shape[0]} rows, expected {n_next}")
            k = n + spec.nu(1, t) + spec.nu(2, t)
            if spec.R[i - 1][t - 1].shape != (k, k):
                problems.append(f"R{i}_{t} has shape {spec.R[i - 1][t - 1].shape}, expected {(k, k)}")
    for i in (1, 2):
        if spec.R_terminal[i - 1].shape != (spec.nx(T), spec.nx(T)):
            problems.append(f"terminal cost {i} has shape {spec.R_terminal[i - 1].shape}")
        for t in range(1, T + 1):
            h = spec.H[i - 1][t - 1]
            if h.shape[1] != spec.nx(t):
                problems.append(f"H{i}_{t} has {h.shape[1]} columns, expected {spec.nx(t)}")
            if spec.V[i - 1][t - 1].shape != (h.shape[0], h.shape[0]):
                problems.append(f"V{i}_{t} has shape {spec.V[i - 1][t - 1].shape}")
            if sum(spec.obs_blocks[i - 1][t - 1]) != h.shape[0]:
                problems.append(f"observation blocks of Y{i}_{t} do not sum to {h.shape[0]}")
    rep.add("dimensions", not problems, "; ".join(problems))
    if problems:
        return rep

    # PSD / PD
    bad = []
    if not is_psd(spec.sigma_init):
        bad.append("sigma_init")
    for t in range(1, T):
        if not is_psd(spec.W0[t - 1]):
            bad.append(f"W0_{t}")
    for i in (1, 2):
        for t in range(1, T + 1):
            if not is_psd(spec.V[i - 1][t - 1]):
                bad.append(f"V{i}_{t}")
        if not is_psd(spec.R_terminal[i - 1]):
            bad.append(f"terminal cost {i}")
        for t in range(1, T):
            if not is_psd(spec.R[i - 1][t - 1]):
                bad.append(f"R{i}_{t}")
    rep.add("covariances and costs PSD", not bad, ", ".join(bad))

    not_pd = []
    for i in (1, 2):
        for t in range(1, T):
            blk = spec.cost_blocks(i, t)["R22" if i == 1 else "R33"]
            if blk.size and not is_pd(blk):
                not_pd.append(f"R{i}_{t} own-action block")
    rep.add("own-action cost positive definite", not not_pd, ", ".join(not_pd))

    # causality and support
    bad = []
    for (i, t), comps in list(info.E.items()) + list(info.F.items()):
        for c in comps:
            if c.kind == OBS and not (1 <= c.s <= t):
                bad.append(f"controller {i} at {t} knows {c.label()}")
            if c.kind == ACT and not (1 <= c.s <= t - 1):
                bad.append(f"controller {i} at {t} knows {c.label()}")
    rep.add("causality", not bad, "; ".join(bad))

    if info.check_recall:
        bad = []
        for i in (1, 2):
            for t in range(1, T + 1):
                for s in range(1, t + 1):
                    own = {c for c in info.E[(i, s)] if c.j == i and c.s == s}
                    missing = own - info.E[(i, t)]
                    if missing:
                        bad.append(f"controller {i} forgets {sorted(x.label() for x in missing)} by stage {t}")
        rep.add("perfect recall of own observations", not bad, "; ".join(bad))

    bad = []
    for t in range(1, T):
        for label, sets in (("observations", info.E), ("actions", info.F)):
            now = sets[(1, t)] & sets[(2, t)]
            nxt = sets[(1, t + 1)] & sets[(2, t + 1)]
            lost = now - nxt
            if lost:
                bad.append(f"common {label} {sorted(c.label() for c in lost)} at stage {t} dropped at {t + 1}")
    rep.add("common information nested", not bad, "; ".join(bad))

    bad = []
    for t in range(1, T):
        for i in (1, 2):
            src = set(info.private(i, t)) | {Component(t, ACT, i)} | set(spec.all_obs(i, t + 1))
            missing = set(info.private(i, t + 1)) - src
            if missing:
                bad.append(f"P{i}_{t + 1} needs {sorted(c.label() for c in missing)}")
    rep.add("private information representable", not bad, "; ".join(bad))

    bad = []
    for t in range(1, T):
        src = (
            set(info.private(1, t)) | set(info.private(2, t))
            | {Component(t, ACT, 1), Component(t, ACT, 2)}
            | set(spec.all_obs(1, t + 1)) | set(spec.all_obs(2, t + 1))
        )
        missing = (info.common(t + 1) - info.common(t)) - src
        if missing:
            bad.append(f"Z_{t + 1} needs {sorted(c.label() for c in missing)}")
    rep.add("common increment representable", not bad, "; ".join(bad))
    return rep


# --------------------------------------------------------------------------
# selection matrices


def component_layout(spec: GameSpec, comps: Iterable[Component]) -> dict[Component, slice]:
    """Slices of each component inside the vector stacking ``comps`` in order."""
    out, pos = {}, 0
    for c in comps:
        d = spec.dim(c)
        out[c] = slice(pos, pos + d)
        pos += d
    return out


def selection_matrix(spec: GameSpec, targets: Iterable[Component], source: dict[Component, slice], n_src: int) -> np.ndarray:
    targets = list(targets)
    rows = sum(spec.dim(c) for c in targets)
    out = np.zeros((rows, n_src))
    r = 0
    for c in targets:
        sl = source.get(c)
        if sl is None:
            raise RepresentabilityError(f"{c.label()} is not available in the source vector")
        d = sl.stop - sl.start
        out[r:r + d, sl] = np.eye(d)
        r += d
    return out


def stacked_nextcomponent_layout(spec: GameSpec, private: tuple[tuple[Component, ...], tuple[Component, ...]], t: int):
    """Layout of ``(P^1_t, P^2_t, U^1_t, U^2_t, Y^1_{t+1}, Y^2_{t+1})``."""
    comps = list(private[0]) + list(private[1]) + [Component(t, ACT, 1), Component(t, ACT, 2)]
    comps += spec.all_obs(1, t + 1) + spec.all_obs(2, t + 1)
    lay = component_layout(spec, comps)
    return lay, sum(spec.dim(c) for c in comps)


def build_info_maps(spec: GameSpec, info: InfoStructure) -> InfoMaps:
    T = spec.horizon
    layouts = []
    for t in range(1, T + 1):
        layouts.append((tuple(sorted(info.common(t))), (tuple(sorted(info.private(1, t))), tuple(sorted(info.private(2, t))))))
    stages = []
    for t in range(1, T + 1):
        common, private = layouts[t - 1]
        if t == T:
            stages.append(StageMaps(t, common, private))
            continue
        common_next, private_next = layouts[t]
        inc = tuple(c for c in common_next if c not in set(common))
        lay, n_src = stacked_nextcomponent_layout(spec, private, t)
        zeta = selection_matrix(spec, inc, lay, n_src)
        xis = []
        for i in (1, 2):
            src = list(private[i - 1]) + [Component(t, ACT, i)] + spec.all_obs(i, t + 1)
            sl = component_layout(spec, src)
            xis.append(selection_matrix(spec, private_next[i - 1], sl, sum(spec.dim(c) for c in src)))
        nxt = component_layout(spec, common_next)
        n_next = sum(spec.dim(c) for c in common_next)
        stages.append(
            StageMaps(
                t,
                common,
                private,
                increment_obs=tuple(c for c in inc if c.kind == OBS),
                increment_act=tuple(c for c in inc if c.kind == ACT),
                increment=inc,
                zeta=zeta,
                xi=(xis[0], xis[1]),
                common_from_next=selection_matrix(spec, common, nxt, n_next),
                increment_from_next=selection_matrix(spec, inc, nxt, n_next),
            )
        )
    return InfoMaps(spec, tuple(stages))


# --------------------------------------------------------------------------
# JSON ingestion


def _reject_constant(name: str):
    raise SpecError(f"non-finite number {name!r} in game spec")


def _matrix(obj: Any, name: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            r, c = obj["rows"], obj["cols"]
            data = obj.get("data", [])
        except KeyError as exc:
            raise SpecError(f"{name}: matrix object needs rows/cols") from exc
        a = np.asarray(data, dtype=float).reshape(r, c) if r * c else np.zeros((r, c))
    elif isinstance(obj, (int, float)):
        a = np.array([[float(obj)]])
    else:
        try:
            a = np.asarray(obj, dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"{name}: not a numeric matrix") from exc
        if a.ndim == 1 and a.size == 0:
            a = np.zeros(shape or (0, 0))
        elif a.ndim == 2 and a.shape[1] == 0 and shape is not None:
            a = np.zeros(shape)
        if a.ndim != 2:
            raise SpecError(f"{name}: expected a 2-d array, got {a.ndim}-d")
    if not np.all(np.isfinite(a)):
        raise SpecError(f"{name}: NaN/Infinity entries")
    if shape is not None and a.shape != shape:
        raise SpecError(f"{name}: shape {a.shape}, expected {shape}")
    return a


def _components(entries: Any, spec: GameSpec, kind: int, name: str) -> frozenset[Component]:
    out = set()
    for e in entries or []:
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise SpecError(f"{name}: index entry {e!r} is not [controller, stage(, block)]")
        j, s = int(e[0]), int(e[1])
        if j not in (1, 2) or not (1 <= s <= spec.horizon):
            raise SpecError(f"{name}: index entry {e!r} out of range")
        if kind == ACT:
            out.add(Component(s, ACT, j))
        elif len(e) == 3:
            k = int(e[2])
            if not 0 <= k < len(spec.obs_blocks[j - 1][s - 1]):
                raise SpecError(f"{name}: Y{j}_{s} has no block {k}")
            out.add(Component(s, OBS, j, k))
        else:
            out.update(spec.all_obs(j, s))
    return frozenset(out)


def _cost_matrix(obj: Any, name: str, dims: tuple[int, int, int]) -> np.ndarray:
    n = sum(dims)
    if isinstance(obj, dict) and "rows" not in obj:
        out = np.zeros((n, n))
        cuts = np.cumsum((0,) + dims)
        for key, val in obj.items():
            if len(key) != 3 or key[0] != "R" or not key[1:].isdigit():
                raise SpecError(f"{name}: unknown cost block {key!r}")
            p, q = int(key[1]) - 1, int(key[2]) - 1
            if p > q:
                raise SpecError(f"{name}: give upper blocks only, got {key}")
            blk = _matrix(val, f"{name}.{key}", (dims[p], dims[q]))
            out[cuts[p]:cuts[p + 1], cuts[q]:cuts[q + 1]] = blk
            out[cuts[q]:cuts[q + 1], cuts[p]:cuts[p + 1]] = blk.T
        return out
    return _matrix(obj, name, (n, n))


def spec_from_dict(doc: dict[str, Any]) -> tuple[GameSpec, InfoStructure]:
    """Build ``(GameSpec, InfoStructure)`` from the JSON document model."""
    try:
        T = int(doc["horizon"])
        stages = doc["stages"]
        costs = doc["costs"]
        info_doc = doc["info"]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"missing top-level key: {exc}") from exc
    if T < 2:
        raise SpecError("horizon must be at least 2")
    if len(stages) != T:
        raise SpecError(f"expected {T} stage objects, got {len(stages)}")

    sigma_init = _matrix(doc.get("sigma_init"), "sigma_init")
    nx = [sigma_init.shape[0]]
    A, W0, B = [], [], ([], [])
    for t in range(1, T):
        st = stages[t - 1]
        a = _matrix(st["A"], f"stages[{t}].A")
        if a.shape[1] != nx[-1]:
            raise SpecError(f"stages[{t}].A has {a.shape[1]} columns, expected {nx[-1]}")
        A.append(a)
        nx.append(a.shape[0])
        W0.append(_matrix(st.get("W0", np.zeros((a.shape[0], a.shape[0]))), f"stages[{t}].W0"))
        for i in (1, 2):
            key = f"B{i}"
            if key in st:
                shape = (a.shape[0], int(st[f"nu{i}"])) if f"nu{i}" in st else None
                B[i - 1].append(_matrix(st[key], f"stages[{t}].{key}", shape))
            else:
                B[i - 1].append(np.zeros((a.shape[0], int(st.get(f"nu{i}", 0)))))
    H, Vn, blocks = ([], []), ([], []), ([], [])
    for t in range(1, T + 1):
        st = stages[t - 1]
        for i in (1, 2):
            if f"H{i}" in st:
                h = _matrix(st[f"H{i}"], f"stages[{t}].H{i}", None)
                if h.shape[1] == 0 and nx[t - 1]:
                    h = np.zeros((h.shape[0], nx[t - 1]))
            else:
                h = np.zeros((int(st.get(f"ny{i}", 0)), nx[t - 1]))
            H[i - 1].append(h)
            Vn[i - 1].append(_matrix(st.get(f"V{i}", np.zeros((h.shape[0], h.shape[0]))), f"stages[{t}].V{i}", None if h.shape[0] else (0, 0)))
            bl = st.get(f"blocks{i}")
            blocks[i - 1].append(tuple(int(b) for b in bl) if bl is not None else (h.shape[0],))

    spec_tmp = GameSpec(T, sigma_init, A, B, W0, H, Vn, blocks, (list(), list()), (np.zeros((0, 0)), np.zeros((0, 0))))
    R = ([], [])
    term = []
    for i in (1, 2):
        seq = costs.get(f"R{i}")
        if seq is None or len(seq) != T - 1:
            raise SpecError(f"costs.R{i} must list {T - 1} stage cost matrices")
        for t in range(1, T):
            dims = (nx[t - 1], spec_tmp.nu(1, t), spec_tmp.nu(2, t))
            R[i - 1].append(_cost_matrix(seq[t - 1], f"costs.R{i}[{t}]", dims))
        term.append(_matrix(costs.get(f"terminal{i}", np.zeros((nx[-1], nx[-1]))), f"costs.terminal{i}"))
    spec = GameSpec(T, sigma_init, A, B, W0, H, Vn, blocks, R, (term[0], term[1]), name=str(doc.get("name", "")))

    E, F = {}, {}
    for i in (1, 2):
        e_lists = info_doc.get(f"E{i}")
        f_lists = info_doc.get(f"F{i}")
        if e_lists is None or f_lists is None:
            raise SpecError(f"info.E{i} and info.F{i} are required")
        if len(e_lists) not in (T - 1, T) or len(f_lists) != len(e_lists):
            raise SpecError(f"info.E{i}/F{i} must have T-1 or T stage entries")
        for t in range(1, len(e_lists) + 1):
            E[(i, t)] = _components(e_lists[t - 1], spec, OBS, f"info.E{i}[{t}]")
            F[(i, t)] = _components(f_lists[t - 1], spec, ACT, f"info.F{i}[{t}]")
    if (1, T) not in E or (2, T) not in E:
        # terminal stage defaults to full revelation of the whole history
        every_obs = frozenset(c for j in (1, 2) for s in range(1, T + 1) for c in spec.all_obs(j, s))
        every_act = frozenset(Component(s, ACT, j) for j in (1, 2) for s in range(1, T))
        for i in (1, 2):
            E[(i, T)] = every_obs
            F[(i, T)] = every_act
    # zero-width components carry no information
    E = {k: frozenset(c for c in v if spec.dim(c) > 0) for k, v in E.items()}
    F = {k: frozenset(c for c in v if spec.dim(c) > 0) for k, v in F.items()}
    return spec, InfoStructure(E, F, check_recall=bool(info_doc.get("check_recall", True)))


def loads_spec(text: str) -> tuple[GameSpec, InfoStructure]:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError("game spec must be a JSON object")
    return spec_from_dict(doc)


def load_spec(path: str | Path) -> tuple[GameSpec, InfoStructure]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    return loads_spec(text)


def _encode_matrix(m: np.ndarray) -> dict[str, Any]:
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": [float(x) for x in m.reshape(-1)]}


def spec_to_dict(spec: GameSpec, info: InfoStructure) -> dict[str, Any]:
    """Inverse of ``spec_from_dict`` using explicit-dimension matrix objects."""
    T = spec.horizon
    stages = []
    for t in range(1, T + 1):
        st: dict[str, Any] = {}
        if t < T:
            st["A"] = _encode_matrix(spec.A[t - 1])
            st["W0"] = _encode_matrix(spec.W0[t - 1])
            for i in (1, 2):
                st[f"B{i}"] = _encode_matrix(spec.B[i - 1][t - 1])
        for i in (1, 2):
            st[f"H{i}"] = _encode_matrix(spec.H[i - 1][t - 1])
            st[f"V{i}"] = _encode_matrix(spec.V[i - 1][t - 1])
            st[f"blocks{i}"] = list(spec.obs_blocks[i - 1][t - 1])
        stages.append(st)

    def entries(comps):
        out = []
        for c in sorted(comps):
            if c.kind == ACT:
                out.append([c.j, c.s])
            else:
                out.append([c.j, c.s, c.block])
        return out

    info_doc: dict[str, Any] = {"check_recall": info.check_recall}
    for i in (1, 2):
        info_doc[f"E{i}"] = [entries(info.E[(i, t)]) for t in range(1, T + 1)]
        info_doc[f"F{i}"] = [entries(info.F[(i, t)]) for t in range(1, T + 1)]
    return {
        "name": spec.name,
        "horizon": T,
        "sigma_init": _encode_matrix(spec.sigma_init),
        "stages": stages,
        "costs": {
            "R1": [_encode_matrix(r) for r in spec.R[0]],
            "R2": [_encode_matrix(r) for r in spec.R[1]],
            "terminal1": _encode_matrix(spec.R_terminal[0]),
            "terminal2": _encode_matrix(spec.R_terminal[1]),
        },
        "info": info_doc,
    }


def is_finite_number(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)
