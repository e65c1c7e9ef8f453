"""Game definitions shipped with the package.

``six`` is the scalar two-decision game with one-step delayed sharing of
observations and actions; ``six_no_action_sharing`` removes the shared
actions. ``global_local`` builds a random instance in which a global state is
seen by both controllers and each controller also sees a local state.
"""

from __future__ import annotations

import copy
import json

import numpy as np

from .game_model import GameSpec, InfoStructure, spec_from_dict

_SIX = {
    "name": "six",
    "horizon": 3,
    "sigma_init": [[1.0]],
    "stages": [
        {
            "A": [[1.0]], "B1": [[1.0]], "B2": [[1.0]], "W0": [[1.0]],
            "H1": [[1.0]], "H2": [[1.0]], "V1": [[1.0]], "V2": [[1.0]],
        },
        {
            "A": [[1.0]], "B1": {"rows": 1, "cols": 0}, "B2": [[1.0]], "W0": [[1.0]],
            "H1": {"rows": 0, "cols": 1}, "H2": [[1.0]], "V1": {"rows": 0, "cols": 0}, "V2": [[1.0]],
        },
        {
            "H1": {"rows": 0, "cols": 1}, "H2": {"rows": 0, "cols": 1},
            "V1": {"rows": 0, "cols": 0}, "V2": {"rows": 0, "cols": 0},
        },
    ],
    "costs": {
        # blocks over (x_t, u^1_t, u^2_t)
        "R1": [{"R22": [[1.0]]}, {"R11": [[0.0]]}],
        "R2": [{"R33": [[1.0]]}, {"R33": [[1.0]]}],
        "terminal1": [[1.0]],
        "terminal2": [[1.0]],
    },
    "info": {
        "E1": [[[1, 1]], [[1, 1], [2, 1]]],
        "F1": [[], [[1, 1], [2, 1]]],
        "E2": [[[2, 1]], [[1, 1], [2, 1], [2, 2]]],
        "F2": [[], [[1, 1], [2, 1]]],
    },
}


def six_dict() -> dict:
    return copy.deepcopy(_SIX)


def six_json() -> str:
    return json.dumps(_SIX, indent=2)


def six() -> tuple[GameSpec, InfoStructure]:
    return spec_from_dict(six_dict())


def six_no_action_sharing() -> tuple[GameSpec, InfoStructure]:
    doc = six_dict()
    doc["name"] = "six-no-action-sharing"
    every_obs = [[1, 1], [2, 1], [2, 2]]
    doc["info"]["E1"].append(every_obs)
    doc["info"]["E2"].append(every_obs)
    doc["info"]["F1"] = [[], [], []]
    doc["info"]["F2"] = [[], [], []]
    return spec_from_dict(doc)


def global_local_dict(seed: int = 0, horizon: int = 4) -> dict:
    """Random scalar-block instance of the global/local-state game.

    State ``(x0, x1, x2)``: ``x0`` is global, ``xi`` is local to controller
    ``i``. Controller ``i`` observes ``(x0, xi)`` without noise. ``x0`` and
    all actions become common after one step. Only the current ``xi`` is
    kept as private information: past local states would be revealed by
    shared actions and make the belief strategy dependent.
    """
    rng = np.random.default_rng([seed, 5])
    a, a1, a2 = rng.uniform(-0.9, 0.9, size=3)
    b1, b2 = rng.uniform(-0.5, 0.5, size=2)
    d = rng.uniform(-0.5, 0.5, size=(2, 2))  # d[i, j]: effect of u^{j+1} on x^{i+1}
    lam = rng.uniform(0.2, 1.5, size=3)
    q = rng.uniform(0.2, 1.5, size=2)
    r = rng.uniform(1.0, 2.0, size=2)  # own-action weights
    s = rng.uniform(0.0, 0.5, size=2)  # other-action weights

    A = [[a, 0, 0], [a1, 0, 0], [a2, 0, 0]]
    B1 = [[b1], [d[0, 0]], [d[1, 0]]]
    B2 = [[b2], [d[0, 1]], [d[1, 1]]]
    W0 = np.diag(lam).tolist()
    H1 = [[1, 0, 0], [0, 1, 0]]
    H2 = [[1, 0, 0], [0, 0, 1]]
    Z2 = [[0, 0], [0, 0]]
    stages = []
    for t in range(1, horizon + 1):
        st = {"H1": H1, "H2": H2, "V1": Z2, "V2": Z2, "blocks1": [1, 1], "blocks2": [1, 1]}
        if t < horizon:
            st.update({"A": A, "B1": B1, "B2": B2, "W0": W0})
        stages.append(st)

    def cost(i: int) -> list:
        x = np.zeros((3, 3))
        x[0, 0] = x[i, i] = q[i - 1]
        u1 = r[0] if i == 1 else s[1]
        u2 = s[0] if i == 1 else r[1]
        return np.diag([x[0, 0], x[1, 1], x[2, 2], u1, u2]).tolist()

    def terminal(i: int) -> list:
        x = np.zeros((3, 3))
        x[0, 0] = x[i, i] = q[i - 1]
        return x.tolist()

    E = {1: [], 2: []}
    F = {1: [], 2: []}
    for t in range(1, horizon + 1):
        for i in (1, 2):
            own = [[i, t, 1]]
            glob = [[j, s_, 0] for j in (1, 2) for s_ in range(1, t + 1)]
            E[i].append(glob + own)
            F[i].append([[j, s_] for j in (1, 2) for s_ in range(1, t)])
    return {
        "name": f"global-local-{seed}",
        "horizon": horizon,
        "sigma_init": np.diag(lam).tolist(),
        "stages": stages,
        "costs": {"R1": [cost(1)] * (horizon - 1), "R2": [cost(2)] * (horizon - 1),
                  "terminal1": terminal(1), "terminal2": terminal(2)},
        "info": {"E1": E[1], "F1": F[1], "E2": E[2], "F2": F[2], "check_recall": False},
        "params": {"lambda": lam.tolist()},
    }


def global_local(seed: int = 0, horizon: int = 4) -> tuple[GameSpec, InfoStructure]:
    return spec_from_dict(global_local_dict(seed, horizon))


BUNDLED = {"six": six_dict}
