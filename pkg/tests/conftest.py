from __future__ import annotations

import numpy as np
import pytest

from cimpe import bundled
from cimpe.game_model import build_info_maps
from cimpe.induction import solve_cimpe
from cimpe.verifier import realize_control_laws


@pytest.fixture(scope="session")
def six():
    return bundled.six()


@pytest.fixture(scope="session")
def six_maps(six):
    return build_info_maps(*six)


@pytest.fixture(scope="session")
def six_solution(six):
    return solve_cimpe(*six)


@pytest.fixture(scope="session")
def six_laws(six_solution):
    return realize_control_laws(six_solution)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    a = rng.standard_normal((n, rank if rank is not None else n))
    return a @ a.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
