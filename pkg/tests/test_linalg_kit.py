from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cimpe.linalg_kit import (
    NoUniqueSolution, NotPSDError, block_diag, gaussian_condition, is_pd, is_psd, max_singular_value,
    pinv, psd_sqrt, repair_psd, solve_stein, spectral_radius,
)


# ---------------------------------------------------------------- oracles


def charpoly_faddeev(m: np.ndarray) -> np.ndarray:
    """Characteristic polynomial coefficients by Faddeev-LeVerrier."""
    n = m.shape[0]
    coeffs = [1.0]
    mk = np.zeros_like(m)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(m @ mk) / k)
    return np.array(coeffs)


def companion_spectral_radius(m: np.ndarray) -> float:
    c = charpoly_faddeev(m)
    n = len(c) - 1
    comp = np.zeros((n, n))
    comp[0, :] = -c[1:]
    comp[1:, :-1] = np.eye(n - 1)
    # np.roots also uses a companion matrix; build it by hand and use a
    # generic nonsymmetric QR via numpy's eigvals on this different matrix
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def kron_oracle(p1, p2, p3):
    n, k = p3.shape
    big = np.zeros((n * k, n * k))
    # vec(D) stacks columns; (P1 D P2)[:, j] = sum_l P2[l, j] P1 D[:, l]
    for j in range(k):
        for l in range(k):
            big[j * n:(j + 1) * n, l * n:(l + 1) * n] = p2[l, j] * p1
    big += np.eye(n * k)
    vec = np.linalg.solve(big, p3.T.reshape(-1))
    return vec.reshape(k, n).T


def penrose_ok(m: np.ndarray, tol: float = 1e-10) -> bool:
    p = pinv(m)
    scale = tol * (1.0 + np.linalg.norm(m) ** 2 + np.linalg.norm(p) ** 2)
    return bool(
        np.linalg.norm(m @ p @ m - m) <= scale
        and np.linalg.norm(p @ m @ p - p) <= scale
        and np.linalg.norm((m @ p).T - m @ p) <= scale
        and np.linalg.norm((p @ m).T - p @ m) <= scale
    )


def random_rank_deficient(rng, rows, cols):
    rank = rng.integers(0, min(rows, cols) + 1)
    return rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))


# ---------------------------------------------------------------- pinv


def test_pinv_examples():
    assert np.allclose(pinv(np.array([[2.0]])), [[0.5]])
    z = np.zeros((2, 3))
    assert pinv(z).shape == (3, 2) and np.all(pinv(z) == 0)
    assert np.allclose(pinv(np.diag([1.0, 0.0])), np.diag([1.0, 0.0]))
    assert pinv(np.zeros((0, 3))).shape == (3, 0)


def test_pinv_penrose_random(rng):
    for _ in range(300):
        r, c = rng.integers(1, 7, size=2)
        m = random_rank_deficient(rng, r, c) if rng.random() < 0.5 else rng.standard_normal((r, c))
        assert penrose_ok(m)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=st.floats(-10, 10)))
def test_pinv_penrose_property(m):
    assert penrose_ok(m)


# ---------------------------------------------------------------- spectra


def test_spectral_radius_examples():
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0
    assert spectral_radius(np.diag([0.5, 0.25])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((2, 3)))


def test_spectral_radius_vs_characteristic_polynomial(rng):
    for _ in range(50):
        m = rng.standard_normal((5, 5))
        assert spectral_radius(m) == pytest.approx(companion_spectral_radius(m), rel=1e-9)


def test_faddeev_oracle_itself():
    # char poly of diag(1, 2, 3) is (x-1)(x-2)(x-3)
    assert np.allclose(charpoly_faddeev(np.diag([1.0, 2.0, 3.0])), [1, -6, 11, -6])


def test_max_singular_value(rng):
    assert max_singular_value(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(2.0)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert max_singular_value(q) == pytest.approx(1.0, rel=1e-9)
    for _ in range(20):
        m = rng.standard_normal((4, 3))
        assert max_singular_value(m) == pytest.approx(np.sqrt(spectral_radius(m.T @ m)), rel=1e-9)


# ---------------------------------------------------------------- Stein


def test_stein_examples():
    p3 = np.arange(6.0).reshape(2, 3)
    assert np.allclose(solve_stein(np.zeros((2, 2)), np.eye(3), p3), p3)
    assert solve_stein(np.array([[1.0]]), np.array([[0.5]]), np.array([[3.0]]))[0, 0] == pytest.approx(2.0)


def test_stein_vs_kronecker_oracle(rng):
    for _ in range(100):
        p1 = rng.standard_normal((3, 3))
        p2 = rng.standard_normal((3, 3))
        p1 *= 0.9 / max(spectral_radius(p1), 1e-12) * rng.random()
        p2 /= max(spectral_radius(p2), 1e-12)
        p3 = rng.standard_normal((3, 3))
        d = solve_stein(p1, p2, p3)
        assert np.linalg.norm(d + p1 @ d @ p2 - p3) <= 1e-9 * (1 + np.linalg.norm(p3))
        assert np.allclose(d, kron_oracle(p1, p2, p3), atol=1e-9)


def test_stein_rectangular_and_singular():
    p1 = np.array([[0.5]])
    p2 = np.diag([0.2, 0.4])
    p3 = np.array([[1.0, 2.0]])
    d = solve_stein(p1, p2, p3)
    assert np.allclose(d + p1 @ d @ p2, p3)
    with pytest.raises(NoUniqueSolution) as exc:
        solve_stein(np.array([[1.0]]), np.array([[-1.0]]), np.array([[1.0]]))
    assert exc.value.smallest_singular_value <= 1e-12
    with pytest.raises(ValueError):
        solve_stein(np.eye(2), np.eye(2), np.ones((2, 3)))


# ---------------------------------------------------------------- spectra of generalized-inverse products


def test_projection_eigenvalues_are_zero_or_one(rng):
    for _ in range(100):
        r, c = rng.integers(1, 6, size=2)
        d = random_rank_deficient(rng, r, c)
        w = np.linalg.eigvals(d.T @ pinv(d @ d.T) @ d)
        nz = w[np.abs(w) > 1e-8]
        assert np.allclose(nz, 1.0, atol=1e-8)


def test_product_of_projections_has_spectrum_in_unit_interval(rng):
    for _ in range(100):
        r1, r2, c = rng.integers(1, 6, size=3)
        d1, d2 = random_rank_deficient(rng, r1, c), random_rank_deficient(rng, r2, c)
        m = pinv(d1 @ d1.T) @ d1 @ d2.T @ pinv(d2 @ d2.T) @ d2 @ d1.T
        w = np.linalg.eigvals(m)
        assert np.all(np.abs(w.imag) <= 1e-8)
        assert np.all(w.real >= -1e-8) and np.all(w.real <= 1 + 1e-8)


# ---------------------------------------------------------------- PSD helpers and conditioning


def test_repair_psd_policy():
    m = np.array([[1.0, 0.0], [0.0, -1e-13]])
    out = repair_psd(m)
    assert np.all(np.linalg.eigvalsh(out) >= 0)
    with pytest.raises(NotPSDError):
        repair_psd(np.diag([1.0, -1e-3]))
    assert is_psd(np.zeros((0, 0))) and is_pd(np.eye(2)) and not is_pd(np.diag([1.0, 0.0]))
    assert not is_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_psd_sqrt(rng):
    a = rng.standard_normal((4, 2))
    m = a @ a.T
    r = psd_sqrt(m)
    assert np.allclose(r @ r, m, atol=1e-10)


def test_gaussian_condition_examples():
    g, o, c = gaussian_condition(np.zeros(2), np.array([[1.0, 1.0], [1.0, 2.0]]), [0], [1])
    assert g[0, 0] == pytest.approx(0.5) and c[0, 0] == pytest.approx(0.5)
    g, o, c = gaussian_condition(np.array([1.0, 0.0]), np.diag([3.0, 0.0]), [0], [1])
    assert g[0, 0] == 0.0 and c[0, 0] == pytest.approx(3.0) and o[0] == pytest.approx(1.0)
    # state with prior variance 4/3 seen through unit noise
    cov = np.array([[4 / 3, 4 / 3], [4 / 3, 4 / 3 + 1]])
    g, _, c = gaussian_condition(np.zeros(2), cov, [0], [1])
    assert g[0, 0] == pytest.approx(4 / 7, abs=1e-12)
    assert c[0, 0] == pytest.approx(4 / 7, abs=1e-12)


def test_gaussian_condition_errors():
    with pytest.raises(ValueError):
        gaussian_condition(np.zeros(2), np.eye(2), [0], [0])
    with pytest.raises(NotPSDError):
        gaussian_condition(np.zeros(2), np.diag([1.0, -1.0]), [0], [1])


def test_block_diag_zero_blocks():
    out = block_diag(np.ones((1, 1)), np.zeros((0, 0)), 2 * np.ones((2, 2)))
    assert out.shape == (3, 3) and out[0, 0] == 1 and out[2, 2] == 2 and out[0, 1] == 0
