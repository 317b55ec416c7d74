import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from embp_pnc.numerics import (
    GaussianBelief,
    SingularSystemError,
    belief_from_moments,
    belief_product,
    cmat2_hermitian_solve,
    cmat2_inv,
    herm2_inv,
    herm2_matvec,
    is_hermitian_psd,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_hpd(rng, dim=2, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (a @ a.conj().T + 0.1 * np.eye(dim))


@st.composite
def hpd_matrices(draw, dim=2):
    re = draw(arrays(float, (dim, dim), elements=finite))
    im = draw(arrays(float, (dim, dim), elements=finite))
    a = re + 1j * im
    return a @ a.conj().T + 0.5 * np.eye(dim)


def test_inverse_of_identity():
    np.testing.assert_allclose(cmat2_inv(np.eye(2)), np.eye(2))


def test_inverse_of_scalar():
    np.testing.assert_allclose(cmat2_inv([[2.0]]), [[0.5]])


def test_singular_matrix_raises():
    with pytest.raises(SingularSystemError, match="singular system"):
        cmat2_inv([[1, 1], [1, 1]])


def test_solve_singular_raises_with_condition():
    with pytest.raises(SingularSystemError) as info:
        cmat2_hermitian_solve([[1, 1], [1, 1]], [1, 1])
    assert info.value.condition > 1e12


def test_solve_matches_numpy(rng):
    a = random_hpd(rng)
    b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    np.testing.assert_allclose(cmat2_hermitian_solve(a, b), np.linalg.solve(a, b), rtol=1e-12)


@given(hpd_matrices())
def test_inverse_round_trip(a):
    np.testing.assert_allclose(cmat2_inv(a) @ a, np.eye(2), atol=1e-9)


def test_psd_check():
    assert is_hermitian_psd(np.diag([1.0, 0.0]))
    assert not is_hermitian_psd(np.diag([1.0, -1.0]))
    assert not is_hermitian_psd([[1, 1j], [1j, 1]])


def test_belief_rejects_non_psd_precision():
    with pytest.raises(ValueError, match="PSD"):
        GaussianBelief(np.zeros(2), np.diag([1.0, -1.0]))


def test_flat_belief_has_no_moments():
    with pytest.raises(SingularSystemError, match="non-invertible precision"):
        GaussianBelief.flat(2).to_moments()


def test_rank_one_precision_is_allowed():
    b = GaussianBelief(np.array([1, 1]), np.ones((2, 2)))
    assert b.dim == 2
    with pytest.raises(SingularSystemError):
        b.to_moments()


def test_singular_covariance_raises():
    with pytest.raises(SingularSystemError, match="non-invertible covariance"):
        belief_from_moments(np.zeros(2), np.ones((2, 2)))


def test_belief_is_immutable():
    b = GaussianBelief(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        b.W[0, 0] = 3.0


def test_product_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        belief_product(GaussianBelief.flat(1), GaussianBelief.flat(2))


def test_product_with_flat_is_identity(rng):
    b = belief_from_moments(rng.standard_normal(2), random_hpd(rng))
    c = b * GaussianBelief.flat(2)
    np.testing.assert_allclose(c.W, b.W)
    np.testing.assert_allclose(c.xi, b.xi)


def test_product_of_scalar_gaussians():
    # N(1, 1) x N(3, 1) has mean 2 and variance 1/2
    m, K = (belief_from_moments([1.0], [[1.0]]) * belief_from_moments([3.0], [[1.0]])).to_moments()
    np.testing.assert_allclose(m, [2.0])
    np.testing.assert_allclose(K, [[0.5]])


@given(hpd_matrices(), arrays(float, 2, elements=finite), arrays(float, 2, elements=finite))
def test_moment_round_trip(K, mr, mi):
    m = mr + 1j * mi
    m2, K2 = belief_from_moments(m, K).to_moments()
    scale = max(1.0, np.abs(K).max(), np.abs(m).max())
    np.testing.assert_allclose(m2, m, atol=1e-12 * scale * np.linalg.cond(K))
    np.testing.assert_allclose(K2, K, atol=1e-12 * scale * np.linalg.cond(K))


@given(hpd_matrices(), hpd_matrices())
def test_product_precisions_add_and_stay_psd(a, b):
    p = GaussianBelief(np.zeros(2), a) * GaussianBelief(np.zeros(2), b)
    np.testing.assert_allclose(p.W, 0.5 * ((a + b) + (a + b).conj().T))
    assert is_hermitian_psd(p.W)


def test_numba_kernels_match_numpy(rng):
    a = random_hpd(rng)
    inv = herm2_inv(a[0, 0], a[0, 1], a[1, 1])
    np.testing.assert_allclose(np.array([[inv[0], inv[1]], [np.conj(inv[1]), inv[2]]]), np.linalg.inv(a), rtol=1e-10)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    np.testing.assert_allclose(herm2_matvec(a[0, 0], a[0, 1], a[1, 1], v[0], v[1]), a @ v, rtol=1e-12)


def test_moments_identity_case():
    b = belief_from_moments([0, 0], np.eye(2))
    np.testing.assert_allclose(b.xi, [0, 0])
    np.testing.assert_allclose(b.W, np.eye(2))


def test_moments_scaled_identity():
    b = belief_from_moments([1 + 0j, 0], 2 * np.eye(2))
    np.testing.assert_allclose(b.xi, [0.5, 0])
    np.testing.assert_allclose(b.W, 0.5 * np.eye(2))


@pytest.mark.parametrize(
    "A, b, x",
    [
        (np.eye(2), [2, 3j], [2, 3j]),
        (np.diag([2.0, 4.0]), [2, 4], [1, 1]),
    ],
)
def test_solve_examples(A, b, x):
    np.testing.assert_allclose(cmat2_hermitian_solve(A, b), x)


def test_solve_residual_bound_many_instances(rng):
    for _ in range(10_000):
        a = random_hpd(rng, scale=10 ** rng.uniform(-3, 3))
        b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        x = cmat2_hermitian_solve(a, b)
        assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_product_commutative_and_associative(rng):
    for _ in range(200):
        bs = [belief_from_moments(rng.standard_normal(2) + 1j * rng.standard_normal(2), random_hpd(rng)) for _ in range(3)]
        ab, ba = bs[0] * bs[1], bs[1] * bs[0]
        np.testing.assert_allclose(ab.W, ba.W, rtol=1e-12)
        np.testing.assert_allclose(ab.xi, ba.xi, rtol=1e-12)
        left, right = (bs[0] * bs[1]) * bs[2], bs[0] * (bs[1] * bs[2])
        np.testing.assert_allclose(left.W, right.W, rtol=1e-10)
        np.testing.assert_allclose(left.xi, right.xi, rtol=1e-10)
