import numpy as np
import pytest

from bjspec.errors import TooManySingular, ValidationError
from bjspec.haar import (C_RADAV, combined_z, hua_cauchy_check, mc_average,
                         positive_lorentz_from_normal_form, radav_integral, reflection_check,
                         sample_haar, sample_haar_batch)

N_MC = 20000


def test_samples_unitary(rng):
    U = sample_haar_batch(3, 200, rng)
    err = np.abs(np.conj(np.swapaxes(U, 1, 2)) @ U - np.eye(3)).max()
    assert err <= 1e-12


def test_haar_first_and_second_moments():
    est = mc_average(lambda U: U, 2, N_MC, 1, vectorized=True)
    assert est.agrees(np.zeros((2, 2)))
    est = mc_average(lambda U: np.abs(U[:, 0, 0]) ** 2, 2, N_MC, 2, vectorized=True)
    assert est.agrees(0.5)


def test_translation_invariance(rng):
    A = sample_haar(2, rng)
    a = mc_average(lambda U: A @ U, 2, N_MC, 3, vectorized=True)
    assert a.agrees(np.zeros((2, 2)))
    b = mc_average(lambda U: np.abs(A @ U) ** 2, 2, N_MC, 4, vectorized=True)
    c = mc_average(lambda U: np.abs(U) ** 2, 2, N_MC, 5, vectorized=True)
    assert combined_z(b, c) <= 4


def test_constant_and_conjugation(rng):
    K = np.array([[1.0, 2j], [0.5, -1]])
    est = mc_average(lambda U: np.broadcast_to(K, U.shape), 2, 500, 0, vectorized=True)
    np.testing.assert_allclose(est.mean, K)
    assert np.all(est.stderr == 0)
    X = np.array([[2.0, 1.0], [1.0, -0.5]])
    est = mc_average(lambda U: U @ X @ np.conj(np.swapaxes(U, 1, 2)), 2, N_MC, 6,
                     vectorized=True)
    assert est.agrees(np.trace(X) / 2 * np.eye(2))


def test_determinism_across_workers():
    f = lambda U: U @ U  # noqa: E731
    a = mc_average(f, 2, 5000, 11, vectorized=True, workers=1)
    b = mc_average(f, 2, 5000, 11, vectorized=True, workers=4)
    c = mc_average(lambda u: u @ u, 2, 5000, 11, workers=3)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.stderr_re, b.stderr_re)
    np.testing.assert_allclose(a.mean, c.mean, rtol=0, atol=1e-15)


def test_too_few_samples_and_singular():
    with pytest.raises(ValidationError):
        mc_average(lambda U: U, 1, 50, 0, vectorized=True)
    with pytest.raises(TooManySingular):
        mc_average(lambda U: np.full(U.shape, np.nan), 1, 200, 0, vectorized=True)


def test_hua_formula():
    lhs, rhs = hua_cauchy_check(lambda U: np.ones(U.shape[0]), 0.3, N_MC, 7, vectorized=True)
    assert rhs.agrees(1.0)
    lhs, rhs = hua_cauchy_check(lambda U: U[:, 0, 0], 0.3, N_MC, 8, vectorized=True)
    assert np.isclose(lhs, 0.3) and rhs.agrees(0.3)
    _, rhs = hua_cauchy_check(lambda U: U[:, 0, 0] ** 2, 0.0, N_MC, 9, vectorized=True)
    assert rhs.agrees(0.0)


def test_hua_matrix_monomial(rng):
    Z = 0.3 * sample_haar(2, rng)
    lhs, rhs = hua_cauchy_check(lambda U: U @ U, Z, N_MC, 10, vectorized=True)
    assert rhs.agrees(lhs)


def test_hua_rejects_boundary_point():
    with pytest.raises(ValidationError):
        hua_cauchy_check(lambda U: U, 1.0, 200, 0)


def test_reflection_identities():
    plus, minus = reflection_check(lambda X: X[:, 0, 0], 1, N_MC, 12, vectorized=True)
    assert plus.agrees(0.0) and minus.agrees(0.0)
    f = lambda X: 1 / (1 + X[:, 0, 0] ** 2)  # noqa: E731
    plus, minus = reflection_check(f, 1, N_MC, 13, vectorized=True)
    assert plus.agrees(0.5) and minus.agrees(0.5) and combined_z(plus, minus) <= 4


def test_lorentz_normal_form(rng):
    t = positive_lorentz_from_normal_form(1, 1, 0.0)
    np.testing.assert_allclose(t.M, np.eye(2))
    eta = 0.8
    t = positive_lorentz_from_normal_form(1, 1, eta)
    np.testing.assert_allclose(np.linalg.eigvalsh(t.M), [np.exp(-eta), np.exp(eta)])
    t = positive_lorentz_from_normal_form(sample_haar(3, rng), sample_haar(3, rng), [0.1, 1, 2])
    assert t.signature_residual() <= 1e-12
    assert np.linalg.eigvalsh(t.M).min() > 0
    with pytest.raises(ValidationError):
        positive_lorentz_from_normal_form(1, 1, -1.0)


@pytest.mark.parametrize("eta", [0.0, 0.5, 2.0])
def test_radav_quadrature_constant(eta):
    t = positive_lorentz_from_normal_form(np.exp(0.4j), np.exp(-1.1j), eta)
    val = radav_integral(t, np.exp(0.3j), method="quadrature")
    assert abs(val[0, 0] - C_RADAV) <= 1e-10


def test_radav_mc_invariance(rng):
    t = positive_lorentz_from_normal_form(sample_haar(2, rng), sample_haar(2, rng), [0.4, 1.3])
    for k in range(2):
        est = radav_integral(t, sample_haar(2, rng), n_samples=N_MC, seed=20 + k)
        assert est.agrees(C_RADAV * np.eye(2))
