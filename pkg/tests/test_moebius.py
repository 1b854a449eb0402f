import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bjspec.errors import MoebiusSingular, ValidationError
from bjspec.haar import sample_haar
from bjspec.model import random_hermitian
from bjspec.moebius import (boundary_to_unitaries, cayley, disc_half_maps, mobius, mobius_inverse,
                            plane_to_unitary, to_disc, to_half_plane, unitary_to_left_boundary,
                            unitary_to_plane, unitary_to_right_boundary)
from bjspec.symplectic import symplectic_form


def _upper(L, rng):
    X = random_hermitian(L, rng)
    Y = random_hermitian(L, rng)
    return X + 1j * (Y @ Y + 0.5 * np.eye(L))


def _real_symplectic(L, rng):
    S = random_hermitian(2 * L, rng).real
    J = symplectic_form(L).real
    from scipy.linalg import expm
    return expm(J @ (S + S.T) / 4)


def test_basic_actions(rng):
    Z = _upper(2, rng)
    np.testing.assert_allclose(mobius(np.eye(4), Z), Z)
    np.testing.assert_allclose(mobius(symplectic_form(2), Z), -np.linalg.inv(Z), atol=1e-12)
    b = random_hermitian(2, rng)
    t = np.block([[np.eye(2), b], [np.zeros((2, 2)), np.eye(2)]])
    np.testing.assert_allclose(mobius(t, Z), Z + b, atol=1e-12)


def test_inverse_action(rng):
    W = _upper(2, rng)
    np.testing.assert_allclose(mobius_inverse(W, np.eye(4)), W)
    t = _real_symplectic(2, rng)
    Z = _upper(2, rng)
    np.testing.assert_allclose(mobius_inverse(mobius(t, Z), t), Z, atol=1e-10)
    J = symplectic_form(2)
    np.testing.assert_allclose(mobius(J, mobius_inverse(W, J)), W, atol=1e-10)


def test_left_action_law(rng):
    t1, t2 = _real_symplectic(2, rng), _real_symplectic(2, rng)
    Z = _upper(2, rng)
    np.testing.assert_allclose(mobius(t1 @ t2, Z), mobius(t1, mobius(t2, Z)), atol=1e-10)


def test_singular_action():
    with pytest.raises(MoebiusSingular):
        mobius(symplectic_form(1), np.zeros((1, 1)))


def test_disc_maps():
    I = np.eye(2)
    np.testing.assert_allclose(to_disc(1j * I), 0 * I, atol=1e-15)
    np.testing.assert_allclose(to_half_plane(0 * I), 1j * I)
    np.testing.assert_allclose(disc_half_maps(0 * I, "to_disc"), -I)
    np.testing.assert_allclose(to_disc(I), mobius(cayley(2), I), atol=1e-14)
    with pytest.raises(ValidationError):
        disc_half_maps(I, "sideways")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), L=st.integers(1, 3))
def test_disc_round_trip(seed, L):
    Z = _upper(L, np.random.default_rng(seed))
    U = to_disc(Z)
    assert np.linalg.norm(U, 2) < 1
    np.testing.assert_allclose(to_half_plane(U), Z, atol=1e-9)


def test_plane_to_unitary_examples():
    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    np.testing.assert_allclose(plane_to_unitary(np.vstack([one, zero])), [[1]])
    np.testing.assert_allclose(plane_to_unitary(np.vstack([zero, one])), [[-1]])
    np.testing.assert_allclose(plane_to_unitary(np.vstack([one, one])), [[-1j]])


def test_plane_round_trip(rng):
    U = sample_haar(3, rng)
    np.testing.assert_allclose(plane_to_unitary(unitary_to_plane(U)), U, atol=1e-12)


def test_boundary_unitaries():
    L = 2
    b = boundary_to_unitaries(np.zeros((L, L)), np.zeros((L, L)))
    np.testing.assert_allclose(b.Uhat, np.eye(L), atol=1e-14)
    np.testing.assert_allclose(b.U, -np.eye(L), atol=1e-14)
    theta = 0.9
    Z = np.array([[1 / np.tan(theta / 2)]])
    # C.(-Z) = (Z + i)/(Z - i) = exp(i theta) for Z = cot(theta/2)
    U = boundary_to_unitaries(np.zeros((1, 1)), Z).U
    np.testing.assert_allclose(U, [[np.exp(1j * theta)]], atol=1e-12)


def test_boundary_inverses(rng):
    Zh, Z = random_hermitian(2, rng), random_hermitian(2, rng)
    b = boundary_to_unitaries(Zh, Z)
    np.testing.assert_allclose(unitary_to_left_boundary(b.Uhat), Zh, atol=1e-10)
    np.testing.assert_allclose(unitary_to_right_boundary(b.U), Z, atol=1e-10)


def test_haar_pullback_is_cauchy():
    # C^*.U for Haar U(1) is standard Cauchy: P(|x| < 1) = 1/2
    rng = np.random.default_rng(5)
    theta = rng.uniform(0, 2 * np.pi, 4000)
    x = np.array([to_half_plane(np.array([[np.exp(1j * t)]]))[0, 0].real for t in theta])
    frac = np.mean(np.abs(x) < 1)
    assert abs(frac - 0.5) < 4 * np.sqrt(0.25 / x.size)
