import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bjspec.errors import NonHermitianDiagonal, ShapeMismatch, SingularOffDiagonal, ValidationError
from bjspec.model import (BoundaryPair, CouplingFamily, assemble_dense, coupled_model, free_model,
                          random_model, resolvent_corner_oracle, spectral_measure_oracle,
                          validate_model)


def test_nonhermitian_diagonal_reports_site():
    with pytest.raises(NonHermitianDiagonal) as exc:
        validate_model([[[1j]], [[0.0]]], [[[1.0]]])
    assert exc.value.index == 1


def test_singular_offdiagonal_reports_site():
    with pytest.raises(SingularOffDiagonal) as exc:
        validate_model([[[0.0]], [[0.0]]], [[[0.0]]])
    assert exc.value.index == 2


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        validate_model(np.zeros((2, 1, 1)), np.zeros((2, 1, 1)))
    with pytest.raises(ShapeMismatch):
        validate_model(np.zeros((2, 2, 2)), np.zeros((1, 2, 2)), L=1)


def test_assemble_free_two_sites():
    H = assemble_dense(free_model(1, 2))
    np.testing.assert_allclose(H, [[0, 1], [1, 0]])


def test_assemble_boundary_corners():
    bc = BoundaryPair(np.array([[0.5]]), np.array([[-2.0]]))
    H = assemble_dense(free_model(1, 3), bc)
    assert H[0, 0] == -0.5 and H[2, 2] == 2.0


def test_boundary_outside_half_plane_rejected():
    with pytest.raises(ValidationError):
        BoundaryPair(np.array([[-1j]]), np.zeros((1, 1)))


def test_oracle_free_two_sites():
    mu = spectral_measure_oracle(free_model(1, 2))
    np.testing.assert_allclose(mu.energies, [-1, 1], atol=1e-14)
    np.testing.assert_allclose(mu.weights.ravel(), [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(mu.mass(-1, 1), [[0.5]], atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(1, 3), N=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_oracle_weights_sum_to_identity(L, N, seed):
    mu = spectral_measure_oracle(random_model(L, N, np.random.default_rng(seed)))
    np.testing.assert_allclose(mu.total(), np.eye(L), atol=1e-10)


def test_resolvent_single_site():
    m = free_model(1, 1)
    for z in (1j, 2 + 0.5j):
        np.testing.assert_allclose(resolvent_corner_oracle(m, None, z), [[-1 / z]])
    np.testing.assert_allclose(resolvent_corner_oracle(free_model(1, 2), None, 1j), [[0.5j]])


def test_resolvent_needs_upper_half_plane():
    with pytest.raises(ValidationError):
        resolvent_corner_oracle(free_model(1, 1), None, 1.0)


def test_stieltjes_matches_resolvent(model23):
    mu = spectral_measure_oracle(model23)
    z = 0.3 + 0.7j
    np.testing.assert_allclose(mu.stieltjes(z), resolvent_corner_oracle(model23, None, z),
                               atol=1e-12)


def test_coupled_model_and_monotonicity(rng):
    base = random_model(2, 4, rng)
    w = np.array([[2.0, 0.5], [0.5, 1.0]])
    fam = CouplingFamily(base, np.array([w, w]), (0.0, 1.0))
    np.testing.assert_allclose(coupled_model(fam, 3.0).V[0], base.V[0] + 3 * w)
    np.testing.assert_allclose(coupled_model(fam, 3.0).V[2], base.V[2])
    e0 = np.linalg.eigvalsh(assemble_dense(coupled_model(fam, 0.0)))
    e1 = np.linalg.eigvalsh(assemble_dense(coupled_model(fam, 0.7)))
    assert np.all(e1 >= e0 - 1e-12)


def test_family_rejects_indefinite_w():
    with pytest.raises(ValidationError):
        CouplingFamily(free_model(1, 2), np.array([[[-1.0]]]), (0, 1))
