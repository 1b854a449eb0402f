import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bjspec.errors import EndpointOnSpectrum, ValidationError
from bjspec.model import assemble_dense, free_model, random_model, validate_model
from bjspec.oscillation import (PhasePath, count_eigenvalues_by_winding, crossing_energies,
                                energy_unitaries, eigenvalue_count_certificate,
                                phase_unitary_path, winding_of_path)
from bjspec.symplectic import dirichlet_frame, intersection_dimension, propagate_plane

ONE = free_model(1, 1)


def test_single_site_unitary():
    U = energy_unitaries(ONE)
    E = np.array([0.0, 0.7])
    np.testing.assert_allclose(U(E)[:, 0, 0], (E - 1j) / (E + 1j), atol=1e-14)


def test_velocities_positive_and_phases_monotone(rng):
    m = random_model(2, 4, rng)
    path = phase_unitary_path(m, E0=-5, E1=5)
    assert np.all(path.velocity_min_eigenvalues() > 0)
    assert np.all(path.increments > 0)
    np.testing.assert_allclose(path.velocities, np.conj(np.swapaxes(path.velocities, 1, 2)),
                               atol=1e-10)


def test_small_counts():
    assert count_eigenvalues_by_winding(ONE, E0=-0.5, E1=0.5) == 1
    two = free_model(1, 2)
    assert count_eigenvalues_by_winding(two, E0=-2, E1=0) == 1
    assert count_eigenvalues_by_winding(two, E0=-2, E1=2) == 2
    with pytest.raises(EndpointOnSpectrum):
        count_eigenvalues_by_winding(two, E0=-1, E1=0.5)
    with pytest.raises(ValidationError):
        count_eigenvalues_by_winding(two, E0=1, E1=0)


@settings(max_examples=30, deadline=None)
@given(L=st.integers(1, 3), N=st.integers(1, 8), seed=st.integers(0, 2**31),
       E0=st.floats(-4, 0), width=st.floats(0.1, 6))
def test_counts_match_oracle(L, N, seed, E0, width):
    m = random_model(L, N, np.random.default_rng(seed))
    E1 = E0 + width
    ev = np.linalg.eigvalsh(assemble_dense(m))
    if np.min(np.abs(ev - E0)) < 1e-6 or np.min(np.abs(ev - E1)) < 1e-6:
        return
    expected = int(np.sum((ev > E0) & (ev < E1)))
    assert count_eigenvalues_by_winding(m, E0=E0, E1=E1) == expected
    assert eigenvalue_count_certificate(m, np.zeros((L, L)), E0, E1) == expected


def test_degenerate_multiplicity():
    m = validate_model(np.zeros((2, 2, 2)), [np.eye(2)])
    assert count_eigenvalues_by_winding(m, E0=0.5, E1=1.5) == 2


def test_crossing_multiplicity_matches_intersection(rng):
    m = random_model(2, 3, rng)
    for E, mult in crossing_energies(m, E0=-3, E1=3):
        Phi = propagate_plane(m, E, dirichlet_frame(2), renormalize=True)
        assert intersection_dimension(Phi, dirichlet_frame(2, "right"), rank_tol=1e-6) == mult


def test_winding_properties():
    grid = np.linspace(0, 1, 5)
    const = PhasePath(grid, np.ones((5, 1, 1)), np.full((5, 1), 0.3))
    assert winding_of_path(const) == 0
    path = phase_unitary_path(ONE, E0=-1e4, E1=1e4, velocity=False)
    assert abs(winding_of_path(path) - 1) < 1e-3
    rev = PhasePath(path.grid[::-1], path.unitaries[::-1], path.phases[::-1])
    assert winding_of_path(rev) == -winding_of_path(path)
