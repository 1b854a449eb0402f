import numpy as np
import pytest

from bjspec.averaging import (BOUNDARY_EPS, C_MEASURE, LEDGER, adaptive_simpson,
                              averaged_density, averaged_green, averaged_green_forms,
                              averaged_green_mc, averaged_interval_measure,
                              boundary_value_extrapolation, carmona_limit_measure,
                              double_average_density, interval_measure_oracle)
from bjspec.errors import NoConvergence, QuadratureNotConverged, ValidationError
from bjspec.model import SemiInfiniteModel, free_model, random_hermitian, random_model
from bjspec.moebius import boundary_to_unitaries

ONE = free_model(1, 1)


def test_ledger_constants():
    assert LEDGER.c_radav == 0.5 and C_MEASURE == 1 / np.pi
    d = LEDGER.to_dict()
    assert set(d["provenance"]) == {"c_radav", "c_measure"}


def test_exact_single_site():
    for z in (0.3 + 0.4j, -2 + 1j, 5j):
        assert abs(averaged_green(ONE, z)[0, 0] + 1 / (z + 1j)) <= 1e-12
    for E in (-3.0, 0.0, 0.7):
        assert abs(averaged_density(ONE, E).density[0, 0] - 1 / (1 + E * E)) <= 1e-12
    m = averaged_interval_measure(ONE, -1, 1)
    assert abs(m.mass[0, 0] - 0.5) <= 1e-8


def test_two_site_free_density():
    assert np.isclose(averaged_density(free_model(1, 2), 0.0).density[0, 0], 1.0)


def test_closed_forms_agree(rng):
    for _ in range(20):
        L = int(rng.integers(1, 4))
        m = random_model(L, int(rng.integers(1, 7)), rng)
        z = rng.uniform(-2, 2) + 1j * rng.uniform(0.1, 1.5)
        G1, G2 = averaged_green_forms(m, z, Zhat=random_hermitian(L, rng))
        assert np.linalg.norm(G1 - G2) <= 1e-9 * np.linalg.norm(G1)


def test_left_boundary_routes_agree(rng):
    m = random_model(2, 3, rng)
    Zh = random_hermitian(2, rng)
    Uhat = boundary_to_unitaries(Zh, np.zeros((2, 2))).Uhat
    np.testing.assert_allclose(averaged_green(m, 0.2 + 0.5j, Zhat=Zh),
                               averaged_green(m, 0.2 + 0.5j, Uhat=Uhat), atol=1e-10)
    np.testing.assert_allclose(averaged_density(m, 0.1, Uhat=np.eye(2)).density,
                               averaged_density(m, 0.1).density, atol=1e-12)


def test_density_is_hermitian_pd(model23):
    d = averaged_density(model23, 0.4).density
    np.testing.assert_allclose(d, d.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(d).min() > 0


def test_boundary_value(model23):
    for E in np.linspace(-2.5, 2.5, 5):
        ext = boundary_value_extrapolation(model23, E)
        np.testing.assert_allclose(ext, averaged_density(model23, E).density, atol=1e-5)
    assert 1e-3 in BOUNDARY_EPS and any(np.isclose(e, 1e-4) for e in BOUNDARY_EPS)
    with pytest.raises(ValidationError):
        boundary_value_extrapolation(model23, 0.0, eps=(1e-3,))


def test_green_mc_matches_closed_form(rng):
    m = random_model(2, 5, rng)
    z = 0.4 + 0.6j
    assert averaged_green_mc(m, z, 20000, 3).agrees(averaged_green(m, z))


def test_interval_measure_vs_oracle(rng):
    m = random_model(2, 4, rng)
    mass = averaged_interval_measure(m, -1, 1).mass
    assert interval_measure_oracle(m, -1, 1, n_samples=20000, seed=4).agrees(mass)
    assert interval_measure_oracle(ONE, -1, 1, n_samples=20000, seed=5).agrees(0.5)


def test_interval_measure_normalization_and_monotonicity(model23):
    R = 50.0
    tot = averaged_interval_measure(ONE, -R, R, tol=1e-8).mass[0, 0]
    assert abs(tot - 1) <= 2e-2
    small = averaged_interval_measure(model23, -0.5, 0.5).mass
    big = averaged_interval_measure(model23, -1.0, 1.5).mass
    assert np.linalg.eigvalsh(small).min() >= -1e-10
    assert np.linalg.eigvalsh(big - small).min() >= -1e-10


def test_interval_measure_rejects_empty_interval():
    with pytest.raises(ValidationError):
        averaged_interval_measure(ONE, 1, 1)


def test_adaptive_simpson():
    val, err = adaptive_simpson(lambda x: np.exp(x)[:, None], 0, 1, 1e-12)
    assert abs(val[0] - (np.e - 1)) < 1e-11 and err < 1e-11
    with pytest.raises(QuadratureNotConverged):
        adaptive_simpson(lambda x: (np.sign(x - 1 / 3) / np.abs(x - 1 / 3) ** 0.9)[:, None],
                         0, 1, 1e-14, max_intervals=256)


def test_carmona_free_half_line():
    semi = SemiInfiniteModel.free(1)
    band = carmona_limit_measure(semi, -2, 2, N_start=64)
    assert abs(band.mass[0, 0] - 1) <= 2e-2 and band.N <= 512
    outside = carmona_limit_measure(semi, 3, 4, N_start=64)
    assert abs(outside.mass[0, 0]) <= 1e-3


def test_carmona_limit_point_and_budget():
    semi = SemiInfiniteModel.periodic([np.zeros((1, 1))], limit_point=False)
    with pytest.raises(ValidationError):
        carmona_limit_measure(semi, -1, 1)
    with pytest.raises(NoConvergence):
        carmona_limit_measure(SemiInfiniteModel.free(1), -2, 2, tol=1e-9, N_max=16)


def test_double_average_identity(rng):
    assert double_average_density(ONE, 0.3, 20000, 1).agrees(1.0)
    m = random_model(2, 3, rng)
    assert double_average_density(m, 0.0, 20000, 2).agrees(np.eye(2))
