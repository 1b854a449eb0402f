import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bjspec.errors import ValidationError
from bjspec.green import green_corner, green_corner_frame, limit_green
from bjspec.model import (BoundaryPair, SemiInfiniteModel, free_model, random_hermitian,
                          random_model, resolvent_corner_oracle, validate_model)
from bjspec.symplectic import right_boundary_frame

Z0 = np.zeros((1, 1))


def test_single_site_values():
    z = 0.4 + 0.9j
    np.testing.assert_allclose(green_corner(free_model(1, 1), Z0, Z0, z).value, [[-1 / z]])
    v, a, b = 0.3, -0.5, 1.2
    m = validate_model([[[v]]], np.zeros((0, 1, 1)))
    G = green_corner(m, np.array([[a]]), np.array([[b]]), z).value
    np.testing.assert_allclose(G, [[1 / (v - a - b - z)]])


def test_matches_direct_solve(rng):
    m = random_model(2, 5, rng)
    bc = BoundaryPair(random_hermitian(2, rng), random_hermitian(2, rng))
    z = 0.3 + 0.7j
    G = green_corner(m, bc.Zhat, bc.Z, z).value
    np.testing.assert_allclose(G, resolvent_corner_oracle(m, bc, z), rtol=1e-10, atol=1e-12)


def test_real_energy_rejected():
    with pytest.raises(ValidationError):
        green_corner(free_model(1, 1), Z0, Z0, 0.5)


def test_frame_form(rng):
    m = random_model(2, 4, rng)
    Zh, Z = random_hermitian(2, rng), random_hermitian(2, rng)
    z = -0.2 + 0.5j
    G = green_corner(m, Zh, Z, z).value
    frame = right_boundary_frame(Z)
    np.testing.assert_allclose(green_corner_frame(m, Zh, frame, z).value, G, atol=1e-10)
    c = np.array([[2.0, 1j], [0.0, 0.5]])
    np.testing.assert_allclose(green_corner_frame(m, Zh, frame @ c, z).value, G, atol=1e-10)


def test_frame_with_singular_lower_block():
    G = green_corner_frame(free_model(1, 1), Z0, np.array([[1.0], [0.0]]), 0.3j).value
    np.testing.assert_allclose(G, [[0.0]], atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), re=st.floats(-3, 3), im=st.floats(0.05, 3))
def test_herglotz(seed, re, im):
    rng = np.random.default_rng(seed)
    m = random_model(2, 3, rng)
    Y = random_hermitian(2, rng)
    Z = random_hermitian(2, rng) + 1j * (Y @ Y)
    assert green_corner(m, np.zeros((2, 2)), Z, re + 1j * im).herglotz_margin() >= -1e-10


def test_limit_green_free_half_line():
    semi = SemiInfiniteModel.free(1)
    z = 0.5j
    r = np.sqrt(z * z - 4 + 0j)
    m = [(-z + s) / 2 for s in (r, -r)]
    exact = m[0] if m[0].imag > 0 else m[1]
    G, N = limit_green(semi, z)
    assert abs(G.value[0, 0] - exact) < 1e-8
    G, _ = limit_green(semi, 0.01j, tol=1e-3)
    assert abs(G.value[0, 0] - 1j) < 2e-2


def test_limit_green_requires_limit_point():
    semi = SemiInfiniteModel.periodic([np.zeros((1, 1))], limit_point=False)
    with pytest.raises(ValidationError):
        limit_green(semi, 1j)
