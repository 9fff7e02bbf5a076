import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlss.errors import ConfigurationError
from nlss.grid import (FieldVec, evaluate_affine, fft2, gradient, inner, kinetic_sq, laplacian, lp_multiplier,
                       lp_project, make_grid, shift_field, spectral_tail_fraction)

GRID = make_grid(8.0, 32)


def trig_poly(grid, modes, rng):
    """Random real-coefficient trigonometric polynomial with |mode| <= modes per axis."""
    X1, X2 = grid.mesh
    out = np.zeros_like(X1, dtype=complex)
    for m1 in range(-modes, modes + 1):
        for m2 in range(-modes, modes + 1):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            out += c * np.exp(1j * np.pi / grid.L * (m1 * X1 + m2 * X2))
    return out


@pytest.mark.parametrize("n", [15, 24, 0, 8])
def test_rejects_bad_sizes(n):
    with pytest.raises(ConfigurationError):
        make_grid(8.0, n)


def test_rejects_bad_box():
    with pytest.raises(ConfigurationError):
        make_grid(-1.0, 32)


def test_origin_is_sampled():
    g = make_grid(8.0, 32)
    assert g.x[g.n // 2] == 0.0
    assert g.x[0] == -8.0


def test_fieldvec_shape_checks():
    with pytest.raises(ConfigurationError):
        FieldVec.finite(GRID, np.zeros((2, 16, 16)))
    with pytest.raises(ConfigurationError):
        FieldVec(GRID, np.zeros((2, 32, 32)), "resonant", -1)
    u = FieldVec.resonant(GRID, np.zeros((5, 32, 32)))
    assert u.Jmax == 2 and list(u.indices) == [-2, -1, 0, 1, 2]


def test_parseval():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
    lhs = GRID.dx**2 * np.sum(np.abs(f) ** 2)
    rhs = (GRID.dx / GRID.n) ** 2 * np.sum(np.abs(fft2(f)) ** 2)
    assert abs(lhs - rhs) < 1e-12 * lhs


def test_derivatives_exact_on_modes():
    X1, X2 = GRID.mesh
    k = np.pi / GRID.L * np.array([3.0, -2.0])
    f = FieldVec.finite(GRID, np.exp(1j * (k[0] * X1 + k[1] * X2)))
    d1, d2 = gradient(f)
    assert np.max(np.abs(d1.data - 1j * k[0] * f.data)) < 1e-12
    assert np.max(np.abs(d2.data - 1j * k[1] * f.data)) < 1e-12
    assert np.max(np.abs(laplacian(f).data + (k @ k) * f.data)) < 1e-11
    assert abs(kinetic_sq(f) - (k @ k) * f.norm() ** 2) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_translations_compose(a1, a2, b1, b2, seed):
    f = FieldVec.finite(GRID, trig_poly(GRID, 5, np.random.default_rng(seed)))
    two = shift_field(shift_field(f, (a1, a2)), (b1, b2))
    one = shift_field(f, (a1 + b1, a2 + b2))
    assert np.max(np.abs(two.data - one.data)) < 1e-9 * np.max(np.abs(f.data))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_translation_preserves_norm(seed):
    f = FieldVec.finite(GRID, trig_poly(GRID, 6, np.random.default_rng(seed)))
    g = shift_field(f, (0.37, -1.21))
    assert abs(g.norm() - f.norm()) < 1e-10 * f.norm()


def test_affine_identity():
    f = trig_poly(GRID, 4, np.random.default_rng(1))
    assert np.max(np.abs(evaluate_affine(f, 1.0, (0.0, 0.0), GRID) - f)) < 1e-11


def test_dilation_of_trig_poly():
    # f(x) = cos(k x1) dilated by 0.5 gives cos(k x1 / 2), itself a grid mode when k is even
    X1, _ = GRID.mesh
    k = 4 * np.pi / GRID.L
    f = np.cos(k * X1)
    g = evaluate_affine(f, 0.5, (0.0, 0.0), GRID)
    assert np.max(np.abs(g - np.cos(0.5 * k * X1))) < 1e-11


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 4))
def test_projector_partition(N):
    g = make_grid(16.0, 64)
    f = trig_poly(g, 8, np.random.default_rng(N + 10))
    lo = lp_project(f, N, "leq", g)
    hi = lp_project(f, N, "geq", g)
    assert np.max(np.abs(lo + hi - f)) < 1e-10 * np.max(np.abs(f))


def test_projector_limits():
    g = make_grid(16.0, 64)
    assert np.all(lp_multiplier(g, -1) == 0.0)
    assert np.all(lp_multiplier(g, 20) == 1.0)
    band = lp_multiplier(g, 2, "band")
    assert np.all(band >= -1e-15)


def test_tail_fraction():
    X1, X2 = GRID.mesh
    smooth = np.exp(-(X1**2 + X2**2) / 4)
    assert spectral_tail_fraction(smooth, GRID) < 1e-12
    rough = np.where((np.arange(32)[:, None] + np.arange(32)[None]) % 2 == 0, 1.0, -1.0)
    assert spectral_tail_fraction(rough, GRID) > 0.99


def test_inner_is_real_pairing():
    rng = np.random.default_rng(2)
    f = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
    assert abs(inner(f, 1j * f, GRID)) < 1e-12
    assert inner(f, f, GRID) > 0
