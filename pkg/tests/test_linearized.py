import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlss.errors import ConfigurationError
from nlss.grid import inner, make_grid
from nlss.groundstate import build_Q_vector, cached_ground_state
from nlss.linearized import (assemble, constrained_perturbations, h1_norm_sq, orthogonality_directions,
                             positivity_gap, rayleigh_quotient, spectrum_report, translation_modes)
from nlss.oracles import radial_negative_eigenvalue_extrapolated


def smooth_real(rng, gs, N):
    g = gs.grid
    X1, X2 = g.mesh
    out = np.zeros((N, g.n, g.n))
    for j in range(N):
        c = rng.uniform(-3, 3, 2)
        out[j] = rng.standard_normal() * np.exp(-((X1 - c[0]) ** 2 + (X2 - c[1]) ** 2) / 2)
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["Lplus", "Lminus", "L0plus", "L0minus"]), st.integers(1, 3))
def test_operators_are_symmetric(seed, kind, N):
    gs = cached_ground_state(16.0, 128)
    op = assemble(kind, N, gs, gs.grid)
    rng = np.random.default_rng(seed)
    v, w = smooth_real(rng, gs, op.ncomp), smooth_real(rng, gs, op.ncomp)
    a, b = op.quadratic_form(v, w), op.quadratic_form(w, v)
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_kernel_directions(gs256, N):
    # at dx = 0.25 the translation modes leave a 4e-3 relative residual; dx = 0.125 resolves them
    Q = build_Q_vector(gs256, N)
    Lm = assemble("Lminus", N, gs256, gs256.grid)
    Lp = assemble("Lplus", N, gs256, gs256.grid)
    assert np.max(np.abs(Lm.apply(Q.data.real))) < 1e-9
    for t in translation_modes(gs256, N):
        assert np.max(np.abs(Lp.apply(t))) < 1e-6


@pytest.mark.parametrize("N", [1, 2, 4])
def test_lplus_on_ground_state(gs128, N):
    # L+ Q = -2 (2N - 1) Q^3 follows from the elliptic equation
    Q = build_Q_vector(gs128, N).data.real
    Lp = assemble("Lplus", N, gs128, gs128.grid)
    assert np.max(np.abs(Lp.apply(Q) + 2 * (2 * N - 1) * Q**3)) < 1e-9


def test_assemble_validates(gs128):
    with pytest.raises(ConfigurationError):
        assemble("Lzero", 1, gs128, gs128.grid)
    with pytest.raises(ConfigurationError):
        assemble("Lplus", 1, gs128, make_grid(16.0, 64))
    with pytest.raises(ConfigurationError):
        assemble("Lplus", 0, gs128, gs128.grid)


def test_scalar_spectrum(gs128, chi128):
    rep = spectrum_report(assemble("L0plus", 1, gs128, gs128.grid), n_eigs=4)
    assert rep.counts == (1, 2)
    ref = radial_negative_eigenvalue_extrapolated()
    assert abs(rep.lambda0 - ref) / abs(ref) < 1e-4
    assert np.all(chi128 > -1e-6 * chi128.max())
    assert abs(gs128.grid.integrate(chi128**2) - 1.0) < 1e-10


def test_vector_spectrum_n2(gs128):
    rep = spectrum_report(assemble("Lplus", 2, gs128, gs128.grid), n_eigs=6)
    assert rep.counts == (1, 2)
    t1, t2 = translation_modes(gs128, 2)
    g = gs128.grid
    span = np.stack([t.ravel() for t in (t1, t2)], axis=1)
    qb, _ = np.linalg.qr(span)
    for _, v in rep.near_kernel:
        x = v.data.real.ravel()
        x = x / np.linalg.norm(x)
        assert np.linalg.norm(qb.T @ x) > 0.999
    lm = spectrum_report(assemble("Lminus", 2, gs128, g), n_eigs=4)
    assert lm.counts[0] == 0 and lm.counts[1] == 2


def test_positivity_gap_positive(gs128, chi128):
    gap = positivity_gap(assemble("Lplus", 2, gs128, gs128.grid), gs128, chi128)
    assert gap > 0


def test_rayleigh_quotient_of_constant_mode(gs128):
    op = assemble("L0minus", 1, gs128, gs128.grid)
    Q = gs128.profile[None]
    assert abs(rayleigh_quotient(op, Q)) < 1e-9


def test_constrained_perturbations_meet_conditions(gs128, chi128, rng):
    N = 2
    g = gs128.grid
    raw = [1e-2 * (smooth_real(rng, gs128, N) + 1j * smooth_real(rng, gs128, N)) for _ in range(5)]
    Q = build_Q_vector(gs128, N).data
    for eps in constrained_perturbations(gs128, N, chi128, raw):
        assert eps is not None
        for d in orthogonality_directions(gs128, N, chi128):
            assert abs(inner(eps, d, g)) < 1e-10
        assert abs(inner(Q + eps, Q + eps, g) - inner(Q, Q, g)) < 1e-10


def test_h1_norm_of_gaussian():
    g = make_grid(8.0, 64)
    f = np.exp(-0.5 * g.r2)[None]
    # ||f||^2 = pi, ||grad f||^2 = pi
    assert abs(h1_norm_sq(f, g) - 2 * np.pi) < 1e-10
