import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlss.functionals import mass
from nlss.grid import FieldVec, make_grid, spectral_tail_fraction
from nlss.groundstate import build_Q_vector
from nlss.sampling import (GROUP_RANGES, gaussian_mixture_batch, near_ground_state_batch, random_group_params,
                           smooth_noise)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_mixtures_are_resolved_and_inside(seed, N):
    g = make_grid(16.0, 128)
    data = gaussian_mixture_batch(np.random.default_rng(seed), g, N, 3)
    assert data.shape == (3, N, 128, 128)
    for d in data:
        u = FieldVec.finite(g, d)
        edge = np.sum(np.abs(d[:, [0, -1], :]) ** 2) + np.sum(np.abs(d[:, :, [0, -1]]) ** 2)
        assert edge < 1e-6 * np.sum(np.abs(d) ** 2)
        assert spectral_tail_fraction(u) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-6, 1.0))
def test_noise_norm(seed, amp):
    g = make_grid(16.0, 64)
    w = smooth_noise(np.random.default_rng(seed), g, 2, amp)
    assert np.sqrt(mass(FieldVec.finite(g, w))) == pytest.approx(amp, rel=1e-12)


def test_noise_is_grid_independent():
    a = smooth_noise(np.random.default_rng(4), make_grid(16.0, 64), 1, 1.0)
    b = smooth_noise(np.random.default_rng(4), make_grid(16.0, 128), 1, 1.0)
    # every second point of the finer grid is a point of the coarser one
    assert np.max(np.abs(a - b[:, ::2, ::2])) < 1e-14


def test_noise_needs_enough_points():
    with pytest.raises(ValueError):
        smooth_noise(np.random.default_rng(0), make_grid(16.0, 16), 1, 1.0)


def test_near_ground_state_sizes(gs128):
    Q = build_Q_vector(gs128, 2)
    batch = near_ground_state_batch(np.random.default_rng(1), Q, 20, amps=(1e-3, 1e-2))
    sizes = [np.sqrt(mass(FieldVec.finite(Q.grid, b - Q.data))) for b in batch]
    assert 1e-3 * (1 - 1e-9) <= min(sizes) and max(sizes) <= 1e-2 * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_group_params_in_range(seed, N):
    p = random_group_params(np.random.default_rng(seed), N)
    assert p.shape == (N + 5,)
    assert abs(np.log(p[0])) <= GROUP_RANGES["log_lam"]
    assert np.all(np.abs(p[1:N + 1]) <= GROUP_RANGES["phase"])
    assert np.all(np.abs(p[N + 1:N + 3]) <= GROUP_RANGES["shift"])
    assert np.all(np.abs(p[N + 3:]) <= GROUP_RANGES["boost"])

