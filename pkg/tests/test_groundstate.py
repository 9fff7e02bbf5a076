import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlss.errors import DomainError
from nlss.functionals import mass
from nlss.grid import make_grid
from nlss.groundstate import (RadialTable, build_Q_vector, cached_ground_state, elliptic_residual, gnweak_maximizer,
                              load_ground_state, minimizing_index_set, radial_profile, save_ground_state,
                              solve_ground_state, vector_residual)
from nlss.oracles import shooting_ground_state


def test_certification_numbers(gs128, gs256):
    assert gs128.residual_inf <= 1e-10
    assert np.all(gs128.profile > 0)
    # the Pohozaev identities carry the discretization error, which dx = 0.25 leaves near 1e-7
    assert max(gs128.pohozaev_defects) < 1e-6
    assert max(gs256.pohozaev_defects) < 1e-8


def test_mass_matches_shooting(gs128):
    ref = shooting_ground_state().mass_sq
    assert abs(gs128.mass_sq - ref) / ref < 1e-6


def test_peak_at_origin(gs256):
    c = gs256.grid.n // 2
    ref = shooting_ground_state().amplitude
    assert abs(gs256.profile[c, c] - ref) < 1e-9


def test_radially_symmetric(gs128):
    Q = gs128.profile
    assert np.max(np.abs(Q - Q.T)) < 1e-12
    # reflection x -> -x maps index i to n - i (index 0 is the box edge, where Q is negligible)
    assert np.max(np.abs(Q[1:, :] - Q[1:, :][::-1])) < 1e-12


def test_rejects_bad_tol():
    with pytest.raises(DomainError):
        solve_ground_state(make_grid(16.0, 64), tol=1.0)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_vector_ground_state(gs128, N):
    Q = build_Q_vector(gs128, N)
    assert Q.ncomp == N
    assert vector_residual(Q) < 1e-9
    assert abs(mass(Q) - N * gs128.mass_sq / (2 * N - 1)) < 1e-10


def test_vector_rejects_zero_components(gs128):
    with pytest.raises(DomainError):
        build_Q_vector(gs128, 0)


@pytest.mark.parametrize("M,expected", [(1, [0]), (2, [0, 1]), (3, [-1, 0, 1]), (4, [-1, 0, 1, 2])])
def test_minimizing_index_set(M, expected):
    assert minimizing_index_set(M) == expected


def test_gnweak_layout(gs128):
    u = gnweak_maximizer(gs128, 3, Jmax=3)
    assert u.ncomp == 7
    nonzero = [j for j, c in zip(u.indices, u.data) if np.any(c != 0)]
    assert nonzero == [-1, 0, 1]
    with pytest.raises(DomainError):
        gnweak_maximizer(gs128, 5, Jmax=1)


def test_radial_table_reproduces_grid(gs256):
    tab = radial_profile(gs256)
    g = gs256.grid
    r = np.sqrt(g.r2)
    inside = r < 0.75 * g.L
    assert np.max(np.abs(tab(r[inside]) - gs256.profile[inside])) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 11.0))
def test_radial_table_matches_shooting(r):
    tab = radial_profile(cached_ground_state(16.0, 256))
    assert abs(tab(np.array([r]))[0] - shooting_ground_state()(r)[0]) < 1e-8


def test_radial_table_derivatives_of_gaussian():
    g = make_grid(8.0, 64)
    tab = RadialTable(np.exp(-g.r2), g)
    r = np.linspace(0, 5, 41)
    q, q1, q2 = tab.evaluate(r)
    e = np.exp(-r * r)
    assert np.max(np.abs(q - e)) < 1e-9
    assert np.max(np.abs(q1 + 2 * r * e)) < 1e-8
    assert np.max(np.abs(q2 - (4 * r * r - 2) * e)) < 1e-7
    assert np.all(tab.evaluate(np.array([9.0, 20.0]))[0] == 0.0)


def test_tail_continues_decay(gs128):
    tab = radial_profile(gs128)
    far = tab(np.array([12.0, 20.0, 30.0]))
    assert np.all(np.diff(far) < 0) and np.all(far > 0)


def test_elliptic_residual_of_vector_component(gs128):
    Q = build_Q_vector(gs128, 3).data[0].real
    assert np.max(np.abs(elliptic_residual(Q, gs128.grid, coupling=5))) < 1e-9


def test_save_and_load(gs128, tmp_path):
    save_ground_state(gs128, tmp_path / "gs")
    back = load_ground_state(tmp_path / "gs")
    assert np.array_equal(back.profile, gs128.profile)
    assert back.mass_sq == gs128.mass_sq
    assert back.grid.same_as(gs128.grid)
