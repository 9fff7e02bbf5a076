"""Independent reference computations used to pin expected values.

None of these routines share code with the two-dimensional solvers: the ground
state comes from radial shooting, the negative eigenvalue from a dense
finite-difference eigensolve of the radial operator, and the index-set
constants from exhaustive search.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh
from scipy.special import k0, k1

_R0 = 1e-6


def _radial_rhs(r, y):
    q, p = y[0], y[1]
    return [p, -p / r + q - q**3]


def _series_start(a):
    # Q(r) = a + c r^2 + O(r^4) with c = (a - a^3)/4
    c = (a - a**3) / 4.0
    return [a + c * _R0**2, 2.0 * c * _R0]


def _classify(a, rmax=30.0):
    """+1 if the orbit crosses zero (amplitude too large), -1 if it turns up, 0 otherwise."""
    crosses = lambda r, y: y[0]
    crosses.terminal = True
    turns = lambda r, y: y[1]
    turns.terminal = True
    turns.direction = 1
    sol = solve_ivp(_radial_rhs, (_R0, rmax), _series_start(a), method="DOP853",
                    rtol=1e-13, atol=1e-15, events=[crosses, turns])
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


@dataclass(frozen=True)
class RadialGroundState:
    amplitude: float
    mass_sq: float
    match_radius: float
    tail_coefficient: float
    _sol: object

    def __call__(self, r):
        """Profile at radii ``r``: shooting solution inside the match radius, A*K0 outside."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inner = r <= self.match_radius
        if np.any(inner):
            out[inner] = self._sol.sol(np.maximum(r[inner], _R0))[0]
        out[~inner] = self.tail_coefficient * k0(r[~inner])
        return out


@lru_cache(maxsize=4)
def shooting_ground_state(match_radius=10.0, bisections=64):
    """Radial ground state by bisection on the central amplitude.

    The mass integrates 2 pi r Q^2 up to ``match_radius`` and adds the exact
    integral of the linear tail A*K0(r) beyond it.
    """
    lo, hi = 2.0, 2.5
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if _classify(mid) > 0:
            hi = mid
        else:
            lo = mid
    a = 0.5 * (lo + hi)

    def rhs(r, y):
        q, p, _ = y
        return [p, -p / r + q - q**3, 2.0 * np.pi * r * q * q]

    y0 = _series_start(a) + [0.0]
    sol = solve_ivp(rhs, (_R0, match_radius), y0, method="DOP853",
                    rtol=1e-13, atol=1e-16, dense_output=True)
    R = match_radius
    A = sol.y[0, -1] / k0(R)
    # int_R^inf r K0(r)^2 dr = (R^2/2)(K1(R)^2 - K0(R)^2)
    tail = 2.0 * np.pi * A**2 * 0.5 * R**2 * (k1(R) ** 2 - k0(R) ** 2)
    return RadialGroundState(a, float(sol.y[2, -1] + tail), R, float(A), sol)


def radial_negative_eigenvalue(points=2000, radius=16.0, profile=None):
    """Lowest eigenvalue of -d^2/dr^2 - (1/r) d/dr + 1 - 3 Q0(r)^2 on radial functions.

    Cell-centred second-order finite differences on [0, radius] with a
    Dirichlet wall, symmetrized by the r-weight, solved densely.
    """
    if profile is None:
        profile = shooting_ground_state()
    h = radius / points
    r = (np.arange(points) + 0.5) * h
    rp, rm = r + 0.5 * h, r - 0.5 * h
    diag = (rp + rm) / (r * h * h) + 1.0 - 3.0 * profile(r) ** 2
    off = -rp[:-1] / (h * h) / np.sqrt(r[:-1] * r[1:])
    A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    w = eigh(A, eigvals_only=True, subset_by_index=[0, 0])
    return float(w[0])


def radial_negative_eigenvalue_extrapolated(points=2000, radius=16.0):
    """Richardson extrapolation of the second-order radial eigenvalue (points, 2*points)."""
    a = radial_negative_eigenvalue(points, radius)
    b = radial_negative_eigenvalue(2 * points, radius)
    return (4.0 * b - a) / 3.0


def brute_force_resonance(j, Jmax):
    """All (j1, j2, j3) in [-Jmax, Jmax]^3 meeting both resonance constraints."""
    rng = range(-Jmax, Jmax + 1)
    return sorted((a, b, c) for a, b, c in itertools.product(rng, rng, rng)
                  if a - b + c == j and a * a - b * b + c * c == j * j)


def brute_force_cm(M):
    """Minimum of sum j^2 over M-element sets of distinct integers, and a minimizer."""
    best, arg = None, None
    for combo in itertools.combinations(range(-M, M + 1), M):
        s = sum(j * j for j in combo)
        if best is None or s < best:
            best, arg = s, combo
    return float(best), arg
