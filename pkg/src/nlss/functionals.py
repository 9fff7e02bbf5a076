"""Conserved quantities, norms, the Weinstein functional and Gagliardo-Nirenberg constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ModeError
from .grid import gradient, kinetic_sq
from .nonlinearity import apply_nonlinearity

# strict inequalities are judged with this relative slack so that a state sitting
# exactly on a threshold (up to rounding) is reported as failing
STRICT_RTOL = 1e-12


@dataclass
class ConservedSet:
    mass: float
    energy: float
    weighted_masses: dict = field(default_factory=dict)


def mass(u):
    """sum_j int |u_j|^2 dx."""
    return float(np.sum(u.component_masses()))


def kinetic(u):
    """sum_j ||grad u_j||^2."""
    return kinetic_sq(u)


def interaction(u):
    """sum_j int F_j(u) conj(u_j) dx (real)."""
    if u.mode == "finite":
        a2 = u.data.real**2 + u.data.imag**2
        rho = a2.sum(axis=0)
        return float(u.grid.integrate(2.0 * rho**2 - np.sum(a2**2, axis=0)))
    F = apply_nonlinearity(u, method="closed")
    return float(u.grid.integrate(np.sum((F.data * np.conj(u.data)).real, axis=0)))


def interaction_pairs(u):
    """Resonant-mode quartic term as sum_{m,n} int |sum u_{j1} conj(u_{j2})|^2.

    The inner sum runs over pairs with j1 - j2 = m and j1^2 - j2^2 = n inside the
    truncation window.  Equals ``interaction(u)`` on resonant fields.
    """
    if u.mode != "resonant":
        raise ModeError("pair form is defined for resonant-mode fields")
    groups = {}
    for a, j1 in enumerate(u.indices):
        for b, j2 in enumerate(u.indices):
            groups.setdefault((j1 - j2, j1 * j1 - j2 * j2), []).append((a, b))
    total = 0.0
    for pairs in groups.values():
        s = np.zeros(u.data.shape[1:], complex)
        for a, b in pairs:
            s += u.data[a] * np.conj(u.data[b])
        total += u.grid.integrate(np.abs(s) ** 2)
    return float(total)


def energy(u, form="closed"):
    """(1/2) sum ||grad u_j||^2 - (1/4) sum_j int F_j conj(u_j)."""
    quartic = interaction_pairs(u) if form == "pairs" else interaction(u)
    return 0.5 * kinetic(u) - 0.25 * quartic


def momentum(u):
    """P = sum_j Im int conj(u_j) grad u_j, as a 2-vector."""
    d1, d2 = gradient(u)
    c = np.conj(u.data)
    return np.array([u.grid.integrate(np.sum((c * d1.data).imag, axis=0)),
                     u.grid.integrate(np.sum((c * d2.data).imag, axis=0))])


def weighted_mass(u, a, b, c):
    """int sum_j (a + b j + c j^2) |u_j|^2 dx, resonant mode only."""
    if u.mode != "resonant":
        raise ModeError("weighted masses are defined for resonant-mode fields")
    j = u.indices.astype(float)
    return float(np.sum((a + b * j + c * j * j) * u.component_masses()))


def conserved(u, weights=((1, 0, 0), (0, 1, 0), (0, 0, 1))):
    wm = {}
    if u.mode == "resonant":
        wm = {tuple(w): weighted_mass(u, *w) for w in weights}
    return ConservedSet(mass(u), energy(u), wm)


def hdot1_sq(u):
    """sum_j j^2 ||u_j||^2 (homogeneous weight)."""
    j = u.indices.astype(float)
    return float(np.sum(j * j * u.component_masses()))


def h1_sq(u):
    """sum_j (1 + j^2) ||u_j||^2 (inhomogeneous weight)."""
    j = u.indices.astype(float)
    return float(np.sum((1.0 + j * j) * u.component_masses()))


def weinstein_J(u):
    """Quartic interaction divided by ||u||^2 ||grad u||^2."""
    den = mass(u) * kinetic(u)
    if not den > 0:
        raise DomainError("Weinstein functional needs u != 0 and grad u != 0")
    return interaction(u) / den


def weinstein_J_batch(data, grid, spectrum=None):
    """Weinstein functional of many finite-mode fields at once.

    ``data`` has shape (batch, N, n, n); returns an array of length batch.
    ``spectrum``, if given, must equal ``fft2(data)`` and saves the transform.
    """
    from .grid import fft2

    a2 = data.real**2 + data.imag**2
    rho = a2.sum(axis=1)
    quartic = grid.integrate(2.0 * rho * rho - np.einsum("bjxy,bjxy->bxy", a2, a2))
    m = grid.integrate(rho)
    fh = fft2(data) if spectrum is None else spectrum
    power = (fh.real**2 + fh.imag**2).sum(axis=1)
    kin = (grid.dx / grid.n) ** 2 * (power.reshape(len(power), -1) @ grid.k2.ravel())
    return quartic / (m * kin)


def gn_constant(N, q0_mass_sq):
    """Sharp constant 2(2N-1)/N / ||Q0||^2; N = math.inf gives 4/||Q0||^2."""
    if N == math.inf:
        return 4.0 / q0_mass_sq
    N = int(N)
    if N < 1:
        raise DomainError("N must be >= 1")
    return 2.0 * (2 * N - 1) / N / q0_mass_sq


def cm_constant(M):
    """Smallest sum of j^2 over M distinct integers, in closed form."""
    M = int(M)
    if M < 2:
        raise DomainError("C(M) needs M >= 2")
    h = M // 2
    s = 2 * sum(j * j for j in range(1, h + 1))
    return float(s if M % 2 else s - h * h)


@dataclass
class HypothesisCheck:
    holds: bool
    margins: tuple
    hdot1_ok: bool
    mass_ok: bool


def check_scattering_hypothesis(u, M, q0_mass_sq):
    """Check the weighted-kinetic and mass thresholds of the scattering criterion.

    Returns slack margins (rhs - lhs) for ``||u||^2_hdot1 <= C(M)(2M-1)/(2M) ||u||^2``
    and ``||u||^2 < M/(2M-1) ||Q0||^2``.  The strict mass inequality needs a
    margin above STRICT_RTOL relative to its right side.
    """
    if u.mode != "resonant":
        raise ModeError("the weighted hypothesis is stated for resonant-mode fields")
    m = mass(u)
    rhs1 = cm_constant(M) * (2 * M - 1) / (2 * M) * m
    rhs2 = M / (2 * M - 1) * q0_mass_sq
    m1 = rhs1 - hdot1_sq(u)
    m2 = rhs2 - m
    ok1 = m1 >= -STRICT_RTOL * max(rhs1, 1e-300)
    ok2 = m2 > STRICT_RTOL * rhs2
    return HypothesisCheck(bool(ok1 and ok2), (m1, m2), bool(ok1), bool(ok2))
