"""Monitoring functionals: virial variance, Morawetz action and truncated energy."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, PrecisionWarning
from .functionals import energy
from .grid import gradient, lp_project, spectral_tail_fraction

TAIL_MASS_LIMIT = 1e-6
# offset between the Morawetz / truncated-energy exponent k0 and the projector exponent
PROJECTOR_OFFSET = 9


def virial_variance(u):
    """V = int |x|^2 sum_j |u_j|^2 and its time derivative Vdot = 4 sum_j Im int conj(u_j) x.grad u_j.

    Emits a PrecisionWarning when more than 1e-6 of the mass lies outside
    |x| <= L/2, where the periodic box distorts the weight |x|^2.
    """
    grid = u.grid
    rho = np.sum(np.abs(u.data) ** 2, axis=0)
    total = rho.sum()
    outside = rho[grid.r2 > (0.5 * grid.L) ** 2].sum()
    if total > 0 and outside / total > TAIL_MASS_LIMIT:
        warnings.warn(f"mass fraction {outside / total:.2e} outside |x| <= L/2; virial values are box-limited",
                      PrecisionWarning, stacklevel=2)
    X1, X2 = grid.mesh
    V = grid.integrate(grid.r2 * rho)
    d1, d2 = gradient(u)
    c = np.conj(u.data)
    flux = (c * (X1 * d1.data + X2 * d2.data)).imag
    Vdot = 4.0 * grid.integrate(np.sum(flux, axis=0))
    return float(V), float(Vdot)


def _cutoff_poly():
    """Taper of the radial cutoff on [1, 2] as a polynomial in t = r - 1.

    Working in t keeps the coefficients small; expanding about r = 0 loses
    seven digits near r = 2.
    """
    t = Polynomial([0.0, 1.0])
    return 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def morawetz_weight(r, R, eta1):
    """phi(r) = int_0^r psi(eta1 s / (2R)) ds with psi the square of the radial cutoff.

    With a = eta1/(2R) and Psi(y) = int_0^y psi, phi(r) = Psi(a r)/a; Psi is
    y on [0, 1], a polynomial on [1, 2] and constant beyond.
    """
    a = eta1 / (2.0 * R)
    taper_sq = _cutoff_poly() ** 2
    anti = taper_sq.integ(lbnd=0.0, k=1.0)
    y = a * np.asarray(r, dtype=float)
    out = np.where(y <= 1.0, y, anti(np.clip(y, 1.0, 2.0) - 1.0))
    return out / a


def morawetz_action(u, R, eta1, k0):
    """sum_j int phi(|x|) (x/|x|) . Im(conj(P u_j) grad P u_j) dx with P the low-frequency projector at k0 + 9."""
    if not R > 0:
        raise DomainError("R must be positive")
    if not 0 < eta1 < 1:
        raise DomainError("eta1 must lie in (0, 1)")
    grid = u.grid
    P = lp_project(u, int(k0) + PROJECTOR_OFFSET)
    d1, d2 = gradient(P)
    c = np.conj(P.data)
    j1 = np.sum((c * d1.data).imag, axis=0)
    j2 = np.sum((c * d2.data).imag, axis=0)
    X1, X2 = grid.mesh
    r = np.sqrt(grid.r2)
    rs = np.where(r > 0, r, 1.0)
    radial = np.where(r > 0, (X1 * j1 + X2 * j2) / rs, 0.0)
    return float(grid.integrate(morawetz_weight(r, R, eta1) * radial))


def truncated_energy(u, k0):
    """Energy of the componentwise low-frequency projection at exponent k0 + 9."""
    return energy(lp_project(u, int(k0) + PROJECTOR_OFFSET))


@dataclass
class DiagnosticRecord:
    t: float
    virial_V: float
    virial_Vdot: float
    morawetz_M: float
    truncated_E: dict = field(default_factory=dict)
    spec_tail: float = 0.0

    def is_finite(self):
        vals = [self.virial_V, self.virial_Vdot, self.morawetz_M, self.spec_tail, *self.truncated_E.values()]
        return bool(np.all(np.isfinite(vals)))


def diagnostic_record(u, t, R=4.0, eta1=0.5, k0=0, truncation_exponents=(-10, -8, -6, 0)):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        V, Vdot = virial_variance(u)
    return DiagnosticRecord(float(t), V, Vdot, morawetz_action(u, R, eta1, k0),
                            {int(k): truncated_energy(u, k) for k in truncation_exponents},
                            spectral_tail_fraction(u))


def write_diagnostics_csv(records, path):
    """One row per record; truncated energies get one column per exponent."""
    ks = sorted({k for r in records for k in r.truncated_E})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "virial_V", "virial_Vdot", "morawetz_M", *[f"truncated_E_{k}" for k in ks], "spec_tail"])
        for r in records:
            w.writerow([repr(float(v)) for v in (r.t, r.virial_V, r.virial_Vdot, r.morawetz_M,
                                                 *[r.truncated_E.get(k, np.nan) for k in ks], r.spec_tail)])
