"""Symmetry group action, the pseudo-conformal map and closed-form solutions.

Every spatial map is realized on the grid by exact evaluation of the
trigonometric interpolant at the transformed points, so translations,
dilations and their compositions are exact for band-limited data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import FieldVec, as_array, evaluate_affine, spectral_tail_fraction
from .nonlinearity import apply_nonlinearity

TWO_PI = 2.0 * np.pi
# relative spectral tail (|k| > 0.9 k_max) above which a resampled field is flagged
BAND_WARN = 1e-12


@dataclass(frozen=True)
class GroupElement:
    """Scale ``lam``, translation ``x0``, Galilean velocity ``xi0``, phases ``gamma``, time shift ``t0``.

    An empty ``gamma`` acts as zero phase on every component.
    """

    lam: float = 1.0
    x0: tuple = (0.0, 0.0)
    xi0: tuple = (0.0, 0.0)
    gamma: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"scale must be positive, got {self.lam}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "xi0", tuple(float(v) for v in self.xi0))
        object.__setattr__(self, "gamma", tuple(float(np.mod(g, TWO_PI)) for g in np.atleast_1d(self.gamma)))

    @classmethod
    def common_phase(cls, gamma, N, **kw):
        return cls(gamma=(gamma,) * N, **kw)

    def phases(self, ncomp):
        if not self.gamma:
            return np.zeros(ncomp)
        if len(self.gamma) != ncomp:
            raise DomainError(f"{len(self.gamma)} phases for {ncomp} components")
        return np.array(self.gamma)


def group_time(g, t):
    """Time label of the transformed snapshot."""
    return (t + g.t0) / g.lam**2


def _flag_band(u, what):
    frac = spectral_tail_fraction(u)
    if frac > BAND_WARN:
        u.warnings.append(f"{what}: spectral mass fraction {frac:.2e} above 0.9 k_max")
    return u


def apply_group(g, u, t=0.0):
    """Act with ``g`` on the snapshot ``u`` taken at time ``t``.

    The Galilean boost is applied first, then the phases, the translation and
    finally the scaling, giving
    lam e^{i gamma_j} e^{i xi0.(lam x - x0 - xi0 t)} u_j(lam x - x0 - 2 xi0 t)
    at time (t + t0)/lam^2.
    """
    xi = np.asarray(g.xi0)
    x0 = np.asarray(g.x0)
    shift = -x0 - 2.0 * xi * t
    w = evaluate_affine(u, g.lam, shift)
    X1, X2 = u.grid.mesh
    lam = g.lam
    phase = xi[0] * (lam * X1 - x0[0] - xi[0] * t) + xi[1] * (lam * X2 - x0[1] - xi[1] * t)
    gam = g.phases(u.ncomp)[:, None, None]
    out = u.like(lam * np.exp(1j * (gam + phase)) * as_array(w))
    out.warnings.extend(u.warnings)
    if lam != 1.0:
        _flag_band(out, "scaling")
    return out


def pseudo_conformal(u, t):
    """Pseudo-conformal image of the snapshot ``u`` at time ``t``.

    Returns the field t conj(u(t x)) e^{i t |x|^2 / 4}, which is the image
    evaluated at the new time 1/t, together with that time.  The map is an
    involution.
    """
    if t == 0:
        raise DomainError("pseudo-conformal transform is undefined at t = 0")
    w = evaluate_affine(u, t, (0.0, 0.0))
    chirp = np.exp(0.25j * t * u.grid.r2)
    out = u.like(t * np.conj(as_array(w)) * chirp)
    out.warnings.extend(u.warnings)
    return _flag_band(out, "pseudo-conformal dilation"), 1.0 / t


def _component_profile(gs, N):
    return gs.profile / np.sqrt(2 * N - 1)


def _profile_at(gs, N, scale, shift, grid=None):
    """q, d1 q, d2 q at the points scale * x + shift of ``grid``, with q = Q0/sqrt(2N-1).

    At unit scale the periodic grid profile is translated spectrally, which
    keeps it an exact periodic solution.  Otherwise the radial table of Q0
    continued by its far-field tail is used, so dilated points may leave the
    ground-state box without picking up periodic images.
    """
    from .grid import evaluate_tensor, fft2, ifft2
    from .groundstate import radial_profile

    grid = gs.grid if grid is None else grid
    c = 1.0 / np.sqrt(2 * N - 1)
    if scale == 1.0:
        src = gs.grid
        K1, K2 = src._dk
        qh = fft2(gs.profile)
        stack = np.stack([gs.profile, ifft2(1j * K1 * qh).real, ifft2(1j * K2 * qh).real])
        vals = c * evaluate_tensor(stack, grid.x + shift[0], grid.x + shift[1], src).real
        return vals[0], vals[1], vals[2]
    table = radial_profile(gs)
    X1, X2 = grid.mesh
    P1, P2 = scale * X1 + shift[0], scale * X2 + shift[1]
    r = np.hypot(P1, P2)
    q, q1, q2 = table.evaluate(r)
    q = c * q
    # d/dr over r, with its limit q''(0) at the origin
    small = r < 1e-8
    rs = np.where(small, 1.0, r)
    pr = c * np.where(small, q2, q1 / rs)
    return q, pr * P1, pr * P2


def exact_soliton(gs, N, lam=1.0, gamma=None, xtilde=(0.0, 0.0), xi=(0.0, 0.0), t=0.0, with_dt=False,
                  grid=None):
    """Travelling soliton e^{i gamma_j - i t|xi|^2 + i lam^2 t + i x.xi} lam q(lam(x - 2 t xi) - xtilde).

    With ``with_dt`` the analytic time derivative is returned as well.  ``grid``
    selects the output grid (the ground-state grid by default).
    """
    if not lam > 0:
        raise DomainError("lam must be positive")
    grid = gs.grid if grid is None else grid
    xi = np.asarray(xi, float)
    xt = np.asarray(xtilde, float)
    gam = np.zeros(N) if gamma is None else np.broadcast_to(np.asarray(gamma, float), (N,))
    shift = -(2.0 * t * lam * xi + xt)
    q, q1, q2 = _profile_at(gs, N, lam, shift, grid)
    X1, X2 = grid.mesh
    ph = np.exp(1j * (-t * (xi @ xi) + lam**2 * t + xi[0] * X1 + xi[1] * X2))
    base = ph * lam * q
    data = np.exp(1j * gam)[:, None, None] * base[None]
    u = FieldVec.finite(grid, data)
    if not with_dt:
        return u
    # chain rule through the argument lam(x - 2 t xi) - xtilde
    dbase = 1j * (lam**2 - xi @ xi) * base + ph * lam * (-2.0 * lam) * (xi[0] * q1 + xi[1] * q2)
    dt = FieldVec.finite(grid, np.exp(1j * gam)[:, None, None] * dbase[None])
    return u, dt


def exact_pseudosoliton(gs, N, lam=1.0, gamma=None, xtilde=(0.0, 0.0), xi=(0.0, 0.0), T=0.0, t=-1.0,
                        with_dt=False, grid=None):
    """Pseudo-conformal image of the soliton, blowing up at time ``T``.

    With tau = T - t:
    (lam/|tau|) e^{i gamma_j} e^{-i|x - xi|^2/(4 tau)} e^{i lam^2/tau} q(lam(x - xi)/tau - xtilde).
    Here ``xi`` is the concentration point.
    """
    if t == T:
        raise DomainError("pseudosoliton is singular at t = T")
    if not lam > 0:
        raise DomainError("lam must be positive")
    grid = gs.grid if grid is None else grid
    tau = T - t
    c = np.asarray(xi, float)
    xt = np.asarray(xtilde, float)
    gam = np.zeros(N) if gamma is None else np.broadcast_to(np.asarray(gamma, float), (N,))
    s = lam / tau
    q, q1, q2 = _profile_at(gs, N, s, -s * c - xt, grid)
    X1, X2 = grid.mesh
    D1, D2 = X1 - c[0], X2 - c[1]
    rr = D1**2 + D2**2
    ph = np.exp(1j * (-rr / (4.0 * tau) + lam**2 / tau))
    amp = lam / abs(tau)
    base = amp * ph * q
    data = np.exp(1j * gam)[:, None, None] * base[None]
    u = FieldVec.finite(grid, data)
    if not with_dt:
        return u
    # d/dtau of the log-amplitude, the two phases and the profile argument
    dtau = base * (-1.0 / tau + 1j * rr / (4.0 * tau**2) - 1j * lam**2 / tau**2)
    dtau = dtau + amp * ph * (-lam / tau**2) * (D1 * q1 + D2 * q2)
    dt = FieldVec.finite(grid, np.exp(1j * gam)[:, None, None] * (-dtau)[None])
    return u, dt


def pde_residual(u, dudt):
    """i du/dt + Delta u + F(u) as a FieldVec."""
    from .grid import laplacian

    F = apply_nonlinearity(u)
    return u.like(1j * dudt.data + laplacian(u).data + F.data)


def soliton_to_pseudosoliton(lam, gamma, xtilde, xi, t):
    """Parameters of the pseudo-conformal image of a soliton snapshot at time t.

    Returns (lam, gamma', xtilde', centre, T) for the image at time 1/t.
    """
    gamma = np.asarray(gamma, float)
    gp = -gamma + (np.pi if 1.0 / t < 0 else 0.0)
    return lam, gp, tuple(-np.asarray(xtilde, float)), tuple(2.0 * np.asarray(xi, float)), 0.0


def spectral_centroid(u):
    """int k |u_hat|^2 / int |u_hat|^2 over all components."""
    from .grid import fft2

    p = np.sum(np.abs(fft2(u.data)) ** 2, axis=0)
    K1, K2 = u.grid.kmesh
    return np.array([np.sum(K1 * p), np.sum(K2 * p)]) / np.sum(p)


def rms_width(u, centre=None):
    """Root mean square radius about ``centre`` (intensity centroid by default)."""
    rho = np.sum(np.abs(u.data) ** 2, axis=0)
    X1, X2 = u.grid.mesh
    m = rho.sum()
    if centre is None:
        centre = (np.sum(X1 * rho) / m, np.sum(X2 * rho) / m)
    return float(np.sqrt(np.sum(((X1 - centre[0]) ** 2 + (X2 - centre[1]) ** 2) * rho) / m))
