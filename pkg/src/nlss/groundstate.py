"""Scalar ground state of Delta Q - Q + Q^3 = 0 and the derived vector ground state."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special
from scipy.interpolate import BPoly, PPoly
from scipy.optimize import newton_krylov, NoConvergence

from .errors import ConvergenceError, DomainError
from .grid import FieldVec, Grid2D, fft2, ifft2, kinetic_sq, make_grid, shift_field
from .snapshot import read_json, read_snapshot, write_json, write_snapshot

INITIAL_AMPLITUDE = 2.2
STALL_WINDOW = 25


@dataclass(frozen=True)
class GroundState:
    """Real radial profile Q0 with its certification numbers."""

    grid: Grid2D
    profile: np.ndarray
    mass_sq: float
    residual_inf: float
    pohozaev_defects: tuple
    iterations: int = 0
    method: str = "petviashvili"

    @property
    def q0_norm_sq(self):
        return self.mass_sq


def elliptic_residual(Q, grid, coupling=1.0):
    """Delta Q - Q + coupling * Q^3, computed spectrally (real part)."""
    lap = ifft2(-grid.k2 * fft2(Q)).real
    return lap - Q + coupling * Q**3


def pohozaev_defects(Q, grid):
    """Relative defects of ||Q||^2 = ||grad Q||^2 and ||grad Q||^2 = ||Q||_4^4 / 2."""
    m = grid.integrate(Q**2)
    kin = kinetic_sq(Q, grid)
    q4 = grid.integrate(Q**4)
    return (abs(m - kin) / m, abs(kin - 0.5 * q4) / kin)


def _recentre(Q, grid):
    X1, X2 = grid.mesh
    w = Q**2
    m = w.sum()
    c = np.array([(X1 * w).sum() / m, (X2 * w).sum() / m])
    # shifts far below the grid spacing only inject interpolation round-off
    if np.max(np.abs(c)) > 1e-9 * grid.dx:
        Q = shift_field(Q, -c, grid).real
    return Q


def _polish(Q, grid, tol):
    """Newton-Krylov refinement used when the renormalized iteration stalls."""
    n = grid.n

    def F(q):
        return elliptic_residual(q.reshape(n, n), grid).ravel()

    try:
        q = newton_krylov(F, Q.ravel(), f_tol=tol, maxiter=50, method="lgmres")
    except (NoConvergence, ValueError) as exc:
        q = getattr(exc, "args", [None])[0]
        if not isinstance(q, np.ndarray):
            return Q
    return q.reshape(n, n)


def solve_ground_state(grid, tol=1e-10, max_iters=500):
    """Petviashvili iteration with exponent 3/2 started from 2.2 exp(-|x|^2/2).

    Each step sets Q <- s^{3/2} (1 - Delta)^{-1} Q^3 where the stabilizing factor
    s = <(1 - Delta) Q, Q> / <Q^3, Q> equals one at the fixed point.  If the
    sup-norm residual stops decreasing for STALL_WINDOW iterations above ``tol``
    the iterate is handed to a Newton-Krylov polish.
    """
    if not (1e-14 <= tol <= 1e-4):
        raise DomainError(f"tol must lie in [1e-14, 1e-4], got {tol}")
    Q = INITIAL_AMPLITUDE * np.exp(-0.5 * grid.r2)
    sym = 1.0 + grid.k2
    best, best_it, res = np.inf, 0, np.inf
    method = "petviashvili"
    it = 0
    for it in range(1, max_iters + 1):
        Qh = fft2(Q)
        Nh = fft2(Q**3)
        s = np.sum(sym * np.abs(Qh) ** 2) / np.sum((Nh * np.conj(Qh)).real)
        Q = ifft2(s**1.5 * Nh / sym).real
        res = float(np.max(np.abs(elliptic_residual(Q, grid))))
        if res <= tol:
            break
        if res < 0.999 * best:
            best, best_it = res, it
        elif it - best_it > STALL_WINDOW:
            Q = _polish(Q, grid, tol)
            res = float(np.max(np.abs(elliptic_residual(Q, grid))))
            method = "petviashvili+newton_krylov"
            break
    if not res <= tol:
        raise ConvergenceError(f"ground state residual {res:.3e} above tol {tol:.1e} after {it} iterations",
                               residuals=res)
    Q = _recentre(Q, grid)
    res = float(np.max(np.abs(elliptic_residual(Q, grid))))
    return GroundState(grid, Q, float(grid.integrate(Q**2)), res,
                       tuple(float(d) for d in pohozaev_defects(Q, grid)), it, method)


@lru_cache(maxsize=8)
def cached_ground_state(L=16.0, n=512, tol=1e-10):
    """Memoized ground state for a grid; results are immutable and shareable."""
    return solve_ground_state(make_grid(L, n), tol)


class RadialTable:
    """Quintic Hermite table of a radial grid function and its first two derivatives.

    Node data come from the trigonometric interpolant along the grid row through
    the origin, where values and derivatives are exact.  The table vanishes
    beyond r = L unless ``tail_from`` is given: from that radius on the function
    continues as A K0(r), the decaying solution of the far-field equation
    Delta f = f, with A fixed by continuity.
    """

    def __init__(self, f2d, grid, refine=4, tail_from=None):
        n = grid.n
        row = np.asarray(f2d)[:, n // 2].real
        fh = np.fft.fft(row)
        k = grid.k.copy()
        self.rmax = grid.L
        r = np.linspace(0.0, grid.L, refine * (n // 2) + 1)
        s = r + grid.L
        E = np.exp(1j * np.outer(s, k)) / n
        nyq, kn = n // 2, k[n // 2]
        # the Nyquist mode is split symmetrically, i.e. evaluated as a cosine
        nyq_cols = (np.cos(kn * s), -kn * np.sin(kn * s), -kn * kn * np.cos(kn * s))
        vals = []
        for order in range(3):
            M = E * (1j * k)[None, :] ** order
            M[:, nyq] = nyq_cols[order] / n
            vals.append((M @ fh).real)
        poly = BPoly.from_derivatives(r, np.stack(vals, axis=1), extrapolate=False)
        # power-basis coefficients on the uniform nodes, evaluated by index lookup and Horner
        pp = PPoly.from_bernstein_basis(poly)
        self._h = r[1] - r[0]
        self._coef = [pp.c, pp.derivative(1).c, pp.derivative(2).c]
        self.tail_from = None
        if tail_from is not None:
            if not 0 < tail_from < grid.L:
                raise DomainError("tail_from must lie inside the box")
            self.tail_from = float(tail_from)
            self._amp = float(self._table(np.array([self.tail_from]), 0)[0]) / special.k0(self.tail_from)

    def _locate(self, r):
        m = self._coef[0].shape[1]
        # clipping first keeps the index valid for non-finite or far radii, which are masked later
        idx = np.clip(np.nan_to_num(r / self._h, nan=0.0, posinf=m, neginf=0.0), 0, m - 1).astype(np.intp)
        return idx, r - idx * self._h

    def _table(self, r, nu, loc=None):
        idx, t = self._locate(r) if loc is None else loc
        c = self._coef[nu]
        out = c[0][idx]
        for row in c[1:]:
            out = out * t + row[idx]
        return out

    def _tail(self, r, nu):
        k0, k1 = special.k0(r), special.k1(r)
        return self._amp * (k0, -k1, k0 + k1 / r)[nu]

    def __call__(self, r, nu=0):
        return self.evaluate(r, (nu,))[0]

    def evaluate(self, r, orders=(0, 1, 2)):
        """Values of the requested derivative orders at radii ``r`` (one table lookup)."""
        r = np.asarray(r, dtype=float)
        loc = self._locate(r)
        outside = r > self.rmax
        far = None
        if self.tail_from is not None:
            far = r > self.tail_from
            far = far if np.any(far) else None
        outs = []
        for nu in orders:
            out = self._table(r, nu, loc)
            if far is not None:
                out = np.where(far, self._tail(np.where(far, r, 1.0), nu), out)
            elif np.any(outside):
                out = np.where(outside, 0.0, out)
            outs.append(out)
        return outs


def radial_profile(gs):
    """Q0 as a radial function on the whole plane, with its far-field tail from r = 3L/4."""
    cached = gs.__dict__.get("_radial")
    if cached is None:
        cached = RadialTable(gs.profile, gs.grid, tail_from=0.75 * gs.grid.L)
        object.__setattr__(gs, "_radial", cached)
    return cached


def build_Q_vector(gs, N):
    """Vector ground state: N copies of Q0 / sqrt(2N - 1)."""
    N = int(N)
    if N < 1:
        raise DomainError("N must be >= 1")
    comp = gs.profile / np.sqrt(2 * N - 1)
    return FieldVec.finite(gs.grid, np.repeat(comp[None].astype(complex), N, axis=0))


def vector_residual(Q):
    """Sup norm of Delta Q_j - Q_j + (2N - 1) Q_j^3 over components."""
    N = Q.ncomp
    return max(float(np.max(np.abs(elliptic_residual(c.real, Q.grid, 2 * N - 1)))) for c in Q.data)


def minimizing_index_set(M):
    """M consecutive integers around zero minimizing sum j^2."""
    M = int(M)
    if M % 2:
        h = M // 2
        return list(range(-h, h + 1))
    return list(range(-M // 2 + 1, M // 2 + 1))


def gnweak_maximizer(gs, M, Jmax=None):
    """Resonant-mode layout with Q0/sqrt(2M - 1) on the minimizing index set."""
    idx = minimizing_index_set(M)
    J = max(abs(j) for j in idx) if Jmax is None else int(Jmax)
    if J < max(abs(j) for j in idx):
        raise DomainError(f"Jmax={J} too small for M={M}")
    n = gs.grid.n
    data = np.zeros((2 * J + 1, n, n), complex)
    for j in idx:
        data[j + J] = gs.profile / np.sqrt(2 * M - 1)
    return FieldVec.resonant(gs.grid, data)


def save_ground_state(gs, stem):
    """Write ``stem.nlss`` (profile snapshot) and ``stem.json`` (certification sidecar)."""
    stem = Path(stem)
    write_snapshot(stem.with_suffix(".nlss"), FieldVec.finite(gs.grid, gs.profile[None]))
    write_json(stem.with_suffix(".json"), {
        "mass_sq": gs.mass_sq,
        "residual_inf": gs.residual_inf,
        "pohozaev_defects": list(gs.pohozaev_defects),
        "grid": {"L": gs.grid.L, "n": gs.grid.n},
    })


def load_ground_state(stem):
    stem = Path(stem)
    u = read_snapshot(stem.with_suffix(".nlss"))
    meta = read_json(stem.with_suffix(".json"))
    return GroundState(u.grid, u.data[0].real.copy(), float(meta["mass_sq"]),
                       float(meta["residual_inf"]), tuple(meta["pohozaev_defects"]), 0, "loaded")
