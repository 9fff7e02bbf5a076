"""Periodic grid, transforms, spectral derivatives and Littlewood-Paley projectors.

Conventions
-----------
The box is ``[-L, L)^2`` sampled at ``x_i = -L + i*dx`` with ``dx = 2L/n``, so the
origin sits at index ``n/2``.  Arrays are indexed ``[i1, i2]`` with axis 0 the
first coordinate.  Angular wavenumbers are ``k_m = pi*m/L`` for
``m in [-n/2, n/2)``, stored in FFT order.  Transforms are unnormalized forward
(``numpy`` convention); Parseval reads ``dx^2 sum|f|^2 = (dx/n)^2 sum|fhat|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import ConfigurationError, ModeError

_WORKERS = 1


def set_threads(k):
    """Worker count used by the FFTs (scipy.fft ``workers``)."""
    global _WORKERS
    k = int(k)
    if k < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {k}")
    _WORKERS = k


def get_threads():
    return _WORKERS


def fft2(a):
    return sfft.fft2(a, axes=(-2, -1), workers=_WORKERS)


def ifft2(a):
    return sfft.ifft2(a, axes=(-2, -1), workers=_WORKERS)


@dataclass(frozen=True)
class Grid2D:
    """Square periodic grid of half width ``L`` with ``n`` points per axis."""

    L: float
    n: int

    def __post_init__(self):
        n, L = self.n, self.L
        if isinstance(n, bool) or int(n) != n or n < 16 or (int(n) & (int(n) - 1)) != 0:
            raise ConfigurationError(f"n must be a power of two >= 16, got {n!r}")
        if not np.isfinite(L) or L <= 0:
            raise ConfigurationError(f"L must be positive and finite, got {L!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "L", float(L))

    @property
    def dx(self):
        return 2.0 * self.L / self.n

    @property
    def k_max(self):
        """Magnitude of the Nyquist wavenumber, pi*n/(2L)."""
        return np.pi * (self.n // 2) / self.L

    @cached_property
    def x(self):
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def mesh(self):
        """Physical coordinates (X1, X2), each n x n."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def kmesh(self):
        return np.meshgrid(self.k, self.k, indexing="ij")

    @cached_property
    def r2(self):
        X1, X2 = self.mesh
        return X1**2 + X2**2

    @cached_property
    def k2(self):
        K1, K2 = self.kmesh
        return K1**2 + K2**2

    @cached_property
    def kabs(self):
        return np.sqrt(self.k2)

    @cached_property
    def _dk(self):
        # odd derivatives drop the Nyquist mode so real fields stay real
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return np.meshgrid(k, k, indexing="ij")

    def integrate(self, f):
        """Rectangle-rule integral over the last two axes."""
        return self.dx**2 * np.sum(f, axis=(-2, -1))

    def same_as(self, other):
        return self.n == other.n and self.L == other.L


def make_grid(L, n):
    """Validated grid constructor."""
    return Grid2D(L, n)


@dataclass
class FieldVec:
    """Stack of complex fields sharing one grid.

    ``data`` has shape (components, n, n).  In finite mode the components are
    indexed ``1..N``; in resonant mode they are indexed ``-Jmax..Jmax`` and
    ``first_index = -Jmax``.  ``meta`` holds warnings and free-form notes.
    """

    grid: Grid2D
    data: np.ndarray
    mode: str = "finite"
    first_index: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        if self.data.ndim == 2:
            self.data = self.data[None]
        n = self.grid.n
        if self.data.ndim != 3 or self.data.shape[1:] != (n, n) or self.data.shape[0] < 1:
            raise ConfigurationError(f"field stack shape {self.data.shape} does not match grid n={n}")
        if self.mode == "finite":
            if self.first_index != 1:
                raise ConfigurationError("finite-mode components are indexed from 1")
        elif self.mode == "resonant":
            if self.data.shape[0] % 2 != 1 or self.first_index != -(self.data.shape[0] // 2):
                raise ConfigurationError("resonant mode needs 2*Jmax+1 components indexed from -Jmax")
        else:
            raise ConfigurationError(f"unknown mode {self.mode!r}")

    @classmethod
    def finite(cls, grid, data):
        return cls(grid, data, "finite", 1)

    @classmethod
    def resonant(cls, grid, data):
        data = np.asarray(data)
        return cls(grid, data, "resonant", -(data.shape[0] // 2))

    @classmethod
    def zeros(cls, grid, N=None, Jmax=None):
        n = grid.n
        if (N is None) == (Jmax is None):
            raise ConfigurationError("give exactly one of N or Jmax")
        if N is not None:
            return cls.finite(grid, np.zeros((N, n, n), complex))
        return cls.resonant(grid, np.zeros((2 * Jmax + 1, n, n), complex))

    @property
    def ncomp(self):
        return self.data.shape[0]

    @property
    def N(self):
        return self.ncomp

    @property
    def Jmax(self):
        if self.mode != "resonant":
            raise ModeError("Jmax is only defined in resonant mode")
        return self.ncomp // 2

    @property
    def indices(self):
        return np.arange(self.first_index, self.first_index + self.ncomp)

    @property
    def warnings(self):
        return self.meta.setdefault("warnings", [])

    def like(self, data):
        """New FieldVec with the same grid and indexing but different samples."""
        return FieldVec(self.grid, data, self.mode, self.first_index)

    def copy(self):
        return FieldVec(self.grid, self.data.copy(), self.mode, self.first_index,
                        {k: list(v) if isinstance(v, list) else v for k, v in self.meta.items()})

    def component(self, j):
        """Samples of the component with index ``j``."""
        pos = j - self.first_index
        if not 0 <= pos < self.ncomp:
            raise IndexError(f"component index {j} outside {self.indices[0]}..{self.indices[-1]}")
        return self.data[pos]

    def component_masses(self):
        return self.grid.integrate(self.data.real**2 + self.data.imag**2)

    def norm(self):
        """L2 l2 norm."""
        return float(np.sqrt(np.sum(self.component_masses())))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.data)))


def as_array(u):
    return u.data if isinstance(u, FieldVec) else np.asarray(u)


def _rewrap(u, arr):
    return u.like(arr) if isinstance(u, FieldVec) else arr


def inner(f, g, grid=None):
    """Real pairing Re sum_j int f_j conj(g_j) dx."""
    if grid is None:
        grid = f.grid if isinstance(f, FieldVec) else g.grid
    a, b = as_array(f), as_array(g)
    return float(grid.dx**2 * np.sum(a.real * b.real + a.imag * b.imag))


def spectral_norm_sq(f, grid):
    """Squared L2 norm evaluated on the Fourier side."""
    fh = fft2(as_array(f))
    return float((grid.dx / grid.n) ** 2 * np.sum(np.abs(fh) ** 2))


def gradient(f, grid=None):
    """Spectral partial derivatives (d1 f, d2 f); the Nyquist mode is dropped."""
    if grid is None:
        grid = f.grid
    fh = fft2(as_array(f))
    K1, K2 = grid._dk
    d1 = ifft2(1j * K1 * fh)
    d2 = ifft2(1j * K2 * fh)
    return _rewrap(f, d1), _rewrap(f, d2)


def laplacian(f, grid=None):
    if grid is None:
        grid = f.grid
    return _rewrap(f, ifft2(-grid.k2 * fft2(as_array(f))))


def kinetic_sq(f, grid=None):
    """||grad f||^2 summed over components, via the Fourier multiplier |k|^2."""
    if grid is None:
        grid = f.grid
    fh = fft2(as_array(f))
    return float((grid.dx / grid.n) ** 2 * np.sum(grid.k2 * np.abs(fh) ** 2))


def bump(r):
    """Radial cutoff: 1 on r <= 1, 0 on r >= 2, order-7 smoothstep taper between."""
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    s = t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
    return 1.0 - s


def lp_multiplier(grid, N, kind="leq"):
    """Fourier multiplier of the Littlewood-Paley projector at exponent ``N``.

    ``leq``: phi(|k|/2^N) for N >= 0 and zero for N <= -1.
    ``geq``: the complement 1 - leq(N), so leq(N) + geq(N) is the identity.
    ``band``: leq(N) - leq(N-1), which is phi itself at N = 0.
    """
    N = int(N)

    def leq(m):
        if m <= -1:
            return np.zeros_like(grid.kabs)
        return bump(grid.kabs / 2.0**m)

    if kind == "leq":
        return leq(N)
    if kind == "geq":
        return 1.0 - leq(N)
    if kind == "band":
        return leq(N) - leq(N - 1)
    raise ConfigurationError(f"unknown projector kind {kind!r}")


def lp_project(f, N, kind="leq", grid=None):
    """Apply the Littlewood-Paley projector to a field or FieldVec."""
    if grid is None:
        grid = f.grid
    m = lp_multiplier(grid, N, kind)
    return _rewrap(f, ifft2(m * fft2(as_array(f))))


def dealias(f, grid=None):
    """Two-thirds rule: zero every mode with |k_i| > (2/3) k_max on either axis."""
    if grid is None:
        grid = f.grid
    K1, K2 = grid.kmesh
    cut = (2.0 / 3.0) * grid.k_max
    mask = (np.abs(K1) <= cut) & (np.abs(K2) <= cut)
    return _rewrap(f, ifft2(mask * fft2(as_array(f))))


def spectral_tail_fraction(f, grid=None, frac=0.9):
    """Fraction of the spectral mass at |k| > frac * k_max."""
    if grid is None:
        grid = f.grid
    p = np.abs(fft2(as_array(f))) ** 2
    if p.ndim == 3:
        p = p.sum(axis=0)
    total = p.sum()
    if total == 0:
        return 0.0
    return float(p[grid.kabs > frac * grid.k_max].sum() / total)


def _eval_matrix(grid, points):
    """Rows evaluate the trigonometric interpolant along one axis at ``points``."""
    n = grid.n
    ph = np.outer(np.asarray(points, dtype=float) + grid.L, grid.k)
    E = np.exp(1j * ph)
    # split Nyquist symmetrically so real data interpolate to real values
    E[:, n // 2] = np.cos(ph[:, n // 2])
    return E / n


def evaluate_tensor(f, p1, p2, grid=None):
    """Interpolant of ``f`` sampled on the tensor product of ``p1`` and ``p2``.

    Exact for trigonometric polynomials of the grid's degree; points outside
    the box wrap periodically.
    """
    if grid is None:
        grid = f.grid
    fh = fft2(as_array(f))
    E1 = _eval_matrix(grid, p1)
    E2 = _eval_matrix(grid, p2)
    return E1 @ fh @ E2.T


def evaluate_affine(f, scale=1.0, shift=(0.0, 0.0), grid=None):
    """Interpolant of ``f`` at the points ``scale * x + shift`` of the same grid.

    Pure translations wrap periodically.  For |scale| > 1 mapped points
    more than half a cell outside the box are set to zero, so a dilation
    never pulls periodic images of the field into view; the half-cell margin
    keeps the map continuous as the scale tends to one.
    """
    if grid is None:
        grid = f.grid
    p1 = scale * grid.x + shift[0]
    p2 = scale * grid.x + shift[1]
    vals = evaluate_tensor(as_array(f), p1, p2, grid)
    if abs(scale) > 1.0:
        edge = grid.L + 0.5 * grid.dx
        vals = vals * np.outer(np.abs(p1) <= edge, np.abs(p2) <= edge)
    return _rewrap(f, vals)


def shift_field(f, x0, grid=None):
    """Translate: returns f(x - x0) via Fourier phase factors."""
    return evaluate_affine(f, 1.0, (-x0[0], -x0[1]), grid)
