"""Linearized operators about the vector ground state and their low spectrum.

For a real perturbation v of the ground state the operators act on real
N-vector fields:

* ``Lplus``:  (1 - Delta - (2N+1) Q^2) v_j - 4 Q^2 sum_{k != j} v_k
* ``Lminus``: (1 - Delta - (2N-1) Q^2) v_j
* ``L0plus`` / ``L0minus``: the scalar operators 1 - Delta - 3 Q0^2 and 1 - Delta - Q0^2

where Q = Q0 / sqrt(2N - 1) is the common component of the vector ground state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator as _ScipyOperator
from scipy.sparse.linalg import lobpcg

from .errors import ConfigurationError, ConvergenceError
from .functionals import energy
from .grid import FieldVec, fft2, gradient, ifft2, inner
from .groundstate import build_Q_vector

KINDS = ("Lplus", "Lminus", "L0plus", "L0minus")
NEAR_ZERO_REL = 1e-4


@dataclass(frozen=True)
class LinearizedOperator:
    kind: str
    N: int
    gs: object
    grid: object

    @property
    def ncomp(self):
        return self.N if self.kind in ("Lplus", "Lminus") else 1

    @property
    def shape(self):
        return (self.ncomp, self.grid.n, self.grid.n)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def _weights(self):
        Q0sq = self.gs.profile**2
        if self.kind == "L0plus":
            return 3.0 * Q0sq, None
        if self.kind == "L0minus":
            return Q0sq, None
        Qsq = Q0sq / (2 * self.N - 1)
        if self.kind == "Lplus":
            return (2 * self.N + 1) * Qsq, 4.0 * Qsq
        return (2 * self.N - 1) * Qsq, None

    def apply(self, v):
        """Apply to real fields of shape (..., ncomp, n, n)."""
        v = np.asarray(v, dtype=float)
        diag, off = self._weights()
        out = ifft2((1.0 + self.grid.k2) * fft2(v)).real - diag * v
        if off is not None:
            total = v.sum(axis=-3, keepdims=True)
            out -= off * (total - v)
        return out

    def quadratic_form(self, v, w=None):
        """<A v, w> in the real L2 pairing (w defaults to v)."""
        w = v if w is None else w
        return float(self.grid.dx**2 * np.sum(self.apply(v) * w))

    def as_scipy(self):
        shp, size = self.shape, self.size

        def matmat(X):
            X = np.asarray(X)
            k = X.shape[1]
            Y = self.apply(X.T.reshape((k,) + shp))
            return Y.reshape(k, size).T

        return _ScipyOperator((size, size), matvec=lambda x: matmat(x.reshape(-1, 1))[:, 0],
                              matmat=matmat, dtype=float)

    def preconditioner(self):
        """(1 - Delta)^{-1} applied componentwise in Fourier space."""
        shp, size = self.shape, self.size
        inv = 1.0 / (1.0 + self.grid.k2)

        def matmat(X):
            X = np.asarray(X)
            k = X.shape[1]
            Y = ifft2(inv * fft2(X.T.reshape((k,) + shp))).real
            return Y.reshape(k, size).T

        return _ScipyOperator((size, size), matvec=lambda x: matmat(x.reshape(-1, 1))[:, 0],
                              matmat=matmat, dtype=float)


def assemble(kind, N, gs, grid):
    """Matrix-free linearized operator of the requested kind."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown operator kind {kind!r}")
    if not grid.same_as(gs.grid):
        raise ConfigurationError("operator grid differs from the ground-state grid")
    if int(N) < 1:
        raise ConfigurationError("N must be >= 1")
    return LinearizedOperator(kind, int(N), gs, grid)


@dataclass
class SpectralReport:
    kind: str
    N: int
    eigenvalues: np.ndarray
    lambda0: float
    chi0: FieldVec
    near_kernel: list
    gap_c0: float
    counts: tuple
    threshold: float
    residuals: np.ndarray
    eigenvectors: np.ndarray = field(repr=False, default=None)

    def to_json(self):
        return {
            "kind": self.kind, "N": self.N,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "lambda0": float(self.lambda0),
            "near_kernel_eigenvalues": [float(e) for e, _ in self.near_kernel],
            "gap_c0": float(self.gap_c0),
            "counts": {"negatives": int(self.counts[0]), "near_zeros": int(self.counts[1])},
            "near_zero_threshold": float(self.threshold),
            "residuals": [float(r) for r in self.residuals],
        }


def _block_eigs(op, k, tol, maxiter, seed, constraints=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((op.size, k))
    Y = None
    if constraints is not None:
        Y = np.stack([c.ravel() for c in constraints], axis=1)
    A = op.as_scipy()
    with warnings.catch_warnings():
        # convergence is judged from the explicit residuals below
        warnings.simplefilter("ignore", UserWarning)
        w, V = lobpcg(A, X, M=op.preconditioner(), Y=Y, tol=tol, maxiter=maxiter, largest=False)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    R = A.matmat(V) - V * w
    res = np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    return w, V, res


def spectrum_report(op, n_eigs=6, tol=1e-9, maxiter=2000, seed=0, guard=2):
    """Lowest ``n_eigs`` eigenpairs by preconditioned block iteration (LOBPCG).

    ``guard`` extra vectors are iterated and discarded to speed convergence of
    the top of the requested block.  Near-zero modes are those within
    1e-4 of the spectral scale max(|lambda0|, 1); the 1 is the bottom of the
    continuous spectrum and sets the scale for the nonnegative operators.
    """
    if n_eigs < 4:
        raise ConfigurationError("n_eigs must be >= 4")
    w, V, res = _block_eigs(op, n_eigs + guard, tol, maxiter, seed)
    w, V, res = w[:n_eigs], V[:, :n_eigs], res[:n_eigs]
    if not np.all(res < max(1e3 * tol, 1e-6)):
        raise ConvergenceError(f"eigensolver residuals {res} above tolerance", residuals=res)
    scale = max(abs(w[0]), 1.0)
    thr = NEAR_ZERO_REL * scale
    grid = op.grid
    vecs = V.T.reshape((n_eigs,) + op.shape)
    # unit L2 l2 norm in the continuum sense
    vecs = vecs / (grid.dx * np.linalg.norm(vecs.reshape(n_eigs, -1), axis=1))[:, None, None, None]
    c = grid.n // 2
    chi = vecs[0] * (1.0 if vecs[0][0, c, c] >= 0 else -1.0)
    negatives = int(np.sum(w < -thr))
    near = [(float(w[i]), FieldVec.finite(grid, vecs[i])) for i in range(n_eigs) if abs(w[i]) <= thr]
    above = w[w > thr]
    gap = float(above[0]) if above.size else float("nan")
    return SpectralReport(op.kind, op.N, w, float(w[0]), FieldVec.finite(grid, chi), near, gap,
                          (negatives, len(near)), thr, res, vecs)


def translation_modes(gs, N):
    """The two kernel directions (d1 Q, ..., d1 Q) and (d2 Q, ..., d2 Q) as real arrays."""
    Q = build_Q_vector(gs, N)
    d1, d2 = gradient(Q)
    return d1.data.real.copy(), d2.data.real.copy()


def rayleigh_quotient(op, v):
    v = np.asarray(v, dtype=float)
    return op.quadratic_form(v) / float(op.grid.dx**2 * np.sum(v * v))


def min_rayleigh(op, constraints=None, tol=1e-8, maxiter=2000, seed=1, block=3):
    """Minimal Rayleigh quotient of ``op``, optionally on the complement of ``constraints``."""
    w, _, _ = _block_eigs(op, block, tol, maxiter, seed, constraints)
    return float(w[0])


def scalar_chi0(gs, tol=1e-9):
    """Positive eigenfunction of the scalar operator 1 - Delta - 3 Q0^2, unit L2 norm."""
    rep = spectrum_report(assemble("L0plus", 1, gs, gs.grid), n_eigs=4, tol=tol)
    return rep.lambda0, rep.chi0.data[0].real.copy()


def positivity_gap(op, gs, chi0=None, tol=1e-8):
    """Minimal Rayleigh quotient of L+ orthogonal to the chi0-vector and translation modes."""
    if op.kind != "Lplus":
        raise ConfigurationError("positivity_gap is defined for Lplus")
    if chi0 is None:
        chi0 = scalar_chi0(gs)[1]
    chi_vec = np.repeat(chi0[None], op.N, axis=0)
    t1, t2 = translation_modes(gs, op.N)
    return min_rayleigh(op, constraints=[chi_vec, t1, t2], tol=tol)


def orthogonality_directions(gs, N, chi0):
    """The N+5 directions of the modulation conditions as complex (N, n, n) arrays.

    Order: chi0-vector, i chi0 e_j for j = 1..N, d1 Q, d2 Q, i d1 Q, i d2 Q.
    """
    n = gs.grid.n
    chi = np.repeat(chi0[None].astype(complex), N, axis=0)
    dirs = [chi]
    for j in range(N):
        e = np.zeros((N, n, n), complex)
        e[j] = 1j * chi0
        dirs.append(e)
    t1, t2 = translation_modes(gs, N)
    dirs += [t1.astype(complex), t2.astype(complex), 1j * t1, 1j * t2]
    return dirs


def constrained_perturbations(gs, N, chi0, raw, grid=None):
    """Project raw complex perturbations onto the orthogonality complement and fix the mass.

    Each raw (N, n, n) field is made orthogonal to the N+5 modulation
    directions; then a multiple of the projected Q direction is added so that
    ||Q + eps|| = ||Q||.  Returns the list of admissible eps (None where the
    mass condition has no real solution).
    """
    grid = gs.grid if grid is None else grid
    dirs = orthogonality_directions(gs, N, chi0)
    B = _orthonormalize(dirs, grid)
    Q = build_Q_vector(gs, N).data
    d = _project_out(Q, B, grid)
    out = []
    for e in raw:
        e = _project_out(e, B, grid)
        # ||Q + e + c d||^2 = ||Q||^2  <=>  c^2 |d|^2 + 2c <Q + e, d> + 2<Q, e> + |e|^2 = 0
        a = inner(d, d, grid)
        b = 2.0 * inner(Q + e, d, grid)
        c0 = 2.0 * inner(Q, e, grid) + inner(e, e, grid)
        disc = b * b - 4.0 * a * c0
        if disc < 0:
            out.append(None)
            continue
        roots = [(-b + s * np.sqrt(disc)) / (2.0 * a) for s in (1.0, -1.0)]
        c = min(roots, key=abs)
        out.append(e + c * d)
    return out


def _orthonormalize(dirs, grid):
    basis = []
    for v in dirs:
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w = w - inner(w, b, grid) * b
        nrm = np.sqrt(inner(w, w, grid))
        if nrm > 1e-12:
            basis.append(w / nrm)
    return basis


def _project_out(v, basis, grid):
    w = np.array(v, dtype=complex)
    for _ in range(2):
        for b in basis:
            w = w - inner(w, b, grid) * b
    return w


def h1_norm_sq(eps, grid):
    """||eps||^2 + ||grad eps||^2 summed over components."""
    eh = fft2(eps)
    return float((grid.dx / grid.n) ** 2 * np.sum((1.0 + grid.k2) * np.abs(eh) ** 2))


def coercivity_ratios(gs, N, chi0, perturbations):
    """E(Q + eps) / ||eps||^2_{H1} for admissible perturbations (None entries skipped)."""
    Q = build_Q_vector(gs, N)
    ratios = []
    for e in perturbations:
        if e is None:
            continue
        ratios.append(energy(Q.like(Q.data + e)) / h1_norm_sq(e, gs.grid))
    return np.array(ratios)
