"""Seeded random fields and group elements for property checks and sweeps."""
from __future__ import annotations

import numpy as np

from scipy.fft import fft

from .grid import ifft2

# ranges for random group elements: |log lam|, |x0| per axis, |xi| per axis, |gamma|
GROUP_RANGES = {"log_lam": 0.2, "shift": 0.5, "boost": 0.2, "phase": 0.5}


def gaussian_mixture_batch(rng, grid, N, batch, max_bumps=4, max_boost=1.0, with_spectrum=False):
    """Random sums of complex Gaussian bumps, shape (batch, N, n, n).

    Each component gets between 1 and ``max_bumps`` bumps with centres within
    L/3 of the origin, widths in [0.5, 2.5] and boosts up to ``max_boost``, so
    every trial sits well inside the box and is resolved at dx <= 0.25.
    With ``with_spectrum`` the 2D DFT of the samples (the same array fft2
    returns) is also returned, assembled from 1D transforms of the factors.
    """
    shape = (batch, N, max_bumps)
    count = rng.integers(1, max_bumps + 1, (batch, N))
    amp = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    amp *= np.arange(max_bumps)[None, None] < count[..., None]
    c = rng.uniform(-grid.L / 3, grid.L / 3, shape + (2,))
    w = rng.uniform(0.5, 2.5, shape)[..., None]
    k = rng.uniform(-max_boost, max_boost, shape + (2,))
    x = grid.x[None, None, None]
    # separable bumps: a sum of outer products of one-dimensional factors, i.e. a batched matmul
    g1 = np.exp(-((x - c[..., 0:1]) ** 2) / (2 * w * w) + 1j * k[..., 0:1] * x)
    g2 = np.exp(-((x - c[..., 1:2]) ** 2) / (2 * w * w) + 1j * k[..., 1:2] * x)
    data = np.matmul((amp[..., None] * g1).swapaxes(-1, -2), g2)
    if not with_spectrum:
        return data
    spec = np.matmul((amp[..., None] * fft(g1, axis=-1)).swapaxes(-1, -2), fft(g2, axis=-1))
    return data, spec


def smooth_noise(rng, grid, N, amp, modes=12, smoothing=1.0):
    """Complex band-limited noise scaled to L2 norm ``amp``.

    Fourier coefficients are drawn for mode indices |m| <= ``modes`` per axis
    with amplitudes damped by exp(-smoothing |k|^2 / 4).  The draw depends only on the box
    size, so grids of equal L but different n sample the same continuous field.
    """
    if grid.n < 2 * modes + 2:
        raise ValueError("grid too coarse for the requested number of modes")
    m = np.arange(-modes, modes + 1)
    shape = (N, m.size, m.size)
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = np.pi / grid.L * m
    coef *= np.exp(-0.25 * smoothing * (k[:, None] ** 2 + k[None, :] ** 2))[None]
    spec = np.zeros((N, grid.n, grid.n), complex)
    spec[:, m[:, None] % grid.n, m[None, :] % grid.n] = coef
    w = ifft2(spec)
    return w * (amp / np.sqrt(grid.dx**2 * np.sum(np.abs(w) ** 2)))


def near_ground_state_batch(rng, Q, batch, amps=(1e-4, 1e-1)):
    """Q plus smooth perturbations with log-uniform L2 sizes in ``amps``, shape (batch, N, n, n)."""
    lo, hi = np.log(amps[0]), np.log(amps[1])
    out = np.empty((batch,) + Q.data.shape, complex)
    for b in range(batch):
        out[b] = Q.data + smooth_noise(rng, Q.grid, Q.ncomp, np.exp(rng.uniform(lo, hi)))
    return out


def random_group_params(rng, N, ranges=GROUP_RANGES):
    """Modulation parameter vector (lam, gamma_1..N, xt1, xt2, xi1, xi2) inside ``ranges``."""
    return np.concatenate([
        [np.exp(rng.uniform(-ranges["log_lam"], ranges["log_lam"]))],
        rng.uniform(-ranges["phase"], ranges["phase"], N),
        rng.uniform(-ranges["shift"], ranges["shift"], 2),
        rng.uniform(-ranges["boost"], ranges["boost"], 2),
    ])
