"""Pure numpy implementations of the pointwise coupling kernels.

Same signatures and semantics as the compiled ``_kernels`` module.
"""
import numpy as np


def density(u):
    """Total intensity sum_j |u_j|^2 at every grid point."""
    return np.sum(u.real**2 + u.imag**2, axis=0)


def coupling_closed(u):
    """F_j = (2 sum_k |u_k|^2 - |u_j|^2) u_j."""
    a2 = u.real**2 + u.imag**2
    return (2.0 * a2.sum(axis=0) - a2) * u


def coupling_triples(u, triples):
    """Resonance sum out[j] += u[j1] conj(u[j2]) u[j3] over rows (j, j1, j2, j3)."""
    out = np.zeros_like(u)
    for j, j1, j2, j3 in np.asarray(triples):
        out[j] += u[j1] * np.conj(u[j2]) * u[j3]
    return out


def phase_rotate(u, dt):
    """In place: u_j <- u_j exp(i dt (2 sum_k |u_k|^2 - |u_j|^2))."""
    a2 = u.real**2 + u.imag**2
    u *= np.exp(1j * dt * (2.0 * a2.sum(axis=0) - a2))
