# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels for the cubic coupling.

Arrays are stacked fields of shape (components, n, n), C-contiguous complex128.
"""
from libc.math cimport cos, sin

import numpy as np


def density(const double complex[:, :, ::1] u):
    """Total intensity sum_j |u_j|^2 at every grid point."""
    cdef Py_ssize_t c, i, k
    cdef Py_ssize_t nc = u.shape[0], n0 = u.shape[1], n1 = u.shape[2]
    out = np.zeros((n0, n1), dtype=np.float64)
    cdef double[:, ::1] rho = out
    with nogil:
        for c in range(nc):
            for i in range(n0):
                for k in range(n1):
                    rho[i, k] += u[c, i, k].real * u[c, i, k].real + u[c, i, k].imag * u[c, i, k].imag
    return out


def coupling_closed(const double complex[:, :, ::1] u):
    """F_j = (2 sum_k |u_k|^2 - |u_j|^2) u_j."""
    cdef Py_ssize_t c, i, k
    cdef Py_ssize_t nc = u.shape[0], n0 = u.shape[1], n1 = u.shape[2]
    cdef double a2, pot
    cdef double[:, ::1] rho = density(u)
    out = np.empty((nc, n0, n1), dtype=np.complex128)
    cdef double complex[:, :, ::1] f = out
    with nogil:
        for c in range(nc):
            for i in range(n0):
                for k in range(n1):
                    a2 = u[c, i, k].real * u[c, i, k].real + u[c, i, k].imag * u[c, i, k].imag
                    pot = 2.0 * rho[i, k] - a2
                    f[c, i, k] = pot * u[c, i, k]
    return out


def coupling_triples(const double complex[:, :, ::1] u, const long long[:, ::1] triples):
    """Resonance sum out[j] += u[j1] conj(u[j2]) u[j3] over rows (j, j1, j2, j3).

    Indices are component offsets (0-based positions in the stack).
    """
    cdef Py_ssize_t r, i, k, j, j1, j2, j3
    cdef Py_ssize_t nr = triples.shape[0], n0 = u.shape[1], n1 = u.shape[2]
    cdef double complex a, b, c
    out = np.zeros((u.shape[0], n0, n1), dtype=np.complex128)
    cdef double complex[:, :, ::1] f = out
    with nogil:
        for r in range(nr):
            j = triples[r, 0]
            j1 = triples[r, 1]
            j2 = triples[r, 2]
            j3 = triples[r, 3]
            for i in range(n0):
                for k in range(n1):
                    a = u[j1, i, k]
                    b = u[j2, i, k]
                    c = u[j3, i, k]
                    f[j, i, k] = f[j, i, k] + a * b.conjugate() * c
    return out


def phase_rotate(double complex[:, :, ::1] u, double dt):
    """In place: u_j <- u_j exp(i dt (2 sum_k |u_k|^2 - |u_j|^2))."""
    cdef Py_ssize_t c, i, k
    cdef Py_ssize_t nc = u.shape[0], n0 = u.shape[1], n1 = u.shape[2]
    cdef double rho, a2, th, cs, sn, re, im
    with nogil:
        for i in range(n0):
            for k in range(n1):
                rho = 0.0
                for c in range(nc):
                    rho = rho + u[c, i, k].real * u[c, i, k].real + u[c, i, k].imag * u[c, i, k].imag
                for c in range(nc):
                    re = u[c, i, k].real
                    im = u[c, i, k].imag
                    a2 = re * re + im * im
                    th = dt * (2.0 * rho - a2)
                    cs = cos(th)
                    sn = sin(th)
                    u[c, i, k] = (re * cs - im * sn) + (re * sn + im * cs) * 1j
