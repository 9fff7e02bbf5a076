"""Cubic coupling for the finite system and the resonant (infinitely coupled) system."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DomainError
from .grid import dealias as _dealias


@dataclass(frozen=True)
class ResonanceSet:
    """Index triples (j1, j2, j3) with j1 - j2 + j3 = j and j1^2 - j2^2 + j3^2 = j^2."""

    center: int
    triples: tuple


def resonance_set(j, Jmax):
    """Resonant triples for index ``j`` with every index inside [-Jmax, Jmax].

    The two constraints force one of j1 - j and j3 - j to vanish, so the set is
    {(j, k, k)} together with {(k, k, j)}.
    """
    j, Jmax = int(j), int(Jmax)
    if Jmax < 0 or abs(j) > Jmax:
        raise DomainError(f"|j| = {abs(j)} exceeds Jmax = {Jmax}")
    ks = range(-Jmax, Jmax + 1)
    found = {(j, k, k) for k in ks} | {(k, k, j) for k in ks}
    return ResonanceSet(j, tuple(sorted(found)))


@lru_cache(maxsize=32)
def _triple_table(Jmax):
    rows = []
    for j in range(-Jmax, Jmax + 1):
        for j1, j2, j3 in resonance_set(j, Jmax).triples:
            rows.append((j + Jmax, j1 + Jmax, j2 + Jmax, j3 + Jmax))
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def coupling_potential(u):
    """Real potential V_j = 2 sum_k |u_k|^2 - |u_j|^2, so that F_j = V_j u_j."""
    a2 = u.data.real**2 + u.data.imag**2
    return 2.0 * a2.sum(axis=0) - a2


def apply_nonlinearity(u, method=None, dealias=False):
    """Coupling F(u), evaluated pointwise in physical space.

    Finite mode uses the closed form.  Resonant mode sums u_{j1} conj(u_{j2}) u_{j3}
    over the truncated resonance sets unless ``method="closed"`` is given.
    ``dealias`` applies the two-thirds rule to the product.
    """
    if method is None:
        method = "closed" if u.mode == "finite" else "triples"
    if method == "closed":
        out = kernels.coupling_closed(u.data)
    elif method == "triples":
        if u.mode != "resonant":
            raise DomainError("triple summation needs a resonant-mode field")
        out = kernels.coupling_triples(u.data, _triple_table(u.Jmax))
    else:
        raise DomainError(f"unknown method {method!r}")
    res = u.like(out)
    return _dealias(res) if dealias else res
