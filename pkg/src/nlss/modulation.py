"""Modulation decomposition near the ground-state orbit and parameter tracking.

Frame convention: for parameters p = (lam, gamma_1..gamma_N, xt_1, xt_2, xi_1, xi_2)
the normalized field is

    g_j(x) = e^{i gamma_j} e^{i x.xi} lam u_j(lam x + xt),     eps = g - Q,

so ``lam`` is the width of ``u`` relative to Q and decreases toward a collapse.
The N+5 conditions pair eps (real pairing) with the chi0-vector, with
i chi0 on each component, and with d_l Q and i d_l Q.

Pairings are evaluated after the substitution y = lam x + xt:

    <g, d> = (1/lam) Re sum_j int e^{i gamma_j} e^{i z.xi} u_j(y) conj(d_j(z)) dy,
    z = (y - xt)/lam,

so ``u`` is only ever used at its own grid points while the smooth radial
functions Q0 and chi0 are evaluated at z through quintic Hermite tables.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError
from .functionals import mass
from .grid import FieldVec, evaluate_affine, fft2
from .groundstate import RadialTable, build_Q_vector
from .symmetry import GroupElement, apply_group

BASIN_FRACTION = 0.25
MAX_HALVINGS = 8
LOG_SCALE_RANGE = 6.0


def params_from_group(g, N):
    """Frame parameters p with g_j = Q exactly when u = apply_group(g, Q)."""
    lam = 1.0 / g.lam
    gam = -g.phases(N)
    xt = np.asarray(g.x0) * lam
    xi = -np.asarray(g.xi0)
    return np.concatenate([[lam], gam, xt, xi])


def group_from_params(p, N):
    lam = p[0]
    return GroupElement(lam=1.0 / lam, x0=tuple(np.asarray(p[N + 1:N + 3]) / lam),
                        xi0=tuple(-np.asarray(p[N + 3:N + 5])), gamma=tuple(-np.asarray(p[1:N + 1])))


def identity_params(N):
    p = np.zeros(N + 5)
    p[0] = 1.0
    return p


@dataclass
class ModulationState:
    lam: float
    gamma: np.ndarray
    xtilde: np.ndarray
    xi: np.ndarray
    eps: FieldVec
    ortho_residuals: np.ndarray
    converged: bool
    eps_l2: float = float("nan")
    alpha: float = float("nan")
    iterations: int = 0

    @property
    def params(self):
        return np.concatenate([[self.lam], self.gamma, self.xtilde, self.xi])

    @property
    def gamma_reduced(self):
        return np.mod(self.gamma, 2.0 * np.pi)

    def as_group(self):
        return group_from_params(self.params, len(self.gamma))


@dataclass
class ModulationSeries:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    s_values: list = field(default_factory=list)
    exit_index: int | None = None
    exit_reason: str = ""

    def column(self, name):
        if name == "lambda":
            return np.array([st.lam for st in self.states])
        if name == "eps_l2":
            return np.array([st.eps_l2 for st in self.states])
        raise KeyError(name)

    def write_csv(self, path):
        N = len(self.states[0].gamma) if self.states else 0
        head = ["t", "s", "lambda", "xi_x", "xi_y", "xtilde_x", "xtilde_y"]
        head += [f"gamma_{j + 1}" for j in range(N)] + ["eps_l2", "alpha"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for t, s, st in zip(self.times, self.s_values, self.states):
                row = [t, s, st.lam, st.xi[0], st.xi[1], st.xtilde[0], st.xtilde[1], *st.gamma, st.eps_l2, st.alpha]
                w.writerow([repr(float(v)) for v in row])


class ModulationFrame:
    """Orthogonality map, its Jacobian and the orbit distance for one (Q, chi0, N)."""

    def __init__(self, gs, N, chi0, basin_fraction=BASIN_FRACTION, grid=None):
        self.gs, self.N = gs, int(N)
        self.grid = gs.grid if grid is None else grid
        self.q_table = RadialTable(gs.profile / np.sqrt(2 * N - 1), gs.grid)
        self.c_table = RadialTable(chi0, gs.grid)
        if self.grid.same_as(gs.grid):
            self.Q = build_Q_vector(gs, N)
        else:
            qt = self.q_table(np.sqrt(self.grid.r2))
            self.Q = FieldVec.finite(self.grid, np.repeat(qt[None].astype(complex), N, axis=0))
        self.Q_norm_sq = mass(self.Q)
        self.basin = basin_fraction * self.Q_norm_sq
        z1, z2 = self.grid.mesh
        f = self._radial(z1, z2)
        # <Q, chi0-vector> with the tabulated functions, consistent with the residual
        self.q_chi = float(self.grid.dx**2 * np.sum(f["q"] * f["c"]))

    @property
    def nparams(self):
        return self.N + 5

    def _radial(self, z1, z2):
        r = np.hypot(z1, z2)
        q, q1, q2 = self.q_table.evaluate(r)
        c, c1, c2 = self.c_table.evaluate(r)
        small = r < 1e-8
        rs = np.where(small, 1.0, r)
        pq = np.where(small, q2, q1 / rs)
        pc = np.where(small, c2, c1 / rs)
        return {"r": r, "z1": z1, "z2": z2, "q": q, "dq": q1, "ddq": q2, "pq": pq,
                "c": c, "dc": c1, "pc": pc, "rs2": rs * rs, "small": small}

    def _points(self, lam, xt):
        X1, X2 = self.grid.mesh
        return (X1 - xt[0]) / lam, (X2 - xt[1]) / lam

    def _weights(self, u, p):
        N = self.N
        lam, gam, xt, xi = p[0], p[1:N + 1], p[N + 1:N + 3], p[N + 3:N + 5]
        z1, z2 = self._points(lam, xt)
        W = np.exp(1j * gam)[:, None, None] * np.exp(1j * (z1 * xi[0] + z2 * xi[1]))[None] * u.data
        return W, z1, z2

    def _ints(self, W, S, lam):
        """a_j[s] = (1/lam) int W_j s dy for every s in S -> (N, len(S))."""
        S = np.stack(S)
        return (self.grid.dx**2 / lam) * np.einsum("jab,sab->js", W, S)

    def _base(self, f):
        """Scalar functions paired in the residual: chi0, d1 q, d2 q."""
        return [f["c"], f["pq"] * f["z1"], f["pq"] * f["z2"]]

    def residual(self, u, p):
        W, z1, z2 = self._weights(u, p)
        f = self._radial(z1, z2)
        a = self._ints(W, self._base(f), p[0])
        A = a.sum(axis=0)
        N = self.N
        r = np.empty(N + 5)
        r[0] = A[0].real - N * self.q_chi
        r[1:N + 1] = a[:, 0].imag
        r[N + 1:N + 3] = A[1:3].real
        r[N + 3:N + 5] = A[1:3].imag
        return r

    def residual_and_jacobian(self, u, p):
        N = self.N
        lam, xi = p[0], p[N + 3:N + 5]
        W, z1, z2 = self._weights(u, p)
        f = self._radial(z1, z2)
        zs = (z1, z2)
        base = self._base(f)
        # gradients of each base function and z.grad of each
        grads = [
            (f["pc"] * z1, f["pc"] * z2),
        ]
        zgrad = [f["r"] * f["dc"]]
        h = np.where(f["small"], 0.0, (f["ddq"] - f["pq"]) / f["rs2"])
        for m in range(2):
            zm = zs[m]
            grads.append(tuple(h * zs[l] * zm + (f["pq"] if l == m else 0.0) for l in range(2)))
            zgrad.append(f["ddq"] * zm)
        S = list(base)
        idx = {}
        for b in range(3):
            zx = zs[0] * xi[0] + zs[1] * xi[1]
            for key, arr in (("zxi", zx * base[b]), ("zgrad", zgrad[b]), ("g1", grads[b][0]),
                             ("g2", grads[b][1]), ("z1", z1 * base[b]), ("z2", z2 * base[b])):
                idx[(b, key)] = len(S)
                S.append(arr)
        a = self._ints(W, S, lam)

        def d_all(b, X):
            """Derivatives of X[s_b] w.r.t. (lam, xt1, xt2, xi1, xi2); X maps an S-index to a value."""
            v = X(b)
            dlam = -v / lam - 1j / lam * X(idx[(b, "zxi")]) - X(idx[(b, "zgrad")]) / lam
            dxt = [-(1j * xi[l] / lam) * v - X(idx[(b, "g%d" % (l + 1))]) / lam for l in range(2)]
            dxi = [1j * X(idx[(b, "z%d" % (l + 1))]) for l in range(2)]
            return dlam, dxt, dxi

        A = a.sum(axis=0)
        r = np.empty(N + 5)
        J = np.zeros((N + 5, N + 5))

        def fill(row, take, b, X, gamma_cols):
            dlam, dxt, dxi = d_all(b, X)
            J[row, 0] = take(dlam)
            J[row, N + 1:N + 3] = [take(v) for v in dxt]
            J[row, N + 3:N + 5] = [take(v) for v in dxi]
            for k, val in gamma_cols:
                J[row, 1 + k] = take(val)

        re, im = np.real, np.imag
        r[0] = A[0].real - N * self.q_chi
        fill(0, re, 0, lambda s: A[s], [(k, 1j * a[k, 0]) for k in range(N)])
        for j in range(N):
            r[1 + j] = a[j, 0].imag
            fill(1 + j, im, 0, lambda s, j=j: a[j, s], [(j, 1j * a[j, 0])])
        for m in range(2):
            b = 1 + m
            r[N + 1 + m] = A[b].real
            fill(N + 1 + m, re, b, lambda s: A[s], [(k, 1j * a[k, b]) for k in range(N)])
            r[N + 3 + m] = A[b].imag
            fill(N + 3 + m, im, b, lambda s: A[s], [(k, 1j * a[k, b]) for k in range(N)])
        return r, J

    def orbit_jacobian(self):
        """Block-diagonal Jacobian at u = Q and identity parameters, from closed forms."""
        N, grid = self.N, self.grid
        q = self.Q.data[0].real
        X1, X2 = grid.mesh
        from .grid import gradient as grad
        d1, d2 = grad(q.astype(complex), grid)
        d1, d2 = d1.real, d2.real
        chi = self.c_table(np.hypot(X1, X2))
        ip = lambda a, b: float(grid.dx**2 * np.sum(a * b))
        J = np.zeros((N + 5, N + 5))
        J[0, 0] = N * ip(q + X1 * d1 + X2 * d2, chi)
        for j in range(N):
            J[1 + j, 1 + j] = ip(q, chi)
        for m, dm in enumerate((d1, d2)):
            J[N + 1 + m, N + 1 + m] = N * ip(dm, dm)
            J[N + 3 + m, N + 3 + m] = N * ip((X1, X2)[m] * q, dm)
        return J

    # -- distance to the orbit ---------------------------------------------------

    def overlap(self, u, lam, xt, xi):
        """Per-component complex overlaps a_j = int g_j(gamma=0) q dx."""
        p = np.concatenate([[lam], np.zeros(self.N), xt, xi])
        W, z1, z2 = self._weights(u, p)
        f = self._radial(z1, z2)
        return self._ints(W, [f["q"]], lam)[:, 0]

    def distance_sq_at(self, u, p, optimal_phases=True):
        """sum_j ||g_j - Q_j||^2 at parameters p (phases optimized if requested)."""
        N = self.N
        a = self.overlap(u, p[0], p[N + 1:N + 3], p[N + 3:N + 5])
        if optimal_phases:
            cross = np.sum(np.abs(a))
        else:
            cross = np.sum((np.exp(1j * p[1:N + 1]) * a).real)
        return float(mass(u) + self.Q_norm_sq - 2.0 * cross)

    def _reduced(self, v, u):
        # v = (log lam, xt1, xt2, xi1, xi2); returns objective and gradient
        lam = np.exp(v[0])
        xt, xi = v[1:3], v[3:5]
        p = np.concatenate([[lam], np.zeros(self.N), xt, xi])
        W, z1, z2 = self._weights(u, p)
        f = self._radial(z1, z2)
        q = f["q"]
        S = [q, q * (z1 * xi[0] + z2 * xi[1]), f["r"] * f["dq"], f["pq"] * z1, f["pq"] * z2, z1 * q, z2 * q]
        a = self._ints(W, S, lam)
        aj = a[:, 0]
        mod = np.abs(aj)
        val = mass(u) + self.Q_norm_sq - 2.0 * np.sum(mod)
        wgt = np.where(mod > 0, np.conj(aj) / np.where(mod > 0, mod, 1.0), 0.0)
        dlam = -aj / lam - 1j / lam * a[:, 1] - a[:, 2] / lam
        dxt = [-(1j * xi[l] / lam) * aj - a[:, 3 + l] / lam for l in range(2)]
        dxi = [1j * a[:, 5 + l] for l in range(2)]
        g = np.empty(5)
        g[0] = -2.0 * np.sum((wgt * dlam).real) * lam
        for l in range(2):
            g[1 + l] = -2.0 * np.sum((wgt * dxt[l]).real)
            g[3 + l] = -2.0 * np.sum((wgt * dxi[l]).real)
        return float(val), g

    def local_distance(self, u, p0, maxiter=200):
        """Local descent of the orbit distance from frame parameters p0."""
        N = self.N
        v0 = np.concatenate([[np.log(p0[0])], p0[N + 1:N + 3], p0[N + 3:N + 5]])
        # the scale stays within a factor e^6 of the starting point
        bounds = [(v0[0] - LOG_SCALE_RANGE, v0[0] + LOG_SCALE_RANGE)] + [(None, None)] * 4
        res = minimize(self._reduced, v0, args=(u,), jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12})
        v = res.x
        lam, xt, xi = np.exp(v[0]), v[1:3], v[3:5]
        a = self.overlap(u, lam, xt, xi)
        p = np.concatenate([[lam], -np.angle(a), xt, xi])
        return max(float(res.fun), 0.0), p

    def initial_estimates(self, u):
        """Parameter guesses from intensity centroid, rms width and spectral centroid."""
        grid = self.grid
        rho = np.sum(np.abs(u.data) ** 2, axis=0)
        m = rho.sum()
        if m == 0:
            raise DomainError("zero field has no orbit parameters")
        X1, X2 = grid.mesh
        c = np.array([np.sum(X1 * rho), np.sum(X2 * rho)]) / m
        w2 = np.sum(((X1 - c[0]) ** 2 + (X2 - c[1]) ** 2) * rho) / m
        rq = np.sum(np.abs(self.Q.data) ** 2, axis=0)
        wq2 = np.sum(grid.r2 * rq) / rq.sum()
        lam = float(np.sqrt(w2 / wq2))
        p = np.abs(fft2(u.data)) ** 2
        p = p.sum(axis=0)
        K1, K2 = grid.kmesh
        kc = np.array([np.sum(K1 * p), np.sum(K2 * p)]) / p.sum()
        return lam, c, -lam * kc

    def distance_to_orbit(self, u, restarts=5):
        """Best value found of inf ||g - Q||^2 over the N+5 parameters (an upper bound)."""
        lam0, c, xi0 = self.initial_estimates(u)
        best, bestp = np.inf, None
        scales = [lam0] if restarts <= 0 else lam0 * np.geomspace(0.5, 2.0, max(restarts, 1))
        for lam in scales:
            p0 = np.concatenate([[lam], np.zeros(self.N), c, xi0])
            d, p = self.local_distance(u, p0)
            if d < best:
                best, bestp = d, p
        return best, bestp

    # -- Newton decomposition ----------------------------------------------------

    def _basin_start(self, u, p):
        """Orbit-distance minimizer near p, or an error if even that lies outside the basin."""
        d, p2 = self.local_distance(u, p)
        if d > self.basin:
            raise ConvergenceError(f"field outside the modulation basin: distance {d:.3e} > {self.basin:.3e}",
                                   residuals=np.array([d]))
        return p2

    def _newton(self, u, p, tol, max_iters):
        """Damped Newton iteration on the orthogonality conditions from p."""
        scale = np.sqrt(self.Q_norm_sq)
        r, J = self.residual_and_jacobian(u, p)
        for it in range(1, max_iters + 1):
            if np.max(np.abs(r)) < tol * scale:
                return p, r, it
            try:
                step = -np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(J, r, rcond=None)[0]
            rn = np.linalg.norm(r)
            t = 1.0
            for _ in range(MAX_HALVINGS + 1):
                pn = p + t * step
                if pn[0] > 0:
                    rn_new, Jn = self.residual_and_jacobian(u, pn)
                    if np.linalg.norm(rn_new) < rn:
                        break
                t *= 0.5
            else:
                raise ConvergenceError("Newton step failed to reduce the orthogonality residual", residuals=r)
            p, r, J = pn, rn_new, Jn
            if not (0 < p[0] < np.inf):
                raise ConvergenceError("scale parameter left (0, inf)", residuals=r)
        if np.max(np.abs(r)) < tol * scale:
            return p, r, max_iters
        raise ConvergenceError(f"no convergence in {max_iters} Newton iterations", residuals=r)

    def decompose(self, u, guess=None, tol=1e-11, max_iters=50, compute_eps=True, check_basin=True):
        """Solve the N+5 orthogonality conditions by damped Newton iteration.

        With ``check_basin`` the start is replaced by the nearby orbit-distance
        minimizer when the guess lies outside the basin, and a root outside the
        basin (a spurious solution of the conditions) triggers one restart from
        that minimizer before an error is raised.
        """
        if u.mode != "finite" or u.ncomp != self.N:
            raise DomainError(f"expected a finite-mode field with {self.N} components")
        N = self.N
        if guess is None:
            p0 = identity_params(N)
        elif isinstance(guess, GroupElement):
            p0 = params_from_group(guess, N)
        else:
            p0 = np.array(guess, dtype=float)
        gref = p0[1:N + 1].copy()
        p = p0
        restarted = False
        if check_basin and self.distance_sq_at(u, p0) > self.basin:
            p, restarted = self._basin_start(u, p0), True
        try:
            p, r, it = self._newton(u, p, tol, max_iters)
            outside = check_basin and self.distance_sq_at(u, p) > self.basin
        except ConvergenceError:
            if not check_basin or restarted:
                raise
            outside = True
        if outside:
            if restarted:
                raise ConvergenceError("Newton converged outside the modulation basin", residuals=r)
            p, r, it = self._newton(u, self._basin_start(u, p0), tol, max_iters)
            if self.distance_sq_at(u, p) > self.basin:
                raise ConvergenceError("Newton converged outside the modulation basin", residuals=r)
        # phase representative nearest the guess
        p = p.copy()
        p[1:N + 1] = gref + np.angle(np.exp(1j * (p[1:N + 1] - gref)))
        lam, gam, xt, xi = p[0], p[1:N + 1].copy(), p[N + 1:N + 3].copy(), p[N + 3:N + 5].copy()
        cross = np.sum((np.exp(1j * gam) * self.overlap(u, lam, xt, xi)).real)
        eps_sq = max(mass(u) + self.Q_norm_sq - 2.0 * cross, 0.0)
        eps = None
        if compute_eps:
            eps = self.frame_field(u, p)
            eps = eps.like(eps.data - self.Q.data)
            eps_sq = float(np.sum(eps.component_masses()))
        return ModulationState(lam, gam, xt, xi, eps, r, True, float(np.sqrt(eps_sq)), iterations=it)

    def frame_field(self, u, p):
        """g_j = e^{i gamma_j} e^{i x.xi} lam u_j(lam x + xt) on the grid (band-limited resampling)."""
        N = self.N
        lam, gam, xt, xi = p[0], p[1:N + 1], p[N + 1:N + 3], p[N + 3:N + 5]
        w = evaluate_affine(u, lam, xt)
        X1, X2 = self.grid.mesh
        ph = np.exp(1j * (X1 * xi[0] + X2 * xi[1]))
        return u.like(lam * np.exp(1j * gam)[:, None, None] * ph[None] * w.data)

    def orbit_point(self, p):
        """The field u with frame image exactly Q at parameters p."""
        return apply_group(group_from_params(p, self.N), self.Q)


def decompose(u, frame, guess=None, tol=1e-11):
    return frame.decompose(u, guess, tol)


def distance_to_orbit(u, frame, restarts=5):
    """Numerical infimum of the orbit distance; the returned value is an upper bound."""
    return frame.distance_to_orbit(u, restarts)[0]


def _unwrap_to(prev, cur):
    return prev + np.angle(np.exp(1j * (cur - prev)))


def track(traj, frame, tol=1e-10, compute_eps=False, with_alpha=False):
    """Decompose each snapshot of ``traj`` (pairs (t, u)) warm-starting from the previous one.

    A basin exit stops the series; ``exit_index`` then marks the failing snapshot.
    """
    series = ModulationSeries()
    guess = None
    for i, (t, u) in enumerate(traj):
        if guess is None:
            lam0, c, xi0 = frame.initial_estimates(u)
            _, guess = frame.local_distance(u, np.concatenate([[lam0], np.zeros(frame.N), c, xi0]))
        try:
            st = frame.decompose(u, guess, tol, compute_eps=compute_eps)
        except ConvergenceError as exc:
            series.exit_index = i
            series.exit_reason = str(exc)
            break
        if series.states:
            st.gamma = _unwrap_to(series.states[-1].gamma, st.gamma)
        if with_alpha:
            st.alpha = frame.local_distance(u, st.params)[0]
        series.times.append(float(t))
        series.states.append(st)
        guess = st.params
    lam = np.array([st.lam for st in series.states])
    t = np.array(series.times)
    if len(t):
        inc = 0.5 * (lam[1:] ** -2 + lam[:-1] ** -2) * np.diff(t)
        series.s_values = list(np.concatenate([[0.0], np.cumsum(inc)]))
    return series


@dataclass
class MonotonicityReport:
    sup_ratio: float
    witness_s: float


def lambda_monotonicity(series):
    """sup of lam(s)/inf_{tau <= s} lam(tau) and where it is attained."""
    if not series.states:
        raise DomainError("empty series")
    lam = series.column("lambda")
    run = np.minimum.accumulate(lam)
    ratio = lam / run
    i = int(np.argmax(ratio))
    return MonotonicityReport(float(ratio[i]), float(series.s_values[i]))
