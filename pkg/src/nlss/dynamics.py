"""Strang-split pseudospectral time stepping with conservation monitoring.

One step is e^{i(dt/2)Delta} N(dt) e^{i(dt/2)Delta}: the linear parts are exact
Fourier multipliers and N(dt) is the exact pointwise flow of i u_t = -F(u).
Every component of F is a real multiple of u_j (F_j = V_j u_j with the real
potential V_j = 2 sum_k |u_k|^2 - |u_j|^2), so the nonlinear flow keeps each
|u_j| fixed and is the phase rotation u_j <- u_j exp(i dt V_j).  This holds in
the resonant mode too, because the truncated resonance sum equals the same
closed form.

Consecutive linear half steps are merged, so a run costs one forward and one
inverse transform per step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BlowupDetected, ConfigurationError, ConvergenceError, MassDriftError
from .functionals import ConservedSet, conserved, energy, mass, weighted_mass
from .grid import FieldVec, fft2, ifft2, make_grid, spectral_tail_fraction

MASS_ABORT = 1e-6
DEFAULT_CAP = 0.1
RESOLUTION_TAIL = 0.01
MONITORS = ("mass", "energy", "weighted_masses", "centroid", "width", "spec_tail")
SERIES_COLUMNS = ("t", "mass", "energy", "m010", "m001", "centroid_x", "centroid_y", "width", "spec_tail_frac")


@dataclass
class StepPolicy:
    """Base step ``dt``; with ``adapt`` each step also obeys dt * ||u||^2_{L-inf l2} <= cap."""

    dt: float = 1e-3
    adapt: bool = False
    cfl_like_cap: float = DEFAULT_CAP
    linear_only: bool = False
    dealias: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.cfl_like_cap > 0:
            raise ConfigurationError("cfl_like_cap must be positive")

    def step_size(self, rho_max, remaining):
        h = self.dt
        if self.adapt and rho_max > 0:
            h = min(h, self.cfl_like_cap / rho_max)
        return min(h, remaining)


@dataclass
class SimState:
    t: float
    u: FieldVec
    step_count: int = 0
    conserved_at_start: ConservedSet = None

    @classmethod
    def start(cls, u, t=0.0):
        return cls(float(t), u, 0, conserved(u))

    def mass_drift(self):
        m0 = self.conserved_at_start.mass if self.conserved_at_start else mass(self.u)
        return abs(mass(self.u) - m0) / m0 if m0 > 0 else 0.0


@dataclass
class ConservedSeries:
    """Monitor values at the output cadence."""

    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_COLUMNS)
            for r in self.rows:
                w.writerow(["" if not np.isfinite(r.get(c, np.nan)) else repr(float(r[c])) for c in SERIES_COLUMNS])


@dataclass
class EvolveResult:
    snapshots: list
    series: ConservedSeries
    state: SimState
    stop_reason: str = None


def _rho_max(arr):
    return float(np.max(kernels.density(arr)))


def _mass_of(arr, grid):
    return float(grid.dx**2 * np.sum(arr.real**2 + arr.imag**2))


class _Propagator:
    """exp(-i |k|^2 tau), optionally times the two-thirds mask, cached per tau."""

    def __init__(self, grid, dealias):
        self.k2 = grid.k2
        self.mask = None
        if dealias:
            K1, K2 = grid.kmesh
            cut = 2.0 / 3.0 * grid.k_max
            self.mask = (np.abs(K1) <= cut) & (np.abs(K2) <= cut)
        self._cache = {}

    def __call__(self, tau):
        f = self._cache.get(tau)
        if f is None:
            f = np.exp(-1j * self.k2 * tau)
            if self.mask is not None:
                f = f * self.mask
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[tau] = f
        return f

    def apply(self, arr, tau):
        if tau == 0.0 and self.mask is None:
            return arr
        return np.ascontiguousarray(ifft2(fft2(arr) * self(tau)))


def _nonlinear(arr, h, policy):
    if not policy.linear_only:
        kernels.phase_rotate(arr, h)
    return arr


def _fail_state(u0, arr, pending, prop, t, steps, start):
    """Finite state at time t from the array carrying ``pending`` linear time."""
    return SimState(t, u0.like(prop.apply(arr.copy(), pending)), steps, start)


def step_strang(state, dt, policy=None):
    """One Strang step of size ``dt`` from ``state``; returns a new SimState."""
    policy = StepPolicy(dt=dt) if policy is None else policy
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    u = state.u
    grid = u.grid
    start = state.conserved_at_start or conserved(u)
    prop = _Propagator(grid, policy.dealias)
    arr = prop.apply(np.array(u.data, dtype=np.complex128, order="C"), 0.5 * dt)
    arr = _nonlinear(np.ascontiguousarray(arr), dt, policy)
    m = _mass_of(arr, grid)
    if not math.isfinite(m):
        raise BlowupDetected(f"non-finite field at t = {state.t + dt:.6g}", state=state)
    arr = prop.apply(arr, 0.5 * dt)
    new = SimState(state.t + dt, u.like(arr), state.step_count + 1, start)
    if start.mass > 0 and abs(m - start.mass) / start.mass > MASS_ABORT:
        raise MassDriftError(f"relative mass drift {abs(m - start.mass) / start.mass:.2e} above {MASS_ABORT:g}",
                             state=new)
    return new


def monitor_values(u, t, monitors=MONITORS):
    """Row of monitor values for the conserved-series CSV."""
    row = {"t": float(t)}
    if "mass" in monitors:
        row["mass"] = mass(u)
    if "energy" in monitors:
        row["energy"] = energy(u)
    if "weighted_masses" in monitors and u.mode == "resonant":
        row["m100"] = weighted_mass(u, 1, 0, 0)
        row["m010"] = weighted_mass(u, 0, 1, 0)
        row["m001"] = weighted_mass(u, 0, 0, 1)
    if "centroid" in monitors or "width" in monitors:
        rho = np.sum(np.abs(u.data) ** 2, axis=0)
        X1, X2 = u.grid.mesh
        m = rho.sum()
        c1, c2 = (np.sum(X1 * rho) / m, np.sum(X2 * rho) / m) if m > 0 else (0.0, 0.0)
        if "centroid" in monitors:
            row["centroid_x"], row["centroid_y"] = float(c1), float(c2)
        if "width" in monitors:
            row["width"] = float(np.sqrt(np.sum(((X1 - c1) ** 2 + (X2 - c2) ** 2) * rho) / m)) if m > 0 else 0.0
    if "spec_tail" in monitors:
        row["spec_tail_frac"] = spectral_tail_fraction(u)
    return row


def _output_times(t0, t_end, cadence):
    if cadence is None or cadence >= t_end - t0:
        return [t_end]
    if not cadence > 0:
        raise ConfigurationError("cadence must be positive")
    k = int(math.floor((t_end - t0) / cadence + 1e-9))
    times = [t0 + i * cadence for i in range(1, k + 1)]
    if t_end - times[-1] > 1e-12 * max(1.0, abs(t_end)):
        times.append(t_end)
    else:
        times[-1] = t_end
    return times


def evolve(u0, t_end, policy, monitors=MONITORS, t0=0.0, cadence=None, store=True,
           on_snapshot=None, stop=None):
    """Evolve ``u0`` from ``t0`` to ``t_end``.

    Snapshots and monitor rows are taken at t0 and then every ``cadence``
    (default: only at the end).  ``on_snapshot(t, u)`` is called for each
    snapshot; ``stop(t, u)`` may return a reason string to end the run early.
    With ``store=False`` snapshots are not kept in memory.
    """
    if not t_end > t0:
        raise ConfigurationError(f"t_end must exceed the start time {t0}")
    grid = u0.grid
    prop = _Propagator(grid, policy.dealias)
    start = conserved(u0)
    m0 = start.mass
    arr = np.array(u0.data, dtype=np.complex128, order="C")
    t, steps, pending = float(t0), 0, 0.0
    snaps, series = [], ConservedSeries()

    def emit(t_now, field):
        if store:
            snaps.append((t_now, field))
        series.rows.append(monitor_values(field, t_now, monitors))
        if on_snapshot is not None:
            on_snapshot(t_now, field)
        return stop(t_now, field) if stop is not None else None

    reason = emit(t, u0.copy())
    if reason is not None:
        return EvolveResult(snaps, series, SimState(t, u0.copy(), 0, start), reason)
    for target in _output_times(t0, t_end, cadence):
        tol = 1e-13 * max(1.0, abs(target))
        while target - t > tol:
            h = policy.step_size(_rho_max(arr), target - t)
            prev, prev_pending, prev_t = arr, pending, t
            arr = prop.apply(arr, pending + 0.5 * h)
            if arr is prev:
                arr = arr.copy()
            _nonlinear(arr, h, policy)
            t += h
            steps += 1
            pending = 0.5 * h
            m = _mass_of(arr, grid)
            if not math.isfinite(m):
                raise BlowupDetected(f"non-finite field at t = {t:.6g}",
                                     state=_fail_state(u0, prev, prev_pending, prop, prev_t, steps - 1, start))
            if m0 > 0 and abs(m - m0) / m0 > MASS_ABORT:
                raise MassDriftError(f"relative mass drift {abs(m - m0) / m0:.2e} above {MASS_ABORT:g} at t = {t:.6g}",
                                     state=_fail_state(u0, arr, pending, prop, t, steps, start))
        t = target
        arr = prop.apply(arr, pending)
        pending = 0.0
        reason = emit(t, u0.like(arr.copy()))
        if reason is not None:
            break
    return EvolveResult(snaps, series, SimState(t, u0.like(arr), steps, start), reason)


# -- convergence studies ------------------------------------------------------------

def _l2(a, grid):
    return float(np.sqrt(grid.dx**2 * np.sum(np.abs(a) ** 2)))


def _observed_orders(errors):
    return [float(np.log2(errors[i] / errors[i + 1])) for i in range(len(errors) - 1)]


def convergence_study(scenario, h=None, N=2, L=None, n=None, gs=None):
    """Observed Strang order from runs at dt in {4h, 2h, h}.

    Scenarios: ``soliton`` (error against the closed form at t = 1),
    ``linear`` (a single Fourier mode with the nonlinearity off; exact up to
    round-off, so no order is reported) and ``pseudosoliton`` (approach from
    T - 0.6 to T - 0.2 with the step cap scaled with h; orders from
    successive differences).
    """
    from .groundstate import cached_ground_state
    from .symmetry import exact_pseudosoliton, exact_soliton

    if scenario == "linear":
        L, n = L or 16.0, n or 64
        grid = make_grid(L, n)
        kvec = 2 * np.pi / (2 * L) * np.array([3.0, -2.0])
        X1, X2 = grid.mesh
        u0 = FieldVec.finite(grid, np.exp(1j * (kvec[0] * X1 + kvec[1] * X2))[None])
        errs, dts = [], []
        for dt in (4 * (h or 1e-2), 2 * (h or 1e-2), h or 1e-2):
            res = evolve(u0, 1.0, StepPolicy(dt=dt, linear_only=True))
            exact = u0.data * np.exp(-1j * (kvec @ kvec) * 1.0)
            errs.append(_l2(res.state.u.data - exact, grid))
            dts.append(dt)
        return {"scenario": scenario, "dts": dts, "errors": errs, "orders": [], "exact": True}

    if scenario == "soliton":
        h = h or 2e-3
        gs = gs or cached_ground_state(L or 16.0, n or 256)
        dk = np.pi / gs.grid.L
        params = dict(lam=1.0, gamma=np.linspace(0.0, 1.0, N), xtilde=(0.5, -0.25), xi=(2 * dk, -dk))
        u0 = exact_soliton(gs, N, t=0.0, **params)
        exact = exact_soliton(gs, N, t=1.0, **params)
        errs, dts = [], [4 * h, 2 * h, h]
        for dt in dts:
            res = evolve(u0, 1.0, StepPolicy(dt=dt), monitors=())
            errs.append(_l2(res.state.u.data - exact.data, gs.grid))
        return {"scenario": scenario, "dts": dts, "errors": errs, "orders": _observed_orders(errs), "exact": False}

    if scenario == "pseudosoliton":
        h = h or 2e-3
        gs = gs or cached_ground_state(16.0, 512)
        grid = make_grid(L or 8.0, n or 512)
        T, t0, t1 = 0.0, -0.6, -0.2
        u0 = exact_pseudosoliton(gs, N, lam=1.0, T=T, t=t0, grid=grid)
        rho0 = _rho_max(u0.data)
        finals, dts = [], [4 * h, 2 * h, h]
        for dt in dts:
            # dt_n = dt * min(1, rho(0)/rho(t)): the step shrinks with the amplitude but scales with h
            res = evolve(u0, t1, StepPolicy(dt=dt, adapt=True, cfl_like_cap=dt * rho0), monitors=(), t0=t0)
            finals.append(res.state.u.data)
        diffs = [_l2(finals[0] - finals[1], grid), _l2(finals[1] - finals[2], grid)]
        exact = exact_pseudosoliton(gs, N, lam=1.0, T=T, t=t1, grid=grid)
        return {"scenario": scenario, "dts": dts, "errors": diffs, "orders": _observed_orders(diffs),
                "error_vs_closed_form": _l2(finals[2] - exact.data, grid), "exact": False}

    raise ConfigurationError(f"unknown convergence scenario {scenario!r}")


# -- blowup runs ---------------------------------------------------------------------

@dataclass
class BlowupReport:
    """Rate fit lam(t) = c (T_fit - t) over the resolved part of a run."""

    series: object
    c: float
    T_fit: float
    residual: float
    ratio_spread: float
    stop_reason: str
    resolution_exhausted: bool
    masses: np.ndarray
    widths: np.ndarray
    times: np.ndarray
    monotonicity: object = None

    def to_json(self):
        return {
            "c": self.c, "T_fit": self.T_fit, "fit_residual": self.residual,
            "lambda_over_tau_spread": self.ratio_spread, "stop_reason": self.stop_reason,
            "resolution_exhausted": self.resolution_exhausted,
            "snapshots": int(len(self.times)),
            "mass_min": float(np.min(self.masses)), "mass_max": float(np.max(self.masses)),
            "width_first": float(self.widths[0]), "width_last": float(self.widths[-1]),
            "lambda_sup_ratio": None if self.monotonicity is None else self.monotonicity.sup_ratio,
        }


def fit_collapse_rate(t, lam):
    """Least-squares line lam = c (T_fit - t); returns (c, T_fit, max relative residual)."""
    t, lam = np.asarray(t, float), np.asarray(lam, float)
    if len(t) < 3:
        return float("nan"), float("nan"), float("nan")
    b, a = np.polyfit(t, lam, 1)
    c = -b
    T_fit = a / c if c != 0 else float("inf")
    res = float(np.max(np.abs(a + b * t - lam) / np.abs(lam)))
    return float(c), float(T_fit), res


def blowup_run(gs, N, lam=2.0, gamma=None, xtilde=(0.0, 0.0), centre=(0.0, 0.0), T=0.0, t_start=-1.0,
               stop_width=None, grid=None, policy=None, cadence=0.02, chi0=None, u0=None, t_end=None,
               frame=None):
    """Evolve a pseudosoliton (or ``u0``) toward collapse and track the modulation parameters.

    The run stops when the rms width falls below ``stop_width`` (default
    8 dx), when more than 1% of the spectral mass sits above 0.9 k_max
    (resolution exhausted), or at ``t_end``.  The rate fit uses every tracked
    snapshot before the stop.
    """
    from .linearized import scalar_chi0
    from .modulation import ModulationFrame, ModulationSeries, _unwrap_to, lambda_monotonicity, track
    from .symmetry import exact_pseudosoliton

    grid = grid or make_grid(8.0, 1024)
    if stop_width is None:
        stop_width = 8.0 * grid.dx
    if t_end is None:
        t_end = T - 1e-3 * (T - t_start) if u0 is None else t_start + 1.0
    if not t_start < t_end:
        raise ConfigurationError("t_start must precede t_end")
    if u0 is None:
        u0 = exact_pseudosoliton(gs, N, lam=lam, gamma=gamma, xtilde=xtilde, xi=centre, T=T, t=t_start, grid=grid)
    policy = policy or StepPolicy(dt=5e-3, adapt=True, cfl_like_cap=DEFAULT_CAP)
    if frame is None:
        if chi0 is None:
            chi0 = scalar_chi0(gs)[1]
        frame = ModulationFrame(gs, N, chi0, grid=grid)

    # snapshots are decomposed as they are produced, warm-starting from the previous one
    series = ModulationSeries()

    def stream(t, u):
        if not series.states:
            first = track([(t, u)], frame)
            if not first.states:
                raise ConvergenceError(f"initial field outside the modulation basin: {first.exit_reason}")
            st = first.states[0]
        else:
            st = frame.decompose(u, series.states[-1].params, 1e-10, compute_eps=False)
            st.gamma = _unwrap_to(series.states[-1].gamma, st.gamma)
        series.times.append(float(t))
        series.states.append(st)

    def stop(t, u):
        row = monitor_values(u, t, ("width", "spec_tail"))
        if row["spec_tail_frac"] > RESOLUTION_TAIL:
            return "resolution_exhausted"
        if row["width"] < stop_width:
            return "width"
        stream(t, u)
        return None

    res = evolve(u0, t_end, policy, monitors=("mass", "width", "spec_tail"), t0=t_start, cadence=cadence,
                 store=False, stop=stop)
    rows = res.series.rows[: len(series.times)]
    times = np.array(series.times)
    lam_t = series.column("lambda")
    if len(times):
        inc = 0.5 * (lam_t[1:] ** -2 + lam_t[:-1] ** -2) * np.diff(times)
        series.s_values = list(np.concatenate([[0.0], np.cumsum(inc)]))
    c, T_fit, fres = fit_collapse_rate(times, lam_t)
    spread = float("nan")
    if u0 is not None and np.all(T - times > 0):
        ratio = lam_t / (T - times)
        spread = float(ratio.max() / ratio.min() - 1.0) if len(ratio) else float("nan")
    mono = lambda_monotonicity(series) if series.states else None
    return BlowupReport(series, c, T_fit, fres, spread, res.stop_reason or "t_end",
                        res.stop_reason == "resolution_exhausted",
                        np.array([r["mass"] for r in rows]), np.array([r["width"] for r in rows]), times, mono)
