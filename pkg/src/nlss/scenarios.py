"""Reproducible experiments tying the modules together.

Each scenario takes a ScenarioConfig and an output directory, writes its
artifacts there and returns a ScenarioResult: scalar values tagged with a
provenance key plus named pass/fail checks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, PrecisionWarning

# provenance keys attached to every reported number
CLOSED_FORM = "closed_form_constant"
ORACLE = "independent_oracle"
MEASURED = "measured"
PROVENANCE_KEYS = (CLOSED_FORM, ORACLE, MEASURED)


@dataclass
class ScenarioResult:
    scenario: str
    values: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def value(self, name, v, provenance=MEASURED):
        self.values[name] = {"value": _plain(v), "provenance": provenance}
        return v

    def check(self, name, measured, threshold, relation="<"):
        """Record ``measured relation threshold``; relations: <, <=, >, ==, in (closed interval)."""
        m, thr = _plain(measured), _plain(threshold)
        if relation == "<":
            ok = m < thr
        elif relation == "<=":
            ok = m <= thr
        elif relation == ">":
            ok = m > thr
        elif relation == "==":
            ok = m == thr
        elif relation == "in":
            ok = thr[0] <= m <= thr[1]
        else:
            raise ValueError(relation)
        self.checks[name] = {"passed": bool(ok), "measured": m, "threshold": thr, "relation": relation}
        return bool(ok)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def summary(self, cfg):
        return {"config": cfg.to_json(), "values": self.values, "checks": self.checks,
                "passed": self.passed, "artifacts": sorted(self.artifacts)}


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _rel(a, b):
    return abs(a - b) / abs(b)


def _save(res, cfg, out, name, u):
    """Write a final-state snapshot when the config asks for snapshots."""
    from .snapshot import write_snapshot

    if cfg.snapshots:
        write_snapshot(Path(out) / name, u)
        res.artifacts.append(name)


def _l2(a, grid):
    return float(np.sqrt(grid.dx**2 * np.sum(np.abs(a) ** 2)))


# -- ground state ------------------------------------------------------------------

def run_ground_state(cfg, out):
    from .groundstate import save_ground_state, solve_ground_state
    from .grid import make_grid
    from .oracles import shooting_ground_state

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    gs = solve_ground_state(make_grid(cfg.L, cfg.n), tol=p["tol"])
    res.value("mass_sq", gs.mass_sq)
    res.value("residual_inf", gs.residual_inf)
    res.value("pohozaev_defects", list(gs.pohozaev_defects))
    res.value("iterations", gs.iterations)
    res.value("method", gs.method)
    res.value("central_amplitude", float(gs.profile[cfg.n // 2, cfg.n // 2]))
    res.check("residual_inf", gs.residual_inf, p["tol"], "<=")
    res.check("pohozaev_defect_max", max(gs.pohozaev_defects), 1e-8)
    if p["oracle"]:
        ref = shooting_ground_state()
        res.value("oracle_mass_sq", ref.mass_sq, ORACLE)
        res.value("oracle_central_amplitude", ref.amplitude, ORACLE)
        res.check("mass_sq_vs_oracle_rel", _rel(gs.mass_sq, ref.mass_sq), 1e-6)
    save_ground_state(gs, Path(out) / "ground_state")
    res.artifacts += ["ground_state.nlss", "ground_state.json"]
    return res


# -- spectrum and coercivity -------------------------------------------------------

def _span_overlap(vec, basis):
    """Fraction of ||vec||^2 inside span(basis) (all real arrays)."""
    B = np.stack([b.ravel() for b in basis], axis=1)
    Qb, _ = np.linalg.qr(B)
    v = vec.ravel()
    return float(np.linalg.norm(Qb.T @ v) ** 2 / np.dot(v, v))


def coercivity_minimum(gs, N, chi0, samples, amp, seed):
    """Empirical min of E(Q + eps) / ||eps||^2_{H1} over constrained random eps."""
    from .linearized import coercivity_ratios, constrained_perturbations
    from .sampling import smooth_noise

    rng = np.random.default_rng(seed)
    raw = [smooth_noise(rng, gs.grid, N, amp) for _ in range(samples)]
    eps = constrained_perturbations(gs, N, chi0, raw)
    ratios = coercivity_ratios(gs, N, chi0, eps)
    return float(ratios.min()), int(ratios.size)


def run_spectrum(cfg, out):
    from .groundstate import build_Q_vector, cached_ground_state
    from .linearized import assemble, positivity_gap, scalar_chi0, spectrum_report, translation_modes
    from .oracles import radial_negative_eigenvalue_extrapolated
    from .snapshot import write_json

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    gs = cached_ground_state(cfg.L, cfg.n)
    lam_ref = res.value("lambda0_oracle", radial_negative_eigenvalue_extrapolated(), ORACLE)
    reports = {}
    chi0 = None
    for N in p["components"]:
        rep = spectrum_report(assemble("Lplus", N, gs, gs.grid), n_eigs=p["n_eigs"], tol=p["tol"])
        if chi0 is None:
            chi0 = rep.chi0.data[0].real
        t1, t2 = translation_modes(gs, N)
        overlaps = [_span_overlap(v.data.real, (t1, t2)) for _, v in rep.near_kernel]
        gap = positivity_gap(assemble("Lplus", N, gs, gs.grid), gs, chi0)
        res.value(f"N{N}.Lplus.eigenvalues", rep.eigenvalues)
        res.value(f"N{N}.Lplus.translation_overlaps", overlaps)
        res.value(f"N{N}.positivity_gap", gap)
        res.check(f"N{N}.Lplus.negative_count", rep.counts[0], 1, "==")
        res.check(f"N{N}.Lplus.near_zero_count", rep.counts[1], 2, "==")
        res.check(f"N{N}.Lplus.translation_overlap_min", min(overlaps, default=0.0), 0.999, ">")
        res.check(f"N{N}.positivity_gap", gap, 0.0, ">")
        res.check(f"N{N}.lambda0_vs_oracle_rel", _rel(rep.lambda0, lam_ref), 1e-4)
        repm = spectrum_report(assemble("Lminus", N, gs, gs.grid), n_eigs=max(p["n_eigs"], N + 2), tol=p["tol"])
        Q = build_Q_vector(gs, N).data.real
        qdirs = []
        for j in range(N):
            e = np.zeros_like(Q)
            e[j] = Q[j]
            qdirs.append(e)
        kov = [_span_overlap(v.data.real, qdirs) for _, v in repm.near_kernel]
        res.value(f"N{N}.Lminus.eigenvalues", repm.eigenvalues)
        res.value(f"N{N}.Lminus.kernel_overlaps", kov)
        res.check(f"N{N}.Lminus.min_eigenvalue", repm.eigenvalues[0], -repm.threshold, ">")
        res.check(f"N{N}.Lminus.kernel_dimension", repm.counts[1], N, "==")
        res.check(f"N{N}.Lminus.kernel_overlap_min", min(kov, default=0.0), 0.999, ">")
        reports[f"N{N}_Lplus"] = rep.to_json()
        reports[f"N{N}_Lminus"] = repm.to_json()
    write_json(Path(out) / "spectra.json", reports)
    res.artifacts.append("spectra.json")

    if p["coercivity_samples"] > 0:
        Nc, nc = p["coercivity_components"], p["coercivity_n"]
        mins = []
        for n in (nc, 2 * nc):
            g = cached_ground_state(cfg.L, n)
            c0 = chi0 if n == cfg.n else scalar_chi0(g)[1]
            m, used = coercivity_minimum(g, Nc, c0, p["coercivity_samples"], p["coercivity_amp"], cfg.seed)
            res.value(f"coercivity.n{n}.min_ratio", m)
            res.value(f"coercivity.n{n}.samples", used)
            mins.append(m)
        res.check("coercivity.min_ratio_positive", min(mins), 0.0, ">")
        res.check("coercivity.resolution_stability", max(mins) / min(mins) if min(mins) > 0 else math.inf, 2.0,
                  "<=")
    return res


# -- Gagliardo-Nirenberg sweep -----------------------------------------------------

def random_trial_batch(rng, grid, N, batch, aligned_fraction=1 / 3):
    """Gaussian-mixture trials and their spectra; a fraction share one scalar profile across components.

    Aligned trials have J equal to a scalar J times a component-weight factor
    that reaches its maximum for equal weights, so they probe the constant
    more closely than independent components do.
    """
    from .sampling import gaussian_mixture_batch

    data, spec = gaussian_mixture_batch(rng, grid, N, batch, with_spectrum=True)
    k = int(round(aligned_fraction * batch))
    if k and N > 1:
        w = rng.uniform(0.5, 1.0, (k, N)) * np.exp(1j * rng.uniform(0, 2 * np.pi, (k, N)))
        data[:k] = w[:, :, None, None] * data[:k, :1]
        spec[:k] = w[:, :, None, None] * spec[:k, :1]
    return data, spec


def run_gn_sweep(cfg, out):
    import csv

    from .functionals import cm_constant, gn_constant, weinstein_J, weinstein_J_batch
    from .groundstate import build_Q_vector, cached_ground_state
    from .grid import make_grid
    from .oracles import brute_force_cm
    from .sampling import near_ground_state_batch

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    rng = np.random.default_rng(cfg.seed)
    gs = cached_ground_state(cfg.L, cfg.n)
    res.value("q0_mass_sq", gs.mass_sq)
    tgrid = make_grid(cfg.L, p["trial_n"])
    rows = []
    for N in p["components"]:
        C = res.value(f"N{N}.gn_constant", gn_constant(N, gs.mass_sq), CLOSED_FORM)
        J = res.value(f"N{N}.J_ground_state", weinstein_J(build_Q_vector(gs, N)))
        res.check(f"N{N}.J_ground_state_rel", _rel(J, C), p["rel_tol"])
        excess = -math.inf
        n_random = p["trials"] - p["near_trials"]
        for start in range(0, n_random, p["batch"]):
            b = min(p["batch"], n_random - start)
            data, spec = random_trial_batch(rng, tgrid, N, b)
            excess = max(excess, float(np.max(weinstein_J_batch(data, tgrid, spec))) / C - 1)
        near = -math.inf
        Q = build_Q_vector(gs, N)
        for start in range(0, p["near_trials"], p["batch"] // 4 or 1):
            b = min(p["batch"] // 4 or 1, p["near_trials"] - start)
            near = max(near, float(np.max(weinstein_J_batch(near_ground_state_batch(rng, Q, b), gs.grid))) / C - 1)
        worst = max(excess, near)
        res.value(f"N{N}.max_relative_excess_random", excess)
        res.value(f"N{N}.max_relative_excess_near_ground_state", near)
        res.check(f"N{N}.trials_max_relative_excess", worst, p["excess_tol"], "<=")
        rows.append((N, C, J, _rel(J, C), excess, near))
    inf_c = res.value("infinite.gn_constant", gn_constant(math.inf, gs.mass_sq), CLOSED_FORM)
    res.check("infinite.gn_constant_times_mass_rel", abs(inf_c * gs.mass_sq / 4.0 - 1.0), 1e-15, "<=")
    for M in (2, 3, 4, 5):
        brute, layout = brute_force_cm(M)
        res.value(f"C{M}.brute_force", brute, ORACLE)
        res.value(f"C{M}.minimizing_layout", list(layout), ORACLE)
        res.check(f"C{M}.closed_form_vs_brute_force", cm_constant(M), brute, "==")
    path = Path(out) / "gn_sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "gn_constant", "J_ground_state", "rel_error", "max_excess_random", "max_excess_near"])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    res.artifacts.append("gn_sweep.csv")
    return res


# -- soliton propagation -----------------------------------------------------------

def covariance_errors(gs, dt=1e-3, t_end=0.5):
    """Flow covariance under a combined boost/translation/phase and under component phases.

    Returns (combined error, component-phase error) in L2 at ``t_end``.
    """
    from .dynamics import StepPolicy, evolve
    from .symmetry import GroupElement, apply_group, exact_soliton

    g = gs.grid
    X1, X2 = g.mesh
    bump = np.exp(-((X1 - 1) ** 2 + (X2 + 0.5) ** 2) / 2) * np.exp(0.3j * X1)
    u0 = exact_soliton(gs, 2, lam=1.3, gamma=[0, 1.0])
    u0 = u0.like(0.9 * u0.data + 0.15 * np.stack([bump, 1j * bump]))
    pol = StepPolicy(dt=dt)
    a = evolve(u0, t_end, pol, monitors=()).state.u
    dk = np.pi / g.L
    G = GroupElement(xi0=(2 * dk, -dk), x0=(0.3, 0.2), gamma=(0.4, 1.1))
    b = evolve(apply_group(G, u0, 0.0), t_end, pol, monitors=()).state.u
    combined = _l2(b.data - apply_group(G, a, t_end).data, g)
    G2 = GroupElement(gamma=(0.0, 0.9))
    c = evolve(apply_group(G2, u0), t_end, pol, monitors=()).state.u
    phase = _l2(c.data - apply_group(G2, a).data, g)
    return combined, phase


def conjugacy_error(gs, h=2e-3, t1=1.5):
    """Pseudo-conformal conjugacy of the flow on [1, t1], with Richardson-extrapolated legs.

    Evolve u0 from 1 to t1, map to time 1/t1, evolve to 1 and compare with the
    image of u0 at 1.
    """
    from .dynamics import StepPolicy, evolve
    from .symmetry import exact_soliton, pseudo_conformal

    g = gs.grid
    X1, X2 = g.mesh
    bump = np.exp(-((X1 - 1) ** 2 + (X2 + 0.5) ** 2) / 2) * np.exp(0.3j * X1)
    u0 = exact_soliton(gs, 2, lam=1.3, gamma=[0, 1.0])
    u0 = u0.like(0.9 * u0.data + 0.15 * np.stack([bump, 1j * bump]))

    def leg(u, a, b):
        A = evolve(u, b, StepPolicy(dt=h), monitors=(), t0=a).state.u.data
        B = evolve(u, b, StepPolicy(dt=h / 2), monitors=(), t0=a).state.u.data
        return (4 * B - A) / 3

    mid = u0.like(leg(u0, 1.0, t1))
    v, s0 = pseudo_conformal(mid, t1)
    end = leg(v, s0, 1.0)
    w, _ = pseudo_conformal(u0, 1.0)
    return _l2(end - w.data, g), list(v.warnings) + list(w.warnings)


def run_soliton_propagation(cfg, out):
    from .dynamics import StepPolicy, convergence_study, evolve
    from .groundstate import cached_ground_state
    from .symmetry import exact_soliton

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    gs = cached_ground_state(cfg.L, cfg.n)
    N = p["N"]
    dk = np.pi / cfg.L
    params = dict(lam=1.0, gamma=np.linspace(0.0, 1.0, N), xtilde=p["xtilde"],
                  xi=tuple(m * dk for m in p["boost_modes"]))
    u0 = exact_soliton(gs, N, t=0.0, **params)
    run = evolve(u0, p["t_end"], StepPolicy(dt=p["dt"]), monitors=("mass", "energy", "centroid", "width"),
                 cadence=p["t_end"] / 20)
    exact = exact_soliton(gs, N, t=p["t_end"], **params)
    err = res.value("propagation_error_l2", _l2(run.state.u.data - exact.data, gs.grid))
    masses = run.series.column("mass")
    drift = res.value("mass_drift_rel", float(np.max(np.abs(masses - masses[0])) / masses[0]))
    res.check("propagation_error_l2", err, p["error_tol"])
    res.check("mass_drift_rel", drift, p["drift_tol"])
    run.series.write_csv(Path(out) / "series.csv")
    res.artifacts.append("series.csv")
    _save(res, cfg, out, "final.nlss", run.state.u)
    study = convergence_study("soliton", h=p["order_h"], N=N, gs=gs)
    res.value("order_study.dts", study["dts"])
    res.value("order_study.errors", study["errors"])
    res.value("order_study.orders", study["orders"])
    for i, o in enumerate(study["orders"]):
        res.check(f"strang_order_{i}", o, (2.0 - p["order_tol"], 2.0 + p["order_tol"]), "in")
    if p["covariance"]:
        comb, ph = covariance_errors(gs, dt=p["dt"])
        res.value("covariance.boost_translation_phase", comb)
        res.value("covariance.component_phase", ph)
        res.check("covariance.boost_translation_phase", comb, p["covariance_tol"])
        res.check("covariance.component_phase", ph, p["covariance_tol"])
    if p["conjugacy"]:
        c, warns = conjugacy_error(gs, h=p["conjugacy_h"], t1=p["conjugacy_t1"])
        res.value("conjugacy.error_l2", c)
        res.value("conjugacy.band_warnings", len(warns))
        res.check("conjugacy.error_l2", c, p["conjugacy_tol"])
    return res


# -- perturbed soliton -------------------------------------------------------------

def parameter_control_ratio(series):
    """int |d log lam / ds| ds divided by int ||eps|| ds over the tracked range."""
    s = np.asarray(series.s_values)
    loglam = np.log(series.column("lambda"))
    eps = series.column("eps_l2")
    if len(s) < 3:
        return float("nan")
    top = float(np.sum(np.abs(np.diff(loglam))))
    bottom = float(np.sum(0.5 * (eps[1:] + eps[:-1]) * np.diff(s)))
    return top / bottom if bottom > 0 else float("inf")


def run_perturbed_soliton(cfg, out):
    from .dynamics import StepPolicy, evolve
    from .groundstate import cached_ground_state
    from .linearized import scalar_chi0
    from .modulation import ModulationFrame, lambda_monotonicity, track
    from .sampling import smooth_noise
    from .symmetry import exact_soliton

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    rng = np.random.default_rng(cfg.seed)
    gs = cached_ground_state(cfg.L, cfg.n)
    N = p["N"]
    u0 = exact_soliton(gs, N)
    u0 = u0.like(u0.data + smooth_noise(rng, gs.grid, N, p["amp"]))
    run = evolve(u0, p["t_end"], StepPolicy(dt=p["dt"]), cadence=p["cadence"])
    frame = ModulationFrame(gs, N, scalar_chi0(gs)[1])
    series = track(run.snapshots, frame, compute_eps=True)
    mono = lambda_monotonicity(series)
    res.value("tracked_snapshots", len(series.states))
    res.value("lambda_sup_ratio", mono.sup_ratio)
    res.value("lambda_sup_ratio_at_s", mono.witness_s)
    res.value("eps_l2_max", float(np.max(series.column("eps_l2"))))
    res.value("parameter_control_ratio", parameter_control_ratio(series))
    res.check("tracked_all_snapshots", len(series.states), len(run.snapshots), "==")
    res.check("lambda_sup_ratio", mono.sup_ratio, math.e)
    series.write_csv(Path(out) / "modulation.csv")
    run.series.write_csv(Path(out) / "series.csv")
    res.artifacts += ["modulation.csv", "series.csv"]
    _save(res, cfg, out, "final.nlss", run.state.u)
    return res


# -- pseudo-conformal blowup -------------------------------------------------------

def run_pc_blowup(cfg, out):
    from .dynamics import StepPolicy, blowup_run
    from .groundstate import cached_ground_state
    from .grid import make_grid
    from .linearized import scalar_chi0
    from .modulation import ModulationFrame
    from .sampling import smooth_noise
    from .snapshot import write_json
    from .symmetry import exact_pseudosoliton

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    rng = np.random.default_rng(cfg.seed)
    gs = cached_ground_state(p["gs_L"], p["gs_n"])
    grid = make_grid(cfg.L, cfg.n)
    N, T = p["N"], 0.0
    frame = ModulationFrame(gs, N, scalar_chi0(gs)[1], grid=grid)
    policy = StepPolicy(dt=p["dt"], adapt=True, cfl_like_cap=p["cfl_like_cap"])
    gamma = np.linspace(0.0, 0.6, N)
    rep = blowup_run(gs, N, lam=p["lam"], gamma=gamma, T=T, t_start=p["t_start"], grid=grid, policy=policy,
                     cadence=p["cadence"], frame=frame)
    _save(res, cfg, out, "initial.nlss",
          exact_pseudosoliton(gs, N, lam=p["lam"], gamma=gamma, T=T, t=p["t_start"], grid=grid))
    res.value("rate_c", rep.c)
    res.value("T_fit", rep.T_fit)
    res.value("T_exact", T, CLOSED_FORM)
    res.value("lambda_over_tau_exact", 1.0 / p["lam"], CLOSED_FORM)
    res.value("lambda_over_tau_spread", rep.ratio_spread)
    res.value("stop_reason", rep.stop_reason)
    res.value("stop_time", float(rep.times[-1]))
    res.value("stop_width", float(rep.widths[-1]))
    mass_var = float((rep.masses.max() - rep.masses.min()) / rep.masses[0])
    res.value("mass_variation_rel", mass_var)
    res.value("lambda_sup_ratio", rep.monotonicity.sup_ratio)
    res.check("T_fit_rel", abs(rep.T_fit - T) / (T - p["t_start"]), p["fit_tol"], "<=")
    res.check("lambda_over_tau_spread", rep.ratio_spread, p["ratio_tol"], "<=")
    res.check("mass_variation_rel", mass_var, p["mass_tol"])
    res.check("lambda_sup_ratio", rep.monotonicity.sup_ratio, 1.0, "==")
    rep.series.write_csv(Path(out) / "modulation.csv")
    write_json(Path(out) / "rate_report.json", rep.to_json())
    res.artifacts += ["modulation.csv", "rate_report.json"]
    for k, factor in enumerate(p["perturbed_runs"]):
        u0 = exact_pseudosoliton(gs, N, lam=p["lam"], gamma=gamma, T=T, t=p["t_start"], grid=grid)
        u0 = u0.like(factor * u0.data + smooth_noise(rng, grid, N, p["noise"]))
        prep = blowup_run(gs, N, T=T, t_start=p["t_start"], grid=grid, policy=policy, cadence=p["cadence"],
                          frame=frame, u0=u0, t_end=T - 1e-3 * (T - p["t_start"]))
        res.value(f"perturbed_{k}.factor", factor)
        res.value(f"perturbed_{k}.stop_reason", prep.stop_reason)
        res.value(f"perturbed_{k}.lambda_sup_ratio", prep.monotonicity.sup_ratio)
        res.value(f"perturbed_{k}.T_fit", prep.T_fit)
        res.check(f"perturbed_{k}.lambda_sup_ratio", prep.monotonicity.sup_ratio, math.e)
        prep.series.write_csv(Path(out) / f"modulation_perturbed_{k}.csv")
        res.artifacts.append(f"modulation_perturbed_{k}.csv")
    return res


# -- resonant system ---------------------------------------------------------------

def run_resonant_conservation(cfg, out):
    from .dynamics import StepPolicy, evolve
    from .grid import FieldVec, make_grid
    from .nonlinearity import apply_nonlinearity
    from .sampling import gaussian_mixture_batch

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    rng = np.random.default_rng(cfg.seed)
    grid = make_grid(cfg.L, cfg.n)
    J = p["Jmax"]
    data = gaussian_mixture_batch(rng, grid, 2 * J + 1, 1, max_bumps=2)[0]
    norms = np.sqrt(grid.integrate(np.abs(data) ** 2))
    data *= (p["amplitude"] / norms)[:, None, None]
    u0 = FieldVec.resonant(grid, data)

    def agreement(u):
        a = apply_nonlinearity(u, method="triples").data
        b = apply_nonlinearity(u, method="closed").data
        return float(np.max(np.abs(a - b)))

    run = evolve(u0, p["t_end"], StepPolicy(dt=p["dt"]), cadence=p["t_end"] / 20)
    m = run.series.column("mass")
    res.value("mass_initial", m[0])
    for key in ("m100", "m010", "m001"):
        col = run.series.column(key)
        d = float(np.max(np.abs(col - col[0])) / m[0])
        res.value(f"{key}.initial", col[0])
        res.value(f"{key}.drift_over_mass", d)
        res.check(f"{key}.drift", d, p["drift_tol"])
    agree = max(agreement(u0), agreement(run.state.u))
    res.value("triples_vs_closed_form_max", agree)
    res.check("triples_vs_closed_form_max", agree, p["agreement_tol"])
    run.series.write_csv(Path(out) / "series.csv")
    res.artifacts.append("series.csv")
    _save(res, cfg, out, "final.nlss", run.state.u)
    return res


# -- virial identities and diagnostics ---------------------------------------------

def run_virial_check(cfg, out):
    from .diagnostics import diagnostic_record, virial_variance, write_diagnostics_csv
    from .dynamics import StepPolicy, evolve
    from .functionals import energy
    from .groundstate import cached_ground_state
    from .symmetry import exact_soliton

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    gs = cached_ground_state(cfg.L, cfg.n)
    N = p["N"]
    X1, _ = gs.grid.mesh
    u0 = exact_soliton(gs, N, gamma=np.linspace(0.0, 1.0, N))
    u0 = u0.like(p["scale"] * u0.data * np.exp(1j * p["chirp"] * X1)[None])
    records = []
    run = evolve(u0, p["t_end"], StepPolicy(dt=p["dt"]), cadence=p["cadence"],
                 on_snapshot=lambda t, u: records.append(diagnostic_record(u, t, p["morawetz_R"],
                                                                           p["morawetz_eta1"])))
    with warnings.catch_warnings():
        warnings.simplefilter("error", PrecisionWarning)
        vals = np.array([virial_variance(u) for _, u in run.snapshots])
    V, Vdot = vals[:, 0], vals[:, 1]
    h = p["cadence"]
    E = res.value("energy", energy(u0))
    second = (V[2:] - 2 * V[1:-1] + V[:-2]) / h**2
    fd = (V[2:] - V[:-2]) / (2 * h)
    scale = max(abs(16 * E), 1.0)
    err_acc = res.value("virial_second_derivative_err", float(np.max(np.abs(second - 16 * E))) / scale)
    err_vel = res.value("virial_rate_vs_difference_err",
                        float(np.max(np.abs(fd - Vdot[1:-1]))) / max(np.max(np.abs(Vdot)), 1.0))
    res.check("virial_second_derivative", err_acc, p["rel_tol"])
    res.check("virial_rate_vs_difference", err_vel, p["rel_tol"])
    res.check("diagnostics_finite", all(r.is_finite() for r in records), True, "==")
    write_diagnostics_csv(records, Path(out) / "diagnostics.csv")
    run.series.write_csv(Path(out) / "series.csv")
    res.artifacts += ["diagnostics.csv", "series.csv"]
    _save(res, cfg, out, "final.nlss", run.state.u)
    return res


# -- modulation round trip ---------------------------------------------------------

def linear_bound_constants(frame, amps, samples, seed):
    """Per amplitude, the max over samples of (||eps|| + |lam-1| + sum|gamma| + |xi| + |xtilde|) / amp."""
    from .sampling import smooth_noise

    rng = np.random.default_rng(seed)
    Q = frame.Q
    out = []
    for amp in amps:
        worst = 0.0
        for _ in range(samples):
            u = Q.like(Q.data + smooth_noise(rng, Q.grid, frame.N, amp))
            st = frame.decompose(u, compute_eps=True)
            tot = (st.eps_l2 + abs(st.lam - 1) + np.sum(np.abs(st.gamma)) + np.linalg.norm(st.xi)
                   + np.linalg.norm(st.xtilde))
            worst = max(worst, tot / amp)
        out.append(worst)
    return out


def run_modulation_roundtrip(cfg, out):
    from .groundstate import cached_ground_state
    from .linearized import scalar_chi0
    from .modulation import ModulationFrame
    from .sampling import random_group_params

    p = cfg.params
    res = ScenarioResult(cfg.scenario)
    rng = np.random.default_rng(cfg.seed)
    N = p["N"]
    gs = cached_ground_state(cfg.L, cfg.n)
    frame = ModulationFrame(gs, N, scalar_chi0(gs)[1])
    err, orth = 0.0, 0.0
    for _ in range(p["trials"]):
        prm = random_group_params(rng, N)
        st = frame.decompose(frame.orbit_point(prm), compute_eps=False)
        err = max(err, float(np.max(np.abs(st.params - prm))))
        orth = max(orth, float(np.max(np.abs(st.ortho_residuals))))
    res.value("recovery_error_max", err)
    res.value("orthogonality_residual_max", orth)
    res.check("recovery_error_max", err, p["recover_tol"])
    res.check("orthogonality_residual_max", orth, p["ortho_tol"])
    if p["perturbations"] > 0:
        gp = cached_ground_state(cfg.L, p["perturbation_n"])
        fp = frame if gp is gs else ModulationFrame(gp, N, scalar_chi0(gp)[1])
        Ks = linear_bound_constants(fp, p["amps"], p["perturbations"], cfg.seed + 1)
        for a, K in zip(p["amps"], Ks):
            res.value(f"linear_bound_K.amp_{a:g}", K)
        res.value("linear_bound_K", max(Ks))
        res.check("linear_bound_K_stability", max(Ks) / min(Ks), p["k_stability"], "<=")
    return res


RUNNERS = {
    "ground_state": run_ground_state,
    "spectrum": run_spectrum,
    "gn_sweep": run_gn_sweep,
    "soliton_propagation": run_soliton_propagation,
    "perturbed_soliton": run_perturbed_soliton,
    "pc_blowup": run_pc_blowup,
    "resonant_conservation": run_resonant_conservation,
    "virial_check": run_virial_check,
    "modulation_roundtrip": run_modulation_roundtrip,
}


def run(cfg, out):
    """Run the scenario named in ``cfg`` with artifacts under ``out``."""
    if cfg.scenario not in RUNNERS:
        raise ConfigurationError(f"unknown scenario {cfg.scenario!r}")
    Path(out).mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.scenario](cfg, out)
