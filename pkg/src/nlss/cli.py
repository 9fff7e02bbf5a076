"""Command line entry point: ``nlss run``, ``nlss selfcheck``, ``nlss oracle ground-state``."""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NLSSError, SnapshotFormatError

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _threads(arg):
    env = os.environ.get("NLSS_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"NLSS_THREADS must be an integer, got {env!r}") from None
    return arg


def cmd_run(args):
    from . import scenarios
    from .config import load_config
    from .grid import set_threads
    from .snapshot import write_json

    cfg = load_config(args.config)
    k = _threads(args.threads)
    if k is not None:
        set_threads(k)
    out = Path(args.out or cfg.output_dir)
    res = scenarios.run(cfg, out)
    write_json(out / "summary.json", res.summary(cfg))
    for name, c in sorted(res.checks.items()):
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['measured']} {c['relation']} {c['threshold']}")
    print(f"summary written to {out / 'summary.json'}")
    if args.assert_checks and not res.passed:
        return EXIT_FAILED
    return EXIT_OK


# -- selfcheck -----------------------------------------------------------------------

def _check_resonance():
    from .nonlinearity import resonance_set
    from .oracles import brute_force_resonance

    ok = all(sorted(resonance_set(j, 4).triples) == brute_force_resonance(j, 4) for j in range(-4, 5))
    return ok, "closed-form resonance sets equal brute force for |j| <= 4"


def _check_cm():
    from .functionals import cm_constant
    from .oracles import brute_force_cm

    vals = {M: cm_constant(M) for M in range(2, 7)}
    ok = all(vals[M] == brute_force_cm(M)[0] for M in vals)
    return ok, f"C(M) for M=2..6: {vals}"


def _small_state(n=128):
    from .groundstate import cached_ground_state

    # n=128 cannot carry boosted fields: the Nyquist mode aliases under a phase ramp
    return cached_ground_state(16.0, n)


def _check_ground_state():
    from .oracles import shooting_ground_state

    gs = _small_state()
    rel = abs(gs.mass_sq - shooting_ground_state().mass_sq) / shooting_ground_state().mass_sq
    ok = gs.residual_inf <= 1e-10 and rel < 1e-5
    return ok, f"n=128 residual {gs.residual_inf:.2e}, mass vs shooting {rel:.2e}"


def _check_nonlinearity():
    from .grid import FieldVec, make_grid
    from .nonlinearity import apply_nonlinearity
    from .sampling import gaussian_mixture_batch

    grid = make_grid(8.0, 32)
    u = FieldVec.resonant(grid, gaussian_mixture_batch(np.random.default_rng(0), grid, 7, 1)[0])
    d = np.max(np.abs(apply_nonlinearity(u, "triples").data - apply_nonlinearity(u, "closed").data))
    return d < 1e-12, f"triple sum vs closed form: {d:.2e}"


def _check_soliton_residual():
    from .symmetry import exact_soliton, pde_residual

    gs = _small_state(256)
    u, dt = exact_soliton(gs, 2, gamma=[0.0, 1.0], xi=(np.pi / 16, 0.0), with_dt=True)
    r = pde_residual(u, dt).norm()
    return r < 1e-6, f"soliton residual {r:.2e}"


def _check_conservation():
    from .dynamics import StepPolicy, evolve
    from .functionals import energy, mass
    from .symmetry import exact_soliton

    gs = _small_state()
    X1, _ = gs.grid.mesh
    u0 = exact_soliton(gs, 2, gamma=[0.0, 1.0])
    u0 = u0.like(0.9 * u0.data * np.exp(0.2j * X1))
    u1 = evolve(u0, 0.2, StepPolicy(dt=1e-3), monitors=()).state.u
    dm = abs(mass(u1) - mass(u0)) / mass(u0)
    de = abs(energy(u1) - energy(u0)) / abs(energy(u0))
    return dm < 1e-12 and de < 1e-4, f"mass drift {dm:.2e}, energy drift {de:.2e}"


def _check_covariance():
    from .dynamics import StepPolicy, evolve
    from .symmetry import GroupElement, apply_group, exact_soliton

    gs = _small_state(256)
    u0 = exact_soliton(gs, 2, lam=1.2, gamma=[0.0, 1.0])
    pol = StepPolicy(dt=2e-3)
    G = GroupElement(xi0=(np.pi / 8, 0.0), x0=(0.3, -0.1), gamma=(0.2, 0.7))
    a = evolve(u0, 0.1, pol, monitors=()).state.u
    b = evolve(apply_group(G, u0), 0.1, pol, monitors=()).state.u
    err = b.like(b.data - apply_group(G, a, 0.1).data).norm()
    return err < 1e-7, f"boost/translation/phase covariance {err:.2e}"


def _check_involution():
    from .symmetry import exact_soliton, pseudo_conformal

    gs = _small_state()
    u = exact_soliton(gs, 1, lam=2.0)
    v, s = pseudo_conformal(u, -1.0)
    w, _ = pseudo_conformal(v, s)
    err = w.like(w.data - u.data).norm()
    return err < 1e-8, f"pseudo-conformal involution {err:.2e}"


def _check_modulation():
    from .linearized import scalar_chi0
    from .modulation import ModulationFrame
    from .sampling import random_group_params

    gs = _small_state()
    frame = ModulationFrame(gs, 2, scalar_chi0(gs)[1])
    prm = random_group_params(np.random.default_rng(0), 2)
    st = frame.decompose(frame.orbit_point(prm), compute_eps=False)
    err = float(np.max(np.abs(st.params - prm)))
    return err < 1e-5 and st.converged, f"round trip parameter error {err:.2e} (n=128)"


def _check_snapshot():
    from .snapshot import read_snapshot, write_snapshot
    from .symmetry import exact_soliton

    u = exact_soliton(_small_state(), 2)
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "u.nlss"
        write_snapshot(p, u)
        same = np.array_equal(read_snapshot(p).data, u.data)
        raw = bytearray(p.read_bytes())
        raw[0:4] = b"XXXX"
        p.write_bytes(bytes(raw))
        try:
            read_snapshot(p)
            offset = None
        except SnapshotFormatError as exc:
            offset = exc.offset
    return same and offset == 0, f"round trip exact: {same}; corrupted magic reported at offset {offset}"


def _check_config():
    from .config import parse_config

    try:
        parse_config("[scenario]\nname = ground_state\n[parameters]\nbogus = 1\n")
    except ConfigurationError:
        return True, "unknown parameter rejected"
    return False, "unknown parameter accepted"


SELFCHECKS = {
    "resonance_sets": _check_resonance,
    "cm_constants": _check_cm,
    "ground_state_small_grid": _check_ground_state,
    "nonlinearity_forms_agree": _check_nonlinearity,
    "soliton_residual": _check_soliton_residual,
    "flow_conservation": _check_conservation,
    "flow_covariance": _check_covariance,
    "pseudo_conformal_involution": _check_involution,
    "modulation_round_trip": _check_modulation,
    "snapshot_format": _check_snapshot,
    "config_schema": _check_config,
}


def selfcheck():
    """Run the fast invariant suite; returns {name: {"passed", "detail"}}."""
    report = {}
    for name, fn in SELFCHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        report[name] = {"passed": bool(ok), "detail": detail}
    return report


def cmd_selfcheck(args):
    from .snapshot import dumps

    t0 = time.perf_counter()
    report = selfcheck()
    elapsed = time.perf_counter() - t0
    doc = {"checks": report, "passed": all(c["passed"] for c in report.values())}
    sys.stdout.write(dumps(doc))
    print(f"selfcheck finished in {elapsed:.1f} s", file=sys.stderr)
    return EXIT_OK if doc["passed"] else EXIT_FAILED


def cmd_oracle(args):
    from .oracles import shooting_ground_state
    from .snapshot import dumps

    ref = shooting_ground_state()
    sys.stdout.write(dumps({"mass_sq": ref.mass_sq, "central_amplitude": ref.amplitude,
                            "match_radius": ref.match_radius, "tail_coefficient": ref.tail_coefficient}))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="nlss", description="Coupled cubic Schroedinger system toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a config file")
    r.add_argument("config")
    r.add_argument("--assert", dest="assert_checks", action="store_true", help="exit 1 if any check fails")
    r.add_argument("--threads", type=int, default=None, help="FFT worker threads (NLSS_THREADS overrides)")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("selfcheck", help="fast invariant suite with a JSON report")
    s.set_defaults(func=cmd_selfcheck)
    o = sub.add_parser("oracle", help="independent reference computations")
    o.add_argument("which", choices=["ground-state"])
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"nlss: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NLSSError as exc:
        print(f"nlss: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
