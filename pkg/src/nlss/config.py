"""Scenario configuration files: sections of ``key = value`` pairs with a fixed schema.

Every scenario has its own parameter table with defaults; keys outside the
schema, unknown sections and unknown scenario names are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigurationError


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


PARSERS = {"float": float, "int": int, "bool": _bool, "str": str, "floats": _floats, "ints": _ints}

# scenario -> (default L, default n, {parameter: (type, default)})
SCHEMA = {
    "ground_state": (16.0, 512, {
        "tol": ("float", 1e-10),
        "oracle": ("bool", True),
    }),
    "spectrum": (16.0, 256, {
        "components": ("ints", (1, 2, 3)),
        "n_eigs": ("int", 6),
        "tol": ("float", 1e-9),
        "coercivity_samples": ("int", 1000),
        "coercivity_components": ("int", 2),
        "coercivity_n": ("int", 128),
        "coercivity_amp": ("float", 1e-2),
    }),
    "gn_sweep": (16.0, 256, {
        "components": ("ints", (1, 2, 3, 5, 8)),
        "trials": ("int", 10000),
        "near_trials": ("int", 1000),
        "trial_n": ("int", 128),
        "batch": ("int", 250),
        "rel_tol": ("float", 1e-6),
        "excess_tol": ("float", 1e-9),
    }),
    "soliton_propagation": (16.0, 256, {
        "N": ("int", 2),
        "dt": ("float", 1e-3),
        "t_end": ("float", 1.0),
        "boost_modes": ("floats", (2.0, -1.0)),
        "xtilde": ("floats", (0.5, -0.25)),
        "error_tol": ("float", 1e-6),
        "order_h": ("float", 2e-3),
        "order_tol": ("float", 0.1),
        "drift_tol": ("float", 1e-10),
        "covariance": ("bool", True),
        "covariance_tol": ("float", 1e-7),
        "conjugacy": ("bool", True),
        "conjugacy_h": ("float", 2e-3),
        "conjugacy_t1": ("float", 1.5),
        "conjugacy_tol": ("float", 1e-6),
    }),
    "perturbed_soliton": (16.0, 256, {
        "N": ("int", 2),
        "amp": ("float", 1e-3),
        "dt": ("float", 1e-3),
        "t_end": ("float", 1.0),
        "cadence": ("float", 0.05),
    }),
    "pc_blowup": (8.0, 512, {
        "N": ("int", 2),
        "lam": ("float", 2.0),
        "t_start": ("float", -1.0),
        "dt": ("float", 0.05),
        "cfl_like_cap": ("float", 0.025),
        "cadence": ("float", 0.02),
        "gs_L": ("float", 16.0),
        "gs_n": ("int", 256),
        "fit_tol": ("float", 0.02),
        "ratio_tol": ("float", 0.02),
        "mass_tol": ("float", 1e-8),
        "perturbed_runs": ("floats", ()),
        "noise": ("float", 1e-3),
    }),
    "resonant_conservation": (16.0, 128, {
        "Jmax": ("int", 3),
        "dt": ("float", 1e-3),
        "t_end": ("float", 1.0),
        "amplitude": ("float", 0.5),
        "drift_tol": ("float", 1e-10),
        "agreement_tol": ("float", 1e-12),
    }),
    "virial_check": (16.0, 256, {
        "N": ("int", 2),
        "dt": ("float", 1e-3),
        "t_end": ("float", 0.2),
        "cadence": ("float", 0.01),
        "scale": ("float", 0.8),
        "chirp": ("float", 0.1),
        "morawetz_R": ("float", 4.0),
        "morawetz_eta1": ("float", 0.5),
        "rel_tol": ("float", 1e-4),
    }),
    "modulation_roundtrip": (16.0, 256, {
        "N": ("int", 2),
        "trials": ("int", 100),
        "perturbations": ("int", 1000),
        "perturbation_n": ("int", 128),
        "amps": ("floats", (1e-2, 1e-3, 1e-4)),
        "recover_tol": ("float", 1e-8),
        "ortho_tol": ("float", 1e-10),
        "k_stability": ("float", 2.0),
    }),
}

SECTIONS = {"scenario": {"name", "seed"}, "grid": {"L", "n"}, "parameters": None,
            "output": {"dir", "snapshots"}}


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    L: float = 16.0
    n: int = 256
    params: dict = field(default_factory=dict)
    output_dir: str = "out"
    snapshots: bool = True

    def to_json(self):
        return {"scenario": self.scenario, "seed": self.seed, "grid": {"L": self.L, "n": self.n},
                "parameters": dict(self.params), "output": {"dir": self.output_dir, "snapshots": self.snapshots}}


def default_config(scenario, **params):
    """Config with schema defaults, overridden by ``params``."""
    if scenario not in SCHEMA:
        raise ConfigurationError(f"unknown scenario {scenario!r}")
    L, n, table = SCHEMA[scenario]
    values = {k: d for k, (_, d) in table.items()}
    for k, v in params.items():
        if k in ("L", "n", "seed"):
            continue
        if k not in table:
            raise ConfigurationError(f"unknown parameter {k!r} for scenario {scenario}")
        values[k] = v
    return ScenarioConfig(scenario, int(params.get("seed", 0)), float(params.get("L", L)),
                          int(params.get("n", n)), values)


def _parse(kind, key, text):
    try:
        return PARSERS[kind](text)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {exc}") from None


def parse_config(text, source="<string>"):
    """Parse configuration text into a validated ScenarioConfig."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigurationError(f"unknown section [{sec}]")
        allowed = SECTIONS[sec]
        if allowed is not None:
            extra = set(cp[sec]) - allowed
            if extra:
                raise ConfigurationError(f"unknown keys in [{sec}]: {sorted(extra)}")
    if not cp.has_option("scenario", "name"):
        raise ConfigurationError("[scenario] name is required")
    name = cp["scenario"]["name"].strip()
    if name not in SCHEMA:
        raise ConfigurationError(f"unknown scenario {name!r}")
    cfg = default_config(name)
    table = SCHEMA[name][2]
    if cp.has_option("scenario", "seed"):
        cfg.seed = _parse("int", "seed", cp["scenario"]["seed"])
    if cp.has_section("grid"):
        if "L" in cp["grid"]:
            cfg.L = _parse("float", "L", cp["grid"]["L"])
        if "n" in cp["grid"]:
            cfg.n = _parse("int", "n", cp["grid"]["n"])
    if cp.has_section("parameters"):
        for key, text in cp["parameters"].items():
            if key not in table:
                raise ConfigurationError(f"unknown parameter {key!r} for scenario {name}")
            cfg.params[key] = _parse(table[key][0], key, text)
    if cp.has_section("output"):
        out = cp["output"]
        cfg.output_dir = out.get("dir", cfg.output_dir)
        if "snapshots" in out:
            cfg.snapshots = _parse("bool", "snapshots", out["snapshots"])
    if not (cfg.L > 0 and cfg.n >= 16 and cfg.n & (cfg.n - 1) == 0):
        raise ConfigurationError("grid needs L > 0 and n a power of two >= 16")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
