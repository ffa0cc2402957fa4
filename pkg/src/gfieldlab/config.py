"""Run configuration: INI or JSON, sections mirroring the module layout.

Unknown sections or keys are rejected; every tolerance used by the
verification suites lives here with its default, so tightening a gate is a
config change, not a code change.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .scenarios import VolBand

TWO_PI = 2.0 * math.pi

DEFAULTS: dict[str, dict] = {
    "run": {
        "seed": 20260811,
        "n_paths": 100_000,
        "out_dir": "out",
        "jobs": 1,
    },
    "band": {
        "sigma_lo2": 1.0,
        "sigma_hi2": 4.0,
    },
    "scenarios": {
        "slices": 8,
        "t_end": 1.0,
        "values": "band-edges",
        "max_scenarios": 256,
    },
    "gheat": {
        "nx": 961,
        "nx_2d": 161,
        "safety": 0.8,
        "pad_sigmas": 6.0,
        "dt": 0.0,  # 0 = derive from the CFL rule
    },
    "hilbert": {
        "length": TWO_PI,
        "n_quad": 512,
    },
    "noise": {
        "n_modes": 16,
        "slices": 8,
        "n_paths": 20_000,
    },
    "spde": {
        "mass": 1.0,
        "t_end": 0.5,
        "n_modes": 64,
        "nx": 128,
        "slices": 64,
        "quad_factor": 4,
        "n_paths": 4000,
    },
    "tolerances": {
        "moments_low_order": 1e-2,   # |error|, k <= 2
        "moments_high_order": 5e-2,  # |error|, k = 3, 4
        "engine_rel": 2e-2,
        "engine_se_mult": 3.0,
        "compatibility": 1e-12,
        "covariance_2d": 2e-2,
        "expansion_oracle": 1e-2,
        "union_exact": 1e-12,
        "union_se_mult": 5.0,
        "isometry_se_mult": 5.0,
        "chebyshev_se_mult": 3.0,
        "idgbm_se_mult": 5.0,
        "kernel_mass": 1e-8,
        "kernel_duality": 1e-10,
        "coupling_rel": 1e-2,
        "coupling_order_lo": 0.7,
        "coupling_order_hi": 1.3,
        "ou_mean_se_mult": 3.0,
        "ou_cov_se_mult": 3.0,
        "ou_classical_se_mult": 5.0,
        "weak_residual": 1e-3,
        "second_moment_se_mult": 3.0,
        "contraction_tol": 1e-8,
        "contraction_iters": 30,
    },
}


@dataclass(frozen=True)
class RunConfig:
    sections: dict[str, dict] = field(repr=False)

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    @property
    def seed(self) -> int:
        return int(self.sections["run"]["seed"])

    @property
    def jobs(self) -> int:
        return int(self.sections["run"]["jobs"])

    @property
    def out_dir(self) -> str:
        return str(self.sections["run"]["out_dir"])

    @property
    def band(self) -> VolBand:
        b = self.sections["band"]
        return VolBand(b["sigma_lo2"], b["sigma_hi2"])

    def tol(self, key: str) -> float:
        return float(self.sections["tolerances"][key])

    def replace(self, **overrides) -> "RunConfig":
        """New config with {'section.key': value} overrides."""
        sections = {k: dict(v) for k, v in self.sections.items()}
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if section not in sections or key not in sections[section]:
                raise ConfigError(f"unknown config key {dotted!r}")
            sections[section][key] = value
        cfg = RunConfig(sections)
        validate_config(cfg)
        return cfg


def default_config() -> RunConfig:
    return RunConfig({k: dict(v) for k, v in DEFAULTS.items()})


def _coerce(section: str, key: str, raw, reference) -> object:
    if isinstance(reference, bool):
        raise ConfigError(f"unexpected bool default for {section}.{key}")
    try:
        if isinstance(reference, int):
            if isinstance(raw, float) and raw != int(raw):
                raise ValueError
            return int(raw)
        if isinstance(reference, float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"config value {section}.{key}={raw!r} is not a valid "
            f"{type(reference).__name__}"
        ) from None


def _merge(payload: dict[str, dict]) -> RunConfig:
    sections = {k: dict(v) for k, v in DEFAULTS.items()}
    for section, entries in payload.items():
        if section not in sections:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"section [{section}] must hold key/value pairs")
        for key, raw in entries.items():
            if key not in sections[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            sections[section][key] = _coerce(section, key, raw, DEFAULTS[section][key])
    cfg = RunConfig(sections)
    validate_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Parse an INI (default) or JSON config file against the defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError("JSON config must be an object of sections")
        return _merge(payload)
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"invalid INI config: {exc}") from None
    payload = {s: dict(parser.items(s)) for s in parser.sections()}
    return _merge(payload)


def validate_config(cfg: RunConfig) -> None:
    """Re-validate the module invariants the sections feed into."""
    b = cfg.sections["band"]
    if not (math.isfinite(b["sigma_lo2"]) and math.isfinite(b["sigma_hi2"])):
        raise ConfigError("band.sigma_lo2/band.sigma_hi2 must be finite")
    if b["sigma_lo2"] < 0:
        raise ConfigError(f"band.sigma_lo2 must be >= 0, got {b['sigma_lo2']}")
    if b["sigma_lo2"] > b["sigma_hi2"]:
        raise ConfigError(
            f"band.sigma_lo2 must be <= band.sigma_hi2, got "
            f"({b['sigma_lo2']}, {b['sigma_hi2']})"
        )
    run = cfg.sections["run"]
    if run["n_paths"] < 1 or run["jobs"] < 1:
        raise ConfigError("run.n_paths and run.jobs must be positive")
    sc = cfg.sections["scenarios"]
    if sc["slices"] < 1 or sc["t_end"] <= 0:
        raise ConfigError("scenarios.slices and scenarios.t_end must be positive")
    if sc["values"] not in ("band-edges", "band-edges+mid"):
        raise ConfigError(
            f"scenarios.values must be 'band-edges' or 'band-edges+mid', "
            f"got {sc['values']!r}"
        )
    gh = cfg.sections["gheat"]
    if gh["nx"] < 3 or gh["nx_2d"] < 3:
        raise ConfigError("gheat.nx / gheat.nx_2d must be at least 3")
    if not (0 < gh["safety"] <= 1):
        raise ConfigError("gheat.safety must be in (0, 1]")
    if gh["dt"] > 0:
        # explicit step: enforce the CFL rule at load time for the 1D solver
        hw = gh["pad_sigmas"] * math.sqrt(b["sigma_hi2"]) * math.sqrt(sc["t_end"])
        dx = 2 * hw / (gh["nx"] - 1)
        if b["sigma_hi2"] > 0 and gh["dt"] > dx**2 / b["sigma_hi2"]:
            raise ConfigError(
                f"gheat.dt={gh['dt']:g} violates the CFL bound "
                f"dx^2/sigma_hi2={dx**2 / b['sigma_hi2']:g}"
            )
    hi = cfg.sections["hilbert"]
    if hi["length"] <= 0 or hi["n_quad"] < 16:
        raise ConfigError("hilbert.length must be > 0 and hilbert.n_quad >= 16")
    no = cfg.sections["noise"]
    if no["n_modes"] < 1 or no["slices"] < 1 or no["n_paths"] < 2:
        raise ConfigError("noise.n_modes, noise.slices, noise.n_paths must be >= 1")
    sp = cfg.sections["spde"]
    if sp["mass"] <= 0:
        raise ConfigError("spde.mass must be > 0 (stability of every mode)")
    if sp["t_end"] <= 0 or sp["n_modes"] < 1 or sp["nx"] < 8 or sp["slices"] < 1:
        raise ConfigError("invalid spde geometry")
    for key, val in cfg.sections["tolerances"].items():
        if val <= 0:
            raise ConfigError(f"tolerances.{key} must be positive")


def dump_config(cfg: RunConfig, path) -> None:
    """Write the effective configuration as INI (diff-friendly)."""
    parser = configparser.ConfigParser()
    for section, entries in cfg.sections.items():
        parser[section] = {k: repr(v) if not isinstance(v, str) else v
                           for k, v in entries.items()}
    with open(path, "w") as fh:
        parser.write(fh)
