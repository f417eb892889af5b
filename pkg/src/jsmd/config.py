"""Run configuration: a YAML document with unit-bearing lengths.

Waist lengths must say whether they are a radius or a diameter
(``"2 mm diameter"``); diameters are halved on ingestion. Other lengths
take a unit only (``"405 nm"``). Unknown keys are rejected by name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .analytic import NORMALIZATIONS, THIN_CRYSTAL_THRESHOLD
from .lg import BeamGeometry, LGIndex, QuadratureConfig
from .setsim import COUPLING_MODES, SetExperimentConfig

UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
_LENGTH = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(mm|um|nm|m)"
                     r"(?:\s+(radius|diameter))?\s*$")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_length(value: Any, field: str, waist: bool = False) -> float:
    """Parse ``"<number> <unit> [radius|diameter]"`` into metres (radius for waists)."""
    if not isinstance(value, str):
        raise ConfigError(field, f"expected a length string with unit, got {value!r}")
    m = _LENGTH.match(value)
    if not m:
        raise ConfigError(field, f"cannot parse length {value!r}; use e.g. '2 mm'")
    number, unit, qualifier = float(m.group(1)), m.group(2), m.group(3)
    if number <= 0:
        raise ConfigError(field, "length must be positive")
    metres = number * UNITS[unit]
    if waist:
        if qualifier is None:
            raise ConfigError(field, "waist needs a 'radius' or 'diameter' qualifier")
        return metres / 2 if qualifier == "diameter" else metres
    if qualifier is not None:
        raise ConfigError(field, f"'{qualifier}' only applies to waists")
    return metres


def _section(doc: Any, name: str, allowed: set) -> dict:
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(name, "expected a mapping")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
    return doc


def _int(value, field, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(field, f"must be >= {minimum}")
    return value


def _float(value, field, positive=False, non_negative=False):
    # PyYAML reads exponent literals without a dot (1e-6) as strings.
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(field, f"expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(field, "must be positive")
    if non_negative and value < 0:
        raise ConfigError(field, "must be non-negative")
    return value


def _l_range(value, field) -> tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, "expected [l_min, l_max]")
    lo, hi = (_int(v, field) for v in value)
    if hi < lo:
        raise ConfigError(field, f"empty range [{lo}, {hi}]")
    return lo, hi


def _float_list(value, field) -> list:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(field, "expected a nonempty list of numbers")
    return [_float(v, field, positive=True) for v in value]


def _int_list(value, field) -> list:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(field, "expected a nonempty list of integers")
    return [_int(v, field) for v in value]


@dataclass
class SpectrumSpec:
    gammas: list = field(default_factory=lambda: [2.03, 3.05])
    l_values: list = field(default_factory=lambda: list(range(0, 7)))
    sweep_l_values: list = field(default_factory=lambda: [1, 2, 3])
    sweep: Optional[tuple] = (0.5, 4.0, 36)


@dataclass
class ValidateSpec:
    l_max: int = 6
    p_max: int = 2
    gammas: list = field(default_factory=lambda: [0.5, 1.0, 2.03, 3.05])
    tolerance: float = 1e-6
    workers: int = 1


@dataclass
class RunConfig:
    geometry: BeamGeometry
    l_range: tuple = (-6, 6)
    p_s: int = 0
    p_i: int = 0
    normalization: str = "global-max"
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    validate: ValidateSpec = field(default_factory=ValidateSpec)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    simulate: dict = field(default_factory=dict)
    thin_crystal_threshold: float = THIN_CRYSTAL_THRESHOLD
    out_dir: Optional[str] = None
    format: str = "both"

    def experiment(self, seed_override: Optional[int] = None) -> SetExperimentConfig:
        kw = dict(self.simulate)
        if seed_override is not None:
            kw["rng_seed"] = seed_override
        return SetExperimentConfig(self.geometry, quad=self.quadrature, **kw)


DEFAULT_GEOMETRY = {
    "pump_waist": "2 mm diameter",
    "signal_waist": "1.35 mm diameter",
    "idler_waist": "1.35 mm diameter",
    "pump_wavelength": "405 nm",
    "signal_wavelength": "780 nm",
    "idler_wavelength": "842 nm",
    "crystal_length": "2 mm",
}

_GEOMETRY_KEYS = set(DEFAULT_GEOMETRY) | {"gamma", "gamma_s", "gamma_i"}


def _geometry(doc) -> BeamGeometry:
    doc = _section(doc, "geometry", _GEOMETRY_KEYS)
    uses_gamma = any(k in doc for k in ("gamma", "gamma_s", "gamma_i"))
    uses_waist = any(k in doc for k in ("signal_waist", "idler_waist"))
    if uses_gamma and uses_waist:
        raise ConfigError("geometry", "give either signal/idler waists or gamma values, not both")
    merged = dict(DEFAULT_GEOMETRY)
    merged.update(doc)
    w_p = parse_length(merged["pump_waist"], "geometry.pump_waist", waist=True)
    common = dict(
        lambda_p=parse_length(merged["pump_wavelength"], "geometry.pump_wavelength"),
        lambda_s=parse_length(merged["signal_wavelength"], "geometry.signal_wavelength"),
        lambda_i=parse_length(merged["idler_wavelength"], "geometry.idler_wavelength"),
        L=parse_length(merged["crystal_length"], "geometry.crystal_length"),
    )
    if uses_gamma:
        if "gamma" in doc and ("gamma_s" in doc or "gamma_i" in doc):
            raise ConfigError("geometry.gamma", "use gamma or gamma_s/gamma_i, not both")
        g = doc.get("gamma")
        gs = _float(doc.get("gamma_s", g), "geometry.gamma_s", positive=True)
        gi = _float(doc.get("gamma_i", g if g is not None else gs), "geometry.gamma_i",
                    positive=True)
        return BeamGeometry.from_gammas(w_p, gs, gi, **common)
    return BeamGeometry(
        w_p=w_p,
        w_s=parse_length(merged["signal_waist"], "geometry.signal_waist", waist=True),
        w_i=parse_length(merged["idler_waist"], "geometry.idler_waist", waist=True),
        **common)


def _modes(value, field) -> tuple:
    if isinstance(value, dict):
        doc = _section(value, field, {"l_range", "p"})
        lo, hi = _l_range(doc.get("l_range", [-6, 6]), f"{field}.l_range")
        p = _int(doc.get("p", 0), f"{field}.p", minimum=0)
        return tuple(LGIndex(l, p) for l in range(lo, hi + 1))
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "expected a mapping {l_range, p} or a list of [l, p] pairs")
    out = []
    for item in value:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(field, f"mode {item!r} is not an [l, p] pair")
        out.append(LGIndex(_int(item[0], field), _int(item[1], field, minimum=0)))
    return tuple(out)


_SIM_KEYS = {"seed_modes", "projection_modes", "fiber_waist", "aperture", "window_seconds",
             "n_windows", "n_dark_trials", "peak_rate_hz", "dark_rate_hz", "rng_seed",
             "coupling"}


def _simulate(doc) -> dict:
    doc = _section(doc, "simulate", _SIM_KEYS)
    kw = {}
    if "seed_modes" in doc:
        kw["seed_modes"] = _modes(doc["seed_modes"], "simulate.seed_modes")
    if "projection_modes" in doc:
        kw["projection_modes"] = _modes(doc["projection_modes"], "simulate.projection_modes")
    if doc.get("fiber_waist") is not None:
        kw["fiber_waist"] = parse_length(doc["fiber_waist"], "simulate.fiber_waist", waist=True)
    if doc.get("aperture") is not None:
        kw["aperture_radius"] = parse_length(doc["aperture"], "simulate.aperture", waist=True)
    if "window_seconds" in doc:
        kw["window_seconds"] = _float(doc["window_seconds"], "simulate.window_seconds",
                                      positive=True)
    for key in ("n_windows", "n_dark_trials"):
        if key in doc:
            kw[key] = _int(doc[key], f"simulate.{key}", minimum=1)
    for key in ("peak_rate_hz", "dark_rate_hz"):
        if key in doc:
            kw[key] = _float(doc[key], f"simulate.{key}", non_negative=True)
    if "rng_seed" in doc:
        seed = _int(doc["rng_seed"], "simulate.rng_seed", minimum=0)
        if seed >= 2 ** 64:
            raise ConfigError("simulate.rng_seed", "must fit in 64 bits")
        kw["rng_seed"] = seed
    if "coupling" in doc:
        if doc["coupling"] not in COUPLING_MODES:
            raise ConfigError("simulate.coupling", f"must be one of {COUPLING_MODES}")
        kw["coupling"] = doc["coupling"]
    return kw


def _quadrature(doc) -> QuadratureConfig:
    doc = _section(doc, "quadrature", {"radial_nodes", "truncation_radius_factor",
                                       "azimuthal_nodes", "target_rel_tol", "max_radial_nodes"})
    kw = {}
    for key in ("radial_nodes", "azimuthal_nodes", "max_radial_nodes"):
        if key in doc:
            kw[key] = _int(doc[key], f"quadrature.{key}", minimum=1)
    for key in ("truncation_radius_factor", "target_rel_tol"):
        if key in doc:
            kw[key] = _float(doc[key], f"quadrature.{key}", positive=True)
    try:
        return QuadratureConfig(**kw)
    except ValueError as exc:
        raise ConfigError("quadrature", str(exc)) from None


def _spectrum(doc) -> SpectrumSpec:
    doc = _section(doc, "spectrum", {"gammas", "l_values", "sweep"})
    spec = SpectrumSpec()
    if "gammas" in doc:
        spec.gammas = _float_list(doc["gammas"], "spectrum.gammas")
    if "l_values" in doc:
        spec.l_values = _int_list(doc["l_values"], "spectrum.l_values")
    if "sweep" in doc:
        sweep = doc["sweep"]
        if sweep is None:
            spec.sweep = None
        else:
            sweep = _section(sweep, "spectrum.sweep", {"start", "stop", "num", "l_values"})
            start = _float(sweep.get("start", 0.5), "spectrum.sweep.start", positive=True)
            stop = _float(sweep.get("stop", 4.0), "spectrum.sweep.stop", positive=True)
            num = _int(sweep.get("num", 36), "spectrum.sweep.num", minimum=1)
            if stop < start:
                raise ConfigError("spectrum.sweep", "stop must be >= start")
            spec.sweep = (start, stop, num)
            if "l_values" in sweep:
                spec.sweep_l_values = _int_list(sweep["l_values"], "spectrum.sweep.l_values")
    return spec


def _validate(doc) -> ValidateSpec:
    doc = _section(doc, "validate", {"l_max", "p_max", "gammas", "tolerance", "workers"})
    spec = ValidateSpec()
    if "l_max" in doc:
        spec.l_max = _int(doc["l_max"], "validate.l_max", minimum=0)
    if "p_max" in doc:
        spec.p_max = _int(doc["p_max"], "validate.p_max", minimum=0)
    if "gammas" in doc:
        spec.gammas = _float_list(doc["gammas"], "validate.gammas")
    if "tolerance" in doc:
        spec.tolerance = _float(doc["tolerance"], "validate.tolerance", positive=True)
    if "workers" in doc:
        spec.workers = _int(doc["workers"], "validate.workers", minimum=1)
    return spec


_TOP_KEYS = {"geometry", "jsmd", "spectrum", "validate", "quadrature", "simulate",
             "thin_crystal", "output"}


def load_config(doc: Optional[dict]) -> RunConfig:
    """Build a RunConfig from a parsed YAML mapping (None gives defaults)."""
    doc = _section(doc, "config", _TOP_KEYS) if doc is not None else {}
    jsmd = _section(doc.get("jsmd"), "jsmd", {"l_range", "p_s", "p_i", "normalization"})
    normalization = jsmd.get("normalization", "global-max")
    if normalization not in NORMALIZATIONS:
        raise ConfigError("jsmd.normalization", f"must be one of {NORMALIZATIONS}")
    thin = _section(doc.get("thin_crystal"), "thin_crystal", {"threshold"})
    output = _section(doc.get("output"), "output", {"dir", "format"})
    fmt = output.get("format", "both")
    if fmt not in ("csv", "json", "both"):
        raise ConfigError("output.format", "must be csv, json or both")
    cfg = RunConfig(
        geometry=_geometry(doc.get("geometry")),
        l_range=_l_range(jsmd.get("l_range", [-6, 6]), "jsmd.l_range"),
        p_s=_int(jsmd.get("p_s", 0), "jsmd.p_s", minimum=0),
        p_i=_int(jsmd.get("p_i", 0), "jsmd.p_i", minimum=0),
        normalization=normalization,
        spectrum=_spectrum(doc.get("spectrum")),
        validate=_validate(doc.get("validate")),
        quadrature=_quadrature(doc.get("quadrature")),
        simulate=_simulate(doc.get("simulate")),
        thin_crystal_threshold=_float(thin.get("threshold", THIN_CRYSTAL_THRESHOLD),
                                      "thin_crystal.threshold", positive=True),
        out_dir=output.get("dir"),
        format=fmt,
    )
    try:
        cfg.experiment()
    except ValueError as exc:
        raise ConfigError("simulate", str(exc)) from None
    return cfg


def load_config_file(path: Optional[str]) -> RunConfig:
    if path is None:
        return load_config(None)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"invalid YAML: {exc}") from None
    return load_config(doc)
