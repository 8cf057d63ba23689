"""Run configuration: INI files with one section per concern.

Sections
--------
``[run]``
    experiment (kubo | dpd_sweep | dpd_single), seed, dt (one value or a
    comma-separated list), t_end, n_paths, output_dir, snapshot_interval,
    discard_fraction, profile (desk | paper).
``[scheme]`` or ``[scheme:<label>]`` (repeatable)
    family, variant, alpha, beta, lambda1, lambda2, noise_mode.
``[kubo]``
    sigma, eps, q0, p0.
``[dpd]``
    n_particles, density, box, mass, a, gamma, sigma, q_c, kT_target.

Missing keys take the profile defaults; unknown sections or keys are errors.
"""

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import DEFAULT_DISCARD
from .dpd import DpdParams
from .errors import ParameterError
from .integrators import Family, SchemeSpec, Variant
from .kubo import KuboParams
from .noise import NoiseMode

__all__ = ["ConfigError", "RunConfig", "PROFILES", "parse_config", "parse_config_string",
           "write_config", "config_to_string"]

EXPERIMENTS = ("kubo", "dpd_sweep", "dpd_single")

PROFILES = {
    "desk": {
        "kubo": {"dt": (0.1,), "t_end": 2000.0, "n_paths": 2000},
        "dpd": {"dt": (0.01,), "t_end": 200.0, "n_particles": 375, "density": 3.0},
    },
    "paper": {
        "kubo": {"dt": (0.1,), "t_end": 2000.0, "n_paths": 2000},
        "dpd": {
            # twenty steps between 0.001 and 0.16, log-spaced
            "dt": tuple(float(f"{x:.4g}") for x in np.geomspace(0.001, 0.16, 20)),
            "t_end": 1000.0, "n_particles": 3000, "density": 3.0,
        },
    },
}

_RUN_KEYS = {"experiment", "seed", "dt", "t_end", "n_paths", "output_dir", "snapshot_interval",
             "discard_fraction", "profile"}
_SCHEME_KEYS = {"family", "variant", "alpha", "beta", "lambda1", "lambda2", "noise_mode"}
_KUBO_KEYS = {"sigma", "eps", "q0", "p0"}
_DPD_KEYS = {"n_particles", "density", "box", "mass", "a", "gamma", "sigma", "q_c", "kT_target"}


class ConfigError(ParameterError):
    """One or more configuration fields are invalid."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    schemes: tuple  # of (label, SchemeSpec)
    dts: tuple
    t_end: float
    seed: int = 0
    n_paths: int = 2000
    output_dir: str = "results"
    snapshot_interval: int = 0
    discard_fraction: float = DEFAULT_DISCARD
    profile: str = "desk"
    kubo: Optional[KuboParams] = None
    dpd: Optional[DpdParams] = None
    dpd_density: Optional[float] = field(default=None, compare=False)


class _Collector:
    def __init__(self):
        self.problems = []

    def get(self, section, key, convert, default, what):
        if key not in section:
            return default
        raw = section[key]
        try:
            return convert(raw)
        except (TypeError, ValueError):
            self.problems.append(f"[{section.name}] {key} = {raw!r}: expected {what}")
            return default


def _float_list(raw):
    values = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _box(raw):
    values = _float_list(raw)
    if len(values) == 1:
        values = values * 3
    if len(values) != 3:
        raise ValueError("box needs 1 or 3 values")
    return values


def _int(raw):
    value = float(raw)
    if not value.is_integer():
        raise ValueError("not an integer")
    return int(value)


def parse_config_string(text, overrides=None, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from None
    return _build(parser, overrides or {})


def parse_config(path, overrides=None):
    """Read, validate and complete a run configuration.

    ``overrides`` holds command-line values (``seed``, ``output_dir``,
    ``profile``) that take precedence over the file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} does not exist"])
    return parse_config_string(path.read_text(), overrides, source=str(path))


def _check_keys(col, section, allowed):
    for key in section:
        if key not in allowed:
            col.problems.append(f"[{section.name}] unknown key {key!r}")


def _build(parser, overrides):
    col = _Collector()
    scheme_sections = []
    for name in parser.sections():
        if name == "scheme" or name.startswith("scheme:"):
            scheme_sections.append(name)
        elif name not in ("run", "kubo", "dpd"):
            col.problems.append(f"unknown section [{name}]")
    if "run" not in parser:
        raise ConfigError(col.problems + ["missing section [run]"])
    run = parser["run"]
    _check_keys(col, run, _RUN_KEYS)

    experiment = overrides.get("experiment") or run.get("experiment")
    if experiment not in EXPERIMENTS:
        col.problems.append(f"[run] experiment = {experiment!r}: expected one of {', '.join(EXPERIMENTS)}")
        raise ConfigError(col.problems)
    profile = overrides.get("profile") or run.get("profile", "desk")
    if profile not in PROFILES:
        col.problems.append(f"[run] profile = {profile!r}: expected one of {', '.join(PROFILES)}")
        profile = "desk"
    defaults = PROFILES[profile]["kubo" if experiment == "kubo" else "dpd"]

    seed = col.get(run, "seed", _int, 0, "an integer")
    if overrides.get("seed") is not None:
        seed = int(overrides["seed"])
    if not 0 <= seed < 2**64:
        col.problems.append(f"[run] seed = {seed}: must lie in [0, 2**64)")
    dts = col.get(run, "dt", _float_list, defaults["dt"], "a number or comma-separated numbers")
    if any(not (d > 0 and math.isfinite(d)) for d in dts):
        col.problems.append(f"[run] dt = {dts}: entries must be positive")
    elif any(b <= a for a, b in zip(dts, dts[1:])):
        col.problems.append(f"[run] dt = {dts}: entries must be strictly increasing")
    if experiment != "dpd_sweep" and len(dts) != 1:
        col.problems.append(f"[run] dt: experiment {experiment} takes a single time step")
    t_end = col.get(run, "t_end", float, defaults["t_end"], "a number")
    if not t_end > 0:
        col.problems.append(f"[run] t_end = {t_end}: must be positive")
    n_paths = col.get(run, "n_paths", _int, defaults.get("n_paths", 2000), "an integer")
    if experiment == "kubo" and n_paths < 1:
        col.problems.append(f"[run] n_paths = {n_paths}: must be >= 1")
    output_dir = overrides.get("output_dir") or run.get("output_dir", f"results/{experiment}")
    snapshot_interval = col.get(run, "snapshot_interval", _int, 0, "an integer")
    if snapshot_interval < 0:
        col.problems.append(f"[run] snapshot_interval = {snapshot_interval}: must be >= 0")
    discard = col.get(run, "discard_fraction", float, DEFAULT_DISCARD, "a number")
    if not 0 <= discard < 1:
        col.problems.append(f"[run] discard_fraction = {discard}: must lie in [0, 1)")

    schemes = []
    if not scheme_sections:
        col.problems.append("no [scheme] section")
    for name in scheme_sections:
        sec = parser[name]
        _check_keys(col, sec, _SCHEME_KEYS)
        kw = {}
        for key in ("alpha", "beta", "lambda1", "lambda2"):
            value = col.get(sec, key, float, None, "a number")
            if value is None:
                continue
            if not 0 <= value <= 1:
                col.problems.append(f"[{name}] {key} = {value}: must lie in [0, 1]")
                continue
            kw[key] = value
        try:
            kw["family"] = Family(sec.get("family", "SV_AB"))
        except ValueError:
            col.problems.append(f"[{name}] family = {sec.get('family')!r}: expected one of "
                                + ", ".join(f.value for f in Family))
            continue
        try:
            kw["variant"] = Variant.parse(sec.get("variant", "AB3_GW"))
        except ParameterError as exc:
            col.problems.append(f"[{name}] {exc}")
            continue
        try:
            kw["noise_mode"] = NoiseMode(sec.get("noise_mode", NoiseMode.INDEPENDENT_HALVES.value))
        except ValueError:
            col.problems.append(f"[{name}] noise_mode = {sec.get('noise_mode')!r}: expected "
                                + " or ".join(m.value for m in NoiseMode))
            continue
        try:
            spec = SchemeSpec(**kw)
        except ParameterError as exc:
            col.problems.append(f"[{name}] {exc}")
            continue
        label = name.split(":", 1)[1].strip() if ":" in name else spec.label
        schemes.append((label, spec))
    labels = [label for label, _ in schemes]
    if len(set(labels)) != len(labels):
        col.problems.append("scheme labels must be unique")

    kubo = dpd = density = None
    if experiment == "kubo":
        sec = parser["kubo"] if "kubo" in parser else {}
        if sec:
            _check_keys(col, sec, _KUBO_KEYS)
        kw = {}
        for key in _KUBO_KEYS:
            if key in sec:
                kw[key] = col.get(sec, key, float, None, "a number")
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            kubo = KuboParams(**kw)
        except ParameterError as exc:
            col.problems.append(f"[kubo] {exc}")
    else:
        sec = parser["dpd"] if "dpd" in parser else None
        if sec is not None:
            _check_keys(col, sec, _DPD_KEYS)
        get = (lambda k, conv, d, what: col.get(sec, k, conv, d, what)) if sec is not None else \
            (lambda k, conv, d, what: d)
        n = get("n_particles", _int, defaults["n_particles"], "an integer")
        density = get("density", float, defaults["density"], "a number")
        box = get("box", _box, None, "one or three numbers")
        kw = {key: get(key, float, None, "a number") for key in ("mass", "a", "gamma", "sigma", "q_c", "kT_target")}
        kw = {k: v for k, v in kw.items() if v is not None}
        if sec is not None and "box" in sec and "density" in sec:
            col.problems.append("[dpd] give either box or density, not both")
        try:
            if box is None:
                if not density > 0:
                    raise ParameterError(f"density must be positive, got {density}")
                dpd = DpdParams.at_density(n, density, **kw)
            else:
                dpd = DpdParams(n_particles=n, box=box, **kw)
                density = None
        except ParameterError as exc:
            col.problems.append(f"[dpd] {exc}")
    if experiment == "dpd_single" and len(schemes) > 1:
        col.problems.append("dpd_single runs exactly one scheme")

    if col.problems:
        raise ConfigError(col.problems)
    return RunConfig(experiment=experiment, schemes=tuple(schemes), dts=tuple(dts), t_end=t_end,
                     seed=seed, n_paths=n_paths, output_dir=str(output_dir),
                     snapshot_interval=snapshot_interval, discard_fraction=discard, profile=profile,
                     kubo=kubo, dpd=dpd, dpd_density=density)


def config_to_string(cfg):
    """Every effective value, including defaults and the seed, as INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {
        "experiment": cfg.experiment,
        "profile": cfg.profile,
        "seed": str(cfg.seed),
        "dt": ", ".join(repr(d) for d in cfg.dts),
        "t_end": repr(cfg.t_end),
        "n_paths": str(cfg.n_paths),
        "output_dir": cfg.output_dir,
        "snapshot_interval": str(cfg.snapshot_interval),
        "discard_fraction": repr(cfg.discard_fraction),
    }
    for label, spec in cfg.schemes:
        parser[f"scheme:{label}"] = {
            "family": spec.family.value,
            "variant": spec.variant.value,
            "alpha": repr(spec.alpha),
            "beta": repr(spec.beta),
            "lambda1": repr(spec.lambda1),
            "lambda2": repr(spec.lambda2),
            "noise_mode": spec.noise_mode.value,
        }
    if cfg.kubo is not None:
        k = cfg.kubo
        parser["kubo"] = {"sigma": repr(k.sigma), "eps": repr(k.eps), "q0": repr(k.q0), "p0": repr(k.p0)}
    if cfg.dpd is not None:
        d = cfg.dpd
        parser["dpd"] = {
            "n_particles": str(d.n_particles),
            "box": ", ".join(repr(b) for b in d.box),
            "mass": repr(d.mass),
            "a": repr(d.a),
            "gamma": repr(d.gamma),
            "sigma": repr(d.sigma),
            "q_c": repr(d.q_c),
            "kT_target": repr(d.kT_target),
        }
    lines = []

    class _Sink:
        def write(self, s):
            lines.append(s)

    parser.write(_Sink())
    return "".join(lines)


def write_config(cfg, path):
    Path(path).write_text(config_to_string(cfg))
