"""Run configuration: defaults, group presets, INI files and flag overrides.

Settings are resolved in four layers, later ones winning::

    built-in defaults  <  preset  <  config file  <  command-line flags

The config file is INI (``configparser``) with the sections below; every key
is optional.  Lists are comma separated.

.. code-block:: ini

    [run]
    preset = serious            ; serious | minor
    seeds = 5                   ; number of replications, seeds seed..seed+4
    seed_list = 1, 2, 3         ; explicit seeds (overrides seeds)
    workers = 1
    steady_fraction = 0.2

    [learner]
    mu = 0.5
    beta = 0.5                  ; constant momentum
    delta = 0.6                 ; decaying momentum k**-delta (excludes beta)
    box_radius = 50
    gprime_floor = 1e-12        ; "none" disables the floor

    [noise]
    sigma = 1.0
    snr = 10                    ; simulate only: sigma = std(phi @ theta) / snr

    [stream]
    T = 100000
    seed = 20240601
    lower = 1
    upper = 400
    b = 1
    c = 2
    d = 4
    e = 8
    eta = 0.05
    p = -0.15, 0.2
    q = 0.1
    count_rates = 1.0, 0.7, 0.5, 0.3
    count_cap = 3
    a_low = 24
    a_high = 24
    z_probs = 0.5, 0.5
    v_probs = 0.5

    [drift]
    mode = random_walk          ; constant | random_walk | piecewise_jump
    xi = 0.001                  ; random_walk step norm
    jump = 0.1                  ; piecewise_jump jump norm
    period = 100

    [dataset]
    z_columns = voluntary_surrender, confession
    v_columns = v_1, v_2
"""

from __future__ import annotations

import configparser
import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError
from .mlms import ConstantMomentum, DecayingMomentum, Hyperparams
from .noise import GaussianNoiseModel
from .simulator import (
    CountLaw,
    DriftSpec,
    StartingPoint,
    StreamSpec,
    replication_seeds,
    sigma_for_snr,
)
from .sms_core import StructuralParams

MODES = ("simulate", "fit", "bound", "validate")
FORMATS = ("json", "csv", "jsonl")

PRESETS: dict[str, dict[str, Any]] = {
    "serious": {"lower": 36.0, "upper": 120.0, "sigma": 9.17, "mu": 10.0, "beta": 0.9},
    "minor": {"lower": 6.0, "upper": 36.0, "sigma": 3.42, "mu": 1.0, "beta": 0.5},
}


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(t) for t in text.split(",")) if text else ()


def _names(text: str) -> tuple[str, ...]:
    text = text.strip()
    return tuple(t.strip() for t in text.split(",")) if text else ()


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in _names(text))


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("none", "off", "") else float(text)


# section -> key -> (RunConfig field, parser)
_SCHEMA: dict[str, dict[str, tuple[str, Callable[[str], Any]]]] = {
    "run": {
        "preset": ("preset", str.strip),
        "seeds": ("n_seeds", int),
        "seed_list": ("seed_list", _ints),
        "workers": ("workers", int),
        "steady_fraction": ("steady_fraction", float),
    },
    "learner": {
        "mu": ("mu", float),
        "beta": ("beta", float),
        "delta": ("delta", float),
        "box_radius": ("box_radius", float),
        "gprime_floor": ("gprime_floor", _opt_float),
    },
    "noise": {"sigma": ("sigma", float), "snr": ("snr", float)},
    "stream": {
        "t": ("T", int),
        "seed": ("seed", int),
        "lower": ("lower", float),
        "upper": ("upper", float),
        "b": ("b", float),
        "c": ("c", float),
        "d": ("d", float),
        "e": ("e", float),
        "eta": ("eta", float),
        "p": ("p", _floats),
        "q": ("q", _floats),
        "count_rates": ("count_rates", _floats),
        "count_cap": ("count_cap", int),
        "a_low": ("a_low", float),
        "a_high": ("a_high", float),
        "z_probs": ("z_probs", _floats),
        "v_probs": ("v_probs", _floats),
    },
    "drift": {
        "mode": ("drift_mode", str.strip),
        "xi": ("xi", float),
        "jump": ("jump", float),
        "period": ("period", int),
    },
    "dataset": {"z_columns": ("z_columns", _names), "v_columns": ("v_columns", _names)},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one CLI invocation.

    ``sigma`` is ``None`` when neither a preset, file nor flag set it; the
    ``bound`` command then estimates it from residuals and ``simulate`` uses
    1.0 (or ``snr`` when given).
    """

    preset: Optional[str] = None
    n_seeds: int = 1
    seed_list: Optional[tuple[int, ...]] = None
    workers: int = 1
    steady_fraction: float = 0.2
    mu: float = 0.5
    beta: Optional[float] = 0.5
    delta: Optional[float] = None
    box_radius: float = 50.0
    gprime_floor: Optional[float] = 1e-12
    sigma: Optional[float] = None
    snr: Optional[float] = None
    T: int = 100_000
    seed: int = 20240601
    lower: float = 1.0
    upper: float = 400.0
    b: float = 1.0
    c: float = 2.0
    d: float = 4.0
    e: float = 8.0
    eta: float = 0.05
    p: tuple[float, ...] = (-0.15, 0.2)
    q: tuple[float, ...] = (0.1,)
    count_rates: tuple[float, ...] = (1.0, 0.7, 0.5, 0.3)
    count_cap: int = 3
    a_low: float = 24.0
    a_high: float = 24.0
    z_probs: tuple[float, ...] = ()
    v_probs: tuple[float, ...] = ()
    drift_mode: str = "constant"
    xi: float = 0.0
    jump: float = 0.0
    period: int = 1
    z_columns: Optional[tuple[str, ...]] = None
    v_columns: Optional[tuple[str, ...]] = None

    # -- derived objects -------------------------------------------------
    def seeds(self) -> list[int]:
        if self.seed_list is not None:
            return list(self.seed_list)
        return replication_seeds(self.seed, self.n_seeds)

    def momentum(self):
        if self.delta is not None:
            return DecayingMomentum(self.delta)
        return ConstantMomentum(self.beta if self.beta is not None else 0.0)

    def hyperparams(self) -> Hyperparams:
        try:
            return Hyperparams(self.mu, self.momentum(), self.box_radius, self.gprime_floor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def structural(self) -> StructuralParams:
        return StructuralParams(self.b, self.c, self.d, self.e, self.eta, self.p, self.q)

    def drift(self) -> DriftSpec:
        if self.drift_mode == "constant":
            return DriftSpec()
        if self.drift_mode == "random_walk":
            return DriftSpec.random_walk(self.xi)
        if self.drift_mode == "piecewise_jump":
            return DriftSpec.piecewise_jump(self.jump, self.period)
        raise ConfigError(f"unknown drift mode {self.drift_mode!r}")

    def stream_spec(self) -> StreamSpec:
        """Simulation stream; resolves ``snr`` to a noise level if needed."""
        try:
            spec = StreamSpec(
                structural=self.structural(),
                T=self.T,
                seed=self.seed,
                lower=self.lower,
                upper=self.upper,
                z_probs=self.z_probs,
                v_probs=self.v_probs,
                count_law=CountLaw(self.count_rates, self.count_cap),
                a_law=StartingPoint(self.a_low, self.a_high),
                drift=self.drift(),
                noise=GaussianNoiseModel(1.0 if self.sigma is None else self.sigma),
                box_radius=self.box_radius,
                group=self.preset or "custom",
            )
            if self.sigma is None and self.snr is not None:
                spec = replace(spec, noise=GaussianNoiseModel(sigma_for_snr(spec, self.snr)))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return spec

    def canonical(self) -> dict:
        """Plain-data view with a fixed key order."""
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _preset_values(name: Optional[str]) -> dict:
    if name is None:
        return {}
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return dict(PRESETS[name])


def read_config_file(path) -> dict:
    """Parse an INI file into ``RunConfig`` field values."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with Path(path).open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            name, parse = _SCHEMA[section][key]
            try:
                values[name] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key} = {raw!r}: {exc}") from exc
    return values


def resolve_config(
    config_path=None,
    preset: Optional[str] = None,
    overrides: Optional[dict] = None,
) -> RunConfig:
    """Combine defaults, preset, config file and flag overrides.

    ``overrides`` maps ``RunConfig`` field names to values; ``None`` entries
    are ignored so unset flags do not mask file values.
    """
    file_values = read_config_file(config_path) if config_path is not None else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = set(overrides) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    name = preset if preset is not None else file_values.get("preset")
    merged: dict = {}
    merged.update(_preset_values(name))
    merged.update(file_values)
    merged.update(overrides)
    merged["preset"] = name
    # An explicit delta anywhere selects the decaying schedule; asking for
    # both schedules at the same layer is ambiguous.
    for layer in (file_values, overrides):
        if "beta" in layer and "delta" in layer:
            raise ConfigError("set either beta (constant momentum) or delta (decaying momentum), not both")
    if "beta" in overrides and "delta" in merged and "delta" not in overrides:
        merged.pop("delta")
    if merged.get("delta") is not None:
        merged["beta"] = None
    cfg = RunConfig(**merged)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig):
    if cfg.n_seeds < 1:
        raise ConfigError("seeds must be >= 1")
    if cfg.seed_list is not None and not cfg.seed_list:
        raise ConfigError("seed list is empty")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not 0 < cfg.steady_fraction <= 1:
        raise ConfigError("steady_fraction must lie in (0, 1]")
    if cfg.sigma is not None and not cfg.sigma > 0:
        raise ConfigError("sigma must be positive")
    if cfg.snr is not None and not cfg.snr > 0:
        raise ConfigError("snr must be positive")
    if not 0 < cfg.lower < cfg.upper:
        raise ConfigError("bounds must satisfy 0 < lower < upper")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg.hyperparams()
