"""Declarative run configuration (YAML) with strict key checking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .quadrature import HomodyneModel
from .source import REP_RATE, HeraldConfig, PumpModel, calibrate_gain, pump_to_lambda
from .timing import TimingConfig
from .tomography import ReconstructionConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass
class HeraldSection:
    lam: float | None = None
    power_kw: float | None = None
    gain_const: float | None = None
    calibration_power_kw: float = 20.0
    calibration_rate_hz: float = 250e3
    rep_rate: float = REP_RATE
    eta_spcm: float = 0.06
    dark_prob: float = 0.0
    splitter: float = 0.5
    n_cut: int = 8
    n_max: int = 5
    modal_purity: float = 1.0

    def base(self) -> HeraldConfig:
        return HeraldConfig(
            lam=0.0,
            eta_spcm=self.eta_spcm,
            dark_prob=self.dark_prob,
            splitter=self.splitter,
            n_cut=self.n_cut,
            n_max=self.n_max,
            modal_purity=self.modal_purity,
        )

    def resolved_gain(self) -> float:
        if self.gain_const is not None:
            return self.gain_const
        return calibrate_gain(self.base(), self.calibration_power_kw, self.calibration_rate_hz, self.rep_rate)

    def build(self) -> HeraldConfig:
        """Herald config with ``lam`` from an explicit value or from the pump power."""
        if self.lam is not None:
            if self.power_kw is not None:
                raise ConfigError("herald: give either lam or power_kw, not both")
            return replace(self.base(), lam=self.lam)
        if self.power_kw is None:
            raise ConfigError("herald: one of lam or power_kw is required")
        lam = pump_to_lambda(PumpModel(self.power_kw, self.resolved_gain()))
        return replace(self.base(), lam=lam)


@dataclass
class StateSection:
    source: str = "herald"  # "herald" or "fock"
    pattern: str = "single"
    n: int = 1

    def __post_init__(self) -> None:
        if self.source not in ("herald", "fock"):
            raise ConfigError(f"state.source must be 'herald' or 'fock', got {self.source!r}")
        if self.pattern not in ("single", "coincidence"):
            raise ConfigError(f"state.pattern must be 'single' or 'coincidence', got {self.pattern!r}")


@dataclass
class HomodyneSection:
    eta_pd: float = 0.94
    eta_c: float = 0.81
    phase_policy: str = "uniform"
    n_phases: int = 12

    def build(self) -> HomodyneModel:
        return HomodyneModel(self.eta_pd, self.eta_c, self.phase_policy, self.n_phases)


@dataclass
class SimulateSection:
    count: int = 50_000
    data_file: str = "quadratures.txt"
    state_file: str = "heralded_state.txt"

    def __post_init__(self) -> None:
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"simulate.count must be a positive integer, got {self.count}")


@dataclass
class TomographySection:
    n_max: int = 5
    eta_assumed: float = 0.76
    eta_low: float = 0.73
    eta_high: float = 0.79
    max_iterations: int = 2000
    tol_loglik: float = 1e-9
    dilution: float = 1.0
    reference: int = 1
    loss_correction: str = "povm"  # "povm" or "inverse"
    inverse_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.loss_correction not in ("povm", "inverse"):
            raise ConfigError(f"tomography.loss_correction must be 'povm' or 'inverse', got {self.loss_correction!r}")

    def build(self, eta: float | None = None) -> ReconstructionConfig:
        return ReconstructionConfig(
            n_max=self.n_max,
            eta_assumed=self.eta_assumed if eta is None else eta,
            max_iterations=self.max_iterations,
            tol_loglik=self.tol_loglik,
            dilution=self.dilution,
        )


@dataclass
class TimingSection:
    mode: str = "delay"
    herald_rate_hz: float | None = None
    herald_prob: float | None = None
    rep_rate: float = 76e6
    gate_rate: float = 1e6
    dead_time: float = 1e-6
    delay_steps: int = 1
    pass_transmission: float = 0.999
    trigger_latency: float = 0.0
    duty_factor: float = 1.0
    duration: float = 1.0

    def build(self, seed: int) -> TimingConfig:
        if (self.herald_rate_hz is None) == (self.herald_prob is None):
            raise ConfigError("timing: give exactly one of herald_rate_hz or herald_prob")
        prob = self.herald_prob if self.herald_prob is not None else self.herald_rate_hz / self.rep_rate
        return TimingConfig(
            herald_prob=prob,
            mode=self.mode,
            rep_rate=self.rep_rate,
            gate_rate=self.gate_rate,
            dead_time=self.dead_time,
            delay_steps=self.delay_steps,
            pass_transmission=self.pass_transmission,
            trigger_latency=self.trigger_latency,
            duty_factor=self.duty_factor,
            duration=self.duration,
            seed=seed,
        )


@dataclass
class SweepSection:
    powers: list = field(default_factory=lambda: [5.0, 35.0, 31])
    fit_peak_power_kw: float | None = None
    target_fidelity: float = 0.88

    def power_list(self) -> list[float]:
        """Explicit list, or ``[start, stop, num]`` as for ``numpy.linspace``."""
        p = self.powers
        if isinstance(p, list) and len(p) == 3 and isinstance(p[2], int) and p[2] >= 2 and p[1] > p[0]:
            return [float(v) for v in np.linspace(p[0], p[1], p[2])]
        if not p:
            raise ConfigError("sweep.powers is empty")
        return [float(v) for v in p]


@dataclass
class WignerSection:
    bounds: list = field(default_factory=lambda: [-5.0, 5.0, -5.0, 5.0])
    n_x: int = 201
    n_p: int = 201


@dataclass
class RunConfig:
    seed: int = 0
    herald: HeraldSection = field(default_factory=HeraldSection)
    state: StateSection = field(default_factory=StateSection)
    homodyne: HomodyneSection = field(default_factory=HomodyneSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    tomography: TomographySection = field(default_factory=TomographySection)
    timing: TimingSection = field(default_factory=TimingSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    wigner: WignerSection = field(default_factory=WignerSection)


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.name != "seed"}


def _number(value: Any, where: str) -> float:
    # PyYAML reads exponent forms such as 250e3 as strings
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value must be finite")
    return float(value)


def _coerce(value: Any, current: Any, where: str) -> Any:
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(current, float):
        return _number(value, where)
    if isinstance(current, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _build_section(name: str, data: Any) -> Any:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    section = _SECTIONS[name]()
    known = {f.name for f in fields(section)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        current = getattr(section, key)
        if current is not None:
            value = _coerce(value, current, f"{name}.{key}")
        elif value is not None:
            value = _number(value, f"{name}.{key}")
        setattr(section, key, value)
    check = getattr(section, "__post_init__", None)
    if check is not None:
        try:
            check()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return section


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    seed = data.pop("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown configuration section(s): {', '.join(sorted(unknown))}")
    sections = {name: _build_section(name, data.get(name)) for name in _SECTIONS}
    cfg = RunConfig(seed=seed, **sections)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    """Build every module object whose inputs are complete, so bounds fail early."""
    try:
        cfg.homodyne.build()
        tomo = cfg.tomography
        tomo.build()
        if not tomo.eta_low <= tomo.eta_assumed <= tomo.eta_high:
            raise ConfigError("tomography: need eta_low <= eta_assumed <= eta_high")
        cfg.herald.base()
        if cfg.herald.lam is not None:
            cfg.herald.build()
        if cfg.timing.herald_rate_hz is not None or cfg.timing.herald_prob is not None:
            cfg.timing.build(cfg.seed)
        if cfg.wigner.n_x < 2 or cfg.wigner.n_p < 2 or len(cfg.wigner.bounds) != 4:
            raise ConfigError("wigner: need 4 bounds and at least 2 points per axis")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        value = yaml.safe_load(raw)
        keys = path.strip().split(".")
        if len(keys) == 1:
            out[keys[0]] = value
        elif len(keys) == 2:
            sec = out.setdefault(keys[0], {})
            if not isinstance(sec, dict):
                raise ConfigError(f"section {keys[0]!r} must be a mapping")
            sec[keys[1]] = value
        else:
            raise ConfigError(f"override key {path!r} is nested too deeply")
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded or {}
    return config_from_dict(apply_overrides(data, overrides or []))
