"""Event-level simulation of herald timing, LO gating and homodyne dead time.

Time is counted in laser pulses. Heralds are independent per pulse, so
their pulse indices are generated from geometric gaps rather than by
visiting every pulse; this keeps a 100 s run at 76 MHz cheap.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

MODES = ("pockels", "delay")
DELAY_STEP_NS = 32.0
MAX_DELAY_STEPS = 9
MAX_EXPECTED_HERALDS = 1e9
DEFAULT_PASS_TRANSMISSION = 0.999


@dataclass(frozen=True)
class TimingConfig:
    """Acquisition-chain timing.

    ``mode="pockels"`` measures only heralds on the gated LO pulses (one in
    ``round(rep_rate / gate_rate)``); ``mode="delay"`` triggers the detector
    on every herald, subject to a non-paralyzable dead time.
    ``duty_factor`` is an extra independent acceptance probability applied
    to otherwise measurable events.
    """

    herald_prob: float
    mode: str = "delay"
    rep_rate: float = 76e6
    gate_rate: float = 1e6
    dead_time: float = 1e-6
    delay_steps: int = 1
    pass_transmission: float = DEFAULT_PASS_TRANSMISSION
    trigger_latency: float = 0.0
    duty_factor: float = 1.0
    duration: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.herald_prob <= 1.0:
            raise ValueError(f"herald_prob must lie in [0, 1], got {self.herald_prob}")
        if self.rep_rate <= 0:
            raise ValueError("rep_rate must be positive")
        if not 0 < self.gate_rate <= self.rep_rate:
            raise ValueError("gate_rate must lie in (0, rep_rate]")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")
        if not 1 <= self.delay_steps <= MAX_DELAY_STEPS:
            raise ValueError(f"delay_steps must lie in [1, {MAX_DELAY_STEPS}], got {self.delay_steps}")
        if not 0.0 < self.pass_transmission <= 1.0:
            raise ValueError("pass_transmission must lie in (0, 1]")
        if not 0.0 <= self.duty_factor <= 1.0:
            raise ValueError("duty_factor must lie in [0, 1]")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.mode == "delay" and self.trigger_latency > delay_line(self.delay_steps, self.pass_transmission)[0] * 1e-9:
            raise ValueError("optical delay is shorter than the trigger latency")

    @property
    def gate_period(self) -> int:
        """LO gate spacing in pulses."""
        return max(1, int(round(self.rep_rate / self.gate_rate)))

    @property
    def dead_pulses(self) -> int:
        """Pulses after a measurement during which the detector is blind."""
        return int(math.ceil(self.dead_time * self.rep_rate - 1e-9))


@dataclass(frozen=True)
class RateReport:
    herald_rate_hz: float
    measured_rate_hz: float
    lost_deadtime_hz: float
    lost_gating_hz: float
    duration_s: float
    seed: int
    heralds: int
    measured: int
    lost_deadtime: int
    lost_gating: int

    @property
    def lost_rate_hz(self) -> float:
        return self.lost_deadtime_hz + self.lost_gating_hz

    def to_text(self) -> str:
        keys = ("herald_rate_hz", "measured_rate_hz", "lost_deadtime_hz", "lost_gating_hz", "duration_s", "seed")
        values = asdict(self)
        lines = []
        for k in keys:
            v = values[k]
            lines.append(f"{k} = {v}" if isinstance(v, int) else f"{k} = {v:.17g}")
        return "\n".join(lines) + "\n"


def parse_rate_report(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = float(value)
    return out


def delay_line(steps: int, pass_transmission: float = DEFAULT_PASS_TRANSMISSION) -> tuple[float, float]:
    """Delay (ns) and optical transmission of a ``steps``-round-trip delay line."""
    if int(steps) != steps or not 1 <= steps <= MAX_DELAY_STEPS:
        raise ValueError(f"delay-line steps must be an integer in [1, {MAX_DELAY_STEPS}], got {steps}")
    return DELAY_STEP_NS * steps, pass_transmission**steps


def herald_indices(herald_prob: float, n_pulses: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted pulse indices (``0 <= i < n_pulses``) that carry a herald."""
    if herald_prob <= 0 or n_pulses <= 0:
        return np.zeros(0, dtype=np.int64)
    if herald_prob >= 1:
        return np.arange(n_pulses, dtype=np.int64)
    expected = herald_prob * n_pulses
    chunk = int(expected + 6 * math.sqrt(expected) + 16)
    parts = []
    last = -1
    while True:
        idx = last + np.cumsum(rng.geometric(herald_prob, size=chunk))
        parts.append(idx)
        last = int(idx[-1])
        if last >= n_pulses:
            break
    idx = np.concatenate(parts)
    return idx[idx < n_pulses]


def apply_dead_time(indices: np.ndarray, dead_pulses: int) -> np.ndarray:
    """Boolean mask of events accepted by a non-paralyzable detector.

    The ``dead_pulses`` pulses following an accepted event are blind, so the
    next acceptance needs a gap of more than ``dead_pulses``. For Bernoulli
    heralds this makes the mean measured rate exactly ``R / (1 + R tau)``.
    """
    accepted = np.zeros(indices.size, dtype=bool)
    if dead_pulses <= 0:
        accepted[:] = True
        return accepted
    last = None
    hits = []
    for i, t in enumerate(indices.tolist()):
        if last is None or t - last > dead_pulses:
            hits.append(i)
            last = t
    accepted[hits] = True
    return accepted


def simulate_timeline(config: TimingConfig) -> RateReport:
    """Monte-Carlo rates for one acquisition run; deterministic in ``config.seed``."""
    cfg = config
    n_pulses = int(round(cfg.duration * cfg.rep_rate))
    if cfg.herald_prob * n_pulses > MAX_EXPECTED_HERALDS:
        raise ValueError(f"run would produce ~{cfg.herald_prob * n_pulses:.3g} heralds (limit {MAX_EXPECTED_HERALDS:.0e})")
    rng = np.random.default_rng(cfg.seed)
    idx = herald_indices(cfg.herald_prob, n_pulses, rng)
    heralds = idx.size

    if cfg.mode == "pockels":
        period = cfg.gate_period
        offset = int(rng.integers(period))
        gated = (idx % period) == offset
    else:
        gated = np.ones(heralds, dtype=bool)
    if cfg.duty_factor < 1.0:
        gated &= rng.random(heralds) < cfg.duty_factor
    candidates = idx[gated]
    dead = cfg.dead_pulses
    if cfg.mode == "pockels":
        # the gate comb already spaces LO pulses; the detector follows it
        dead = min(dead, cfg.gate_period - 1)
    accepted = apply_dead_time(candidates, dead)

    measured = int(accepted.sum())
    lost_gating = heralds - candidates.size
    lost_dead = candidates.size - measured
    d = cfg.duration
    return RateReport(
        herald_rate_hz=heralds / d,
        measured_rate_hz=measured / d,
        lost_deadtime_hz=lost_dead / d,
        lost_gating_hz=lost_gating / d,
        duration_s=d,
        seed=cfg.seed,
        heralds=heralds,
        measured=measured,
        lost_deadtime=lost_dead,
        lost_gating=lost_gating,
    )


def pockels_analysis_rate(config: TimingConfig) -> float:
    """Expected measured rate with a gated LO: ``herald_prob * gate_rate * duty_factor``."""
    if config.mode != "pockels":
        raise ValueError("pockels_analysis_rate needs mode='pockels'")
    gate_rate = config.rep_rate / config.gate_period
    return config.herald_prob * gate_rate * config.duty_factor


def nonparalyzable_rate(rate_hz: float, dead_time: float) -> float:
    """Measured rate ``R / (1 + R tau)`` of a non-paralyzable counter."""
    return rate_hz / (1.0 + rate_hz * dead_time)


def write_rate_report(path: str | Path, report: RateReport, header: str = "") -> None:
    Path(path).write_text(header + report.to_text())
