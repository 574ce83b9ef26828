"""Heralded Fock states from a pulsed two-mode squeezed vacuum.

Each pulse carries ``n`` signal/idler pairs with thermal probability
``(1 - lam) lam**n``. Signal photons are split over two on/off SPCMs; the
click pattern conditions the idler photon number. Everything here is exact
enumeration over pair numbers up to ``n_cut``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fock import DensityMatrix, bernoulli_loss, fidelity

PATTERNS = ("none", "single", "coincidence")
REP_RATE = 76e6


@dataclass(frozen=True)
class HeraldConfig:
    """SPDC strength and heralding detectors.

    ``eta_spcm`` is the total efficiency of one SPCM path after the
    splitter. ``modal_purity`` is the probability that an idler photon lies
    in the mode seen by the local oscillator; it acts as extra loss on the
    heralded state.
    """

    lam: float = 0.0
    eta_spcm: float = 0.06
    dark_prob: float = 0.0
    splitter: float = 0.5
    n_cut: int = 8
    n_max: int = 5
    modal_purity: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 0.5:
            raise ValueError(f"lambda must lie in [0, 0.5], got {self.lam}")
        if not 0.0 <= self.eta_spcm <= 1.0:
            raise ValueError(f"eta_spcm must lie in [0, 1], got {self.eta_spcm}")
        if not 0.0 <= self.dark_prob <= 1e-3:
            raise ValueError(f"dark_prob must lie in [0, 1e-3], got {self.dark_prob}")
        if not 0.0 < self.splitter < 1.0:
            raise ValueError(f"splitter must lie in (0, 1), got {self.splitter}")
        if self.n_cut < 2:
            raise ValueError("n_cut must be >= 2")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not 0.0 <= self.modal_purity <= 1.0:
            raise ValueError(f"modal_purity must lie in [0, 1], got {self.modal_purity}")


@dataclass(frozen=True)
class PumpModel:
    p_ic: float
    gain_const: float

    def __post_init__(self) -> None:
        if self.p_ic < 0:
            raise ValueError(f"intra-cavity power must be >= 0, got {self.p_ic}")


def pump_to_lambda(pump: PumpModel) -> float:
    """``tanh(r)**2`` with squeezing ``r = gain_const * sqrt(p_ic)``."""
    return math.tanh(pump.gain_const * math.sqrt(pump.p_ic)) ** 2


def pair_distribution(lam: float, n_cut: int) -> np.ndarray:
    """Thermal pair-number probabilities for ``n = 0..n_cut``, renormalised.

    The tail beyond ``n_cut`` (mass ``lam**(n_cut+1)``) is dropped and the
    rest rescaled so that pattern probabilities sum to one.
    """
    n = np.arange(n_cut + 1)
    p = (1.0 - lam) * lam**n
    return p / p.sum()


@lru_cache(maxsize=64)
def _split_weights(n_cut: int, splitter: float) -> np.ndarray:
    """``w[n, k]``: probability that ``k`` of ``n`` signal photons go to arm A."""
    w = np.zeros((n_cut + 1, n_cut + 1))
    for n in range(n_cut + 1):
        for k in range(n + 1):
            w[n, k] = math.comb(n, k) * splitter**k * (1.0 - splitter) ** (n - k)
    w.setflags(write=False)
    return w


def pattern_table(config: HeraldConfig) -> dict[str, np.ndarray]:
    """Joint probabilities ``P(n, pattern)`` for ``n = 0..n_cut``.

    Keys are ``none``, ``a_only``, ``b_only`` and ``both``.
    """
    cfg = config
    pn = pair_distribution(cfg.lam, cfg.n_cut)
    w = _split_weights(cfg.n_cut, cfg.splitter)
    n = np.arange(cfg.n_cut + 1)[:, None]
    k = np.arange(cfg.n_cut + 1)[None, :]
    keep = 1.0 - cfg.dark_prob
    # silent-arm probabilities given k photons in A and n - k in B
    quiet_a = (1.0 - cfg.eta_spcm) ** k * keep
    quiet_b = (1.0 - cfg.eta_spcm) ** np.maximum(n - k, 0) * keep
    return {
        "none": pn * np.sum(w * quiet_a * quiet_b, axis=1),
        "a_only": pn * np.sum(w * (1 - quiet_a) * quiet_b, axis=1),
        "b_only": pn * np.sum(w * quiet_a * (1 - quiet_b), axis=1),
        "both": pn * np.sum(w * (1 - quiet_a) * (1 - quiet_b), axis=1),
    }


def _joint(config: HeraldConfig, pattern: str) -> np.ndarray:
    t = pattern_table(config)
    if pattern == "single":
        return t["a_only"] + t["b_only"]
    if pattern == "coincidence":
        return t["both"]
    if pattern == "none":
        return t["none"]
    raise ValueError(f"unknown click pattern {pattern!r}; expected one of {PATTERNS}")


def pattern_probability(config: HeraldConfig, pattern: str) -> float:
    return float(_joint(config, pattern).sum())


def heralded_distribution(config: HeraldConfig, pattern: str) -> np.ndarray:
    """Idler photon-number distribution ``P(n | pattern)`` for ``n = 0..n_cut``."""
    joint = _joint(config, pattern)
    total = joint.sum()
    if total < 1e-15:
        raise ValueError(f"pattern {pattern!r} has probability {total:.3e}; cannot condition on it")
    return joint / total


def heralded_state(config: HeraldConfig, pattern: str = "single") -> DensityMatrix:
    """Idler state before the homodyne detector, conditioned on ``pattern``.

    Fock-diagonal, truncated to ``n_max`` with the discarded population in
    ``leakage``; ``modal_purity < 1`` is applied as photon loss.
    """
    dist = heralded_distribution(config, pattern)
    kept = dist[: config.n_max + 1]
    leak = float(dist[config.n_max + 1 :].sum())
    diag = np.zeros(config.n_max + 1)
    diag[: kept.size] = kept
    rho = DensityMatrix(np.diag(diag / diag.sum()).astype(np.complex128), leakage=leak)
    if config.modal_purity < 1.0:
        rho = bernoulli_loss(rho, config.modal_purity)
    return rho


def herald_rates(config: HeraldConfig, rep_rate: float = REP_RATE) -> tuple[float, float]:
    """Single-click and coincidence herald rates in Hz."""
    if rep_rate <= 0:
        raise ValueError("repetition rate must be positive")
    return (
        pattern_probability(config, "single") * rep_rate,
        pattern_probability(config, "coincidence") * rep_rate,
    )


def lambda_for_single_rate(config: HeraldConfig, target_hz: float, rep_rate: float = REP_RATE) -> float:
    """Pair parameter giving a single-click herald rate of ``target_hz``."""

    def excess(lam: float) -> float:
        return herald_rates(replace(config, lam=lam), rep_rate)[0] - target_hz

    if excess(0.0) >= 0 or excess(0.5) <= 0:
        raise ValueError(f"single rate {target_hz} Hz is not reachable for lambda in [0, 0.5]")
    return brentq(excess, 0.0, 0.5, xtol=1e-15, rtol=1e-13)


def calibrate_gain(
    config: HeraldConfig,
    power_kw: float = 20.0,
    target_hz: float = 250e3,
    rep_rate: float = REP_RATE,
) -> float:
    """``gain_const`` (kW**-0.5) so that the single rate at ``power_kw`` is ``target_hz``."""
    lam = lambda_for_single_rate(config, target_hz, rep_rate)
    return math.atanh(math.sqrt(lam)) / math.sqrt(power_kw)


@dataclass(frozen=True)
class SweepPoint:
    power_kw: float
    lam: float
    single_hz: float
    coincidence_hz: float
    fidelity: float


def fidelity_vs_power_sweep(
    powers: Sequence[float],
    config: HeraldConfig,
    gain_const: float,
    rep_rate: float = REP_RATE,
) -> list[SweepPoint]:
    """Single-photon fidelity and herald rates along a pump-power scan.

    The fidelity is that of the heralded state before the homodyne detector
    (i.e. what loss correction recovers), including dark counts and
    ``modal_purity``.
    """
    if len(powers) == 0:
        raise ValueError("need at least one pump power")
    out = []
    for power in powers:
        lam = pump_to_lambda(PumpModel(float(power), gain_const))
        cfg = replace(config, lam=lam)
        single, coinc = herald_rates(cfg, rep_rate)
        f = fidelity(heralded_state(cfg, "single"), 1) if single > 0 else 0.0
        out.append(SweepPoint(float(power), lam, single, coinc, f))
    return out


def format_sweep(points: Sequence[SweepPoint]) -> str:
    lines = ["# power_kW lambda single_Hz coinc_Hz fidelity"]
    for pt in points:
        lines.append(f"{pt.power_kw:.17g} {pt.lam:.17g} {pt.single_hz:.17g} {pt.coincidence_hz:.17g} {pt.fidelity:.17g}")
    return "\n".join(lines) + "\n"


def peak_fidelity(config: HeraldConfig, gain_const: float, powers: Sequence[float]) -> SweepPoint:
    pts = fidelity_vs_power_sweep(powers, config, gain_const)
    return max(pts, key=lambda p: p.fidelity)


def fit_sweep_parameters(
    config: HeraldConfig,
    gain_const: float,
    powers: Sequence[float],
    peak_power_kw: float,
    target_fidelity: float = 0.88,
) -> HeraldConfig:
    """Choose ``dark_prob`` and ``modal_purity`` for a fidelity peak of
    ``target_fidelity`` at ``peak_power_kw``.

    Dark counts set where the dilution/multiphoton trade-off peaks; modal
    purity then scales the height. Raises ``ValueError`` if the requested
    peak is not reachable with ``modal_purity <= 1``.
    """
    powers = np.asarray(powers, dtype=float)
    base = replace(config, modal_purity=1.0)

    def peak_location(dark: float) -> float:
        cfg = replace(base, dark_prob=dark)

        def neg(power: float) -> float:
            return -fidelity_vs_power_sweep([power], cfg, gain_const)[0].fidelity

        res = minimize_scalar(neg, bounds=(powers.min(), powers.max()), method="bounded", options={"xatol": 1e-6})
        return float(res.x)

    lo, hi = 1e-12, 1e-3
    if not peak_location(lo) < peak_power_kw < peak_location(hi):
        raise ValueError(f"no dark-count probability puts the fidelity peak at {peak_power_kw} kW")
    # bisect in log space; the peak moves to higher power with more dark counts
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        if peak_location(mid) < peak_power_kw:
            lo = mid
        else:
            hi = mid
    dark = math.sqrt(lo * hi)
    cfg = replace(base, dark_prob=dark)

    def excess(purity: float) -> float:
        return peak_fidelity(replace(cfg, modal_purity=purity), gain_const, powers).fidelity - target_fidelity

    if excess(1.0) < 0:
        best = peak_fidelity(cfg, gain_const, powers).fidelity
        raise ValueError(
            f"peak fidelity {best:.4f} at {peak_power_kw} kW is below {target_fidelity} even with unit modal purity"
        )
    purity = brentq(excess, 0.5, 1.0, xtol=1e-12)
    return replace(cfg, modal_purity=purity)
