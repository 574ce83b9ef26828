import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from heraldfock.fock import fidelity
from heraldfock.source import (
    HeraldConfig,
    PumpModel,
    calibrate_gain,
    fidelity_vs_power_sweep,
    fit_sweep_parameters,
    format_sweep,
    herald_rates,
    heralded_distribution,
    heralded_state,
    lambda_for_single_rate,
    pattern_probability,
    pattern_table,
    pump_to_lambda,
)

BASE = HeraldConfig(lam=0.05, eta_spcm=0.06, dark_prob=1e-5)


def brute_force(cfg: HeraldConfig, n_cut: int = 12):
    """P(n, pattern) by summing over every photon's fate (arm, detected or not)."""
    s, e, d = cfg.splitter, cfg.eta_spcm, cfg.dark_prob
    fates = {("A", 1): s * e, ("A", 0): s * (1 - e), ("B", 1): (1 - s) * e, ("B", 0): (1 - s) * (1 - e)}
    norm = sum((1 - cfg.lam) * cfg.lam**n for n in range(n_cut + 1))
    out = {p: np.zeros(n_cut + 1) for p in ("none", "single", "coincidence")}
    for n in range(n_cut + 1):
        pn = (1 - cfg.lam) * cfg.lam**n / norm
        for combo in itertools.combinations_with_replacement(list(fates), n):
            counts = {f: combo.count(f) for f in fates}
            multi = math.factorial(n)
            weight = 1.0
            for f, c in counts.items():
                multi //= math.factorial(c)
                weight *= fates[f] ** c
            hit_a = counts[("A", 1)] > 0
            hit_b = counts[("B", 1)] > 0
            for dark_a, dark_b in itertools.product((0, 1), repeat=2):
                pd = (d if dark_a else 1 - d) * (d if dark_b else 1 - d)
                clicks = (hit_a or dark_a) + (hit_b or dark_b)
                key = ("none", "single", "coincidence")[clicks]
                out[key][n] += pn * multi * weight * pd
    return out


def test_pattern_probabilities_sum_to_one():
    for lam in (0.0, 0.01, 0.2, 0.5):
        cfg = replace(BASE, lam=lam)
        total = sum(pattern_probability(cfg, p) for p in ("none", "single", "coincidence"))
        assert abs(total - 1.0) < 1e-12


def test_matches_brute_force_enumeration():
    cfg = HeraldConfig(lam=0.1, eta_spcm=0.3, dark_prob=1e-4, splitter=0.4)
    ref = brute_force(cfg)
    for pattern in ("single", "coincidence"):
        ours = heralded_distribution(cfg, pattern)
        theirs = ref[pattern] / ref[pattern].sum()
        np.testing.assert_allclose(ours, theirs[: ours.size], atol=1e-6)
        assert pattern_probability(cfg, pattern) == pytest.approx(ref[pattern].sum(), abs=1e-6)


def test_truncation_stability():
    a = heralded_state(replace(BASE, n_cut=8), "single")
    b = heralded_state(replace(BASE, n_cut=12), "single")
    np.testing.assert_allclose(a.elements, b.elements, atol=1e-9)


def test_perfect_heralding_limits():
    cfg = HeraldConfig(lam=1e-6, eta_spcm=1.0, dark_prob=0.0)
    assert fidelity(heralded_state(cfg, "single"), 1) > 0.999
    cfg2 = HeraldConfig(lam=1e-4, eta_spcm=1.0, dark_prob=0.0)
    # coincidences need two photons, which must have taken different arms
    assert fidelity(heralded_state(cfg2, "coincidence"), 2) > 0.999


def test_dark_counts_dilute_with_vacuum():
    clean = heralded_state(replace(BASE, lam=0.01, dark_prob=0.0))
    dirty = heralded_state(replace(BASE, lam=0.01, dark_prob=1e-4))
    assert dirty.elements[0, 0].real > clean.elements[0, 0].real


def test_modal_purity_acts_as_loss():
    pure = heralded_state(BASE)
    mixed = heralded_state(replace(BASE, modal_purity=0.9))
    assert fidelity(mixed, 1) < fidelity(pure, 1)
    assert abs(mixed.trace() - 1) < 1e-12


def test_heralded_state_is_diagonal_with_leakage():
    rho = heralded_state(replace(BASE, lam=0.4, n_cut=12, n_max=3))
    assert rho.is_fock_diagonal()
    assert rho.leakage > 0


def test_rates_monotone():
    lams = np.linspace(0.001, 0.3, 20)
    singles = [herald_rates(replace(BASE, lam=lam))[0] for lam in lams]
    assert np.all(np.diff(singles) > 0)
    etas = np.linspace(0.01, 0.9, 20)
    coinc = [herald_rates(replace(BASE, eta_spcm=e))[1] for e in etas]
    assert np.all(np.diff(coinc) > 0)


def test_no_pump_no_photons():
    cfg = replace(BASE, lam=0.0, dark_prob=0.0)
    assert herald_rates(cfg) == (0.0, 0.0)
    with pytest.raises(ValueError):
        heralded_state(cfg, "single")


def test_unknown_pattern():
    with pytest.raises(ValueError):
        pattern_probability(BASE, "triple")


def test_config_bounds():
    with pytest.raises(ValueError):
        HeraldConfig(lam=0.6)
    with pytest.raises(ValueError):
        HeraldConfig(dark_prob=1e-2)
    with pytest.raises(ValueError):
        PumpModel(-1.0, 0.1)


def test_pump_to_lambda():
    assert pump_to_lambda(PumpModel(0.0, 0.05)) == 0.0
    assert pump_to_lambda(PumpModel(4.0, 0.1)) == pytest.approx(math.tanh(0.2) ** 2, abs=1e-15)


def test_calibration_to_single_rate():
    cfg = HeraldConfig(eta_spcm=0.06, dark_prob=1e-7)
    gain = calibrate_gain(cfg, power_kw=20, target_hz=250e3)
    lam = pump_to_lambda(PumpModel(20, gain))
    single, coinc = herald_rates(replace(cfg, lam=lam))
    assert single == pytest.approx(250e3, rel=1e-9)
    assert 0.045 < lam < 0.06
    assert 250 <= coinc <= 2500
    assert lambda_for_single_rate(cfg, 250e3) == pytest.approx(lam, rel=1e-9)


def test_unreachable_rate():
    with pytest.raises(ValueError):
        lambda_for_single_rate(HeraldConfig(eta_spcm=0.01), 70e6)


def test_sweep_without_dark_counts_falls_monotonically():
    cfg = HeraldConfig(eta_spcm=0.06, dark_prob=0.0)
    pts = fidelity_vs_power_sweep(np.linspace(1, 35, 35), cfg, 0.052)
    f = [p.fidelity for p in pts]
    assert np.all(np.diff(f) < 0)


def test_sweep_with_dark_counts_has_interior_peak():
    cfg = HeraldConfig(eta_spcm=0.06, dark_prob=1e-4)
    pts = fidelity_vs_power_sweep(np.linspace(1, 35, 35), cfg, 0.052)
    i = int(np.argmax([p.fidelity for p in pts]))
    assert 0 < i < len(pts) - 1


def test_sweep_table_format():
    pts = fidelity_vs_power_sweep([5, 10], BASE, 0.052)
    lines = format_sweep(pts).splitlines()
    assert lines[0] == "# power_kW lambda single_Hz coinc_Hz fidelity"
    assert len(lines) == 3 and len(lines[1].split()) == 5
    with pytest.raises(ValueError):
        fidelity_vs_power_sweep([], BASE, 0.052)


def test_fit_places_peak():
    cfg = HeraldConfig(eta_spcm=0.06)
    gain = calibrate_gain(replace(cfg, dark_prob=1e-7))
    powers = np.linspace(5, 35, 31)
    fitted = fit_sweep_parameters(cfg, gain, powers, peak_power_kw=12, target_fidelity=0.88)
    fine = fidelity_vs_power_sweep(np.linspace(5, 35, 301), fitted, gain)
    best = max(fine, key=lambda p: p.fidelity)
    assert best.fidelity == pytest.approx(0.88, abs=2e-3)
    assert best.power_kw == pytest.approx(12, abs=0.5)
    assert 0 < fitted.dark_prob < 1e-3 and 0.5 < fitted.modal_purity <= 1


def test_fit_rejects_unreachable_target():
    cfg = HeraldConfig(eta_spcm=0.06)
    with pytest.raises(ValueError):
        fit_sweep_parameters(cfg, 0.052, np.linspace(5, 35, 31), peak_power_kw=12, target_fidelity=0.999)


def test_pattern_table_keys():
    t = pattern_table(BASE)
    assert set(t) == {"none", "a_only", "b_only", "both"}
    # symmetric splitter gives equal single-arm rates
    np.testing.assert_allclose(t["a_only"], t["b_only"], atol=1e-16)
