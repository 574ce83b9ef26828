import math

import numpy as np
import pytest

from heraldfock.timing import (
    RateReport,
    TimingConfig,
    apply_dead_time,
    delay_line,
    herald_indices,
    nonparalyzable_rate,
    parse_rate_report,
    pockels_analysis_rate,
    simulate_timeline,
    write_rate_report,
)

REP = 76e6


def delay_cfg(rate_hz, **kw):
    return TimingConfig(herald_prob=rate_hz / REP, mode="delay", **kw)


def test_no_heralds():
    rep = simulate_timeline(delay_cfg(0.0))
    assert rep.heralds == rep.measured == rep.lost_deadtime == rep.lost_gating == 0


def test_dead_time_formula():
    for rate, seed in ((5e4, 1), (2e5, 2), (8e5, 3)):
        rep = simulate_timeline(delay_cfg(rate, duration=2.0, seed=seed))
        expected = nonparalyzable_rate(rate, 1e-6)
        assert abs(rep.measured_rate_hz - expected) / expected < 3 / math.sqrt(rep.measured)


def test_counts_are_conserved():
    for mode in ("delay", "pockels"):
        rep = simulate_timeline(TimingConfig(herald_prob=3e-3, mode=mode, duty_factor=0.5, duration=0.1, seed=7))
        assert rep.heralds == rep.measured + rep.lost_deadtime + rep.lost_gating
        assert rep.lost_rate_hz == pytest.approx(rep.herald_rate_hz - rep.measured_rate_hz)


def test_pockels_bounded_by_gate_rate():
    rep = simulate_timeline(TimingConfig(herald_prob=1.0, mode="pockels", duration=0.01))
    assert rep.measured_rate_hz <= 1e6 * (1 + 1e-6)


def test_pockels_matches_closed_form():
    cfg = TimingConfig(herald_prob=250e3 / REP, mode="pockels", duty_factor=0.15, duration=10.0, seed=3)
    rep = simulate_timeline(cfg)
    expected = pockels_analysis_rate(cfg)
    sigma = math.sqrt(expected * cfg.duration) / cfg.duration
    assert abs(rep.measured_rate_hz - expected) < 3 * sigma
    # ~3.3 kHz of heralds land on a gated pulse; the duty factor keeps 15 % of them
    assert 250e3 / 76 == pytest.approx(3.3e3, rel=0.01)
    assert expected == pytest.approx(500, rel=0.02)


def test_pockels_without_duty_factor():
    cfg = TimingConfig(herald_prob=250e3 / REP, mode="pockels", duration=2.0, seed=8)
    expected = pockels_analysis_rate(cfg)
    assert expected == pytest.approx(3.3e3, rel=0.01)
    rep = simulate_timeline(cfg)
    assert abs(rep.measured_rate_hz - expected) < 3 * math.sqrt(expected * cfg.duration) / cfg.duration


def test_ungated_limit():
    # gating every pulse with no dead time measures everything
    cfg = TimingConfig(herald_prob=1e-3, mode="pockels", gate_rate=REP, dead_time=0.0, duration=0.05, seed=1)
    rep = simulate_timeline(cfg)
    assert rep.measured == rep.heralds
    assert pockels_analysis_rate(cfg) == pytest.approx(1e-3 * REP)


def test_pockels_rate_needs_pockels_mode():
    with pytest.raises(ValueError):
        pockels_analysis_rate(delay_cfg(1e3))


def test_delay_line():
    assert delay_line(1) == (32.0, 0.999)
    delay, t = delay_line(9)
    assert delay == 288.0
    assert t >= 0.99
    for bad in (0, 10, 1.5):
        with pytest.raises(ValueError):
            delay_line(bad)


def test_trigger_latency_must_fit_in_delay():
    TimingConfig(herald_prob=0.1, delay_steps=2, trigger_latency=60e-9)
    with pytest.raises(ValueError):
        TimingConfig(herald_prob=0.1, delay_steps=1, trigger_latency=60e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        TimingConfig(herald_prob=0.1, duration=0.0)
    with pytest.raises(ValueError):
        TimingConfig(herald_prob=0.1, mode="shutter")
    with pytest.raises(ValueError):
        TimingConfig(herald_prob=1.5)


def test_guard_on_huge_runs():
    with pytest.raises(ValueError, match="heralds"):
        simulate_timeline(TimingConfig(herald_prob=0.5, duration=100.0))


def test_deterministic_in_seed():
    a = simulate_timeline(delay_cfg(1e5, duration=0.2, seed=5))
    b = simulate_timeline(delay_cfg(1e5, duration=0.2, seed=5))
    c = simulate_timeline(delay_cfg(1e5, duration=0.2, seed=6))
    assert a == b
    assert a != c


def test_herald_indices_statistics():
    idx = herald_indices(0.01, 10**6, np.random.default_rng(0))
    assert np.all(np.diff(idx) > 0) and idx[0] >= 0 and idx[-1] < 10**6
    assert abs(idx.size - 1e4) < 4 * math.sqrt(1e4)


def test_apply_dead_time_examples():
    idx = np.array([0, 3, 4, 9, 10, 20])
    np.testing.assert_array_equal(apply_dead_time(idx, 4), [1, 0, 0, 1, 0, 1])
    assert apply_dead_time(idx, 0).all()


def test_report_text(tmp_path):
    rep = simulate_timeline(delay_cfg(1e4, duration=0.1, seed=2))
    path = tmp_path / "rates.txt"
    write_rate_report(path, rep, header="# run\n")
    parsed = parse_rate_report(path.read_text())
    assert set(parsed) == {
        "herald_rate_hz",
        "measured_rate_hz",
        "lost_deadtime_hz",
        "lost_gating_hz",
        "duration_s",
        "seed",
    }
    assert parsed["measured_rate_hz"] == rep.measured_rate_hz
    assert parsed["seed"] == 2
    assert isinstance(rep, RateReport)
