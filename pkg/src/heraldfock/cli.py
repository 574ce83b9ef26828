"""Command-line front end: ``heraldfock <command> [options]``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
failure (reconstruction did not converge, or loss correction left the
physical set).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .fock import DensityMatrix, fidelity, format_density_matrix, inverse_bernoulli, photon_distribution, read_density_matrix
from .quadrature import format_quadratures, read_quadratures, sample_arrays
from .source import fidelity_vs_power_sweep, fit_sweep_parameters, format_sweep, herald_rates, heralded_state
from .timing import nonparalyzable_rate, pockels_analysis_rate, simulate_timeline
from .tomography import mle_reconstruct
from .wigner import format_grid, wigner_grid, wigner_point

log = logging.getLogger("heraldfock")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


class NumericalFailure(RuntimeError):
    """Outputs were written but a numerical check failed."""


def _header(timestamp: bool) -> dict[str, object]:
    head: dict[str, object] = {}
    if timestamp:
        head["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    head["generator"] = f"heraldfock {__version__}"
    return head


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _source_state(cfg: RunConfig) -> tuple[DensityMatrix, dict[str, object]]:
    if cfg.state.source == "fock":
        n_max = cfg.herald.n_max
        return DensityMatrix.fock(cfg.state.n, n_max), {"state": f"fock n={cfg.state.n}"}
    herald = cfg.herald.build()
    rho = heralded_state(herald, cfg.state.pattern)
    single, coinc = herald_rates(herald, cfg.herald.rep_rate)
    meta = {
        "state": f"heralded pattern={cfg.state.pattern}",
        "lambda": f"{herald.lam:.17g}",
        "single_rate_hz": f"{single:.17g}",
        "coincidence_rate_hz": f"{coinc:.17g}",
        "leakage": f"{rho.leakage:.17g}",
    }
    return rho, meta


def cmd_simulate(cfg: RunConfig, out_dir: Path, timestamp: bool = True) -> tuple[Path, Path]:
    """Heralded state and homodyne samples, written to ``out_dir``."""
    rho, meta = _source_state(cfg)
    model = cfg.homodyne.build()
    count = cfg.simulate.count
    theta, x = sample_arrays(rho, model, count, cfg.seed)
    head = _header(timestamp)
    head.update(meta)
    qmeta = dict(head)
    qmeta.update(
        {
            "eta_pd": model.eta_pd,
            "eta_c": model.eta_c,
            "eta_hd": f"{model.eta_hd:.17g}",
            "phase_policy": model.phase_policy,
            "seed": cfg.seed,
            "count": count,
            "columns": "theta x",
        }
    )
    data = _write(out_dir / cfg.simulate.data_file, format_quadratures(theta, x, qmeta))
    state = _write(out_dir / cfg.simulate.state_file, format_density_matrix(rho, head))
    return data, state


def cmd_reconstruct(cfg: RunConfig, data_file: Path, out_dir: Path, timestamp: bool = True) -> dict[str, object]:
    """Maximum-likelihood reconstructions at the assumed efficiency and its bracket.

    Writes ``rho_uncorrected.txt``, ``rho_eta<eta>.txt`` for the low,
    assumed and high efficiencies, and ``reconstruction_report.txt``.
    Raises :class:`NumericalFailure` after writing if a reconstruction did
    not converge or a loss correction was flagged unphysical.
    """
    theta, x, meta = read_quadratures(data_file)
    tomo = cfg.tomography
    ref = tomo.reference
    head = _header(timestamp)
    head["data_file"] = Path(data_file).name
    head["samples"] = theta.size

    report: dict[str, object] = {"samples": theta.size, "n_max": tomo.n_max, "loss_correction": tomo.loss_correction}
    problems: list[str] = []

    raw = mle_reconstruct((theta, x), tomo.build(eta=1.0))
    _write(out_dir / "rho_uncorrected.txt", format_density_matrix(raw.rho, {**head, "eta_assumed": 1.0}))
    report["uncorrected_fidelity"] = fidelity(raw.rho, ref)
    report["uncorrected_iterations"] = raw.iterations
    report["uncorrected_converged"] = raw.converged
    if not raw.converged:
        problems.append("uncorrected reconstruction did not converge")

    for label, eta in (("low", tomo.eta_low), ("mid", tomo.eta_assumed), ("high", tomo.eta_high)):
        if tomo.loss_correction == "povm":
            res = mle_reconstruct((theta, x), tomo.build(eta=eta))
            rho = res.rho
            report[f"{label}_iterations"] = res.iterations
            report[f"{label}_converged"] = res.converged
            report[f"{label}_loglik"] = res.loglik
            report[f"{label}_loglik_trace"] = " ".join(f"{v:.17g}" for v in res.loglik_trace)
            if not res.converged:
                problems.append(f"reconstruction at eta={eta} did not converge")
        else:
            corr = inverse_bernoulli(raw.rho, eta, tomo.inverse_tolerance)
            rho = corr.rho
            report[f"{label}_min_eigenvalue"] = corr.min_eigenvalue
            report[f"{label}_flagged"] = corr.flagged
            if corr.flagged:
                problems.append(f"loss correction at eta={eta} is unphysical (eigenvalue {corr.min_eigenvalue:.3e})")
        report[f"{label}_eta"] = eta
        report[f"{label}_fidelity"] = fidelity(rho, ref)
        _write(out_dir / f"rho_eta{eta:g}.txt", format_density_matrix(rho, {**head, "eta_assumed": eta}))

    fids = [report["low_fidelity"], report["mid_fidelity"], report["high_fidelity"]]
    report["fidelity_bracket_lower"] = min(fids)
    report["fidelity_bracket_upper"] = max(fids)
    report["reference"] = ref
    report["status"] = "ok" if not problems else "; ".join(problems)

    lines = [f"# {k}: {v}" for k, v in head.items()]
    for k, v in report.items():
        lines.append(f"{k} = {v:.17g}" if isinstance(v, float) else f"{k} = {v}")
    _write(out_dir / "reconstruction_report.txt", "\n".join(lines) + "\n")
    if problems:
        raise NumericalFailure("; ".join(problems))
    return report


def cmd_wigner(cfg: RunConfig, matrix_file: Path, out_file: Path, timestamp: bool = True):
    rho = read_density_matrix(matrix_file)
    w = cfg.wigner
    grid = wigner_grid(rho, w.bounds, w.n_x, w.n_p)
    head = _header(timestamp)
    head["matrix_file"] = Path(matrix_file).name
    head["columns"] = "x p W"
    _write(out_file, format_grid(grid, head))
    return grid


def cmd_rates(cfg: RunConfig, out_file: Path, timestamp: bool = True):
    tcfg = cfg.timing.build(cfg.seed)
    report = simulate_timeline(tcfg)
    head = _header(timestamp)
    head["mode"] = tcfg.mode
    rate = tcfg.herald_prob * tcfg.rep_rate
    if tcfg.mode == "delay":
        head["analytic_measured_hz"] = f"{nonparalyzable_rate(rate, tcfg.dead_time):.17g}"
    else:
        head["analytic_measured_hz"] = f"{pockels_analysis_rate(tcfg):.17g}"
    lines = "".join(f"# {k}: {v}\n" for k, v in head.items())
    _write(out_file, lines + report.to_text())
    return report


def cmd_sweep(cfg: RunConfig, out_file: Path, timestamp: bool = True):
    herald = cfg.herald.base()
    gain = cfg.herald.resolved_gain()
    powers = cfg.sweep.power_list()
    if cfg.sweep.fit_peak_power_kw is not None:
        herald = fit_sweep_parameters(herald, gain, powers, cfg.sweep.fit_peak_power_kw, cfg.sweep.target_fidelity)
    points = fidelity_vs_power_sweep(powers, herald, gain, cfg.herald.rep_rate)
    head = _header(timestamp)
    head.update(
        {
            "gain_const": f"{gain:.17g}",
            "dark_prob": f"{herald.dark_prob:.17g}",
            "modal_purity": f"{herald.modal_purity:.17g}",
            "eta_spcm": herald.eta_spcm,
        }
    )
    lines = "".join(f"# {k}: {v}\n" for k, v in head.items())
    _write(out_file, lines + format_sweep(points))
    return points


def cmd_report(matrix_file: Path) -> str:
    rho = read_density_matrix(matrix_file, validate=False)
    dist = photon_distribution(rho)
    lines = [f"n_max = {rho.n_max}", f"trace = {rho.trace():.12g}", f"min_eigenvalue = {rho.min_eigenvalue():.6g}"]
    for n, p in enumerate(dist):
        lines.append(f"p{n} = {p:.6f}")
    lines.append(f"wigner_origin = {wigner_point(rho, 0.0, 0.0):.6f}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heraldfock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="YAML run configuration")
    common.add_argument("-s", "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set simulate.count=10000 (repeatable)")
    common.add_argument("--seed", type=int, help="shortcut for --set seed=N")
    common.add_argument("--no-timestamp", action="store_true", help="omit the creation-time header line")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="heralded state + homodyne samples")
    p.add_argument("-o", "--out-dir", type=Path, default=Path("."))
    p = sub.add_parser("reconstruct", parents=[common], help="maximum-likelihood tomography of a data file")
    p.add_argument("data", type=Path)
    p.add_argument("-o", "--out-dir", type=Path, default=Path("."))
    p = sub.add_parser("wigner", parents=[common], help="Wigner grid of a density-matrix file")
    p.add_argument("matrix", type=Path)
    p.add_argument("-o", "--out", type=Path, default=Path("wigner.txt"))
    p = sub.add_parser("rates", parents=[common], help="timing simulation of the acquisition chain")
    p.add_argument("-o", "--out", type=Path, default=Path("rates.txt"))
    p = sub.add_parser("sweep", parents=[common], help="fidelity and herald rate versus pump power")
    p.add_argument("-o", "--out", type=Path, default=Path("sweep.txt"))
    p = sub.add_parser("report", help="summarise a density-matrix file")
    p.add_argument("matrix", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            sys.stdout.write(cmd_report(args.matrix))
            return EXIT_OK
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = load_config(args.config, overrides)
        stamp = not args.no_timestamp
        if args.command == "simulate":
            paths = cmd_simulate(cfg, args.out_dir, stamp)
            print("\n".join(str(p) for p in paths))
        elif args.command == "reconstruct":
            report = cmd_reconstruct(cfg, args.data, args.out_dir, stamp)
            print(f"fidelity {report['mid_fidelity']:.4f} [{report['fidelity_bracket_lower']:.4f}, "
                  f"{report['fidelity_bracket_upper']:.4f}] uncorrected {report['uncorrected_fidelity']:.4f}")
        elif args.command == "wigner":
            grid = cmd_wigner(cfg, args.matrix, args.out, stamp)
            print(f"min W = {grid.minimum()[0]:.6f}, integral = {grid.integral():.6f}")
        elif args.command == "rates":
            report = cmd_rates(cfg, args.out, stamp)
            sys.stdout.write(report.to_text())
        elif args.command == "sweep":
            points = cmd_sweep(cfg, args.out, stamp)
            best = max(points, key=lambda pt: pt.fidelity)
            print(f"peak fidelity {best.fidelity:.4f} at {best.power_kw:g} kW")
    except NumericalFailure as exc:
        print(f"heraldfock: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, OSError) as exc:
        print(f"heraldfock: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
