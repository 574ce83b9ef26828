"""Iterative maximum-likelihood (R rho R) homodyne tomography.

Samples are handled unbinned: every ``(theta, x)`` outcome contributes its
own lossy POVM element. Samples are sorted into a canonical order before
any reduction so that results do not depend on input order, down to the
last bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fock import DensityMatrix, FockState, fidelity
from .quadrature import as_arrays, povm_element

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-300
MONOTONE_SLACK = 1e-12
MIN_SAMPLES = 100


@dataclass(frozen=True)
class ReconstructionConfig:
    n_max: int = 5
    eta_assumed: float = 0.76
    max_iterations: int = 2000
    tol_loglik: float = 1e-9
    dilution: float = 1.0

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not 0.0 < self.eta_assumed <= 1.0:
            raise ValueError(f"eta_assumed must lie in (0, 1], got {self.eta_assumed}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tol_loglik > 0:
            raise ValueError("tol_loglik must be positive")
        if not 0.0 < self.dilution <= 1.0:
            raise ValueError(f"dilution must lie in (0, 1], got {self.dilution}")


@dataclass(frozen=True)
class ReconstructionResult:
    rho: DensityMatrix
    loglik: float
    iterations: int
    converged: bool
    loglik_trace: tuple[float, ...] = field(default=(), repr=False)
    dilution: float = 1.0
    warnings: tuple[str, ...] = ()


class _Likelihood:
    """POVM stack for one data set at one assumed efficiency."""

    def __init__(self, samples, eta: float, n_max: int):
        theta, x = as_arrays(samples)
        if theta.size == 0:
            raise ValueError("cannot evaluate a likelihood without samples")
        order = np.lexsort((x, theta))
        theta, x = theta[order], x[order]
        # identical outcomes share one POVM element with an integer weight
        keys, first, counts = np.unique(np.stack([theta, x], axis=1), axis=0, return_index=True, return_counts=True)
        self.n_samples = theta.size
        self.n_unique = keys.shape[0]
        self.weights = counts.astype(float)
        d = n_max + 1
        pis = povm_element(keys[:, 0], keys[:, 1], eta, n_max)
        # tr(rho Pi) = vec(rho) . vec(Pi^T)
        self.flat = np.ascontiguousarray(np.swapaxes(pis, 1, 2).reshape(self.n_unique, d * d))
        self.dim = d

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        return (self.flat @ rho.reshape(-1)).real

    def loglik(self, rho: np.ndarray) -> float:
        p = np.maximum(self.probabilities(rho), PROB_FLOOR)
        return float(np.dot(self.weights, np.log(p)) / self.n_samples)

    def r_operator(self, rho: np.ndarray) -> np.ndarray:
        p = np.maximum(self.probabilities(rho), PROB_FLOOR)
        # flat rows hold Pi^T, so the weighted sum is R^T
        rt = ((self.weights / p) @ self.flat).reshape(self.dim, self.dim) / self.n_samples
        r = rt.T
        return 0.5 * (r + r.conj().T)


def log_likelihood(rho: DensityMatrix, samples, eta: float) -> float:
    """Mean log-likelihood ``(1/N) sum_i ln tr(rho Pi_eta(x_i, theta_i))``."""
    return _Likelihood(samples, eta, rho.n_max).loglik(rho.elements)


def _step(rho: np.ndarray, r: np.ndarray, eps: float) -> np.ndarray:
    d = rho.shape[0]
    op = (1.0 - eps) * np.eye(d) + eps * r
    new = op @ rho @ op
    new = 0.5 * (new + new.conj().T)
    return new / np.trace(new).real


def mle_reconstruct(samples, config: ReconstructionConfig | None = None) -> ReconstructionResult:
    """Maximum-likelihood density matrix from homodyne samples.

    Starts from the maximally mixed state and iterates the diluted update
    ``rho <- N[(1-eps + eps R) rho (1-eps + eps R)]``. If the mean
    log-likelihood drops by more than ``1e-12`` the step is rejected and
    ``eps`` is halved. Stops when the per-sample log-likelihood changes by
    less than ``tol_loglik`` or after ``max_iterations`` updates.
    """
    cfg = config or ReconstructionConfig()
    lik = _Likelihood(samples, cfg.eta_assumed, cfg.n_max)
    warnings: list[str] = []
    if lik.n_samples < MIN_SAMPLES:
        warnings.append(f"only {lik.n_samples} samples (< {MIN_SAMPLES})")
    degenerate = lik.n_unique == 1
    if degenerate:
        warnings.append("all samples identical; likelihood is degenerate")

    d = cfg.n_max + 1
    rho = np.eye(d, dtype=np.complex128) / d
    ll = lik.loglik(rho)
    trace = [ll]
    eps = cfg.dilution
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        candidate = _step(rho, lik.r_operator(rho), eps)
        new_ll = lik.loglik(candidate)
        if new_ll < ll - MONOTONE_SLACK:
            eps *= 0.5
            log.info("likelihood decreased by %.3e; dilution reduced to %g", ll - new_ll, eps)
            if eps < 1e-12:
                break
            continue
        iterations += 1
        rho = candidate
        change = new_ll - ll
        ll = new_ll
        trace.append(ll)
        if abs(change) < cfg.tol_loglik:
            converged = True
            break
    if degenerate:
        converged = False
    return ReconstructionResult(
        rho=DensityMatrix(rho),
        loglik=ll,
        iterations=iterations,
        converged=converged,
        loglik_trace=tuple(trace),
        dilution=eps,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class FidelityBracket:
    """Fidelities at the low, assumed and high detection efficiencies."""

    f_low: float
    f_mid: float
    f_high: float
    results: tuple[ReconstructionResult, ReconstructionResult, ReconstructionResult] = field(repr=False)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.f_low, self.f_mid, self.f_high)

    @property
    def lower(self) -> float:
        return min(self.as_tuple())

    @property
    def upper(self) -> float:
        return max(self.as_tuple())

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def brackets_mid(self) -> bool:
        return min(self.f_low, self.f_high) <= self.f_mid <= max(self.f_low, self.f_high)


def fidelity_error_bars(
    samples,
    config: ReconstructionConfig | None = None,
    eta_low: float = 0.73,
    eta_high: float = 0.79,
    ref: FockState | int = 1,
) -> FidelityBracket:
    """Fidelity at ``eta_assumed`` with the bracket from reconstructing at
    ``eta_low`` and ``eta_high``.

    The ordering of ``f_low`` and ``f_high`` is whatever the data give; it
    is not forced.
    """
    cfg = config or ReconstructionConfig()
    if not eta_low <= cfg.eta_assumed <= eta_high:
        raise ValueError(f"need eta_low <= eta_assumed <= eta_high, got {eta_low}, {cfg.eta_assumed}, {eta_high}")
    theta, x = as_arrays(samples)
    results = []
    for eta in (eta_low, cfg.eta_assumed, eta_high):
        sub = ReconstructionConfig(cfg.n_max, eta, cfg.max_iterations, cfg.tol_loglik, cfg.dilution)
        results.append(mle_reconstruct((theta, x), sub))
    f = [fidelity(r.rho, ref) for r in results]
    return FidelityBracket(f[0], f[1], f[2], tuple(results))
