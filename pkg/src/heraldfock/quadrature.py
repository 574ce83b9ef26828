"""Homodyne quadrature statistics in the Fock basis.

Quadratures follow ``x = (a + a^dagger) / sqrt(2)`` so the vacuum variance
is 1/2. The phase-rotated quadrature eigenstate has Fock amplitudes
``<n|x_theta> = psi_n(x) exp(i n theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .fock import DensityMatrix, adjoint_loss, bernoulli_loss

MAX_HERMITE_ORDER = 60
GRID_MIN = -8.0
GRID_MAX = 8.0
GRID_POINTS = 4096

PHASE_POLICIES = ("uniform", "grid")


@dataclass(frozen=True)
class QuadratureSample:
    theta: float
    x: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta < math.pi:
            raise ValueError(f"theta must lie in [0, pi), got {self.theta}")
        if not math.isfinite(self.x):
            raise ValueError(f"quadrature value must be finite, got {self.x}")


@dataclass(frozen=True)
class HomodyneModel:
    """Efficiencies of the homodyne chain and how LO phases are chosen.

    ``eta_hd`` is derived as ``eta_pd * eta_c``. Electronic noise is not a
    separate term; it is folded into the efficiencies.
    """

    eta_pd: float = 1.0
    eta_c: float = 1.0
    phase_policy: str = "uniform"
    n_phases: int = 12

    def __post_init__(self) -> None:
        for name in ("eta_pd", "eta_c"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.phase_policy not in PHASE_POLICIES:
            raise ValueError(f"phase_policy must be one of {PHASE_POLICIES}, got {self.phase_policy!r}")
        if self.n_phases < 1:
            raise ValueError("n_phases must be >= 1")

    @property
    def eta_hd(self) -> float:
        return self.eta_pd * self.eta_c

    @classmethod
    def ideal(cls, **kwargs) -> "HomodyneModel":
        return cls(1.0, 1.0, **kwargs)

    @classmethod
    def with_efficiency(cls, eta_hd: float, **kwargs) -> "HomodyneModel":
        """Model with overall efficiency ``eta_hd`` (all loss put into mode matching)."""
        return cls(1.0, eta_hd, **kwargs)


def hermite_table(x, n_max: int) -> np.ndarray:
    """Normalised oscillator eigenfunctions ``psi_0..psi_n_max`` at ``x``.

    Returns an array of shape ``x.shape + (n_max + 1,)``. Uses the three-term
    recurrence on normalised functions, which stays finite where the raw
    Hermite polynomials overflow.
    """
    if not 0 <= n_max <= MAX_HERMITE_ORDER:
        raise ValueError(f"photon number must be in [0, {MAX_HERMITE_ORDER}], got {n_max}")
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[..., 1] = math.sqrt(2.0) * x * out[..., 0]
    for n in range(1, n_max):
        out[..., n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[..., n] - math.sqrt(n / (n + 1)) * out[..., n - 1]
    return out


def hermite_psi(n: int, x):
    """Fock wavefunction ``psi_n(x)`` in the vacuum-variance-1/2 convention."""
    if int(n) != n or not 0 <= n <= MAX_HERMITE_ORDER:
        raise ValueError(f"photon number must be an integer in [0, {MAX_HERMITE_ORDER}], got {n}")
    val = hermite_table(x, int(n))[..., int(n)]
    return float(val) if np.ndim(val) == 0 else val


def _amplitudes(theta, x, n_max: int) -> np.ndarray:
    """Rows ``<n|x_theta>`` with shape ``broadcast(theta, x).shape + (dim,)``."""
    theta, x = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(x, dtype=float))
    n = np.arange(n_max + 1)
    return hermite_table(x, n_max) * np.exp(1j * theta[..., None] * n)


def ideal_povm(theta, x, n_max: int) -> np.ndarray:
    """Quadrature projectors ``|x_theta><x_theta|`` restricted to ``n_max``."""
    v = _amplitudes(theta, x, n_max)
    return v[..., :, None] * v[..., None, :].conj()


def povm_element(theta, x, eta: float, n_max: int) -> np.ndarray:
    """Lossy homodyne POVM element ``Pi_eta(x, theta)``.

    Vectorises over array-valued ``theta``/``x`` (stack shape first).
    ``tr(rho @ Pi_eta) == prob_density(rho, theta, x, eta)``.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"POVM efficiency must lie in (0, 1], got {eta}")
    ideal = ideal_povm(theta, x, n_max)
    if eta == 1.0:
        return ideal
    shape = ideal.shape
    d = n_max + 1
    return adjoint_loss(ideal.reshape(-1, d, d), eta).reshape(shape)


def _density_from_state(rho_elements: np.ndarray, theta, x) -> np.ndarray:
    d = rho_elements.shape[0]
    v = _amplitudes(theta, x, d - 1)
    # p = <x_theta| rho |x_theta> = sum_mn conj(v_m) rho_mn v_n
    p = np.einsum("...m,mn,...n->...", v.conj(), rho_elements, v).real
    return p


def prob_density(rho: DensityMatrix, theta, x, model: HomodyneModel | None = None):
    """Probability density ``p(x | theta)`` seen by the (lossy) detector."""
    eta = 1.0 if model is None else model.eta_hd
    lossy = bernoulli_loss(rho, eta) if eta < 1.0 else rho
    p = _density_from_state(lossy.elements, theta, x)
    return float(p) if np.ndim(p) == 0 else p


class _InverseCDF:
    """Inverse-CDF sampler of ``p(x|theta)`` on a fixed grid.

    ``p(x|theta) = sum_d Re[c_d(x) exp(i d theta)]`` over photon-number
    offsets ``d``, so cumulative trapezoid integrals of the ``c_d`` are
    cached once and the CDF for any phase is a short sum.
    """

    def __init__(self, rho_elements: np.ndarray, lo=GRID_MIN, hi=GRID_MAX, points=GRID_POINTS):
        d = rho_elements.shape[0]
        self.grid = np.linspace(lo, hi, points)
        psi = hermite_table(self.grid, d - 1)
        coeffs = np.zeros((d, points), dtype=np.complex128)
        for m in range(d):
            for n in range(m, d):
                term = rho_elements[m, n] * psi[:, m] * psi[:, n]
                coeffs[n - m] += term if n == m else 2.0 * term
        h = self.grid[1] - self.grid[0]
        cum = np.zeros_like(coeffs)
        cum[:, 1:] = np.cumsum(0.5 * h * (coeffs[:, 1:] + coeffs[:, :-1]), axis=1)
        self.cum = cum
        self.offsets = np.arange(d)

    def cdf_at(self, idx: np.ndarray, phases: np.ndarray) -> np.ndarray:
        return np.einsum("ds,sd->s", self.cum[:, idx], phases).real

    def sample(self, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
        phases = np.exp(1j * theta[:, None] * self.offsets)
        last = self.grid.size - 1
        total = self.cdf_at(np.full(theta.shape, last), phases)
        target = u * total
        lo = np.zeros(theta.shape, dtype=np.int64)
        hi = np.full(theta.shape, last, dtype=np.int64)
        # vectorised bisection for CDF[lo] <= target < CDF[hi]
        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            below = self.cdf_at(mid, phases) <= target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        c_lo = self.cdf_at(lo, phases)
        c_hi = self.cdf_at(hi, phases)
        span = c_hi - c_lo
        frac = np.where(span > 0, (target - c_lo) / np.where(span > 0, span, 1.0), 0.5)
        return self.grid[lo] + np.clip(frac, 0.0, 1.0) * (self.grid[hi] - self.grid[lo])


def draw_phases(model: HomodyneModel, count: int, rng: np.random.Generator) -> np.ndarray:
    if model.phase_policy == "uniform":
        return rng.uniform(0.0, math.pi, size=count)
    grid = np.arange(model.n_phases) * (math.pi / model.n_phases)
    return grid[np.arange(count) % model.n_phases]


def sample_arrays(rho: DensityMatrix, model: HomodyneModel, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` homodyne outcomes as ``(theta, x)`` arrays.

    One ``numpy`` generator seeded with ``seed`` supplies first all phases
    (uniform policy) and then all uniforms for the inverse CDF, so the
    output depends on nothing but ``(rho, model, count, seed)``.
    """
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    lossy = bernoulli_loss(rho, model.eta_hd)
    theta = draw_phases(model, count, rng)
    u = rng.random(count)
    x = _InverseCDF(lossy.elements).sample(theta, u)
    return theta, x


def sample_quadratures(rho: DensityMatrix, model: HomodyneModel, count: int, seed: int) -> list[QuadratureSample]:
    theta, x = sample_arrays(rho, model, count, seed)
    return [QuadratureSample(float(t), float(v)) for t, v in zip(theta, x)]


def as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """Accept a list of :class:`QuadratureSample` or a ``(theta, x)`` pair."""
    if isinstance(samples, tuple) and len(samples) == 2 and not isinstance(samples[0], QuadratureSample):
        theta = np.asarray(samples[0], dtype=float)
        x = np.asarray(samples[1], dtype=float)
        if theta.shape != x.shape or theta.ndim != 1:
            raise ValueError("theta and x must be 1-D arrays of equal length")
        return theta, x
    seq = list(samples)
    theta = np.fromiter((s.theta for s in seq), dtype=float, count=len(seq))
    x = np.fromiter((s.x for s in seq), dtype=float, count=len(seq))
    return theta, x


# -- data files --------------------------------------------------------------


def format_quadratures(theta: np.ndarray, x: np.ndarray, metadata: Mapping[str, object] | None = None) -> str:
    head = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
    body = [f"{t:.17g} {v:.17g}" for t, v in zip(theta.tolist(), x.tolist())]
    return "\n".join(head + body) + "\n"


def write_quadratures(path: str | Path, theta, x, metadata: Mapping[str, object] | None = None) -> None:
    Path(path).write_text(format_quadratures(np.asarray(theta), np.asarray(x), metadata))


def parse_quadratures(text: str) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    """Parse ``theta x`` lines; returns arrays plus the ``# key: value`` metadata."""
    meta: dict[str, str] = {}
    theta: list[float] = []
    xs: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'theta x', got {raw!r}")
        try:
            t, v = float(fields[0]), float(fields[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value in {raw!r}") from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise ValueError(f"line {lineno}: non-finite value")
        theta.append(t)
        xs.append(v)
    if not theta:
        raise ValueError("quadrature file contains no samples")
    return np.array(theta), np.array(xs), meta


def read_quadratures(path: str | Path) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    return parse_quadratures(Path(path).read_text())


def samples_from_arrays(theta: Sequence[float], x: Sequence[float]) -> list[QuadratureSample]:
    return [QuadratureSample(float(t), float(v)) for t, v in zip(theta, x)]
