"""Wigner functions of truncated density matrices.

Convention: ``alpha = (x + i p) / sqrt(2)``, vacuum quadrature variance 1/2
and ``integral W dx dp = 1``, so ``W(0, 0) = (-1)^n / pi`` for ``|n>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fock import DensityMatrix

MAX_GRID_POINTS = 10_000_000


def laguerre(n: int, alpha: int, y) -> np.ndarray:
    """Generalised Laguerre polynomial ``L_n^(alpha)(y)`` by upward recurrence."""
    y = np.asarray(y, dtype=float)
    prev = np.ones_like(y)
    if n == 0:
        return prev
    cur = 1.0 + alpha - y
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - y) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def wigner_elements(x, p, n_max: int) -> np.ndarray:
    """Wigner functions of the operators ``|m><n|`` for ``m >= n``.

    Returns an array ``w[m, n, ...]`` (zero for ``m < n``); the ``m < n``
    elements are the complex conjugates of ``w[n, m]``.
    """
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    r2 = x * x + p * p
    gauss = np.exp(-r2) / math.pi
    z = math.sqrt(2.0) * (x - 1j * p)
    d = n_max + 1
    out = np.zeros((d, d) + x.shape, dtype=np.complex128)
    for n in range(d):
        for m in range(n, d):
            k = m - n
            coeff = (-1) ** n * math.sqrt(math.factorial(n) / math.factorial(m))
            out[m, n] = coeff * z**k * laguerre(n, k, 2.0 * r2) * gauss
    return out


def wigner(rho: DensityMatrix, x, p):
    """Wigner function ``W(x, p)`` evaluated elementwise on broadcast ``x, p``."""
    a = rho.elements
    w = wigner_elements(x, p, rho.n_max)
    total = np.zeros(w.shape[2:])
    for m in range(rho.dim):
        total += (a[m, m].real * w[m, m]).real
        for n in range(m):
            # rho_mn W_{|m><n|} + rho_nm W_{|n><m|} = 2 Re(rho_mn W_{|m><n|})
            total += 2.0 * (a[m, n] * w[m, n]).real
    return total


def wigner_point(rho: DensityMatrix, x: float, p: float) -> float:
    return float(wigner(rho, x, p))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    values: np.ndarray  # shape (n_x, n_p); values[i, j] = W(x_i, p_j)

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValueError("grid needs at least 2 points along each axis")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.ps, axis=1), self.xs))

    def minimum(self) -> tuple[float, float, float]:
        """Smallest value and the ``(x, p)`` node where it occurs."""
        i, j = np.unravel_index(np.argmin(self.values), self.values.shape)
        return float(self.values[i, j]), float(self.xs[i]), float(self.ps[j])


def wigner_grid(rho: DensityMatrix, bounds=(-5.0, 5.0, -5.0, 5.0), n_x: int = 201, n_p: int = 201) -> PhaseSpaceGrid:
    x_min, x_max, p_min, p_max = (float(b) for b in bounds)
    if not all(math.isfinite(b) for b in (x_min, x_max, p_min, p_max)):
        raise ValueError("grid bounds must be finite")
    if not (x_max > x_min and p_max > p_min):
        raise ValueError(f"degenerate grid bounds {bounds}")
    if n_x < 2 or n_p < 2:
        raise ValueError("grid needs at least 2 points along each axis")
    if n_x * n_p > MAX_GRID_POINTS:
        raise ValueError(f"grid of {n_x}x{n_p} points exceeds {MAX_GRID_POINTS}")
    xs = np.linspace(x_min, x_max, n_x)
    ps = np.linspace(p_min, p_max, n_p)
    values = np.empty((n_x, n_p))
    # row blocks bound the (dim, dim, rows, n_p) temporary
    block = max(1, 200_000 // n_p)
    for start in range(0, n_x, block):
        stop = min(n_x, start + block)
        values[start:stop] = wigner(rho, xs[start:stop, None], ps[None, :])
    return PhaseSpaceGrid(x_min, x_max, p_min, p_max, values)


def marginal(source, theta: float, x, *, p_limit: float = 8.0, p_points: int = 801):
    """Quadrature distribution ``int W(x cos t - p sin t, x sin t + p cos t) dp``.

    ``source`` is a :class:`DensityMatrix` (exact Wigner function, trapezoid
    rule over ``p``) or a :class:`PhaseSpaceGrid` (bilinear interpolation of
    the stored values, zero outside the grid).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c, s = math.cos(theta), math.sin(theta)
    if isinstance(source, PhaseSpaceGrid):
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator((source.xs, source.ps), source.values, bounds_error=False, fill_value=0.0)
        lim = max(abs(source.x_min), abs(source.x_max), abs(source.p_min), abs(source.p_max)) * math.sqrt(2.0)
        ps = np.linspace(-lim, lim, max(source.n_x, source.n_p) * 2)
        X = x[:, None] * c - ps[None, :] * s
        P = x[:, None] * s + ps[None, :] * c
        vals = interp(np.stack([X, P], axis=-1))
    else:
        ps = np.linspace(-p_limit, p_limit, p_points)
        X = x[:, None] * c - ps[None, :] * s
        P = x[:, None] * s + ps[None, :] * c
        vals = wigner(source, X, P)
    out = np.trapezoid(vals, ps, axis=1)
    return out if out.size > 1 else float(out[0])


def format_grid(grid: PhaseSpaceGrid, metadata: dict | None = None) -> str:
    lines = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
    lines.append(f"# bounds: {grid.x_min:.17g} {grid.x_max:.17g} {grid.p_min:.17g} {grid.p_max:.17g}")
    lines.append(f"# sizes: {grid.n_x} {grid.n_p}")
    xs, ps = grid.xs, grid.ps
    for i in range(grid.n_x):
        for j in range(grid.n_p):
            lines.append(f"{xs[i]:.17g} {ps[j]:.17g} {grid.values[i, j]:.17g}")
    return "\n".join(lines) + "\n"


def write_grid(path: str | Path, grid: PhaseSpaceGrid, metadata: dict | None = None) -> None:
    Path(path).write_text(format_grid(grid, metadata))


def read_grid(path: str | Path) -> PhaseSpaceGrid:
    bounds = sizes = None
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("# bounds:"):
            bounds = [float(v) for v in line.split(":", 1)[1].split()]
        elif line.startswith("# sizes:"):
            sizes = [int(v) for v in line.split(":", 1)[1].split()]
        elif line and not line.startswith("#"):
            rows.append(float(line.split()[2]))
    if bounds is None or sizes is None:
        raise ValueError("grid file lacks bounds/sizes header")
    values = np.array(rows).reshape(sizes[0], sizes[1])
    return PhaseSpaceGrid(*bounds, values=values)
