"""Truncated Fock-space density matrices, photon loss and fidelities.

All matrices are dense complex arrays of size ``(n_max + 1, n_max + 1)``.
The loss channel is represented as a real superoperator acting on the
row-major vectorisation of the density matrix, which makes the channel,
its inverse and its adjoint (used for lossy homodyne POVMs) three views of
one cached matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


class TruncationError(ValueError):
    """A Fock index does not fit in the truncated space."""


class UnphysicalStateError(ValueError):
    """A matrix violates a density-matrix invariant."""


@dataclass(frozen=True)
class FockState:
    """Number state ``|n>`` used as a fidelity reference."""

    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"photon number must be a non-negative integer, got {self.n!r}")


class DensityMatrix:
    """Immutable density matrix on the Fock space truncated at ``n_max``.

    Parameters
    ----------
    elements:
        Square complex array. It is copied and made read-only.
    leakage:
        Population discarded by truncation before the matrix was normalised.
    validate:
        When true (default) the Hermitian, unit-trace and positivity
        invariants are enforced. Loss-corrected matrices are built with
        ``validate=False`` because the inverse channel can leave the
        physical set.
    """

    __slots__ = ("_elements", "leakage")

    def __init__(self, elements, *, leakage: float = 0.0, validate: bool = True) -> None:
        arr = np.array(elements, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"density matrix must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        self._elements = arr
        self.leakage = float(leakage)
        if validate:
            self.check()

    @classmethod
    def from_array(cls, elements, *, leakage: float = 0.0) -> "DensityMatrix":
        """Symmetrise and normalise ``elements`` before validating."""
        arr = np.asarray(elements, dtype=np.complex128)
        arr = 0.5 * (arr + arr.conj().T)
        tr = np.trace(arr).real
        if tr <= 0:
            raise UnphysicalStateError(f"cannot normalise matrix with trace {tr}")
        return cls(arr / tr, leakage=leakage)

    @classmethod
    def fock(cls, n: int, n_max: int = 5) -> "DensityMatrix":
        if not 0 <= n <= n_max:
            raise TruncationError(f"|{n}> does not fit in n_max={n_max}")
        arr = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
        arr[n, n] = 1.0
        return cls(arr)

    @classmethod
    def diagonal(cls, probabilities: Iterable[float]) -> "DensityMatrix":
        p = np.asarray(list(probabilities), dtype=float)
        return cls(np.diag(p).astype(np.complex128))

    @classmethod
    def maximally_mixed(cls, n_max: int = 5) -> "DensityMatrix":
        d = n_max + 1
        return cls(np.eye(d, dtype=np.complex128) / d)

    @property
    def elements(self) -> np.ndarray:
        return self._elements

    @property
    def n_max(self) -> int:
        return self._elements.shape[0] - 1

    @property
    def dim(self) -> int:
        return self._elements.shape[0]

    def trace(self) -> float:
        return float(np.trace(self._elements).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self._elements)[0])

    def is_fock_diagonal(self) -> bool:
        off = self._elements - np.diag(np.diag(self._elements))
        return not np.any(off)

    def check(self) -> None:
        """Raise :class:`UnphysicalStateError` if an invariant is violated."""
        a = self._elements
        herm = np.max(np.abs(a - a.conj().T))
        if herm > HERMITIAN_TOL:
            raise UnphysicalStateError(f"matrix is not Hermitian (deviation {herm:.3e})")
        tr = np.trace(a)
        if abs(tr - 1.0) > TRACE_TOL:
            raise UnphysicalStateError(f"trace is {tr.real:.15g}, expected 1")
        lam = self.min_eigenvalue()
        if lam < -PSD_TOL:
            raise UnphysicalStateError(f"matrix has negative eigenvalue {lam:.3e}")

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._elements
        return self._elements.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self._elements.shape == other._elements.shape and bool(
            np.array_equal(self._elements, other._elements)
        )

    def __hash__(self) -> int:
        return hash(self._elements.tobytes())

    def __repr__(self) -> str:
        diag = np.round(np.diag(self._elements).real, 4)
        return f"DensityMatrix(n_max={self.n_max}, diag={diag.tolist()})"


@dataclass(frozen=True)
class LossCorrection:
    """Result of :func:`inverse_bernoulli`.

    ``flagged`` is set when the corrected matrix has an eigenvalue below
    ``-tolerance``; the matrix is still returned so callers can decide.
    """

    rho: DensityMatrix
    min_eigenvalue: float
    flagged: bool
    tolerance: float


def _as_index(ref: FockState | int) -> int:
    return ref.n if isinstance(ref, FockState) else FockState(int(ref)).n


def fidelity(rho: DensityMatrix, ref: FockState | int) -> float:
    """Overlap ``<n|rho|n>`` with the number state ``ref``."""
    n = _as_index(ref)
    if n > rho.n_max:
        raise TruncationError(f"reference |{n}> exceeds truncation n_max={rho.n_max}")
    return float(rho.elements[n, n].real)


def photon_distribution(rho: DensityMatrix) -> np.ndarray:
    """Photon-number probabilities (the real diagonal of ``rho``)."""
    return np.diag(rho.elements).real.copy()


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0 or math.isnan(eta):
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    return eta


@lru_cache(maxsize=256)
def _loss_superoperator(dim: int, eta: float) -> np.ndarray:
    """Real matrix ``S`` with ``vec(loss(rho)) = S @ vec(rho)`` (row-major vec)."""
    s = np.zeros((dim * dim, dim * dim))
    for m in range(dim):
        for n in range(dim):
            for k in range(dim - max(m, n)):
                c = math.sqrt(math.comb(m + k, k) * math.comb(n + k, k))
                c *= eta ** ((m + n) / 2) * (1.0 - eta) ** k
                s[m * dim + n, (m + k) * dim + (n + k)] = c
    s.setflags(write=False)
    return s


def loss_superoperator(dim: int, eta: float) -> np.ndarray:
    """Superoperator of the photon-loss channel with survival probability ``eta``."""
    return _loss_superoperator(int(dim), _check_eta(eta))


def bernoulli_loss(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Apply binomial photon loss with transmission ``eta``.

    Loss only moves population to lower photon numbers, so on the
    truncated space the channel is closed; the ``leakage`` of the result is
    the trace change and is zero up to rounding.
    """
    eta = _check_eta(eta)
    d = rho.dim
    if eta == 1.0:
        return DensityMatrix(rho.elements, leakage=rho.leakage)
    out = (loss_superoperator(d, eta) @ rho.elements.reshape(-1)).reshape(d, d)
    out = 0.5 * (out + out.conj().T)
    leak = rho.trace() - float(np.trace(out).real)
    return DensityMatrix(out, leakage=rho.leakage + leak)


def inverse_bernoulli(rho: DensityMatrix, eta: float, tolerance: float = 1e-6) -> LossCorrection:
    """Undo binomial loss algebraically on the truncated space.

    The channel superoperator is triangular in photon number with a
    positive diagonal, so the inverse is exact for ``eta > 0``. The result
    need not be positive.
    """
    eta = _check_eta(eta)
    if eta == 0.0:
        raise ValueError("cannot invert total loss (eta = 0)")
    d = rho.dim
    if eta == 1.0:
        out = np.array(rho.elements)
    else:
        s = loss_superoperator(d, eta)
        out = np.linalg.solve(s, rho.elements.reshape(-1)).reshape(d, d)
        out = 0.5 * (out + out.conj().T)
    lam = float(np.linalg.eigvalsh(out)[0])
    corrected = DensityMatrix(out, leakage=rho.leakage, validate=False)
    return LossCorrection(corrected, lam, lam < -tolerance, tolerance)


def adjoint_loss(operators: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss applied to one operator or a stack of them.

    Satisfies ``tr(loss(rho) @ A) == tr(rho @ adjoint_loss(A))``.
    """
    ops = np.asarray(operators)
    single = ops.ndim == 2
    if single:
        ops = ops[None]
    d = ops.shape[-1]
    s = loss_superoperator(d, eta)
    # tr(X A) = vec(X) . vec(A^T) for row-major vec
    flat = np.swapaxes(ops, -1, -2).reshape(ops.shape[0], d * d)
    out = np.swapaxes((flat @ s).reshape(ops.shape[0], d, d), -1, -2)
    return out[0] if single else out


def random_density_matrix(n_max: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random full- or fixed-rank density matrix (Ginibre construction)."""
    d = n_max + 1
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    return DensityMatrix.from_array(g @ g.conj().T)


# -- text serialisation ------------------------------------------------------


def format_density_matrix(rho: DensityMatrix, metadata: Mapping[str, object] | None = None) -> str:
    lines = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
    lines.append(str(rho.n_max))
    a = rho.elements
    for m in range(rho.dim):
        for n in range(rho.dim):
            z = a[m, n]
            lines.append(f"{m} {n} {z.real:.17g} {z.imag:.17g}")
    return "\n".join(lines) + "\n"


def write_density_matrix(path: str | Path, rho: DensityMatrix, metadata: Mapping[str, object] | None = None) -> None:
    Path(path).write_text(format_density_matrix(rho, metadata))


def parse_density_matrix(text: str, *, validate: bool = True) -> DensityMatrix:
    n_max = None
    arr = None
    seen = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            if n_max is None:
                if len(fields) != 1:
                    raise ValueError("expected a single n_max value")
                n_max = int(fields[0])
                if n_max < 0:
                    raise ValueError("n_max must be non-negative")
                arr = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
                continue
            if len(fields) != 4:
                raise ValueError("expected 'm n re im'")
            m, n = int(fields[0]), int(fields[1])
            arr[m, n] = complex(float(fields[2]), float(fields[3]))
            seen += 1
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if n_max is None:
        raise ValueError("density-matrix file is empty")
    if seen != (n_max + 1) ** 2:
        raise ValueError(f"expected {(n_max + 1) ** 2} matrix entries, found {seen}")
    return DensityMatrix(arr, validate=validate)


def read_density_matrix(path: str | Path, *, validate: bool = True) -> DensityMatrix:
    return parse_density_matrix(Path(path).read_text(), validate=validate)
