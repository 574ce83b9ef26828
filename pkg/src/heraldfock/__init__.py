"""Heralded Fock-state source simulation and homodyne tomography."""

__version__ = "0.1.0"

from .fock import (
    DensityMatrix,
    FockState,
    LossCorrection,
    bernoulli_loss,
    fidelity,
    inverse_bernoulli,
    photon_distribution,
)
from .quadrature import HomodyneModel, QuadratureSample, hermite_psi, povm_element, prob_density, sample_quadratures
from .source import HeraldConfig, PumpModel, fidelity_vs_power_sweep, herald_rates, heralded_state, pump_to_lambda
from .timing import RateReport, TimingConfig, delay_line, pockels_analysis_rate, simulate_timeline
from .tomography import (
    ReconstructionConfig,
    ReconstructionResult,
    fidelity_error_bars,
    log_likelihood,
    mle_reconstruct,
)
from .wigner import PhaseSpaceGrid, marginal, wigner_grid, wigner_point

__all__ = [
    "DensityMatrix",
    "FockState",
    "HeraldConfig",
    "HomodyneModel",
    "LossCorrection",
    "PhaseSpaceGrid",
    "PumpModel",
    "QuadratureSample",
    "RateReport",
    "ReconstructionConfig",
    "ReconstructionResult",
    "TimingConfig",
    "bernoulli_loss",
    "delay_line",
    "fidelity",
    "fidelity_error_bars",
    "fidelity_vs_power_sweep",
    "herald_rates",
    "heralded_state",
    "hermite_psi",
    "inverse_bernoulli",
    "log_likelihood",
    "marginal",
    "mle_reconstruct",
    "photon_distribution",
    "pockels_analysis_rate",
    "povm_element",
    "prob_density",
    "pump_to_lambda",
    "sample_quadratures",
    "simulate_timeline",
    "wigner_grid",
    "wigner_point",
]
