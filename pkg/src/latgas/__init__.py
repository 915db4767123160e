"""Stochastic lattice-gas simulation with residence-time tracking.

Continuous-time Markov chains on occupancy configurations of a finite
lattice, with general injection, diffusion, and multi-site extraction
rates.  The package simulates sample paths while tracking individual
particles, estimates the mean residence time, and verifies the relation
rho = phi * tau (stationary mass = influx times mean residence time)
against dense small-lattice solves and against the closed forms of two
reference models: an Ising ring gas and the open-boundary exclusion
process.
"""

from .lattice import (
    Configuration,
    Diffusion,
    Event,
    EventPreconditionError,
    Extraction,
    Injection,
    Lattice,
    RateModel,
    ValidationReport,
    all_configurations,
    apply_event,
    enabled_events,
    total_rate,
    validate_model,
)
from .simulate import (
    AbsorbingStateError,
    DrainBudgetError,
    JumpRecord,
    RunControl,
    RunSummary,
    replica_seeds,
    run,
    step,
)
from .tracking import (
    Estimates,
    IncompleteDrainError,
    LedgerCorruptionError,
    ResidenceLedger,
    brute_force_theta_u,
    occupancy_time_average,
    step_survival_matrix,
)
from .measure import (
    EnsembleResult,
    Measurement,
    measure_residence,
    run_ensemble,
)
from .exact import (
    ExactSolution,
    ReducibleModelError,
    ReversibilityReport,
    StateSpaceCapError,
    build_generator,
    detailed_balance_check,
    exact_law,
    jump_chain_matrix,
    occupation_marginals,
    stationary_distribution,
    w_spectral_radius,
)
from .models import (
    IsingParams,
    IsingRingModel,
    SingleSiteModel,
    TableModel,
    TasepModel,
    TasepParams,
    TransferMatrixSolution,
    ising_hamiltonian,
    ising_model,
    ising_tau_exact,
    tasep_B,
    tasep_Z,
    tasep_density,
    tasep_model,
    tasep_r_coefficient,
    tasep_tau_exact,
)

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "Lattice",
    "Injection",
    "Diffusion",
    "Extraction",
    "Event",
    "RateModel",
    "ValidationReport",
    "EventPreconditionError",
    "all_configurations",
    "apply_event",
    "enabled_events",
    "total_rate",
    "validate_model",
    "JumpRecord",
    "RunControl",
    "RunSummary",
    "AbsorbingStateError",
    "DrainBudgetError",
    "run",
    "step",
    "replica_seeds",
    "Estimates",
    "ResidenceLedger",
    "IncompleteDrainError",
    "LedgerCorruptionError",
    "brute_force_theta_u",
    "occupancy_time_average",
    "step_survival_matrix",
    "Measurement",
    "EnsembleResult",
    "measure_residence",
    "run_ensemble",
    "ExactSolution",
    "ReversibilityReport",
    "StateSpaceCapError",
    "ReducibleModelError",
    "build_generator",
    "stationary_distribution",
    "exact_law",
    "occupation_marginals",
    "detailed_balance_check",
    "jump_chain_matrix",
    "w_spectral_radius",
    "IsingParams",
    "IsingRingModel",
    "SingleSiteModel",
    "TableModel",
    "TasepParams",
    "TasepModel",
    "TransferMatrixSolution",
    "ising_hamiltonian",
    "ising_model",
    "ising_tau_exact",
    "tasep_B",
    "tasep_Z",
    "tasep_density",
    "tasep_model",
    "tasep_r_coefficient",
    "tasep_tau_exact",
]
