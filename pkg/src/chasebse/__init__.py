"""Chebyshev-filtered subspace iteration for Bethe-Salpeter exciton Hamiltonians.

The package bundles two eigensolvers for the lowest eigenpairs of dense
Hermitian matrices (a Chebyshev-filtered subspace iteration and a
band-by-band conjugate gradient baseline), a synthetic exciton Hamiltonian
generator, a striped binary matrix format with a simulated parallel loader,
and the benchmark and reporting harness that ties them together.
"""
from .bench import (ExperimentSpec, ReportRow, interpolate_nex,
                    parallel_efficiency, run_experiment, scaling_table,
                    speedup, sweep_nex)
from .bse import (BandModel, BindingSeries, CouplingModel, PairBasis,
                  assemble_hamiltonian, binding_energy, build_band_model,
                  enumerate_pairs, extrapolate_binding, load_model_config,
                  model_from_config)
from .chase import (ChaseConfig, ChaseResult, SpectralBounds, chase_solve,
                    chebyshev_filter, damping_factor, lanczos_bounds,
                    lock_converged, plan_degrees, rayleigh_ritz)
from .errors import ChaseBSEError, PartialConvergenceError
from .kscg import KscgConfig, KscgResult, cg_minimize_rayleigh, kscg_solve
from .linalg import deterministic, matvec_counter
from .matrix_io import RankLayout, load_distributed, write_striped
from .report import emit_report, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "ExperimentSpec", "ReportRow", "interpolate_nex", "parallel_efficiency",
    "run_experiment", "scaling_table", "speedup", "sweep_nex",
    "BandModel", "BindingSeries", "CouplingModel", "PairBasis",
    "assemble_hamiltonian", "binding_energy", "build_band_model",
    "enumerate_pairs", "extrapolate_binding", "load_model_config",
    "model_from_config", "ChaseConfig", "ChaseResult", "SpectralBounds",
    "chase_solve", "chebyshev_filter", "damping_factor", "lanczos_bounds",
    "lock_converged", "plan_degrees", "rayleigh_ritz", "ChaseBSEError",
    "PartialConvergenceError", "KscgConfig", "KscgResult",
    "cg_minimize_rayleigh", "kscg_solve", "deterministic", "matvec_counter",
    "RankLayout", "load_distributed", "write_striped", "emit_report",
    "read_csv", "write_csv",
]
