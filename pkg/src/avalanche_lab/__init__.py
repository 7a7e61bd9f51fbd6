"""avalanche-lab: Monte Carlo laboratory for near-critical frozen
percolation, forest fires, and percolation with heavy-tailed impurities on
the triangular lattice."""

__version__ = "0.1.0"

from .lattice import Annulus, Ball, Explicit, Lozenge, Rect, neighbors
from .percolation import (Configuration, sample_bernoulli, label_clusters,
                          crossing, has_circuit, mono_arm, pivotal_four_arm,
                          largest_cluster, circuit_and_arm_in_cluster,
                          surrounds_origin, max_disjoint_circuits,
                          estimate_connection)
from .dynamics import (run_frozen, run_ffwor, run_ffwr, run_reference,
                       snapshot_birth, EventLog)
from .impurities import (ImpuritySpec, sample_impurity_percolation,
                         rho_from_subcritical_cluster, check_assumption,
                         detect_crossing_hole, domination_experiment)
from .scales import (AnsatzBackend, EmpiricalBackend, LogScaleNumber,
                     theta, length, psi_fp, psi_ff, t_hat, t_infinity,
                     exceptional_scales, derived_constants, schedule_fp,
                     schedule_ff, iteration_exponent_check,
                     characteristic_length_mc)
from .measure import avalanche_stats, volume_window_count, aggregate
from .harness import ExperimentConfig, run_experiment, selftest

__all__ = [
    "Annulus", "Ball", "Explicit", "Lozenge", "Rect", "neighbors",
    "Configuration", "sample_bernoulli", "label_clusters", "crossing",
    "has_circuit", "mono_arm", "pivotal_four_arm", "largest_cluster",
    "circuit_and_arm_in_cluster", "surrounds_origin", "max_disjoint_circuits",
    "estimate_connection",
    "run_frozen", "run_ffwor", "run_ffwr", "run_reference", "snapshot_birth",
    "EventLog",
    "ImpuritySpec", "sample_impurity_percolation",
    "rho_from_subcritical_cluster", "check_assumption",
    "detect_crossing_hole", "domination_experiment",
    "AnsatzBackend", "EmpiricalBackend", "LogScaleNumber", "theta", "length",
    "psi_fp", "psi_ff", "t_hat", "t_infinity", "exceptional_scales",
    "derived_constants", "schedule_fp", "schedule_ff",
    "iteration_exponent_check", "characteristic_length_mc",
    "avalanche_stats", "volume_window_count", "aggregate",
    "ExperimentConfig", "run_experiment", "selftest",
    "__version__",
]
