"""Joint control-stability and wireless-reliability analysis for a three-UAV swarm."""

from .dde import (ConvergenceReport, DelayProcess, Trajectory, convergence_metrics,
                  integrate_dde, integrate_errors)
from .errors import ConfigError, NumericalError, SwarmError, UnstableSystemError
from .formation import (ErrorState, FormationTargets, SwarmState, compute_errors,
                        control_acceleration, error_dynamics_rhs, reconstruct_state)
from .linalg import max_eigenvalue_symmetric, solve_lyapunov
from .scenario import Scenario, load_scenario
from .stability import (ControlGains, DelayBound, SystemMatrices, build_error_matrices,
                        delay_bound, formation_delay_requirement)
from .wireless import (LinkBudget, ReliabilityEstimate, WirelessParams, interference_laplace,
                       link_delay, link_reliability, mc_reliability, sample_interference,
                       sinr_threshold)

__version__ = "0.1.0"
