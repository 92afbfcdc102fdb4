"""Distributed augmented Lagrangian optimisation over unreliable networks."""

from .algorithm import (AgentState, AlgorithmConfig, NetworkState, RunTrace, StepSizes,
                        init_states, run, step, sync_step)
from .errors import (ConfigError, DimensionMismatch, DistalError, GenerationFailed,
                     InfeasibleLocalSet, InfeasibleProblem, NoConvergence, NonConvex,
                     ParseError, ProblemError, RankDeficient, TooLarge, UnboundedSet)
from .local_solver import SolverSettings, build_local_subproblem, solve_local
from .network import (ActivationModel, ActivationSample, derive_seed,
                      edge_effective_probability, enumerate_activation_outcomes,
                      sample_activation)
from .oracle import OracleSolution, brute_force_grid, solve_centralized
from .problem import (AffineEquality, AgentSpec, BoxSet, ProblemSpec, QuadraticCost,
                      validate_problem)

__version__ = "0.1.0"
