"""Embedding-based solver for two-mode switched optimal control problems."""

from .analysis import (
    ModeSequence,
    RolloutReport,
    SolutionClass,
    SweepRecord,
    beta_sweep,
    classify,
    estimate_costates,
    extract_modes,
    hamiltonian_profile,
    project_and_rollout,
)
from .nlp import SolveOptions, SolveResult, default_initializer, solve
from .ocp import (
    BoundarySpec,
    ControlSet,
    CostateTrajectory,
    EmbeddedProblem,
    SwitchedProblem,
    Trajectory,
    aux_cost,
    check_dwell,
    embed,
    hamiltonian,
)
from .problems import CATALOG, double_integrator, make_problem, two_tank
from .sim import RolloutResult, rollout_embedded, rollout_switched
from .transcription import (
    DecisionLayout,
    Mesh,
    NlpProblem,
    constraint_jacobian,
    objective_gradient,
    trajectory_from_vector,
    transcribe,
)

__version__ = "0.1.0"
