"""Ground-state classification for coupled semilinear Schrodinger systems.

Given the component count M, nonlinearity exponent p, dimension N,
frequencies omega and a symmetric coupling matrix K, the package
decides whether nontrivial ground states exist, produces their explicit
amplitude profiles through the finite-dimensional sphere reduction,
compares action levels across supports, evaluates the characteristic
coupling value for probe-split systems, and cross-checks everything
against two independent numerical oracles (radial shooting and direct
constrained minimization on a 1D interval).
"""

from .model import (
    ActionTriple,
    AmplitudeVector,
    DiscreteField,
    Grid1D,
    InvalidSpecError,
    ProblemSpec,
    SolverError,
    UnsupportedRegimeError,
    ValidationReport,
    action_triple,
    interaction_energy,
    interaction_split,
    quadratic_energy,
    separable_field,
    validate_spec,
)
from .reduction import (
    GroundStateReport,
    MaximizerSet,
    Verdict,
    classify,
    coupling_form,
    kkt_candidates_p1,
    maximize_coupling_form,
)
from .algebraic import (
    AmplitudeSolution,
    enumerate_candidates,
    solve_support,
    solve_support_linear,
    solve_support_newton,
)
from .scalar import ScalarGroundState, scale_omega, solve_scalar
from .action import (
    ActionLevels,
    action_level,
    action_levels,
    continuity_scan,
    coupling_threshold,
    monotonicity_check,
    semitrivial_coefficient,
    small_diagonal_condition,
    uniform_repulsive_regime,
    uniform_repulsive_spec,
)
from .mandel import (
    BetaHatResult,
    beta_hat,
    beta_hat_curve,
    beta_quotient,
    probe_free_candidate_check,
    quotient_floor,
    quotient_floor_scan,
)
from .variational import (
    CharacterizationReport,
    MinimizationResult,
    NoGroundStatesError,
    minimize_constrained,
    verify_characterization,
)

__version__ = "0.1.0"
