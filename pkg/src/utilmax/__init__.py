"""Utility maximization on finite market trees via convex duality.

Core pipeline: build an event-tree market, pick a utility function, then
either maximize expected utility over trading strategies directly
(primal_optimize) or minimize the conjugate functional over the martingale
polytope (dual_optimize) and recover the optimal claim from the dual
solution.  The orlicz module measures loss bounds in the gauge norms the
duality needs; singular_probe holds semi-analytic unbounded scenarios with
finite truncations.
"""
from .errors import (
    ArbitrageError,
    CalibrationError,
    DomainBoundError,
    InputError,
    NotDifferentiableError,
    StrictConcavityError,
    UnboundedObjectiveError,
    UnsupportedAsymptoticsError,
    UtilmaxError,
)
from .utility import (
    CustomUtility,
    ExponentialUtility,
    LinearUtility,
    ShiftedLogUtility,
    ShiftedPowerUtility,
    UtilityFunction,
    check_inada,
    growth_scan,
    utility_from_params,
)
from .orlicz import (
    FiniteRV,
    TailFamily,
    YoungFunction,
    classify_loss_bound,
    luxemburg_norm,
    norm_equivalence_bounds,
    orlicz_dual_norm,
    young_conjugate,
    young_loss,
)
from .market import (
    EventTree,
    MartingalePolytope,
    arbitrage_certificate,
    binomial_tree,
    equality_of_sups_check,
    iid_product_tree,
    loss_bound,
    martingale_polytope,
    one_period_tree,
    random_one_period,
    supermartingale_check,
    trinomial_tree,
)
from .dual import (
    DualSolution,
    dual_objective,
    dual_optimize,
    k_phi_membership,
    lambda_star,
    variational_residual,
)
from .primal import (
    DualityReport,
    PrimalSolution,
    loss_bound_monotonicity,
    primal_optimize,
    recover_claim,
    replication_check,
    shifted_domain_checks,
    verify_duality,
)
from .singular_probe import (
    CompoundPoissonSpec,
    DiscreteZSpec,
    MatrixModelSpec,
    TruncationStudy,
    ex35_solve,
    ex36_g,
    ex36_gprime,
    ex36_singular_mass,
    ex37_calibrate,
    ex38_psi,
    ex38_series,
    truncation_study,
)

__version__ = "0.1.0"
