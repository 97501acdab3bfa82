"""Mixed-variable global sensitivity analysis and sensitivity-aware
multi-objective Bayesian optimization."""

from .space import (
    Dataset,
    MixedDesignSpace,
    MixedEvaluator,
    MixedPoint,
    MixedSample,
    StandardizeTransform,
    standardize,
    validate,
)
from .sampling import UnitSample, initial_doe, sobol_unit, unit_to_mixed
from .lvgp import (
    FitConfig,
    LatentMap,
    LvgpHyperparams,
    LvgpModel,
    correlation,
    fit,
    neg_log_likelihood,
    to_latent,
)
from .gsa import (
    SobolIndices,
    convergence_study,
    estimate_indices,
    metamodel_indices,
    pick_freeze_matrices,
)
from .mobo import (
    BoConfig,
    BoTrace,
    FocusRule,
    FocusSelection,
    ParetoArchive,
    expected_improvement,
    mo_acquisition,
    pareto_filter,
    select_focus,
    sensitivity_aware_bo,
    stage1,
    stage2,
    vanilla_bo,
)
from .benchfns import (
    BlockWorld,
    DiscretizedFunction,
    discretize,
    exhaustive_pareto,
    get_evaluator,
    hartmann6,
    ishigami,
    load_blockworld,
)

__version__ = "0.1.0"
