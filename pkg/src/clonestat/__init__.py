"""Maximum likelihood for dynamic-system models via data cloning.

Exposes the main library surface: built-in models, the cloned-posterior
sampler, the grid runner with combined estimators, the two-stage ANOVA
estimability test, transformed-parameter testing, and discrete-parameter
profile inference.
"""

__version__ = "0.1.0"

from .cloning import (  # noqa: F401
    CellKey,
    CellResult,
    CombinedEstimate,
    McmcConfig,
    combined_estimate,
    load_grid,
    run_cell,
    run_grid,
    save_grid,
)
from .data import Dataset  # noqa: F401
from .estimability import (  # noqa: F401
    AnovaResult,
    EstimabilityReport,
    estimability_report,
    oneway_anova,
    transform_cells,
)
from .inference import (  # noqa: F401
    Chain,
    ClonedTarget,
    GammaPrior,
    NormalPrior,
    PriorSet,
    cloned_log_posterior,
    diagnostics,
    log_obs_likelihood,
    log_prior,
    run_chain,
    summarize,
)
from .integrate import (  # noqa: F401
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    adaptive_integrate,
    rk4_integrate,
    solve_scalar_root,
)
from .models import (  # noqa: F401
    ExperimentContext,
    ModelSpec,
    available_models,
    build_model,
    simulate,
)
from .profiling import (  # noqa: F401
    ConditionalFit,
    ProfileResult,
    conditional_dc,
    dclr_statistic,
    joint_region_sample,
    profile_interval_set,
)
