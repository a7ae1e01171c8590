"""Budget-constrained beacon placement for range-aided localization.

Selects K beacon sites from a finite candidate set by maximizing a
D-optimal (log-determinant) information objective, with a greedy solver
carrying the (1 - 1/e) submodular suboptimality guarantee, benchmark
selectors, a CMA-ES alternative, and a MAP localization harness that
scores arrangements by RMSE on simulated range measurements.
"""

from .backend import BACKEND, USING_NUMBA
from .cmaes import EsConfig, EsState, cmaes_select, snap_to_candidates
from .harness import (
    ExperimentConfig,
    SweepSetting,
    SyntheticSpec,
    certification_report,
    default_sweep,
    export,
    generate_synthetic_scenario,
    run_experiment,
    run_trial,
    summarize,
)
from .information import (
    EdgeContribution,
    InfoBlock,
    InfoDesign,
    InfoState,
    apply_selection,
    edge_contribution,
    evaluate_subset,
    init_state,
    marginal_gain,
    normalized_objective,
    objective,
)
from .localization import (
    LocalizationResult,
    SolveOptions,
    map_objective,
    map_solve,
    mle_solve,
    rmse,
)
from .scenario import (
    BeaconCandidate,
    MeasurementGraph,
    MeasurementSet,
    NoiseModel,
    PositionSpec,
    Scenario,
    ScenarioError,
    build_graph,
    load_scenario,
    sample_ground_truth,
    sample_measurements,
    save_scenario,
)
from .selection import (
    ALGORITHMS,
    Budget,
    SelectionResult,
    brute_force_select,
    certify_bound,
    coverage_greedy_select,
    greedy_select,
    measurement_greedy_select,
    random_select,
)

__version__ = "0.1.0"
