"""Iteration-free neural surrogates for linearly constrained optimization.

The pipeline guarantees hard feasibility by construction: equalities are
eliminated by variable partitioning, a gauge map carries the network's
unit-ball output onto the reduced feasible polytope, and the dependent
variables are reconstructed from the equalities.
"""

from .baselines import (
    BaselineConfig,
    QpProblem,
    dc3_correct,
    project_onto_polytope,
    reference_optimum,
    solve_qp,
)
from .errors import (
    CheckpointError,
    EmptyInteriorError,
    EnumerationCapError,
    GaugeoptError,
    InfeasibleError,
    NotInteriorError,
    NumericalError,
    PredictionMissError,
    RankDeficientError,
    TrainingDivergedError,
    UnboundedError,
)
from .gauge import (
    GaugeEvaluation,
    ShiftedPolytope,
    UNIT_BALL,
    build_shifted,
    gauge_map,
    gauge_map_inverse,
    gauge_map_jacobian,
    minkowski_gauge,
)
from .interior import (
    BfsIndexSets,
    InteriorResult,
    build_bfs_structures,
    find_interior_artificial,
    find_interior_bfs_average,
    find_interior_two_phase,
    verify_interior,
)
from .neural import (
    Checkpoint,
    MlpModel,
    TrainConfig,
    backward,
    forward,
    load_checkpoint,
    pipeline_forward,
    pipeline_model,
    save_checkpoint,
    train,
)
from .problems import (
    LinConProblem,
    MetricsReport,
    ObjectiveHandle,
    ValidationReport,
    builtin_objective,
    feasibility_gap,
    load_problem,
    optimality_gap,
    problem_hash,
    quadratic_objective,
    save_problem,
    validate,
)
from .reduction import (
    ReducedProblem,
    VariablePartition,
    lift_solution,
    partition_variables,
    reconstruct_dependent,
    reduce_problem,
    reduced_objective,
)
from .simplex import LpResult, StandardFormLP, free_lp, solve_lp
from .dcopf import (
    DcopfDataset,
    DcopfSystem,
    generate_system,
    run_benchmark,
    sample_dataset,
    to_lincon,
)

__version__ = "0.1.0"
