"""Three-stage dynamic capacitated vehicle routing.

Cluster pending customers to vehicles, construct routes per cluster, improve
them under a wall-clock budget, and replan on customer-arrival events.
"""
from .model import (
    COST_MISMATCH_REL_TOL,
    Customer,
    DistanceMatrix,
    Event,
    FleetSpec,
    Infeasible,
    InputError,
    Instance,
    Plan,
    Point,
    Route,
    UnknownCustomerId,
    ValidationReport,
    Violation,
    build_distance_matrix,
    euclidean_distance,
    make_plan,
    plan_cost,
    route_cost,
    validate_plan,
)
from .clustering import (
    CLUSTER_METHODS,
    ClusteringConfig,
    ClusterSet,
    DegenerateComponent,
    GlobalInfeasible,
    InfeasibleAssignment,
    RepairStalled,
    TooFewPoints,
    assign_clusters_to_vehicles,
    birch_cluster,
    cluster_customers,
    gmm_cluster,
    kmeans_cluster,
    repair_capacity,
)
from .construction import (
    CONSTRUCTION_METHODS,
    ConstructionConfig,
    ConstructionProblem,
    InfeasibleConstruction,
    construct_plan,
    global_cheapest_arc_construct,
    path_cheapest_arc_construct,
    savings_construct,
)
from .improvement import (
    IMPROVEMENT_METHODS,
    ImprovementConfig,
    Neighborhoods,
    improve_plan,
)
from .dynamics import (
    PipelineConfig,
    SimulationResult,
    SolveResult,
    simulate,
    solve,
)
from .instances import (
    IoError,
    ParseError,
    SchemaViolation,
    generate_case2_analog,
    generate_instance,
    instance_from_json,
    instance_to_json,
    load_case1,
    load_instance,
    save_instance,
)
from .harness import (
    CSV_HEADER,
    MAX_EXPECTED_STD,
    Aggregate,
    ExperimentMatrix,
    ReportRow,
    ReportTable,
    emit_csv,
    emit_svg,
    format_aggregates,
    format_csv,
    format_svg,
    improvement_percent,
    parse_csv,
    run_experiment_matrix,
)

__version__ = "0.1.0"
