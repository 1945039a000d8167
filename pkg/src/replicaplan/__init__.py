"""Availability-aware continuous replica placement over a server network."""

from .costs import (
    AVAILABILITY_TOL,
    SEMANTICS,
    BenefitBreakdown,
    CostReport,
    availability_constraint_ok,
    availability_per_object,
    benefit,
    delta_cost_of_add,
    implementation_cost,
    object_access_cost,
    object_availability,
    total_access_cost,
)
from .errors import (
    CapacityError,
    ConnectivityError,
    ConstraintError,
    ParameterError,
    PreconditionError,
    ReplicaPlanError,
    StructuralError,
    TraceError,
)
from .heuristics import (
    ALGORITHMS,
    SCOPES,
    Add,
    Evict,
    FlipCandidate,
    PlacementResult,
    SolverConfig,
    StepStat,
    action_from_dict,
    action_to_dict,
    enumerate_positive_flips,
    replay_schedule,
    solve,
    solve_aagg,
    solve_aagro,
    solve_baseline,
)
from .model import (
    ObjectCatalog,
    PlacementState,
    Scenario,
    ServerCatalog,
    Violation,
    build_nearest_index,
    load_placement,
    nearest_replicator,
    primary_only_placement,
    save_placement,
    validate_placement,
)
from .topology import (
    CostMatrix,
    Graph,
    all_pairs_shortest_paths,
    assign_link_costs,
    generate_ba_topology,
    load_topology,
    save_topology,
)
from .workload import (
    FailureTrace,
    TraceRecord,
    TrafficModel,
    estimate_availability,
    generate_object_catalog,
    generate_traffic,
    load_failure_trace,
    parse_availability_spec,
    synthetic_availability,
    trace_availability_for_servers,
)

__version__ = "0.1.0"
