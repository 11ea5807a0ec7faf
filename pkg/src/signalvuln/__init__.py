"""Traffic-signal scheduling and exact sensor-falsification analysis.

The package solves two tightly coupled problems.  First, given per-movement
flow readings, it computes the fixed-time signal schedule that minimizes
total green time while serving every movement (one small LP per
intersection).  Second, it quantifies how fragile that optimization is when
an attacker falsifies a bounded number of sensor readings: three bilevel
attack problems are reduced to mixed-integer programs via the inner LP's
optimality conditions and solved exactly with a built-in branch-and-bound
over a built-in simplex.  Metrics, budget sweeps, a fluid queue simulator,
and a CLI sit on top.
"""

from .analysis import (
    FrequencyRow,
    SimTrace,
    SweepRow,
    VulnerabilityReport,
    budget_sweep,
    critical_sensors,
    emit_report,
    lane_vulnerability,
    network_vulnerability,
    queue_slopes,
    simulate_queues,
    vulnerability_report,
)
from .attacks import (
    AttackConstructionError,
    AttackInstance,
    AttackKind,
    AttackResult,
    AttackSpecError,
    AttackTarget,
    attack_admissibility,
    brute_force_oracle,
    build_kkt_inner,
    build_risk_averse,
    build_worst_lane,
    build_worst_network,
    load_attack_spec,
    parse_attack_spec,
    solve_attack,
    solve_kkt_response,
    validate_attack,
)
from .estimators import (
    FixedTimeScheduler,
    RiskAverseAttack,
    WorstLaneAttack,
    WorstNetworkAttack,
)
from .fixtures import (
    GridGenerationError,
    build_example_network,
    build_grid_network,
    load_example_network,
    random_conservative_flows,
)
from .milp import (
    MilpModel,
    MilpSolution,
    MilpStatus,
    ModelBuilder,
    linearize_product,
    solution_violations,
    solve_milp,
)
from .network import (
    ConservationViolation,
    FlowMatrix,
    Intersection,
    Link,
    LinkKind,
    Movement,
    NetworkFormatError,
    NetworkValidationError,
    RoadNetwork,
    Stage,
    check_conservation,
    load_network,
    save_network,
    total_flow,
    validate_network,
)
from .scheduling import (
    FeasibilityReport,
    InfeasibleScheduleError,
    Schedule,
    accumulation_rates,
    cycle_length,
    cycle_lengths_by_intersection,
    is_feasible,
    schedule_csv,
    served_flow,
    service_rates,
    solve_fixed_time,
    unstable_movements,
)
from .simplex import (
    LpModel,
    LpNumericalError,
    LpSolution,
    LpStatus,
    solve_lp,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConstructionError",
    "AttackInstance",
    "AttackKind",
    "AttackResult",
    "AttackSpecError",
    "AttackTarget",
    "ConservationViolation",
    "FeasibilityReport",
    "FixedTimeScheduler",
    "FlowMatrix",
    "FrequencyRow",
    "GridGenerationError",
    "Intersection",
    "InfeasibleScheduleError",
    "Link",
    "LinkKind",
    "LpModel",
    "LpNumericalError",
    "LpSolution",
    "LpStatus",
    "MilpModel",
    "MilpSolution",
    "MilpStatus",
    "ModelBuilder",
    "Movement",
    "NetworkFormatError",
    "NetworkValidationError",
    "RiskAverseAttack",
    "RoadNetwork",
    "Schedule",
    "SimTrace",
    "Stage",
    "SweepRow",
    "VulnerabilityReport",
    "WorstLaneAttack",
    "WorstNetworkAttack",
    "accumulation_rates",
    "attack_admissibility",
    "brute_force_oracle",
    "budget_sweep",
    "build_example_network",
    "build_grid_network",
    "build_kkt_inner",
    "build_risk_averse",
    "build_worst_lane",
    "build_worst_network",
    "check_conservation",
    "critical_sensors",
    "cycle_length",
    "cycle_lengths_by_intersection",
    "emit_report",
    "is_feasible",
    "lane_vulnerability",
    "linearize_product",
    "load_attack_spec",
    "load_example_network",
    "load_network",
    "network_vulnerability",
    "parse_attack_spec",
    "queue_slopes",
    "random_conservative_flows",
    "save_network",
    "schedule_csv",
    "served_flow",
    "service_rates",
    "simulate_queues",
    "solution_violations",
    "solve_attack",
    "solve_fixed_time",
    "solve_kkt_response",
    "solve_lp",
    "solve_milp",
    "total_flow",
    "unstable_movements",
    "validate_attack",
    "validate_network",
    "vulnerability_report",
]
