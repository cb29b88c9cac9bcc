"""Resilient multi-dimensional consensus over robust graphs.

A library and CLI for simulating agreement among networked agents when some
agents misbehave arbitrarily.  Benign agents sort received values along a
rotating coordinate, compute two "middle points" inside the intersection of
reduced-subset convex hulls via linear programming, and average toward them;
robust-enough topologies then guarantee agreement inside the convex hull of
the benign initial states.
"""

from .adversary import (
    AttackModel,
    HullEscape,
    RandomBounded,
    Scripted,
    Stubborn,
    adversary_value,
    validate_fault_set,
)
from .geometry import (
    enumerate_reduced_subsets,
    hull_contains,
    psi_contains,
    psi_point_oracle,
)
from .graph import (
    Graph,
    RobustnessReport,
    check_min_degree,
    complete_graph,
    cycle_graph,
    grow_robust_graph,
    grow_to,
    is_r_robust,
    is_rs_robust,
    make_graph,
    neighbors,
    read_graph,
    write_graph,
)
from .kernel import (
    MiddlePointProblem,
    RoundInputs,
    active_dimension,
    assemble_lemma1_system,
    benign_round,
    middle_point,
    select_extreme_subsets,
    update_state,
)
from .lp import LinearProgram, LpResult, solve_feasibility, solve_max_min_slack
from .sim import MetricsRecord, SimConfig, Trace, rate_bound_check, run, run_grouped, step
from .wmsr import wmsr_scalar_round, wmsr_vector_run

__version__ = "0.1.0"
