"""Close-to-deadline bandwidth scheduling for deadline-constrained transfers."""

from .kernel import (
    FlowProblem,
    Infeasible,
    LatestFirstProblem,
    k_shortest_paths,
    solve_earliest_first,
    solve_flow,
    solve_latest_first,
    variable_count,
)
from .model import (
    EPS,
    AllocationProfile,
    HorizonError,
    Link,
    LinkState,
    Request,
    TimeSlot,
    Topology,
    window_residual,
)

__version__ = "0.1.0"
