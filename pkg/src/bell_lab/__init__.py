"""bell-lab: Bell nonlocality simulation and analysis toolkit."""

from .correlations import (
    Behavior,
    BellLabError,
    EstimationError,
    InvalidBehaviorError,
    JointDistribution,
    Scenario,
    StructureError,
    TallyTable,
    estimate_behavior,
    mutual_information,
    no_signaling_check,
    postselect,
    validate_behavior,
)
from .kernels import BACKEND
from .lhv import (
    BellFunctional,
    DeskScaleExceeded,
    DeterministicStrategy,
    LocalModel,
    MembershipSolverError,
    bell_value,
    enumerate_deterministic,
    is_local,
    local_max,
)
from .nonlocal_box import PrBox, SingleUseError, clone_signaling_demo, pr_behavior
from .quantum import QuantumSetup, StateVector, born_behavior, ghz_state, max_entangled_state, tsirelson_setup
from .relativity import (
    ConfigurationError,
    Frame,
    ScanGeometry,
    SpacetimeEvent,
    VCausalModel,
    before_before,
    boost,
    delayed_outcome_viable,
    influence_reaches,
    interval,
    scan_speed_bound,
)
from .harness import (
    DetectionModel,
    ExperimentConfig,
    PrBoxSource,
    RunError,
    VCausalGhzConfig,
    detection_loophole_run,
    ghz_vcausal_run,
    run,
)

__version__ = "0.1.0"
