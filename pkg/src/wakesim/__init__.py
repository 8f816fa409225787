"""wakesim: simulator and analysis toolkit for multi-channel radio wake-up."""

from wakesim.analysis import (
    BudgetExceededError,
    IntervalClass,
    IsolatedPosition,
    QuerySequence,
    StageCensus,
    UpperBounds,
    VerifyResult,
    check_selective,
    classify_interval,
    deterministic_lower_bound,
    deterministic_upper_bounds,
    find_blocking_activation,
    psi,
    scan_isolated,
    stage_census,
    verify_waking_small,
)
from wakesim.harness import (
    ExperimentReport,
    ExperimentSpec,
    GenerateVerifyResult,
    Overlay,
    PatternSpec,
    SweepResult,
    generate_and_verify,
    jamming_sweep,
    run_experiment,
)
from wakesim.kernels import BACKEND as KERNEL_BACKEND
from wakesim.model import (
    ActivationPattern,
    NetworkConfig,
    RoundOutcome,
    TransmissionDecision,
    draw_jammed_channels,
    evaluate_round,
    is_wakeup,
)
from wakesim.protocols import (
    ScreeningConfig,
    SimulationResult,
    run_channel_screening,
    run_wakeup_array,
    screening_round_bound,
)
from wakesim.schedules import (
    ArrayFormatError,
    OutOfScheduleError,
    ScheduleKind,
    SectionSchedule,
    TransmissionArray,
    load_array,
    modified_bit_probability,
    phi,
    regular_bit_probability,
    sample_array,
    save_array,
    stage_of_position,
)

__version__ = "0.1.0"
