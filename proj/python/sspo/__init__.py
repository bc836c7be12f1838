"""Group-based off-policy surrogate objectives on toy autoregressive policies."""

from ._sspo import (
    GateConfig,
    GradCheckReport,
    InstanceSpec,
    ObjectiveKind,
    PolicyParams,
    TaskSpec,
    Trajectory,
    TrajectoryGroup,
    clip_gate,
    entropy,
    evaluate,
    gates_csv,
    geo_gate_log,
    grad_log_prob,
    intra_sequence_dispersion,
    log_prob,
    make_prompt,
    normalize_advantages,
    reward,
    run_gradcheck,
    sample_response,
    sequence_ratio,
    soft_gate,
    soft_gate_derivative,
    sspo_gate,
    sspo_weight,
    state_index,
    temperature,
    token_ratios,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
