from .backbone import (
    CONTEXT_LEN,
    PRESETS,
    VOCAB_SIZE,
    Encoder,
    HiddenStates,
    ModelConfig,
    RMSNorm,
    SwiGLU,
    apply_rope,
    rope_angles,
)
from .heads import (
    SINKHORN_ITERS,
    SINKHORN_TAU,
    BijectiveHead,
    CipherModel,
    LinearHead,
    PooledSymbols,
    build_model,
    gumbel_sinkhorn,
    hard_assignment,
    assignment_permutation,
    log_sinkhorn,
    sample_gumbel,
    scatter_to_positions,
    sinkhorn,
    symbol_pool,
)

__all__ = [
    "CONTEXT_LEN", "PRESETS", "VOCAB_SIZE", "Encoder", "HiddenStates",
    "ModelConfig", "RMSNorm", "SwiGLU", "apply_rope", "rope_angles",
    "SINKHORN_ITERS", "SINKHORN_TAU", "BijectiveHead", "CipherModel",
    "LinearHead", "PooledSymbols", "build_model", "gumbel_sinkhorn",
    "hard_assignment", "assignment_permutation", "log_sinkhorn",
    "sample_gumbel", "scatter_to_positions", "sinkhorn", "symbol_pool",
]
