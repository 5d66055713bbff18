"""Tabletop instruction-following stack: simulator, data forge, benchmark,
action codec, evaluation harness, and a wire protocol for remote policies."""

from .codec import (
    CodecConfig,
    CodecError,
    DEFAULT_CONFIG,
    NonActionTokenError,
    NormStats,
    TruncatedChunkError,
    config_hash,
    decode_chunk,
    denormalize,
    encode_chunk,
    fit_stats,
    normalize,
)
from .harness import MetricsReport, RolloutLog, combine_reports, compute_metrics, run_suite
from .images import decode_png, encode_png, image_id
from .policy import (
    BasePolicy,
    CodecLoopPolicy,
    OraclePolicy,
    ParsingOraclePolicy,
    PolicyRequest,
    PolicyResponse,
    RandomPolicy,
    derive_policy_seed,
)
from .prompt import assemble_prompt, hash_tokenizer
from .types import (
    Episode,
    Frame,
    Instruction,
    InstructionForm,
    TrainingSample,
    ValidationError,
)
from .world import WorldState, builtin_profiles, get_profile, reset, step

__version__ = "0.1.0"

__all__ = [
    "BasePolicy",
    "CodecConfig",
    "CodecError",
    "CodecLoopPolicy",
    "DEFAULT_CONFIG",
    "Episode",
    "Frame",
    "Instruction",
    "InstructionForm",
    "MetricsReport",
    "NonActionTokenError",
    "NormStats",
    "OraclePolicy",
    "ParsingOraclePolicy",
    "PolicyRequest",
    "PolicyResponse",
    "RandomPolicy",
    "RolloutLog",
    "TrainingSample",
    "TruncatedChunkError",
    "ValidationError",
    "WorldState",
    "assemble_prompt",
    "builtin_profiles",
    "combine_reports",
    "compute_metrics",
    "config_hash",
    "decode_chunk",
    "decode_png",
    "denormalize",
    "derive_policy_seed",
    "encode_chunk",
    "encode_png",
    "fit_stats",
    "get_profile",
    "hash_tokenizer",
    "image_id",
    "normalize",
    "reset",
    "run_suite",
    "step",
    "__version__",
]
