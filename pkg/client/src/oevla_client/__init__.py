"""Standalone policy client for the oe-vla-rpc/1 evaluation protocol."""

from .png import PngError, decode_png, encode_png
from .policies import (
    EchoOraclePolicy,
    RandomPolicy,
    TokenModelAdapter,
    derive_policy_seed,
)
from .protocol import (
    CODEC_HASH,
    ClientError,
    MissingHintsError,
    PROTOCOL_VERSION,
    SessionStats,
    Step,
    TOKEN_LO,
    TokenRangeError,
    VOCAB_SIZE,
    run_client,
)

__all__ = [
    "CODEC_HASH",
    "ClientError",
    "EchoOraclePolicy",
    "MissingHintsError",
    "PROTOCOL_VERSION",
    "PngError",
    "RandomPolicy",
    "SessionStats",
    "Step",
    "TOKEN_LO",
    "TokenModelAdapter",
    "TokenRangeError",
    "VOCAB_SIZE",
    "decode_png",
    "derive_policy_seed",
    "encode_png",
    "run_client",
]
