"""Action codec: normalize, discretize and tokenize continuous actions.

Continuous 7-dim actions are mapped into [-1, 1] per dimension using 1st/99th
percentile statistics, discretized into 256 uniform bins, and written onto the
last 256 ids of the language vocabulary (the least-used tail).  A policy emits
5-step chunks, flattened timestep-major into 35 tokens.

NOTE =>> decode(encode(x)) returns the bin center, so the round-trip error is
at most half a bin width (1/256) for x in [-1, 1].
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .types import ACTION_DIM, CHUNK_LEN


class CodecError(ValueError):
    pass


class NonActionTokenError(CodecError):
    """Raised when a token id falls outside the reserved action-token range."""


class TruncatedChunkError(CodecError):
    """Raised when a token sequence does not contain a whole number of chunks."""


@dataclass(frozen=True)
class CodecConfig:
    """Layout of the action token range inside the text vocabulary.

    Attributes:
        n_bins: number of discretization bins per action dimension.
        vocab_size: size of the underlying text vocabulary (V).  The last
            n_bins ids [V - n_bins, V) are reserved for actions.
        chunk_len: actions per chunk.
        action_dim: dimensions per action.
    """

    n_bins: int = 256
    vocab_size: int = 152064
    chunk_len: int = CHUNK_LEN
    action_dim: int = ACTION_DIM

    def __post_init__(self):
        if self.n_bins < 2 or self.vocab_size <= self.n_bins:
            raise CodecError("invalid codec config")

    @property
    def token_lo(self) -> int:
        return self.vocab_size - self.n_bins

    @property
    def tokens_per_chunk(self) -> int:
        return self.chunk_len * self.action_dim

    def to_json(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "vocab_size": self.vocab_size,
            "chunk_len": self.chunk_len,
            "action_dim": self.action_dim,
        }

    @staticmethod
    def from_json(obj: dict) -> "CodecConfig":
        return CodecConfig(**obj)


DEFAULT_CONFIG = CodecConfig()


def config_hash(config: CodecConfig = DEFAULT_CONFIG) -> str:
    """Stable hash of the codec layout, embedded in manifests and handshakes."""
    blob = json.dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NormStats:
    """Per-dimension normalization bounds (1st and 99th percentiles).

    Dim 6 (gripper) is carried for bookkeeping but never rescaled.
    """

    q_low: tuple[float, ...]
    q_high: tuple[float, ...]
    n_actions: int = 0

    def __post_init__(self):
        if len(self.q_low) != ACTION_DIM or len(self.q_high) != ACTION_DIM:
            raise CodecError(f"stats must cover {ACTION_DIM} dims")
        bad = [d for d in range(6) if not self.q_low[d] < self.q_high[d]]
        if bad:
            raise CodecError(f"degenerate stats (q_low >= q_high) on dims {bad}")

    def to_json(self) -> dict:
        return {
            "q_low": list(self.q_low),
            "q_high": list(self.q_high),
            "n_actions": self.n_actions,
            "percentiles": [1, 99],
        }

    @staticmethod
    def from_json(obj: dict) -> "NormStats":
        return NormStats(tuple(obj["q_low"]), tuple(obj["q_high"]), obj.get("n_actions", 0))


IDENTITY_STATS = NormStats(q_low=(-1.0,) * ACTION_DIM, q_high=(1.0,) * ACTION_DIM)


def fit_stats(actions: np.ndarray) -> NormStats:
    """Fit normalization stats from an (N, 7) array of raw actions.

    Uses order-statistic percentiles (lower/higher) so tiny datasets behave
    predictably: with two actions the bounds are exactly min and max.  A
    dimension that is constant across the corpus widens to +-1 around its
    value, so it normalizes to 0 and round-trips to the constant.
    """
    arr = np.asarray(actions, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != ACTION_DIM:
        raise CodecError(f"expected (N, {ACTION_DIM}) actions, got {arr.shape}")
    if arr.shape[0] == 0:
        raise CodecError("cannot fit stats on an empty action set")
    q_low = np.percentile(arr, 1, axis=0, method="lower")
    q_high = np.percentile(arr, 99, axis=0, method="higher")
    flat = q_low[:6] == q_high[:6]
    q_low[:6] = np.where(flat, q_low[:6] - 1.0, q_low[:6])
    q_high[:6] = np.where(flat, q_high[:6] + 1.0, q_high[:6])
    return NormStats(tuple(q_low.tolist()), tuple(q_high.tolist()), n_actions=arr.shape[0])


def normalize(action: np.ndarray, stats: NormStats) -> np.ndarray:
    """Map a raw action into [-1, 1]: affine on dims 0-5, sign on dim 6.

    Values outside the percentile range clamp to the interval edges; the
    gripper maps to -1 when raw <= 0 and +1 otherwise.
    """
    arr = np.asarray(action, dtype=np.float64)
    if arr.shape != (ACTION_DIM,):
        raise CodecError(f"expected ({ACTION_DIM},) action, got {arr.shape}")
    lo = np.asarray(stats.q_low)
    hi = np.asarray(stats.q_high)
    out = arr.copy()
    out[:6] = 2.0 * (arr[:6] - lo[:6]) / (hi[:6] - lo[:6]) - 1.0
    out[:6] = np.clip(out[:6], -1.0, 1.0)
    out[6] = -1.0 if arr[6] <= 0 else 1.0
    return out


def denormalize(action: np.ndarray, stats: NormStats) -> np.ndarray:
    """Inverse of normalize on dims 0-5; dim 6 snaps to -1/+1 by sign."""
    arr = np.asarray(action, dtype=np.float64)
    if arr.shape != (ACTION_DIM,):
        raise CodecError(f"expected ({ACTION_DIM},) action, got {arr.shape}")
    lo = np.asarray(stats.q_low)
    hi = np.asarray(stats.q_high)
    out = arr.copy()
    out[:6] = (arr[:6] + 1.0) / 2.0 * (hi[:6] - lo[:6]) + lo[:6]
    out[6] = -1.0 if arr[6] < 0 else 1.0
    return out


def encode_dim(x: float, config: CodecConfig = DEFAULT_CONFIG) -> int:
    """Discretize one normalized value: bin = clamp(floor((x+1)/2 * n_bins))."""
    if not np.isfinite(x):
        raise CodecError(f"cannot encode non-finite value {x}")
    b = int(np.floor((x + 1.0) / 2.0 * config.n_bins))
    return min(max(b, 0), config.n_bins - 1)


def decode_dim(b: int, config: CodecConfig = DEFAULT_CONFIG) -> float:
    """Bin center of bin b: -1 + 2*(b + 0.5)/n_bins."""
    if not 0 <= b < config.n_bins:
        raise CodecError(f"bin {b} outside [0, {config.n_bins})")
    return -1.0 + 2.0 * (b + 0.5) / config.n_bins


def bin_to_token(b: int, config: CodecConfig = DEFAULT_CONFIG) -> int:
    if not 0 <= b < config.n_bins:
        raise CodecError(f"bin {b} outside [0, {config.n_bins})")
    return config.token_lo + b


def token_to_bin(token: int, config: CodecConfig = DEFAULT_CONFIG) -> int:
    if not config.token_lo <= token < config.vocab_size:
        raise NonActionTokenError(
            f"non-action token {token} (action range is [{config.token_lo}, {config.vocab_size}))"
        )
    return token - config.token_lo


def encode_chunk(chunk: np.ndarray, config: CodecConfig = DEFAULT_CONFIG) -> list[int]:
    """Encode a (chunk_len, action_dim) normalized chunk into token ids.

    Flattening is timestep-major: all 7 dims of step 0, then step 1, ...
    """
    arr = np.asarray(chunk, dtype=np.float64)
    if arr.shape != (config.chunk_len, config.action_dim):
        raise CodecError(
            f"expected ({config.chunk_len}, {config.action_dim}) chunk, got {arr.shape}"
        )
    return [bin_to_token(encode_dim(x, config), config) for x in arr.reshape(-1)]


def decode_chunk(tokens, config: CodecConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Decode 35 token ids back into a (chunk_len, action_dim) chunk.

    The gripper dimension snaps to exactly -1/+1 by the sign of its bin
    center.  Raises TruncatedChunkError on a wrong token count and
    NonActionTokenError on ids outside the reserved range.
    """
    tokens = list(tokens)
    want = config.tokens_per_chunk
    if len(tokens) != want:
        raise TruncatedChunkError(f"truncated chunk: got {len(tokens)} tokens, want {want}")
    values = [decode_dim(token_to_bin(t, config), config) for t in tokens]
    chunk = np.asarray(values, dtype=np.float64).reshape(config.chunk_len, config.action_dim)
    chunk[:, 6] = np.where(chunk[:, 6] < 0, -1.0, 1.0)
    return chunk


def save_stats(stats: NormStats, path: str) -> None:
    import os

    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(stats.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def load_stats(path: str) -> NormStats:
    with open(path) as f:
        return NormStats.from_json(json.load(f))
