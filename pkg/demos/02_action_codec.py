"""Round trip action chunks through the discrete token codec.

python3 demos/02_action_codec.py
"""

import numpy as np

from oevla.codec import (
    DEFAULT_CONFIG,
    config_hash,
    decode_chunk,
    denormalize,
    encode_chunk,
    fit_stats,
    normalize,
)

cfg = DEFAULT_CONFIG
print(f"{cfg.n_bins} bins, vocab {cfg.vocab_size}, "
      f"tokens [{cfg.token_lo}, {cfg.vocab_size}), hash {config_hash(cfg)}")

# A chunk is 5 timesteps x 7 dims, already normalized to [-1, 1].
rng = np.random.default_rng(0)
chunk = rng.uniform(-1.0, 1.0, size=(5, 7))
chunk[:, 6] = np.where(chunk[:, 6] < 0, -1.0, 1.0)  # gripper is binary

tokens = encode_chunk(chunk)
print("\nfirst row ", np.round(chunk[0], 3))
print("as tokens ", tokens[:7])

back = decode_chunk(tokens)
err = np.abs(back - chunk).max()
print("decoded   ", np.round(back[0], 3))
print(f"max round-trip error {err:.6f} (bin width is {2 / cfg.n_bins:.6f})")
assert err <= 1 / cfg.n_bins

# The gripper dim snaps to exactly +-1 instead of a bin center.
assert set(np.unique(back[:, 6])) <= {-1.0, 1.0}

# Raw robot actions are not in [-1, 1].  Stats fitted on a demo corpus
# map quantiles 1..99 onto the codec range, then back.
raw = rng.normal(0.0, 0.4, size=(500, 7))
raw[:, 6] = np.where(raw[:, 6] < 0, -1.0, 1.0)
stats = fit_stats(raw)
print("\nq01 ", np.round(stats.q_low, 2))
print("q99 ", np.round(stats.q_high, 2))

one = raw[42:47]
norm = np.array([normalize(row, stats) for row in one])
deq = decode_chunk(encode_chunk(norm))
restored = np.array([denormalize(row, stats) for row in deq])
print("worst dequantization error on raw actions:",
      f"{np.abs(restored[:, :6] - np.clip(one, stats.q_low, stats.q_high)[:, :6]).max():.4f}")
