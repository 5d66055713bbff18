import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oevla.codec import (
    CodecConfig,
    CodecError,
    DEFAULT_CONFIG,
    IDENTITY_STATS,
    NonActionTokenError,
    NormStats,
    TruncatedChunkError,
    bin_to_token,
    config_hash,
    decode_chunk,
    decode_dim,
    denormalize,
    encode_chunk,
    encode_dim,
    fit_stats,
    load_stats,
    normalize,
    save_stats,
    token_to_bin,
)


def test_default_config_values():
    assert DEFAULT_CONFIG.n_bins == 256
    assert DEFAULT_CONFIG.vocab_size == 152064
    assert DEFAULT_CONFIG.chunk_len == 5
    assert DEFAULT_CONFIG.action_dim == 7
    assert DEFAULT_CONFIG.token_lo == 152064 - 256
    assert DEFAULT_CONFIG.tokens_per_chunk == 35


def test_config_hash_stable_and_sensitive():
    assert config_hash(DEFAULT_CONFIG) == config_hash(CodecConfig())
    other = CodecConfig(n_bins=128)
    assert config_hash(other) != config_hash(DEFAULT_CONFIG)


def test_encode_dim_known_values():
    # floor((x + 1) / 2 * 256) clamped into [0, 255]
    assert encode_dim(-1.0) == 0
    assert encode_dim(1.0) == 255  # top edge clamps into the last bin
    assert encode_dim(0.0) == 128
    assert encode_dim(-0.5) == 64
    assert encode_dim(0.999999) == 255


def test_decode_dim_known_values():
    # bin centers: -1 + 2 * (b + 0.5) / 256
    assert decode_dim(0) == pytest.approx(-0.99609375, abs=0)
    assert decode_dim(128) == pytest.approx(0.00390625, abs=0)
    assert decode_dim(255) == pytest.approx(0.99609375, abs=0)


def test_bin_centers_are_fixed_points():
    for b in range(256):
        center = decode_dim(b)
        assert encode_dim(center) == b


def test_grid_round_trip_error_bound():
    xs = np.linspace(-1.0, 1.0, 10_000)
    for x in xs:
        err = abs(decode_dim(encode_dim(float(x))) - x)
        assert err <= 1.0 / 256


def test_token_mapping_bijective_in_range():
    lo = DEFAULT_CONFIG.token_lo
    seen = set()
    for b in range(256):
        tok = bin_to_token(b)
        assert lo <= tok < DEFAULT_CONFIG.vocab_size
        assert token_to_bin(tok) == b
        seen.add(tok)
    assert len(seen) == 256


def test_non_action_token_raises():
    with pytest.raises(NonActionTokenError):
        token_to_bin(DEFAULT_CONFIG.token_lo - 1)
    with pytest.raises(NonActionTokenError):
        token_to_bin(DEFAULT_CONFIG.vocab_size)
    with pytest.raises(NonActionTokenError):
        decode_chunk([0] * 35)


def test_truncated_chunk_raises():
    good = encode_chunk(np.zeros((5, 7)))
    with pytest.raises(TruncatedChunkError):
        decode_chunk(list(good)[:34])
    with pytest.raises(TruncatedChunkError):
        decode_chunk(list(good) + [good[0]])


def test_chunk_order_is_timestep_major():
    chunk = np.zeros((5, 7))
    chunk[2, 3] = 0.5  # timestep 2, dim 3
    tokens = encode_chunk(chunk)
    flat_index = 2 * 7 + 3
    base = encode_chunk(np.zeros((5, 7)))
    diffs = [i for i, (a, b) in enumerate(zip(tokens, base)) if a != b]
    assert diffs == [flat_index]


def test_chunk_round_trip_gripper_snaps():
    rng = np.random.default_rng(3)
    chunk = np.clip(rng.uniform(-1, 1, size=(5, 7)), -1, 1)
    chunk[:, 6] = np.where(chunk[:, 6] <= 0, -1.0, 1.0)
    back = decode_chunk(list(encode_chunk(chunk)))
    assert np.all(np.abs(back[:, :6] - chunk[:, :6]) <= 1.0 / 256)
    assert np.array_equal(back[:, 6], chunk[:, 6])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=35, max_size=35))
def test_round_trip_error_bound_property(flat):
    chunk = np.asarray(flat).reshape(5, 7)
    chunk[:, 6] = np.where(chunk[:, 6] <= 0, -1.0, 1.0)
    back = decode_chunk(list(encode_chunk(chunk)))
    # the epsilon covers float rounding for inputs sitting exactly on a
    # bin boundary, where (x+1)/2 can round across it
    assert np.all(np.abs(back - chunk) <= 1.0 / 256 + 1e-12)


def test_fit_stats_two_actions_min_max():
    actions = np.array(
        [
            [0.1, -0.3, 0.0, 0.2, -0.5, 0.4, 1.0],
            [0.7, -0.1, 0.2, 0.6, -0.2, 0.9, -1.0],
        ]
    )
    stats = fit_stats(actions)
    assert stats.q_low[:6] == pytest.approx(actions.min(axis=0)[:6])
    assert stats.q_high[:6] == pytest.approx(actions.max(axis=0)[:6])
    assert stats.n_actions == 2


def test_fit_stats_constant_dim_widens():
    actions = np.zeros((10, 7))
    actions[:, 0] = np.linspace(-2, 2, 10)
    stats = fit_stats(actions)
    # dim 3 is constant zero: widened so it still normalizes cleanly
    assert stats.q_low[3] == -1.0 and stats.q_high[3] == 1.0
    norm = normalize(np.zeros(7), stats)
    assert norm[3] == 0.0
    assert denormalize(norm, stats)[3] == 0.0


def test_fit_stats_rejects_empty():
    with pytest.raises(CodecError):
        fit_stats(np.zeros((0, 7)))


def test_normalize_clamps_and_gripper_sign():
    stats = NormStats((-1.0,) * 7, (1.0,) * 7)
    raw = np.array([2.0, -2.0, 0.0, 0.5, -0.5, 1.0, 0.0])
    norm = normalize(raw, stats)
    assert norm[0] == 1.0 and norm[1] == -1.0
    assert norm[6] == -1.0  # raw <= 0 goes to closed
    raw[6] = 0.0001
    assert normalize(raw, stats)[6] == 1.0


def test_normalize_denormalize_round_trip_inside_range():
    rng = np.random.default_rng(11)
    actions = rng.normal(size=(50, 7))
    stats = fit_stats(actions)
    for a in actions:
        lo = np.asarray(stats.q_low)[:6]
        hi = np.asarray(stats.q_high)[:6]
        inside = np.all((a[:6] >= lo) & (a[:6] <= hi))
        if not inside:
            continue
        back = denormalize(normalize(a, stats), stats)
        assert np.allclose(back[:6], a[:6], atol=1e-12)
        assert back[6] == (-1.0 if a[6] <= 0 else 1.0)


def test_stats_json_round_trip(tmp_path):
    stats = fit_stats(np.random.default_rng(0).normal(size=(20, 7)))
    path = str(tmp_path / "stats.json")
    save_stats(stats, path)
    loaded = load_stats(path)
    assert loaded.q_low == stats.q_low
    assert loaded.q_high == stats.q_high
    assert loaded.n_actions == stats.n_actions


def test_error_messages_name_the_failure():
    try:
        decode_chunk([0] * 35)
    except NonActionTokenError as e:
        assert "non-action token" in str(e)
    try:
        decode_chunk([DEFAULT_CONFIG.token_lo] * 3)
    except TruncatedChunkError as e:
        assert "truncated chunk" in str(e)
