import json
import os

import numpy as np
import pytest

from oevla import rpc
from oevla.cli import main, make_policy_factory
from oevla.images import decode_png
from oevla.policy import RandomPolicy
from oevla.types import ValidationError


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full artifact pipeline once; tests inspect the directories."""
    root = tmp_path_factory.mktemp("cli")
    paths = {
        "archive": str(root / "archive"),
        "pool": str(root / "pool"),
        "crops": str(root / "crops"),
        "dataset": str(root / "dataset"),
        "suite": str(root / "suite"),
        "run": str(root / "run"),
    }
    assert main([
        "forge", "demos", "--out", paths["archive"], "--seed", "3",
        "--n", "2", "--profile", "A,B",
    ]) == 0
    assert main([
        "forge", "pool", "--out", paths["pool"], "--seed", "5", "--per-object", "3",
    ]) == 0
    assert main([
        "forge", "crops", "--archive", paths["archive"], "--out", paths["crops"],
        "--ingest", paths["pool"],
    ]) == 0
    assert main([
        "forge", "build", "--archive", paths["archive"], "--crops", paths["crops"],
        "--out", paths["dataset"], "--fraction", "0.5", "--seed", "11",
    ]) == 0
    assert main([
        "bench", "gen", "--out", paths["suite"], "--profile", "D", "--form", "lang",
        "--n", "3", "--seed", "2",
    ]) == 0
    assert main([
        "eval", "run", "--suite", paths["suite"], "--policy", "parsing-oracle",
        "--seed", "0", "--out", paths["run"],
    ]) == 0
    return paths


def test_pipeline_artifacts_exist(pipeline):
    assert os.path.isfile(os.path.join(pipeline["dataset"], "manifest.json"))
    assert os.path.isfile(os.path.join(pipeline["suite"], "suite.json"))
    assert os.path.isfile(os.path.join(pipeline["run"], "logs.jsonl"))
    report = json.load(open(os.path.join(pipeline["run"], "report.json")))
    assert report["len"] == 5.0


def test_eval_run_prints_display(pipeline, capsys, tmp_path):
    out = str(tmp_path / "run2")
    assert main([
        "eval", "run", "--suite", pipeline["suite"], "--policy", "random",
        "--seed", "1", "--out", out,
    ]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["Len"] == "0.00"
    assert doc["SR@1"] == "0.0"


def test_eval_replay_verifies_logs(pipeline, capsys):
    assert main([
        "eval", "replay", "--suite", pipeline["suite"],
        "--logs", os.path.join(pipeline["run"], "logs.jsonl"),
    ]) == 0
    assert "replay ok" in capsys.readouterr().out


def test_eval_replay_fails_on_tampered_logs(pipeline, tmp_path):
    lines = open(os.path.join(pipeline["run"], "logs.jsonl")).read().splitlines()
    doc = json.loads(lines[0])
    doc["actions"] = [[[0.0] * 7] for _ in doc["actions"]]
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps(doc) + "\n")
    assert main([
        "eval", "replay", "--suite", pipeline["suite"], "--logs", str(bad),
    ]) == 1


def test_eval_report_recomputes(pipeline, capsys):
    assert main([
        "eval", "report", "--logs", os.path.join(pipeline["run"], "logs.jsonl"),
    ]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["sr"] == [1.0] * 5


def test_forge_manifest_stage1(capsys):
    assert main(["forge", "manifest", "--stage", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stage"] == 1


def test_forge_manifest_stage2(pipeline, capsys):
    assert main(["forge", "manifest", "--stage", "2", "--dataset", pipeline["dataset"]]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stage"] == 2 and doc["n_samples"] > 0


def test_codec_round_trip_files(tmp_path, capsys):
    chunk = [[0.1 * i - 0.3 for i in range(7)] for _ in range(5)]
    src = tmp_path / "chunk.json"
    src.write_text(json.dumps(chunk))
    tok = tmp_path / "tokens.json"
    assert main(["codec", "encode", "--in", str(src), "--out", str(tok)]) == 0
    tokens = json.load(open(tok))
    assert len(tokens) == 35 and all(151808 <= t < 152064 for t in tokens)
    assert main(["codec", "decode", "--in", str(tok), "--out", "-"]) == 0
    decoded = json.loads(capsys.readouterr().out)
    flat_in = [v for row in chunk for v in row[:6]]
    flat_out = [v for row in decoded for v in row[:6]]
    assert max(abs(a - b) for a, b in zip(flat_in, flat_out)) <= 1.0 / 256


def test_codec_decode_bad_tokens_exits_1(tmp_path, capsys):
    src = tmp_path / "tokens.json"
    src.write_text(json.dumps([7] * 35))
    assert main(["codec", "decode", "--in", str(src)]) == 1
    assert "error:" in capsys.readouterr().err


def test_codec_stats_and_normalized_encode(pipeline, tmp_path, capsys):
    stats = tmp_path / "stats.json"
    assert main(["codec", "stats", "--archive", pipeline["archive"], "--out", str(stats)]) == 0
    capsys.readouterr()  # drop the status line
    doc = json.load(open(stats))
    assert len(doc["q_low"]) == 7
    chunk = [[0.0] * 7 for _ in range(5)]
    src = tmp_path / "chunk.json"
    src.write_text(json.dumps(chunk))
    assert main([
        "codec", "encode", "--in", str(src), "--out", "-", "--stats", str(stats),
    ]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 35


def test_codec_info_reports_hash(capsys):
    assert main(["codec", "info"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["codec"]["n_bins"] == 256
    assert len(doc["codec_hash"]) == 16


def test_env_render_writes_png(tmp_path):
    out = tmp_path / "view.png"
    assert main([
        "env", "render", "--profile", "C", "--seed", "4", "--out", str(out),
    ]) == 0
    img = decode_png(out.read_bytes())
    assert img.shape == (128, 128, 3)


def test_env_replay_checks_archive(pipeline, capsys):
    from oevla import data

    ep_dir = data.list_episode_dirs(pipeline["archive"])[0]
    assert main(["env", "replay", "--episode", ep_dir]) == 0
    assert "replay ok" in capsys.readouterr().out


def test_bench_gen_config_file_fills_defaults(tmp_path):
    cfg = tmp_path / "bench.toml"
    cfg.write_text('profile = "D"\nform = "lang"\nn = 2\nseed = 6\n')
    out = str(tmp_path / "suite")
    assert main(["bench", "gen", "--out", out, "--config", str(cfg)]) == 0
    meta = json.load(open(os.path.join(out, "suite.json")))["meta"]
    assert meta["profile"] == "D" and meta["n"] == 2 and meta["seed"] == 6


def test_cli_flag_wins_over_config(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"profile": "D", "form": "lang", "n": 2, "seed": 6}))
    out = str(tmp_path / "suite")
    assert main(["bench", "gen", "--out", out, "--config", str(cfg), "--seed", "7"]) == 0
    meta = json.load(open(os.path.join(out, "suite.json")))["meta"]
    assert meta["seed"] == 7


def test_missing_required_flag_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["forge", "demos", "--out", "/tmp/x", "--n", "1"])  # no --seed
    assert err.value.code == 2


def test_missing_config_values_exit_1(tmp_path, capsys):
    out = str(tmp_path / "suite")
    assert main(["bench", "gen", "--out", out, "--profile", "D"]) == 1
    assert "needs" in capsys.readouterr().err


def test_unknown_policy_spec_exits_1(pipeline, tmp_path, capsys):
    assert main([
        "eval", "run", "--suite", pipeline["suite"], "--policy", "psychic",
        "--seed", "0", "--out", str(tmp_path / "r"),
    ]) == 1
    assert "unknown policy spec" in capsys.readouterr().err


def test_missing_file_exits_1(capsys):
    assert main(["eval", "report", "--logs", "/nonexistent/logs.jsonl"]) == 1
    assert "error:" in capsys.readouterr().err


def test_remote_policy_spec_dials_server(pipeline):
    from oevla import bench, harness

    server = rpc.RpcServer("random", seed=8)
    server.start()
    try:
        suite = bench.load_suite(pipeline["suite"])
        factory, cleanup = make_policy_factory(
            f"remote:127.0.0.1:{server.port}", 8, suite.store
        )
        try:
            logs, _ = harness.run_suite(factory, suite)
        finally:
            cleanup()
    finally:
        server.stop()
    local_logs, _ = harness.run_suite(lambda: RandomPolicy(8), suite)
    assert [l.to_json() for l in logs] == [l.to_json() for l in local_logs]


def test_factory_codec_variant_round_trips():
    factory, cleanup = make_policy_factory("parsing-oracle-codec", 0)
    policy = factory()
    assert policy.privileged is True  # still reads sim state, task comes from text
    policy.close()
    cleanup()
    factory, cleanup = make_policy_factory("random-codec", 0)
    assert factory().privileged is False
    cleanup()
    with pytest.raises(ValidationError):
        make_policy_factory("warp:9", 0)
