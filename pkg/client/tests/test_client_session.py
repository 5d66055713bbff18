"""Full sessions against a real evaluator over loopback.

The evaluator runs as a subprocess via its public CLI in listening mode;
the client under test dials in.  Transparency means a remote policy's
report is exactly what the same policy scores in process.
"""

import json

import pytest

from evalcli import ListeningEvaluator, run_oevla
from oevla_client.policies import EchoOraclePolicy, RandomPolicy, TokenModelAdapter
from oevla_client.protocol import TOKEN_LO, TokenRangeError, run_client


def _read_report(out_dir):
    with open(out_dir / "report.json") as f:
        return json.load(f)


def _read_logs_bytes(out_dir):
    return (out_dir / "logs.jsonl").read_bytes()


def test_random_over_wire_matches_in_process(suite_dir, tmp_path):
    remote_out = tmp_path / "remote"
    local_out = tmp_path / "local"

    with ListeningEvaluator(suite_dir, remote_out) as ev:
        stats = run_client(ev.endpoint, RandomPolicy(5))
        code, _, err = ev.wait()
    assert code == 0, err
    assert stats.completed and stats.resets >= 10 and not stats.errors

    run_oevla("eval", "run", "--suite", suite_dir, "--policy", "random",
              "--seed", 5, "--out", local_out)

    assert _read_report(remote_out) == _read_report(local_out)
    # stronger than equal metrics: every logged action byte-identical
    assert _read_logs_bytes(remote_out) == _read_logs_bytes(local_out)


def test_echo_oracle_matches_in_process_expert(suite_dir, tmp_path):
    remote_out = tmp_path / "remote"
    local_out = tmp_path / "local"

    with ListeningEvaluator(suite_dir, remote_out, debug_hints=True) as ev:
        stats = run_client(ev.endpoint, EchoOraclePolicy())
        code, _, err = ev.wait()
    assert code == 0, err
    assert stats.completed and not stats.errors

    run_oevla("eval", "run", "--suite", suite_dir, "--policy", "oracle",
              "--seed", 0, "--out", local_out)

    report = _read_report(remote_out)
    assert report == _read_report(local_out)
    assert report["len"] == 5.0
    assert _read_logs_bytes(remote_out) == _read_logs_bytes(local_out)


def test_truncated_tokens_are_reported_back(suite_dir, tmp_path):
    # 34 tokens per act: in range, wrong length.  The length contract is
    # the evaluator's to enforce; the client must surface every report
    # and keep the session alive to the end of the suite.
    policy = TokenModelAdapter(lambda instruction, step: [TOKEN_LO] * 34)

    with ListeningEvaluator(suite_dir, tmp_path / "out") as ev:
        stats = run_client(ev.endpoint, policy)
        code, _, err = ev.wait()
    assert code == 0, err
    assert stats.completed
    assert len(stats.errors) == 10  # one rejected act per sequence
    assert all(c == "truncated_chunk" for c, _ in stats.errors)
    assert all("34" in m for _, m in stats.errors)

    report = _read_report(tmp_path / "out")
    assert report["len"] == 0.0


def test_out_of_range_token_is_never_transmitted(tiny_suite_dir, tmp_path):
    policy = TokenModelAdapter(lambda instruction, step: [152064] * 35)

    with ListeningEvaluator(tiny_suite_dir, tmp_path / "out") as ev:
        with pytest.raises(TokenRangeError) as err:
            run_client(ev.endpoint, policy)
        code, _, _ = ev.wait()
    assert code == 0
    assert err.value.code == "non_action_token"
    assert err.value.token == 152064

    # the evaluator logged a failed exchange, not a bad token: proof the
    # token id itself never crossed the wire as an act
    with open(tmp_path / "out" / "logs.jsonl") as f:
        log = json.loads(f.readline())
    assert log["subtasks"][0]["reason"] == "protocol_error"
