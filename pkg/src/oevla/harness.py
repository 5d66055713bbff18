"""Closed-loop evaluation: roll policies through benchmark chains and score.

A sequence ends at its first failed subtask.  Success is checked after every
single env step, so a policy gets credit the moment the predicate flips even
mid-chunk.  Metrics: SR@k is the fraction of sequences that cleared at least
k subtasks, Len is the sum of the five SR@k values (expected completed
length, between 0 and 5).

Reports and logs never contain wall-clock data, so a rerun with the same
inputs is byte-identical, whatever the worker count.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from . import raster, world as W
from .bench import BenchmarkSuite, EvalSequence
from .codec import (
    CodecConfig,
    DEFAULT_CONFIG,
    NonActionTokenError,
    TruncatedChunkError,
    decode_chunk,
)
from .images import concat_views
from .policy import BasePolicy, PolicyError, PolicyRequest
from .tasks import success
from .types import ACTION_DIM, CHUNK_LEN as ACTIONS_PER_CHUNK, ValidationError

DEFAULT_BUDGET = 64
REPLAN_MODES = ("every_chunk", "every_step")


@dataclass
class SubtaskResult:
    task: str
    steps: int
    success: bool
    reason: str | None = None  # failure class when success is False


@dataclass
class RolloutLog:
    sequence_id: str
    reset_seed: int
    subtasks: list[SubtaskResult] = field(default_factory=list)
    actions: list[list[list[float]]] = field(default_factory=list)  # per subtask

    @property
    def depth(self) -> int:
        d = 0
        for r in self.subtasks:
            if not r.success:
                break
            d += 1
        return d

    def to_json(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "reset_seed": self.reset_seed,
            "depth": self.depth,
            "subtasks": [
                {"task": r.task, "steps": r.steps, "success": r.success, "reason": r.reason}
                for r in self.subtasks
            ],
            "actions": self.actions,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RolloutLog":
        log = cls(sequence_id=doc["sequence_id"], reset_seed=doc["reset_seed"])
        log.subtasks = [
            SubtaskResult(r["task"], r["steps"], r["success"], r.get("reason"))
            for r in doc["subtasks"]
        ]
        log.actions = doc["actions"]
        return log


def _classify(exc: Exception) -> str:
    if isinstance(exc, TruncatedChunkError):
        return "truncated_chunk"
    if isinstance(exc, NonActionTokenError):
        return "non_action_token"
    if isinstance(exc, TimeoutError):
        return "timeout"
    if isinstance(exc, PolicyError):
        return "policy_error"
    return "protocol_error"


def _resolve_chunk(resp, config: CodecConfig) -> np.ndarray:
    """Token responses are decoded; float responses are validated and snapped."""
    if resp.tokens is not None:
        return decode_chunk(list(resp.tokens), config)
    chunk = np.asarray(resp.chunk, dtype=np.float64)
    if chunk.shape != (ACTIONS_PER_CHUNK, ACTION_DIM):
        raise TruncatedChunkError(
            f"truncated chunk: expected shape {(ACTIONS_PER_CHUNK, ACTION_DIM)}, got {chunk.shape}"
        )
    if not np.all(np.isfinite(chunk)):
        raise PolicyError("non-finite value in action chunk")
    chunk = np.clip(chunk, -1.0, 1.0)
    chunk[:, 6] = np.where(chunk[:, 6] <= 0.0, -1.0, 1.0)
    return chunk


def rollout_sequence(
    policy: BasePolicy,
    sequence: EvalSequence,
    profile_id: str,
    resolution: int = 128,
    budget: int = DEFAULT_BUDGET,
    replan: str = "every_chunk",
    config: CodecConfig = DEFAULT_CONFIG,
) -> RolloutLog:
    if replan not in REPLAN_MODES:
        raise ValidationError(f"replan must be one of {REPLAN_MODES}")
    state = W.reset(profile_id, sequence.reset_seed)
    policy.begin_sequence(sequence.id, sequence.reset_seed)
    log = RolloutLog(sequence_id=sequence.id, reset_seed=sequence.reset_seed)

    for k, subtask in enumerate(sequence.subtasks):
        initial = state
        policy.begin_subtask(subtask.instruction, k)
        steps = 0
        done = False
        reason: str | None = None
        sub_actions: list[list[float]] = []

        while steps < budget and not done:
            obs = concat_views(
                raster.render(state, "static", resolution),
                raster.render(state, "wrist", resolution),
            )
            request = PolicyRequest(
                instruction=subtask.instruction,
                obs=obs,
                proprio=state.proprio(),
                subtask_index=k,
                step_index=steps,
            )
            try:
                if policy.privileged:
                    resp = policy.act(request, state=state, task=subtask.task)
                else:
                    resp = policy.act(request)
                chunk = _resolve_chunk(resp, config)
            except Exception as exc:  # noqa: BLE001 - all failures end the subtask
                reason = _classify(exc)
                try:
                    policy.report_error(reason, str(exc))
                except Exception:
                    pass  # a dead peer must not mask the original failure
                break
            n_exec = len(chunk) if replan == "every_chunk" else 1
            for row in chunk[:n_exec]:
                state = W.step(state, row)
                steps += 1
                sub_actions.append([float(v) for v in row])
                if success(subtask.task, initial, state):
                    done = True
                    break
                if steps >= budget:
                    break

        if not done and reason is None:
            reason = "budget_exhausted"
        log.subtasks.append(SubtaskResult(subtask.task, steps, done, None if done else reason))
        log.actions.append(sub_actions)
        if not done:
            break
    return log


@dataclass
class MetricsReport:
    n_sequences: int
    chain_len: int
    sr: tuple[float, ...]  # SR@1 .. SR@chain_len
    length: float

    def to_json(self) -> dict:
        return {
            "n_sequences": self.n_sequences,
            "chain_len": self.chain_len,
            "sr": list(self.sr),
            "len": self.length,
            "display": self.display(),
        }

    def display(self) -> dict:
        """Table-style strings: SR@k as percent, Len to 2 decimals, half-up."""
        out = {}
        for k, v in enumerate(self.sr, start=1):
            out[f"SR@{k}"] = str(Decimal(str(v * 100)).quantize(Decimal("0.1"), ROUND_HALF_UP))
        out["Len"] = str(Decimal(str(self.length)).quantize(Decimal("0.01"), ROUND_HALF_UP))
        return out


def compute_metrics(logs: list[RolloutLog], chain_len: int = 5) -> MetricsReport:
    if not logs:
        raise ValidationError("cannot compute metrics over zero sequences")
    n = len(logs)
    depths = [log.depth for log in logs]
    sr = tuple(sum(1 for d in depths if d >= k) / n for k in range(1, chain_len + 1))
    return MetricsReport(n_sequences=n, chain_len=chain_len, sr=sr, length=float(sum(sr)))


def combine_reports(per_form: dict[str, MetricsReport]) -> dict:
    """Cross-form summary: per-form Len plus their plain mean (the Avg column)."""
    if not per_form:
        raise ValidationError("no reports to combine")
    lens = {form: rep.length for form, rep in sorted(per_form.items())}
    avg = sum(lens.values()) / len(lens)
    return {
        "per_form": {form: rep.to_json() for form, rep in sorted(per_form.items())},
        "len_by_form": lens,
        "avg_len": avg,
        "avg_display": str(Decimal(str(avg)).quantize(Decimal("0.01"), ROUND_HALF_UP)),
    }


def run_suite(
    policy_factory,
    suite: BenchmarkSuite,
    budget: int | None = None,
    replan: str = "every_chunk",
    workers: int = 1,
) -> tuple[list[RolloutLog], MetricsReport]:
    """Evaluate every sequence; logs come back sorted by sequence id.

    policy_factory is a zero-arg callable.  Each worker thread builds its own
    policy once, and per-sequence state is (re)established via
    begin_sequence, so the result is independent of scheduling and worker
    count.
    """
    profile_id = suite.meta["profile"]
    resolution = suite.meta["resolution"]
    chain_len = suite.meta["chain_len"]
    use_budget = suite.meta["budget"] if budget is None else budget

    if workers <= 1:
        policy = policy_factory()
        try:
            logs = [
                rollout_sequence(policy, seq, profile_id, resolution, use_budget, replan)
                for seq in suite.sequences
            ]
        finally:
            policy.close()
    else:
        local = threading.local()
        made: list[BasePolicy] = []
        lock = threading.Lock()

        def job(seq: EvalSequence) -> RolloutLog:
            if not hasattr(local, "policy"):
                local.policy = policy_factory()
                with lock:
                    made.append(local.policy)
            return rollout_sequence(local.policy, seq, profile_id, resolution, use_budget, replan)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(job, suite.sequences))
        for p in made:
            p.close()

    logs.sort(key=lambda log: log.sequence_id)
    return logs, compute_metrics(logs, chain_len)


def replay_log(suite: BenchmarkSuite, log: RolloutLog) -> list[bool]:
    """Re-run a log's recorded actions through the env; per-subtask success."""
    seq = next((s for s in suite.sequences if s.id == log.sequence_id), None)
    if seq is None:
        raise ValidationError(f"log references unknown sequence {log.sequence_id!r}")
    state = W.reset(suite.meta["profile"], seq.reset_seed)
    flags = []
    for subtask, rows in zip(seq.subtasks, log.actions):
        initial = state
        done = False
        for row in rows:
            state = W.step(state, np.asarray(row, dtype=np.float64))
            if not done and success(subtask.task, initial, state):
                done = True
        flags.append(done)
        if not done:
            break
    return flags


def save_logs(logs: list[RolloutLog], path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        for log in logs:
            f.write(json.dumps(log.to_json(), sort_keys=True, separators=(",", ":")) + "\n")
    os.replace(tmp, path)


def load_logs(path: str) -> list[RolloutLog]:
    logs = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                logs.append(RolloutLog.from_json(json.loads(line)))
    return logs
