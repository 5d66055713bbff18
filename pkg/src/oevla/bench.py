"""Benchmark suites: 5-subtask chains with per-form instruction media.

Chains are built by sampling a feasible task, letting the scripted oracle
complete it, and repeating; generation therefore proves each chain is
solvable.  attach_instructions replays the same chains deterministically to
produce the instruction media, so a suite is regenerable byte-identically
from (profile, form, difficulty, n, seed).

Base-mode media come from the evaluation environment itself: VOS crops are
cut from the live observation, goal/demo images are rendered in-profile.
Hard mode swaps in external-provenance crops, the jittered text style, and
renders goals/demos under a different environment profile.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from . import raster, world as W
from .codec import DEFAULT_CONFIG, config_hash
from .data import atomic_write_json, read_json
from .font import HARD_STYLE, PLAIN_STYLE, render_text_image
from .forge import CropDB, _sub_rng, vos_segments
from .images import ImageStore
from .policy import oracle_rollout
from .tasks import annotate, sample_feasible_task
from .types import ImageRef, Instruction, InstructionForm, TextSpan, ValidationError

CHAIN_LEN = 5
DEFAULT_BUDGET = 64

VGR_PREFIX = "reach the goal state in "
VDL_PREFIX = "perform the demonstrated actions in "
OIF_PREFIX = "follow the command in "


@dataclass(frozen=True)
class Subtask:
    task: str
    instruction: Instruction


@dataclass(frozen=True)
class EvalSequence:
    id: str
    reset_seed: int
    subtasks: tuple[Subtask, ...]


@dataclass
class BenchmarkSuite:
    meta: dict
    sequences: list[EvalSequence]
    store: ImageStore


def gen_sequences(
    profile_id: str,
    n: int,
    seed: int,
    chain_len: int = CHAIN_LEN,
    budget: int = DEFAULT_BUDGET,
) -> list[dict]:
    """Sample n solvable task chains.  Returns plans: id, reset seed, tasks."""
    plans = []
    for i in range(n):
        reset_seed = seed * 1_000_003 + i
        state = W.reset(profile_id, reset_seed)
        rng = _sub_rng("bench-tasks", profile_id, seed, i)
        tasks: list[str] = []
        prev = None
        for _k in range(chain_len):
            task = sample_feasible_task(state, rng, exclude=prev)
            states, _actions, ok = oracle_rollout(state, task, budget)
            if not ok:
                raise RuntimeError(
                    f"oracle could not complete {task} in chain {i} (seed {reset_seed})"
                )
            state = states[-1]
            tasks.append(task)
            prev = task
        plans.append({"id": f"seq-{i:04d}", "reset_seed": reset_seed, "tasks": tasks})
    return plans


def _vdl_media_indices(n_frames: int) -> list[int]:
    # like the training-side picker but tolerant of very short rollouts
    return [round(i * (n_frames - 1) / 3) for i in range(4)]


def _alternate_profile(eval_profile: str, i: int, k: int) -> str:
    alts = [p for p in ("A", "B", "C", "D") if p != eval_profile]
    return alts[(i * CHAIN_LEN + k) % len(alts)]


def attach_instructions(
    plans: list[dict],
    profile_id: str,
    form: InstructionForm,
    difficulty: str,
    seed: int,
    resolution: int = 128,
    crop_db: CropDB | None = None,
    budget: int = DEFAULT_BUDGET,
) -> BenchmarkSuite:
    """Replay each chain and build one instruction per subtask."""
    if difficulty not in ("base", "hard"):
        raise ValidationError(f"difficulty must be base or hard, got {difficulty!r}")
    if difficulty == "hard" and form == InstructionForm.VOS and crop_db is None:
        raise ValidationError("hard VOS needs a crop db with an external pool")

    store = ImageStore()
    sequences = []
    for i, plan in enumerate(plans):
        state = W.reset(profile_id, plan["reset_seed"])
        subtasks = []
        for k, task in enumerate(plan["tasks"]):
            ann = annotate(task, state)
            rollout_states, _actions, ok = oracle_rollout(state, task, budget)
            if not ok:
                raise RuntimeError(f"chain replay diverged on {task}")

            if form == InstructionForm.LANG:
                instr = Instruction(form, (TextSpan(ann.text),))
            elif form == InstructionForm.VOS:
                ids = []
                for (_span, name) in ann.slots:
                    if difficulty == "base":
                        view = raster.render(state, "static", resolution)
                        x0, y0, x1, y1 = raster.object_bbox(state, name, "static", resolution)
                        ids.append(store.put(view[y0:y1, x0:x1]))
                    else:
                        rng = _sub_rng("vos-hard", seed, i, k, name)
                        iid = crop_db.sample(name, rng, "external")
                        ids.append(store.put_bytes(crop_db.store.get_bytes(iid)))
                instr = Instruction(form, vos_segments(ann, ids))
            elif form == InstructionForm.OIF:
                if difficulty == "base":
                    img = render_text_image(ann.text, PLAIN_STYLE)
                else:
                    img = render_text_image(ann.text, HARD_STYLE, _sub_rng("oif-hard", seed, i, k))
                instr = Instruction(form, (TextSpan(OIF_PREFIX), ImageRef(store.put(img))))
            elif form == InstructionForm.VGR:
                goal_state = rollout_states[-1]
                if difficulty == "base":
                    goal = raster.render(goal_state, "static", resolution)
                else:
                    alt = _alternate_profile(profile_id, i, k)
                    goal = raster.render(goal_state, "static", resolution, profile=W.get_profile(alt))
                instr = Instruction(form, (TextSpan(VGR_PREFIX), ImageRef(store.put(goal))))
            elif form == InstructionForm.VDL:
                if difficulty == "base":
                    render_profile = W.get_profile(profile_id)
                else:
                    render_profile = W.get_profile(_alternate_profile(profile_id, i, k))
                refs = []
                for idx in _vdl_media_indices(len(rollout_states)):
                    img = raster.render(rollout_states[idx], "static", resolution, profile=render_profile)
                    refs.append(ImageRef(store.put(img)))
                instr = Instruction(form, (TextSpan(VDL_PREFIX), *refs))
            else:
                raise ValidationError(f"unknown form {form}")

            subtasks.append(Subtask(task=task, instruction=instr))
            state = rollout_states[-1]
        sequences.append(
            EvalSequence(id=plan["id"], reset_seed=plan["reset_seed"], subtasks=tuple(subtasks))
        )

    meta = {
        "version": 1,
        "profile": profile_id,
        "form": form.value,
        "difficulty": difficulty,
        "n": len(plans),
        "seed": seed,
        "chain_len": CHAIN_LEN,
        "resolution": resolution,
        "budget": budget,
        "codec": DEFAULT_CONFIG.to_json(),
        "codec_hash": config_hash(DEFAULT_CONFIG),
    }
    return BenchmarkSuite(meta=meta, sequences=sequences, store=store)


def build_suite(
    profile_id: str,
    form: InstructionForm,
    difficulty: str,
    n: int,
    seed: int,
    resolution: int = 128,
    crop_db: CropDB | None = None,
    budget: int = DEFAULT_BUDGET,
) -> BenchmarkSuite:
    plans = gen_sequences(profile_id, n, seed, budget=budget)
    return attach_instructions(
        plans, profile_id, form, difficulty, seed, resolution, crop_db, budget
    )


def save_suite(suite: BenchmarkSuite, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    suite.store.flush(os.path.join(directory, "media"))
    doc = {
        "meta": suite.meta,
        "sequences": [
            {
                "id": seq.id,
                "reset_seed": seq.reset_seed,
                "subtasks": [
                    {"task": st.task, "instruction": st.instruction.to_json()}
                    for st in seq.subtasks
                ],
            }
            for seq in suite.sequences
        ],
    }
    atomic_write_json(doc, os.path.join(directory, "suite.json"))


def load_suite(directory: str) -> BenchmarkSuite:
    doc = read_json(os.path.join(directory, "suite.json"))
    store = ImageStore(os.path.join(directory, "media"))
    sequences = []
    for seq in doc["sequences"]:
        subtasks = tuple(
            Subtask(task=st["task"], instruction=Instruction.from_json(st["instruction"]))
            for st in seq["subtasks"]
        )
        sequences.append(
            EvalSequence(id=seq["id"], reset_seed=seq["reset_seed"], subtasks=subtasks)
        )
    return BenchmarkSuite(meta=doc["meta"], sequences=sequences, store=store)
