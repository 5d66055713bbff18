"""Task registry: language templates, success predicates, feasibility.

Thirteen tabletop tasks over the miniature world.  Success is always judged
against the state at subtask start (initial) plus the current state, so the
predicates are pure functions and the harness owns all bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import LanguageAnnotation, ValidationError
from .world import BLOCK_IDS, WorldState

LIFT_HEIGHT = 0.15          # block must rise this much above its start
DRAWER_OPEN_DONE = 0.8      # scalar thresholds for drawer/slider tasks
DRAWER_CLOSE_DONE = 0.2
SLIDER_LEFT_DONE = 0.2
SLIDER_RIGHT_DONE = 0.8
PUSH_ZONE_LEFT = 0.12       # a pushed block must end inside a margin zone...
PUSH_ZONE_RIGHT = 0.88
PUSH_START_LEFT = 0.22      # ...having started outside it (>= 0.1 displacement)
PUSH_START_RIGHT = 0.78

TASK_IDS = (
    "lift_red_block",
    "lift_blue_block",
    "lift_pink_block",
    "push_block_left",
    "push_block_right",
    "open_drawer",
    "close_drawer",
    "move_slider_left",
    "move_slider_right",
    "turn_on_lightbulb",
    "turn_off_lightbulb",
    "turn_on_led",
    "turn_off_led",
)

# every object name that may appear in an annotation slot
NAMEABLE_OBJECTS = BLOCK_IDS + ("drawer", "slider", "lightbulb", "led")

# tasks whose feasibility flips with a binary/threshold state; they are
# available about half the time, which matters for benchmark task sampling
PAIRED_TASKS = frozenset(
    {
        "open_drawer",
        "close_drawer",
        "move_slider_left",
        "move_slider_right",
        "turn_on_lightbulb",
        "turn_off_lightbulb",
        "turn_on_led",
        "turn_off_led",
    }
)


def _on_table(obj) -> bool:
    return obj.z <= 1e-9


def _block_color(block_id: str) -> str:
    return block_id.split("_")[0]


def push_candidates(state: WorldState, direction: str) -> list[str]:
    """Blocks that can still be pushed toward `direction` ('left'/'right')."""
    out = []
    for oid, obj in state.objects:
        if state.held == oid or not _on_table(obj):
            continue
        if direction == "left" and obj.x >= PUSH_START_LEFT:
            out.append(oid)
        elif direction == "right" and obj.x <= PUSH_START_RIGHT:
            out.append(oid)
    return out


def pick_push_target(state: WorldState, direction: str) -> str | None:
    """Deterministic push target: nearest candidate to the gripper, id order on ties."""
    cands = push_candidates(state, direction)
    if not cands:
        return None
    g = state.gripper_pos
    def key(oid):
        obj = state.obj(oid)
        return (round(float((obj.x - g[0]) ** 2 + (obj.y - g[1]) ** 2), 12), oid)
    return min(cands, key=key)


def feasible(task: str, state: WorldState) -> bool:
    """Whether `task` can be started (and completed) from `state`."""
    if task not in TASK_IDS:
        raise ValidationError(f"unknown task {task!r}")
    if task.startswith("lift_"):
        block = task[len("lift_"):]
        obj = state.obj(block)
        return _on_table(obj) and state.held != block
    if task == "push_block_left":
        return bool(push_candidates(state, "left"))
    if task == "push_block_right":
        return bool(push_candidates(state, "right"))
    if task == "open_drawer":
        return state.drawer_open < 0.5
    if task == "close_drawer":
        return state.drawer_open > 0.5
    if task == "move_slider_left":
        return state.slider_pos > 0.5
    if task == "move_slider_right":
        return state.slider_pos < 0.5
    if task == "turn_on_lightbulb":
        return not state.switch_on
    if task == "turn_off_lightbulb":
        return state.switch_on
    if task == "turn_on_led":
        return not state.button_led_on
    if task == "turn_off_led":
        return state.button_led_on
    raise AssertionError(task)


# Availability-sharing groups for the sampler: a group keeps a fixed share of
# the draw (its member count out of 13) no matter how many of its members are
# feasible right now.  Without this, pair tasks (only one of open/close etc.
# is ever feasible) and held-block states would skew the long-run per-task
# frequency away from uniform.
TASK_GROUPS = (
    ("lift_red_block", "lift_blue_block", "lift_pink_block"),
    ("push_block_left", "push_block_right"),
    ("open_drawer", "close_drawer"),
    ("move_slider_left", "move_slider_right"),
    ("turn_on_lightbulb", "turn_off_lightbulb"),
    ("turn_on_led", "turn_off_led"),
)


def sample_feasible_task(state: WorldState, rng, exclude: str | None = None) -> str:
    """Draw a feasible task, never repeating `exclude`.

    Each group's total weight equals its member count, split over the members
    that are currently feasible, so every task's long-run frequency stays
    close to uniform (1/13) across benchmark draws.
    """
    cands: list[str] = []
    weights: list[float] = []
    for group in TASK_GROUPS:
        avail = [t for t in group if t != exclude and feasible(t, state)]
        for t in avail:
            cands.append(t)
            weights.append(len(group) / len(avail))
    if not cands:
        raise ValidationError("no feasible task in this state")
    w = np.asarray(weights)
    idx = rng.choice(len(cands), p=w / w.sum())
    return cands[int(idx)]


def success(task: str, initial: WorldState, current: WorldState) -> bool:
    """Success predicate, judged between the subtask-start and current states."""
    if task not in TASK_IDS:
        raise ValidationError(f"unknown task {task!r}")
    if task.startswith("lift_"):
        block = task[len("lift_"):]
        return (
            current.held == block
            and current.obj(block).z >= initial.obj(block).z + LIFT_HEIGHT
        )
    if task == "push_block_left":
        return any(
            current.obj(oid).x <= PUSH_ZONE_LEFT
            and initial.obj(oid).x >= PUSH_START_LEFT
            and current.held != oid
            for oid in current.object_ids
        )
    if task == "push_block_right":
        return any(
            current.obj(oid).x >= PUSH_ZONE_RIGHT
            and initial.obj(oid).x <= PUSH_START_RIGHT
            and current.held != oid
            for oid in current.object_ids
        )
    if task == "open_drawer":
        return current.drawer_open >= DRAWER_OPEN_DONE and initial.drawer_open < 0.5
    if task == "close_drawer":
        return current.drawer_open <= DRAWER_CLOSE_DONE and initial.drawer_open > 0.5
    if task == "move_slider_left":
        return current.slider_pos <= SLIDER_LEFT_DONE and initial.slider_pos > 0.5
    if task == "move_slider_right":
        return current.slider_pos >= SLIDER_RIGHT_DONE and initial.slider_pos < 0.5
    if task == "turn_on_lightbulb":
        return current.switch_on and not initial.switch_on
    if task == "turn_off_lightbulb":
        return not current.switch_on and initial.switch_on
    if task == "turn_on_led":
        return current.button_led_on and not initial.button_led_on
    if task == "turn_off_led":
        return not current.button_led_on and initial.button_led_on
    raise AssertionError(task)


@dataclass(frozen=True)
class _Template:
    text: str          # with one {obj} placeholder marking the slotted mention
    object_name: str | None  # fixed object, or None when chosen from state


_TEMPLATES = {
    "lift_red_block": _Template("lift the {obj}", "red_block"),
    "lift_blue_block": _Template("lift the {obj}", "blue_block"),
    "lift_pink_block": _Template("lift the {obj}", "pink_block"),
    "push_block_left": _Template("push the {obj} to the left", None),
    "push_block_right": _Template("push the {obj} to the right", None),
    "open_drawer": _Template("open the {obj}", "drawer"),
    "close_drawer": _Template("close the {obj}", "drawer"),
    "move_slider_left": _Template("move the {obj} to the left", "slider"),
    "move_slider_right": _Template("move the {obj} to the right", "slider"),
    "turn_on_lightbulb": _Template("turn on the {obj}", "lightbulb"),
    "turn_off_lightbulb": _Template("turn off the {obj}", "lightbulb"),
    "turn_on_led": _Template("turn on the {obj}", "led"),
    "turn_off_led": _Template("turn off the {obj}", "led"),
}

# how a slotted object reads inside the sentence
_MENTION = {
    "red_block": "red block",
    "blue_block": "blue block",
    "pink_block": "pink block",
    "drawer": "drawer",
    "slider": "slider",
    "lightbulb": "lightbulb",
    "led": "led",
}


def task_object(task: str, state: WorldState | None = None) -> str:
    """The object a task instance refers to.  Push tasks pick from the state."""
    tpl = _TEMPLATES[task]
    if tpl.object_name is not None:
        return tpl.object_name
    if state is None:
        raise ValidationError(f"{task} needs a world state to pick its target block")
    direction = "left" if task.endswith("left") else "right"
    target = pick_push_target(state, direction)
    if target is None:
        raise ValidationError(f"{task} has no pushable block in this state")
    return target


def annotate(task: str, state: WorldState | None = None) -> LanguageAnnotation:
    """Instantiate the task's language template, with the mention span marked."""
    if task not in TASK_IDS:
        raise ValidationError(f"unknown task {task!r}")
    obj = task_object(task, state)
    mention = _MENTION[obj]
    tpl = _TEMPLATES[task].text
    start = tpl.index("{obj}")
    text = tpl.format(obj=mention)
    return LanguageAnnotation(text=text, slots=(((start, start + len(mention)), obj),))


def parse_task_text(text: str) -> str:
    """Recover a TaskId from an instantiated template sentence.

    This is the language side of the scripted oracle: plain keyword matching,
    raising on anything it does not recognize.
    """
    t = text.lower()
    if "lift" in t:
        for block in BLOCK_IDS:
            if _block_color(block) in t:
                return f"lift_{block}"
    if "push" in t:
        if "left" in t:
            return "push_block_left"
        if "right" in t:
            return "push_block_right"
    if "drawer" in t:
        if "open" in t:
            return "open_drawer"
        if "close" in t:
            return "close_drawer"
    if "slider" in t:
        if "left" in t:
            return "move_slider_left"
        if "right" in t:
            return "move_slider_right"
    if "lightbulb" in t or "bulb" in t:
        if "turn on" in t or "switch on" in t:
            return "turn_on_lightbulb"
        if "turn off" in t or "switch off" in t:
            return "turn_off_lightbulb"
    if "led" in t:
        if "turn on" in t or "switch on" in t:
            return "turn_on_led"
        if "turn off" in t or "switch off" in t:
            return "turn_off_led"
    raise ValidationError(f"cannot parse task from {text!r}")
