"""Policies: privileged scripted oracle, instruction-parsing oracle, random.

The oracle is a closed-loop waypoint controller.  It recomputes its plan from
the current world state on every call, so quantization error never
accumulates, and it builds a 5-step chunk by rolling its own copy of the
dynamics forward.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import world as W
from .tasks import TASK_IDS, feasible, parse_task_text, pick_push_target
from .types import CHUNK_LEN, Instruction, ValidationError, check_chunk
from .world import STEP_DELTA, WorldState


class PolicyError(ValueError):
    pass


class InfeasibleTaskError(PolicyError):
    pass


@dataclass(frozen=True)
class PolicyRequest:
    """Everything an honest policy sees for one action query.

    Attributes:
        instruction: the current subtask instruction.
        obs: (H, 2W, 3) uint8 concatenated static|wrist observation.
        proprio: 7 floats of gripper state.
        subtask_index: position in the sequence (0-based).
        step_index: env steps consumed in this subtask so far.
    """

    instruction: Instruction
    obs: np.ndarray
    proprio: np.ndarray
    subtask_index: int
    step_index: int


@dataclass(frozen=True)
class PolicyResponse:
    """Either a decoded float chunk or raw action token ids, never both."""

    chunk: np.ndarray | None = None
    tokens: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.chunk is None) == (self.tokens is None):
            raise ValidationError("response must carry exactly one of chunk/tokens")


def hold_action(state: WorldState) -> np.ndarray:
    """Zero motion, gripper command preserving the current open/closed state."""
    a = np.zeros(7)
    a[6] = -1.0 if state.closed else 1.0
    return a


def _move_toward(state: WorldState, target, grip: float) -> np.ndarray:
    g = state.gripper_pos
    a = np.zeros(7)
    a[:3] = np.clip((np.asarray(target) - g) / STEP_DELTA, -1.0, 1.0)
    a[6] = grip
    return a


def _at(state: WorldState, target, tol: float = 0.015) -> bool:
    return bool(np.max(np.abs(state.gripper_pos - np.asarray(target))) <= tol)


def _free_stow_cell(state: WorldState) -> tuple[float, float]:
    for cx, cy in W.STOW_CELLS:
        clear = all(
            (obj.x - cx) ** 2 + (obj.y - cy) ** 2 >= 0.08**2
            for oid, obj in state.objects
            if oid != state.held
        )
        if clear:
            return cx, cy
    return W.STOW_CELLS[0]  # crowded beyond reason; drop anyway


def _stow_action(state: WorldState) -> np.ndarray:
    # put down whatever we are holding, somewhere out of the way
    cx, cy = _free_stow_cell(state)
    if _at(state, (cx, cy, 0.05), tol=0.02):
        return _move_toward(state, (cx, cy, 0.05), grip=1.0)  # open -> drop
    return _move_toward(state, (cx, cy, 0.05), grip=-1.0)


def _approach_offset(state: WorldState, bx: float, by: float, sign: float) -> tuple[float, float]:
    """A spot next to a block where closing the gripper grabs nothing.

    Prefers the far side (so the fist can drive straight through), but falls
    back to a sideways spot when the block sits against a wall; contact is
    radial, so a fist offset in y still drags the block along x.
    """
    variants = (
        (0.08 * sign, 0.0),
        (0.10 * sign, 0.0),
        (0.08 * sign, 0.05),
        (0.08 * sign, -0.05),
        (0.0, 0.08),
        (0.0, -0.08),
    )
    for dx, dy in variants:
        px, py = bx + dx, by + dy
        if not 0.0 <= px <= 1.0 or not 0.02 <= py <= 0.98:
            continue
        if all(
            (obj.x - px) ** 2 + (obj.y - py) ** 2 >= 0.055**2 for _oid, obj in state.objects
        ):
            return px, py
    return bx + 0.12 * sign, by


def _lift_action(state: WorldState, block: str) -> np.ndarray:
    if state.held == block:
        g = state.gripper
        return _move_toward(state, (g[0], g[1], 0.22), grip=-1.0)
    if state.held is not None:
        return _stow_action(state)
    obj = state.obj(block)
    above = (obj.x, obj.y, 0.08)
    down = (obj.x, obj.y, 0.02)
    if not _at(state, (obj.x, obj.y, state.gripper[2]), tol=0.012) or state.gripper[2] > 0.09:
        if _at(state, above, tol=0.012):
            return _move_toward(state, down, grip=1.0)
        return _move_toward(state, above, grip=1.0)
    if np.linalg.norm(state.gripper_pos - obj.pos) <= 0.035:
        if state.closed:
            # a leftover fist: grasping needs an open-to-close edge
            return _move_toward(state, state.gripper, grip=1.0)
        return _move_toward(state, state.gripper, grip=-1.0)  # close on it
    return _move_toward(state, down, grip=1.0)


def _push_action(state: WorldState, direction: str) -> np.ndarray:
    left = direction == "left"
    zone = 0.12 if left else 0.88          # success line for the pushed block
    drive_to = 0.08 if left else 0.92      # fist goal a bit past the line
    sign = 1.0 if left else -1.0           # make the fist on the far side
    if state.held is not None:
        return _stow_action(state)

    def in_zone(obj) -> bool:
        return obj.x <= zone if left else obj.x >= zone

    # A block the closed fist is already touching stays the target even after
    # it leaves the fresh-candidate set mid-push; drive it straight to the
    # zone, keeping the fist's own y so the drag is pure x.
    if state.closed:
        g = state.gripper_pos
        for _oid, obj in state.objects:
            if obj.z <= 1e-9 and not in_zone(obj) and np.linalg.norm(g - obj.pos) <= 0.045:
                return _move_toward(state, (drive_to, state.gripper[1], 0.02), grip=-1.0)

    target = pick_push_target(state, direction)
    if target is None:
        if any(in_zone(obj) for _oid, obj in state.objects):
            return hold_action(state)  # a block is over the line already
        raise InfeasibleTaskError(f"push_block_{direction}: no pushable block")
    obj = state.obj(target)
    px, py = _approach_offset(state, obj.x, obj.y, sign)
    if state.closed and _at(state, (px, py, 0.02), tol=0.02):
        return _move_toward(state, (obj.x, obj.y, 0.02), grip=-1.0)  # slide into contact
    if _at(state, (px, py, 0.02), tol=0.015):
        return _move_toward(state, state.gripper, grip=-1.0)  # make a fist
    if _at(state, (px, py, 0.10), tol=0.015) or state.gripper[2] < 0.09:
        return _move_toward(state, (px, py, 0.02), grip=1.0)
    return _move_toward(state, (px, py, 0.10), grip=1.0)


def _drag_action(state: WorldState, handle: np.ndarray, target_point, scalar: float, target_scalar: float) -> np.ndarray:
    if state.held is not None:
        return _stow_action(state)
    engaged = state.closed and np.linalg.norm(state.gripper_pos - handle) <= 0.035
    if engaged:
        return _move_toward(state, target_point, grip=-1.0)
    above = (float(handle[0]), float(handle[1]), 0.10)
    at_handle = (float(handle[0]), float(handle[1]), float(handle[2]))
    if _at(state, at_handle, tol=0.015):
        return _move_toward(state, state.gripper, grip=-1.0)  # grab the handle
    if _at(state, above, tol=0.015) or state.gripper[2] < 0.11:
        return _move_toward(state, at_handle, grip=1.0)
    return _move_toward(state, above, grip=1.0)


def _drawer_action(state: WorldState, opening: bool) -> np.ndarray:
    profile = W.get_profile(state.env_id)
    target_scalar = 0.9 if opening else 0.1
    if abs(state.drawer_open - target_scalar) <= 0.05:
        return hold_action(state)
    handle = W.drawer_handle(state, profile)
    end = (
        profile.drawer_base[0],
        profile.drawer_base[1] + W.DRAWER_TRAVEL * target_scalar,
        0.02,
    )
    return _drag_action(state, handle, end, state.drawer_open, target_scalar)


def _slider_action(state: WorldState, to_right: bool) -> np.ndarray:
    profile = W.get_profile(state.env_id)
    target_scalar = 0.9 if to_right else 0.1
    if abs(state.slider_pos - target_scalar) <= 0.05:
        return hold_action(state)
    handle = W.slider_handle(state, profile)
    end = (
        profile.slider_base[0] + W.SLIDER_TRAVEL * target_scalar,
        profile.slider_base[1],
        0.02,
    )
    return _drag_action(state, handle, end, state.slider_pos, target_scalar)


def _toggle_action(state: WorldState, device_xy, flag: bool, want: bool) -> np.ndarray:
    if flag == want:
        return hold_action(state)
    if state.held is not None:
        return _stow_action(state)
    g = state.gripper
    pressed = g[2] < W.PRESS_HEIGHT and (g[0] - device_xy[0]) ** 2 + (g[1] - device_xy[1]) ** 2 <= W.PRESS_RADIUS**2
    if pressed:
        # already down without having toggled; lift off and press again
        return _move_toward(state, (g[0], g[1], 0.16), grip=1.0)
    above = (device_xy[0], device_xy[1], 0.16)
    if _at(state, (device_xy[0], device_xy[1], g[2]), tol=0.012):
        return _move_toward(state, (device_xy[0], device_xy[1], 0.05), grip=1.0)
    return _move_toward(state, above, grip=1.0)


def oracle_action(state: WorldState, task: str) -> np.ndarray:
    """One privileged scripted action toward completing `task`."""
    if task not in TASK_IDS:
        raise ValidationError(f"unknown task {task!r}")
    profile = W.get_profile(state.env_id)
    if task.startswith("lift_"):
        block = task[len("lift_"):]
        if state.held == block and state.obj(block).z >= 0.16:
            return hold_action(state)
        if state.held != block and not feasible(task, state) and state.held is None:
            raise InfeasibleTaskError(f"{task}: block not liftable")
        return _lift_action(state, block)
    if task in ("push_block_left", "push_block_right"):
        return _push_action(state, task.rsplit("_", 1)[1])
    if task == "open_drawer":
        return _drawer_action(state, opening=True)
    if task == "close_drawer":
        return _drawer_action(state, opening=False)
    if task == "move_slider_left":
        return _slider_action(state, to_right=False)
    if task == "move_slider_right":
        return _slider_action(state, to_right=True)
    if task == "turn_on_lightbulb":
        return _toggle_action(state, profile.switch_pos, state.switch_on, True)
    if task == "turn_off_lightbulb":
        return _toggle_action(state, profile.switch_pos, state.switch_on, False)
    if task == "turn_on_led":
        return _toggle_action(state, profile.button_pos, state.button_led_on, True)
    if task == "turn_off_led":
        return _toggle_action(state, profile.button_pos, state.button_led_on, False)
    raise AssertionError(task)


def oracle_act(state: WorldState, task: str) -> np.ndarray:
    """Next 5-step chunk of the oracle plan, simulated forward internally."""
    actions = []
    s = state
    for _ in range(CHUNK_LEN):
        a = oracle_action(s, task)
        actions.append(a)
        s = W.step(s, a)
    return check_chunk(np.stack(actions))


def oracle_rollout(
    state: WorldState, task: str, budget: int = 64
) -> tuple[list[WorldState], list[np.ndarray], bool]:
    """Run the oracle step-by-step until the task succeeds or budget runs out.

    Returns (states including the initial one, actions, success flag).
    """
    from .tasks import success

    initial = state
    states = [state]
    actions: list[np.ndarray] = []
    for _ in range(budget):
        a = oracle_action(state, task)
        state = W.step(state, a)
        states.append(state)
        actions.append(a)
        if success(task, initial, state):
            return states, actions, True
    return states, actions, False


def random_chunk(rng: np.random.Generator) -> np.ndarray:
    chunk = np.empty((CHUNK_LEN, 7))
    chunk[:, :6] = rng.uniform(-1.0, 1.0, size=(CHUNK_LEN, 6))
    chunk[:, 6] = np.where(rng.random(CHUNK_LEN) < 0.5, -1.0, 1.0)
    return chunk


def derive_policy_seed(base_seed: int, sequence_id: str) -> int:
    """Per-sequence rng seed; documented so wire clients can reproduce it."""
    digest = hashlib.sha256(f"{base_seed}:{sequence_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class BasePolicy:
    """Single-consumer stateful policy session."""

    privileged = False

    def begin_sequence(self, sequence_id: str, reset_seed: int) -> None:
        pass

    def begin_subtask(self, instruction: Instruction, subtask_index: int) -> None:
        pass

    def act(self, request: PolicyRequest, state: WorldState | None = None, task: str | None = None) -> PolicyResponse:
        raise NotImplementedError

    def report_error(self, code: str, message: str) -> None:
        """Told why the last act was rejected; remote sessions forward this."""

    def close(self) -> None:
        pass


class OraclePolicy(BasePolicy):
    """Privileged scripted oracle following the ground-truth task."""

    privileged = True

    def act(self, request, state=None, task=None):
        if state is None or task is None:
            raise PolicyError("oracle needs privileged state and task")
        return PolicyResponse(chunk=oracle_act(state, task))


class ParsingOraclePolicy(BasePolicy):
    """Oracle control, but the task comes from parsing the instruction text."""

    privileged = True

    def __init__(self):
        self._task: str | None = None

    def begin_subtask(self, instruction, subtask_index):
        self._task = parse_task_text(instruction.text)

    def act(self, request, state=None, task=None):
        if state is None:
            raise PolicyError("parsing oracle needs privileged state")
        if self._task is None:
            raise PolicyError("act() before begin_subtask()")
        return PolicyResponse(chunk=oracle_act(state, self._task))


class RandomPolicy(BasePolicy):
    """Uniform random baseline, reseeded per sequence for order independence."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def begin_sequence(self, sequence_id, reset_seed):
        self._rng = np.random.default_rng(derive_policy_seed(self.seed, sequence_id))

    def act(self, request, state=None, task=None):
        return PolicyResponse(chunk=random_chunk(self._rng))


class CodecLoopPolicy(BasePolicy):
    """Wraps a policy, forcing every chunk through encode -> decode."""

    def __init__(self, inner: BasePolicy, config=None):
        from .codec import DEFAULT_CONFIG

        self.inner = inner
        self.config = config or DEFAULT_CONFIG

    @property
    def privileged(self):
        return self.inner.privileged

    def begin_sequence(self, sequence_id, reset_seed):
        self.inner.begin_sequence(sequence_id, reset_seed)

    def begin_subtask(self, instruction, subtask_index):
        self.inner.begin_subtask(instruction, subtask_index)

    def report_error(self, code, message):
        self.inner.report_error(code, message)

    def act(self, request, state=None, task=None):
        from .codec import decode_chunk, encode_chunk

        resp = self.inner.act(request, state=state, task=task)
        if resp.tokens is not None:
            return resp
        return PolicyResponse(tokens=tuple(encode_chunk(resp.chunk, self.config)))
