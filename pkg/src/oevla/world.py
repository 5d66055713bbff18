"""Miniature deterministic tabletop world.

A point gripper moves in the unit cube over a table at z=0 holding three
colored blocks, a drawer, a slider, a lightbulb switch and an LED button.
There is no physics engine: dynamics are a handful of explicit rules, chosen
so a scripted policy can finish any task in well under the step budget.

Units: world coordinates in [0, 1], one step moves at most STEP_DELTA per axis.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .types import ValidationError

STEP_DELTA = 0.05       # max translation per step per axis
GRASP_RADIUS = 0.04     # 3d distance for grasping a block / dragging a handle
PRESS_RADIUS = 0.04     # 2d distance for pressing a device
PRESS_HEIGHT = 0.1      # gripper z below this counts as pressing
DRAWER_TRAVEL = 0.20    # world-units of handle travel, scalar 0..1
SLIDER_TRAVEL = 0.40

BLOCK_IDS = ("red_block", "blue_block", "pink_block")
BLOCK_SPAWN = ((0.25, 0.75), (0.38, 0.70))  # (x range, y range)
BLOCK_MIN_SEPARATION = 0.09
GRIPPER_HOME = (0.5, 0.5, 0.45)

# free spots where the oracle can park a block it needs to put down
STOW_CELLS = ((0.20, 0.44), (0.80, 0.44), (0.20, 0.66), (0.80, 0.66), (0.50, 0.42))


@dataclass(frozen=True)
class EnvProfile:
    """Visual/layout identity of one environment (A-D).

    Profiles differ in table color, fixture placement and static-camera
    transform; the dynamics are identical everywhere.
    """

    env_id: str
    table_color: tuple[int, int, int]
    drawer_base: tuple[float, float]   # handle position at scalar 0, slides +y
    slider_base: tuple[float, float]   # handle position at scalar 0, slides +x
    switch_pos: tuple[float, float]    # press target controlling the lightbulb
    button_pos: tuple[float, float]    # press target controlling the LED
    bulb_pos: tuple[float, float]      # indicator disc
    led_pos: tuple[float, float]
    cam_flip_x: bool = False
    cam_pan: tuple[float, float] = (0.0, 0.0)  # fraction of view size

    def to_json(self) -> dict:
        return {
            "env_id": self.env_id,
            "table_color": list(self.table_color),
            "drawer_base": list(self.drawer_base),
            "slider_base": list(self.slider_base),
            "switch_pos": list(self.switch_pos),
            "button_pos": list(self.button_pos),
            "bulb_pos": list(self.bulb_pos),
            "led_pos": list(self.led_pos),
            "cam_flip_x": self.cam_flip_x,
            "cam_pan": list(self.cam_pan),
        }

    @staticmethod
    def from_json(obj: dict) -> "EnvProfile":
        return EnvProfile(
            env_id=obj["env_id"],
            table_color=tuple(obj["table_color"]),
            drawer_base=tuple(obj["drawer_base"]),
            slider_base=tuple(obj["slider_base"]),
            switch_pos=tuple(obj["switch_pos"]),
            button_pos=tuple(obj["button_pos"]),
            bulb_pos=tuple(obj["bulb_pos"]),
            led_pos=tuple(obj["led_pos"]),
            cam_flip_x=obj.get("cam_flip_x", False),
            cam_pan=tuple(obj.get("cam_pan", (0.0, 0.0))),
        )


_BUILTIN_PROFILES = {
    "A": EnvProfile(
        env_id="A", table_color=(96, 72, 52),
        drawer_base=(0.50, 0.12), slider_base=(0.30, 0.88),
        switch_pos=(0.10, 0.76), button_pos=(0.90, 0.76),
        bulb_pos=(0.10, 0.90), led_pos=(0.90, 0.90),
    ),
    "B": EnvProfile(
        env_id="B", table_color=(70, 90, 112),
        drawer_base=(0.53, 0.12), slider_base=(0.27, 0.88),
        switch_pos=(0.10, 0.76), button_pos=(0.90, 0.76),
        bulb_pos=(0.10, 0.90), led_pos=(0.90, 0.90),
        cam_pan=(0.04, 0.0),
    ),
    "C": EnvProfile(
        env_id="C", table_color=(62, 96, 70),
        drawer_base=(0.47, 0.12), slider_base=(0.30, 0.86),
        switch_pos=(0.10, 0.78), button_pos=(0.90, 0.76),
        bulb_pos=(0.10, 0.92), led_pos=(0.90, 0.90),
        cam_flip_x=True,
    ),
    "D": EnvProfile(
        env_id="D", table_color=(78, 78, 84),
        drawer_base=(0.50, 0.13), slider_base=(0.33, 0.88),
        switch_pos=(0.10, 0.76), button_pos=(0.88, 0.76),
        bulb_pos=(0.10, 0.90), led_pos=(0.88, 0.90),
        cam_pan=(0.0, 0.04),
    ),
}


def builtin_profiles() -> dict[str, EnvProfile]:
    return dict(_BUILTIN_PROFILES)


def get_profile(env_id: str) -> EnvProfile:
    try:
        return _BUILTIN_PROFILES[env_id]
    except KeyError:
        raise ValidationError(f"unknown environment profile {env_id!r}") from None


def save_profiles(path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump({k: p.to_json() for k, p in _BUILTIN_PROFILES.items()}, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def load_profiles(path: str) -> dict[str, EnvProfile]:
    with open(path) as f:
        raw = json.load(f)
    return {k: EnvProfile.from_json(v) for k, v in raw.items()}


@dataclass(frozen=True)
class ObjectState:
    """Pose of one block."""

    color: str
    x: float
    y: float
    z: float

    @property
    def pos(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class WorldState:
    """Full simulator state; value type, replaced rather than mutated."""

    env_id: str
    gripper: tuple[float, float, float]
    rot: tuple[float, float, float]
    closed: bool
    held: str | None
    objects: tuple[tuple[str, ObjectState], ...]  # ordered (id, state) pairs
    drawer_open: float
    slider_pos: float
    switch_on: bool
    button_led_on: bool
    step_count: int = 0

    def obj(self, object_id: str) -> ObjectState:
        for oid, st in self.objects:
            if oid == object_id:
                return st
        raise KeyError(object_id)

    @property
    def object_ids(self) -> tuple[str, ...]:
        return tuple(oid for oid, _ in self.objects)

    @property
    def gripper_pos(self) -> np.ndarray:
        return np.array(self.gripper)

    def proprio(self) -> np.ndarray:
        return np.array(
            [*self.gripper, *self.rot, -1.0 if self.closed else 1.0], dtype=np.float64
        )

    def to_json(self) -> dict:
        return {
            "env_id": self.env_id,
            "gripper": list(self.gripper),
            "rot": list(self.rot),
            "closed": self.closed,
            "held": self.held,
            "objects": [[oid, [o.color, o.x, o.y, o.z]] for oid, o in self.objects],
            "drawer_open": self.drawer_open,
            "slider_pos": self.slider_pos,
            "switch_on": self.switch_on,
            "button_led_on": self.button_led_on,
            "step_count": self.step_count,
        }

    @staticmethod
    def from_json(obj: dict) -> "WorldState":
        objects = tuple(
            (oid, ObjectState(color=o[0], x=o[1], y=o[2], z=o[3]))
            for oid, o in obj["objects"]
        )
        return WorldState(
            env_id=obj["env_id"],
            gripper=tuple(obj["gripper"]),
            rot=tuple(obj["rot"]),
            closed=obj["closed"],
            held=obj["held"],
            objects=objects,
            drawer_open=obj["drawer_open"],
            slider_pos=obj["slider_pos"],
            switch_on=obj["switch_on"],
            button_led_on=obj["button_led_on"],
            step_count=obj["step_count"],
        )


def drawer_handle(state: WorldState, profile: EnvProfile | None = None) -> np.ndarray:
    p = profile or get_profile(state.env_id)
    return np.array([p.drawer_base[0], p.drawer_base[1] + DRAWER_TRAVEL * state.drawer_open, 0.02])


def slider_handle(state: WorldState, profile: EnvProfile | None = None) -> np.ndarray:
    p = profile or get_profile(state.env_id)
    return np.array([p.slider_base[0] + SLIDER_TRAVEL * state.slider_pos, p.slider_base[1], 0.02])


def reset(profile: EnvProfile | str, seed: int) -> WorldState:
    """Deterministic initial state for (profile, seed).

    Blocks are placed by rejection sampling with a minimum separation; fixture
    scalars and device flags are drawn uniformly.  The draw order is fixed, so
    the same inputs always give the same state.
    """
    if isinstance(profile, str):
        profile = get_profile(profile)
    rng = np.random.default_rng(seed)
    placed: list[tuple[float, float]] = []
    objects = []
    for oid in BLOCK_IDS:
        for _attempt in range(1000):
            x = rng.uniform(*BLOCK_SPAWN[0])
            y = rng.uniform(*BLOCK_SPAWN[1])
            if all((x - px) ** 2 + (y - py) ** 2 >= BLOCK_MIN_SEPARATION**2 for px, py in placed):
                break
        else:  # pragma: no cover - region is far from full
            raise RuntimeError("could not place blocks")
        placed.append((x, y))
        objects.append((oid, ObjectState(color=oid.split("_")[0], x=x, y=y, z=0.0)))
    drawer = float(rng.uniform(0.08, 0.92))
    slider = float(rng.uniform(0.08, 0.92))
    switch_on = bool(rng.integers(2))
    led_on = bool(rng.integers(2))
    return WorldState(
        env_id=profile.env_id,
        gripper=GRIPPER_HOME,
        rot=(0.0, 0.0, 0.0),
        closed=False,
        held=None,
        objects=tuple(objects),
        drawer_open=drawer,
        slider_pos=slider,
        switch_on=switch_on,
        button_led_on=led_on,
        step_count=0,
    )


def _pressed(pos, target_xy) -> bool:
    return pos[2] < PRESS_HEIGHT and (pos[0] - target_xy[0]) ** 2 + (
        pos[1] - target_xy[1]
    ) ** 2 <= PRESS_RADIUS**2


def step(state: WorldState, action) -> WorldState:
    """Advance the world by one action.

    Rules, in order: translate (clamped to the unit cube), accumulate rotation,
    set the gripper from the sign of action[6], grasp on the open->close edge,
    release on open (the block drops to the table), drag blocks/fixture handles
    with a closed empty gripper, and edge-trigger device toggles on press.
    """
    arr = np.asarray(action, dtype=np.float64)
    if arr.shape != (7,):
        raise ValidationError(f"action must have shape (7,), got {arr.shape}")
    if np.any(np.abs(arr[:6]) > 1.0 + 1e-12) or np.abs(arr[6]) > 1.0 + 1e-12:
        raise ValidationError("action out of [-1, 1] bounds")
    profile = get_profile(state.env_id)

    old_pos = state.gripper_pos
    new_pos = np.clip(old_pos + arr[:3] * STEP_DELTA, 0.0, 1.0)
    delta = new_pos - old_pos
    rot = tuple(np.asarray(state.rot) + arr[3:6] * STEP_DELTA)
    closed = bool(arr[6] < 0)

    held = state.held
    objects = dict(state.objects)
    drawer_open = state.drawer_open
    slider_pos = state.slider_pos

    if closed and not state.closed and held is None:
        # grasp the nearest block within reach of where the gripper ends up
        best, best_d = None, GRASP_RADIUS
        for oid, obj in state.objects:
            d = float(np.linalg.norm(obj.pos - new_pos))
            if d <= best_d:
                best, best_d = oid, d
        if best is not None:
            held = best
    elif not closed and held is not None:
        obj = objects[held]
        objects[held] = replace(obj, x=float(new_pos[0]), y=float(new_pos[1]), z=0.0)
        held = None

    if held is not None:
        obj = objects[held]
        objects[held] = replace(obj, x=float(new_pos[0]), y=float(new_pos[1]), z=float(new_pos[2]))
    elif closed and state.closed:
        # a closed empty gripper shoves blocks and drags fixture handles; contact
        # is judged at the step start so full-speed dragging cannot lose grip
        for oid, obj in list(objects.items()):
            if float(np.linalg.norm(obj.pos - old_pos)) <= GRASP_RADIUS:
                objects[oid] = replace(
                    obj,
                    x=float(np.clip(obj.x + delta[0], 0.0, 1.0)),
                    y=float(np.clip(obj.y + delta[1], 0.0, 1.0)),
                )
        if float(np.linalg.norm(drawer_handle(state, profile) - old_pos)) <= GRASP_RADIUS:
            drawer_open = float(np.clip(drawer_open + delta[1] / DRAWER_TRAVEL, 0.0, 1.0))
        if float(np.linalg.norm(slider_handle(state, profile) - old_pos)) <= GRASP_RADIUS:
            slider_pos = float(np.clip(slider_pos + delta[0] / SLIDER_TRAVEL, 0.0, 1.0))

    switch_on = state.switch_on
    led_on = state.button_led_on
    if _pressed(new_pos, profile.switch_pos) and not _pressed(old_pos, profile.switch_pos):
        switch_on = not switch_on
    if _pressed(new_pos, profile.button_pos) and not _pressed(old_pos, profile.button_pos):
        led_on = not led_on

    return WorldState(
        env_id=state.env_id,
        gripper=tuple(float(v) for v in new_pos),
        rot=tuple(float(v) for v in rot),
        closed=closed,
        held=held,
        objects=tuple((oid, objects[oid]) for oid in state.object_ids),
        drawer_open=drawer_open,
        slider_pos=slider_pos,
        switch_on=switch_on,
        button_led_on=led_on,
        step_count=state.step_count + 1,
    )
