"""Core domain types shared across the pipeline.

Everything here is an immutable value object.  Numpy payloads are marked
read-only on construction so accidental in-place mutation fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

ACTION_DIM = 7
CHUNK_LEN = 5

ENV_IDS = ("A", "B", "C", "D")


class ValidationError(ValueError):
    pass


def _frozen_array(values, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def check_action(action) -> np.ndarray:
    """Validate a single 7-dim action: dims 0-5 in [-1, 1], dim 6 exactly +/-1."""
    arr = _frozen_array(action, (ACTION_DIM,), "action")
    if np.any(arr[:6] < -1.0) or np.any(arr[:6] > 1.0):
        raise ValidationError("action dims 0-5 must lie in [-1, 1]")
    if arr[6] not in (-1.0, 1.0):
        raise ValidationError(f"action dim 6 must be exactly -1 or +1, got {arr[6]}")
    return arr


def check_chunk(chunk) -> np.ndarray:
    """Validate a (CHUNK_LEN, ACTION_DIM) action chunk."""
    arr = _frozen_array(chunk, (CHUNK_LEN, ACTION_DIM), "chunk")
    for row in arr:
        check_action(row)
    return arr


class InstructionForm(str, Enum):
    LANG = "lang"
    VOS = "vos"
    OIF = "oif"
    VGR = "vgr"
    VDL = "vdl"


@dataclass(frozen=True)
class TextSpan:
    """A literal text segment of an instruction."""

    text: str


@dataclass(frozen=True)
class ImageRef:
    """Reference to an image by content id (resolved against an ImageStore)."""

    image_id: str


Segment = Union[TextSpan, ImageRef]

# required ImageRef count per form; None means "at least one"
_FORM_IMAGE_COUNT = {
    InstructionForm.LANG: 0,
    InstructionForm.OIF: 1,
    InstructionForm.VGR: 1,
    InstructionForm.VDL: 4,
    InstructionForm.VOS: None,
}


@dataclass(frozen=True)
class Instruction:
    """An instruction: interleaved text and image segments for one form.

    Attributes:
        form: which open-ended instruction family this belongs to.
        segments: ordered text spans and image references.
    """

    form: InstructionForm
    segments: tuple[Segment, ...]

    def __post_init__(self):
        for seg in self.segments:
            if not isinstance(seg, (TextSpan, ImageRef)):
                raise ValidationError(f"bad segment type {type(seg).__name__}")
        n_images = sum(isinstance(s, ImageRef) for s in self.segments)
        want = _FORM_IMAGE_COUNT[self.form]
        if want is None:
            if n_images < 1:
                raise ValidationError(f"{self.form.value} instruction needs >=1 image, got 0")
        elif n_images != want:
            raise ValidationError(
                f"{self.form.value} instruction needs exactly {want} image(s), got {n_images}"
            )

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(s.image_id for s in self.segments if isinstance(s, ImageRef))

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.segments if isinstance(s, TextSpan))

    def to_json(self) -> dict:
        segs = []
        for s in self.segments:
            if isinstance(s, TextSpan):
                segs.append({"text": s.text})
            else:
                segs.append({"image": s.image_id})
        return {"form": self.form.value, "segments": segs}

    @staticmethod
    def from_json(obj: dict) -> "Instruction":
        segs: list[Segment] = []
        for s in obj["segments"]:
            if "text" in s:
                segs.append(TextSpan(s["text"]))
            else:
                segs.append(ImageRef(s["image"]))
        return Instruction(InstructionForm(obj["form"]), tuple(segs))


@dataclass(frozen=True)
class LanguageAnnotation:
    """Natural-language annotation for an episode with explicit object mentions.

    Attributes:
        text: the annotation sentence.
        slots: ((start, end), object_name) character spans marking mentions.
            Spans are half-open, non-overlapping and in ascending order.
    """

    text: str
    slots: tuple[tuple[tuple[int, int], str], ...] = ()

    def __post_init__(self):
        prev_end = 0
        for (start, end), name in self.slots:
            if not (0 <= start < end <= len(self.text)):
                raise ValidationError(f"slot ({start}, {end}) outside text of length {len(self.text)}")
            if start < prev_end:
                raise ValidationError("slots overlap or are out of order")
            if not name:
                raise ValidationError("empty slot object name")
            prev_end = end

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "slots": [[list(span), name] for span, name in self.slots],
        }

    @staticmethod
    def from_json(obj: dict) -> "LanguageAnnotation":
        slots = tuple(((s[0][0], s[0][1]), s[1]) for s in obj.get("slots", []))
        return LanguageAnnotation(obj["text"], slots)


@dataclass(frozen=True)
class Frame:
    """One observation frame.

    Attributes:
        static_view: (H, W, 3) uint8 scene camera image.
        wrist_view: (H, W, 3) uint8 gripper-centered image.
        proprio: 7 floats (xyz, rotation accumulators, gripper closed flag).
        timestep: index within the episode.
    """

    static_view: np.ndarray
    wrist_view: np.ndarray
    proprio: np.ndarray
    timestep: int

    def __post_init__(self):
        for name in ("static_view", "wrist_view"):
            arr = getattr(self, name)
            if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
                raise ValidationError(f"{name} must be (H, W, 3) uint8")
        object.__setattr__(self, "proprio", _frozen_array(self.proprio, (ACTION_DIM,), "proprio"))
        if self.timestep < 0:
            raise ValidationError("timestep must be >= 0")


@dataclass(frozen=True)
class Episode:
    """A recorded episode: T frames and T-1 actions.

    Attributes:
        id: stable identifier, unique within an archive.
        frames: observation frames, in time order.
        actions: (T-1, 7) float array, actions[t] transitions frame t -> t+1.
        annotation: language annotation with object mention slots.
        env_id: which environment profile produced the episode (A-D).
    """

    id: str
    frames: tuple[Frame, ...]
    actions: np.ndarray
    annotation: LanguageAnnotation
    env_id: str
    reset_seed: int = 0
    task: str = ""

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ValidationError(f"env_id must be one of {ENV_IDS}, got {self.env_id!r}")
        if len(self.frames) < 1:
            raise ValidationError("episode must contain at least one frame")
        acts = np.asarray(self.actions, dtype=np.float64)
        if acts.ndim != 2 or acts.shape[1] != ACTION_DIM:
            raise ValidationError(f"actions must be (T-1, {ACTION_DIM})")
        if acts.shape[0] != len(self.frames) - 1:
            raise ValidationError(
                f"frame/action mismatch: {len(self.frames)} frames vs {acts.shape[0]} actions"
            )
        acts = acts.copy()
        acts.flags.writeable = False
        object.__setattr__(self, "actions", acts)
        for t, frame in enumerate(self.frames):
            if frame.timestep != t:
                raise ValidationError(f"frame {t} carries timestep {frame.timestep}")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class ObsBlock:
    """Prompt block standing for the encoded observation image."""

    count: int


@dataclass(frozen=True)
class ImgBlock:
    """Prompt block standing for one encoded instruction image."""

    image_id: str
    count: int


@dataclass(frozen=True)
class LangBlock:
    """Prompt block of text token ids."""

    token_ids: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.token_ids)


PromptBlock = Union[ObsBlock, ImgBlock, LangBlock]


@dataclass(frozen=True)
class SegmentSequence:
    """Assembled prompt: one observation block followed by instruction blocks."""

    blocks: tuple[PromptBlock, ...]

    def __post_init__(self):
        if not self.blocks or not isinstance(self.blocks[0], ObsBlock):
            raise ValidationError("prompt must start with the observation block")
        for i, blk in enumerate(self.blocks):
            if isinstance(blk, ObsBlock) and i != 0:
                raise ValidationError("only one observation block allowed")
            if blk.count <= 0:
                raise ValidationError("prompt blocks must be non-empty")

    @property
    def total_tokens(self) -> int:
        return sum(b.count for b in self.blocks)


@dataclass(frozen=True)
class TrainingSample:
    """One supervised sample: observation + instruction -> action token ids.

    Attributes:
        id: content-derived identifier.
        form: instruction family of this sample.
        episode_id: source episode.
        t: chunk start timestep within the source episode.
        obs_id: image id of the concatenated (static|wrist) observation.
        instruction: the interleaved instruction.
        target_tokens: 35 action token ids (5 steps x 7 dims, timestep-major).
    """

    id: str
    form: InstructionForm
    episode_id: str
    t: int
    obs_id: str
    instruction: Instruction
    target_tokens: tuple[int, ...]

    def __post_init__(self):
        if len(self.target_tokens) != ACTION_DIM * CHUNK_LEN:
            raise ValidationError(
                f"target must have {ACTION_DIM * CHUNK_LEN} tokens, got {len(self.target_tokens)}"
            )
        if self.form != self.instruction.form:
            raise ValidationError("sample form does not match instruction form")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "form": self.form.value,
            "episode_id": self.episode_id,
            "t": self.t,
            "obs": self.obs_id,
            "segments": self.instruction.to_json()["segments"],
            "target": list(self.target_tokens),
        }

    @staticmethod
    def from_json(obj: dict) -> "TrainingSample":
        instr = Instruction.from_json({"form": obj["form"], "segments": obj["segments"]})
        return TrainingSample(
            id=obj["id"],
            form=InstructionForm(obj["form"]),
            episode_id=obj["episode_id"],
            t=obj["t"],
            obs_id=obj["obs"],
            instruction=instr,
            target_tokens=tuple(obj["target"]),
        )
