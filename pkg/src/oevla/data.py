"""On-disk formats: episode archives, sample JSONL, atomic JSON helpers.

An episode archive is one directory per episode:

    <id>/meta.json              id, env, seed, task, annotation, actions, proprio
    <id>/frames/000000_static.png
    <id>/frames/000000_wrist.png
    <id>/detections.json        ground-truth static-view bboxes (frame 0)

Training datasets are a samples.jsonl plus a content-addressed media/ dir.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .images import decode_png, encode_png
from .types import Episode, Frame, LanguageAnnotation, TrainingSample


def atomic_write_json(obj, path: str, indent: int | None = 2) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(obj, f, indent=indent, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def read_json(path: str):
    with open(path) as f:
        return json.load(f)


def save_episode(episode: Episode, directory: str, detections: dict | None = None) -> None:
    """Write one episode archive.  Frame files are positional, 6-digit indices."""
    frames_dir = os.path.join(directory, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    for frame in episode.frames:
        for view, img in (("static", frame.static_view), ("wrist", frame.wrist_view)):
            path = os.path.join(frames_dir, f"{frame.timestep:06d}_{view}.png")
            tmp = path + ".tmp"
            with open(tmp, "wb") as f:
                f.write(encode_png(img))
            os.replace(tmp, path)
    meta = {
        "id": episode.id,
        "env_id": episode.env_id,
        "reset_seed": episode.reset_seed,
        "task": episode.task,
        "annotation": episode.annotation.to_json(),
        "actions": [[float(v) for v in row] for row in episode.actions],
        "proprio": [[float(v) for v in f.proprio] for f in episode.frames],
        "n_frames": len(episode.frames),
    }
    atomic_write_json(meta, os.path.join(directory, "meta.json"))
    if detections is not None:
        atomic_write_json(detections, os.path.join(directory, "detections.json"))


def load_episode(directory: str) -> Episode:
    meta = read_json(os.path.join(directory, "meta.json"))
    frames = []
    frames_dir = os.path.join(directory, "frames")
    for t in range(meta["n_frames"]):
        views = {}
        for view in ("static", "wrist"):
            with open(os.path.join(frames_dir, f"{t:06d}_{view}.png"), "rb") as f:
                views[view] = decode_png(f.read())
        frames.append(
            Frame(
                static_view=views["static"],
                wrist_view=views["wrist"],
                proprio=np.asarray(meta["proprio"][t]),
                timestep=t,
            )
        )
    return Episode(
        id=meta["id"],
        frames=tuple(frames),
        actions=np.asarray(meta["actions"], dtype=np.float64).reshape(-1, 7),
        annotation=LanguageAnnotation.from_json(meta["annotation"]),
        env_id=meta["env_id"],
        reset_seed=meta.get("reset_seed", 0),
        task=meta.get("task", ""),
    )


def load_detections(directory: str) -> dict:
    path = os.path.join(directory, "detections.json")
    if not os.path.exists(path):
        return {}
    return read_json(path)


def list_episode_dirs(archive_root: str) -> list[str]:
    out = []
    for name in sorted(os.listdir(archive_root)):
        path = os.path.join(archive_root, name)
        if os.path.isdir(path) and os.path.exists(os.path.join(path, "meta.json")):
            out.append(path)
    return out


def write_samples_jsonl(samples, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        for sample in samples:
            f.write(json.dumps(sample.to_json(), sort_keys=True, separators=(",", ":")))
            f.write("\n")
    os.replace(tmp, path)


def read_samples_jsonl(path: str) -> list[TrainingSample]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(TrainingSample.from_json(json.loads(line)))
    return out
