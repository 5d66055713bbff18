"""Instruction forge: turn annotated episodes into multimodal training data.

Five routes over one episode corpus: LANG passes annotations through, VOS
swaps annotated object mentions for crops, OIF renders the sentence as an
image, VGR cuts goal-reaching windows, VDL picks four demonstration frames.
A crop database (built from ground-truth detections, extendable with an
out-of-domain pool) feeds the VOS route.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os

import numpy as np

from . import raster, world as W
from .codec import DEFAULT_CONFIG, IDENTITY_STATS, encode_chunk, fit_stats, normalize
from .data import (
    atomic_write_json,
    list_episode_dirs,
    load_detections,
    load_episode,
    read_json,
    save_episode,
)
from .font import HARD_STYLE, PLAIN_STYLE, TextStyle, render_text_image
from .images import ImageStore, concat_views, decode_png, encode_png
from .policy import hold_action, oracle_action
from .tasks import NAMEABLE_OBJECTS, annotate, sample_feasible_task, success
from .types import (
    CHUNK_LEN,
    Episode,
    Frame,
    ImageRef,
    Instruction,
    InstructionForm,
    TextSpan,
    TrainingSample,
    ValidationError,
)

log = logging.getLogger(__name__)

FORM_ORDER = (
    InstructionForm.LANG,
    InstructionForm.VOS,
    InstructionForm.OIF,
    InstructionForm.VGR,
    InstructionForm.VDL,
)

VGR_SEG_LEN = 80
VGR_STRIDE = 40
VDL_FRAME_COUNT = 4

OIF_PREFIX = "follow the command in "
VGR_PREFIX = "reach the goal state in "
VDL_PREFIX = "perform the demonstrated actions in "


def _sub_rng(*parts) -> np.random.Generator:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def _sample_id(*parts) -> str:
    return hashlib.sha256(":".join(str(p) for p in parts).encode()).hexdigest()[:16]


# ---------------------------------------------------------------- demos


def generate_demo(
    profile_id: str,
    seed: int,
    resolution: int = 128,
    task: str | None = None,
    min_frames: int = 0,
    budget: int = 64,
) -> tuple[Episode, dict]:
    """Roll the scripted oracle on a fresh reset and record an episode.

    Returns the episode plus its ground-truth detections (frame 0).  The task
    defaults to a weighted draw over what is feasible in the initial state.
    """
    state = W.reset(profile_id, seed)
    if task is None:
        task = sample_feasible_task(state, _sub_rng("demo-task", profile_id, seed))
    annotation = annotate(task, state)
    det = {"0": raster.detections(state, resolution)}

    def snap(s: W.WorldState, t: int) -> Frame:
        return Frame(
            static_view=raster.render(s, "static", resolution),
            wrist_view=raster.render(s, "wrist", resolution),
            proprio=s.proprio(),
            timestep=t,
        )

    initial = state
    frames = [snap(state, 0)]
    actions = []
    done = False
    for _ in range(budget):
        a = oracle_action(state, task)
        state = W.step(state, a)
        actions.append(a)
        frames.append(snap(state, len(frames)))
        if success(task, initial, state):
            done = True
            break
    if not done:
        raise RuntimeError(f"oracle failed {task} on {profile_id}/{seed} within {budget} steps")
    while len(frames) < min_frames:
        a = hold_action(state)
        state = W.step(state, a)
        actions.append(a)
        frames.append(snap(state, len(frames)))

    episode = Episode(
        id=f"ep_{profile_id}_{seed}",
        frames=tuple(frames),
        actions=np.asarray(actions),
        annotation=annotation,
        env_id=profile_id,
        reset_seed=seed,
        task=task,
    )
    return episode, det


def generate_archive(
    out_dir: str,
    profiles: list[str],
    n: int,
    seed: int,
    resolution: int = 128,
    min_frames: int = 0,
) -> list[str]:
    """Generate n demo episodes round-robin over profiles; returns episode ids."""
    os.makedirs(out_dir, exist_ok=True)
    ids = []
    for i in range(n):
        profile_id = profiles[i % len(profiles)]
        ep_seed = seed * 1_000_003 + i
        episode, det = generate_demo(profile_id, ep_seed, resolution=resolution, min_frames=min_frames)
        save_episode(episode, os.path.join(out_dir, episode.id), detections=det)
        ids.append(episode.id)
    return ids


# ---------------------------------------------------------------- crop db


class CropDB:
    """Object-name -> crop images, each tagged in_domain or external."""

    def __init__(self, store: ImageStore | None = None):
        self.store = store or ImageStore()
        self.entries: dict[str, list[tuple[str, str]]] = {}

    def add(self, name: str, image: np.ndarray, provenance: str) -> str:
        if provenance not in ("in_domain", "external"):
            raise ValidationError(f"bad provenance {provenance!r}")
        iid = self.store.put(image)
        self.entries.setdefault(name, []).append((iid, provenance))
        return iid

    def crop_ids(self, name: str, provenance: str | None = None) -> list[str]:
        return [iid for iid, prov in self.entries.get(name, []) if provenance in (None, prov)]

    def provenance_of(self, iid: str) -> str:
        for rows in self.entries.values():
            for known, prov in rows:
                if known == iid:
                    return prov
        raise KeyError(iid)

    def sample(self, name: str, rng: np.random.Generator, provenance: str = "in_domain") -> str:
        pool = self.crop_ids(name, provenance)
        if not pool:
            raise ValidationError(f"no {provenance} crops for {name!r}")
        return pool[int(rng.integers(len(pool)))]

    def check_coverage(self, names, provenance: str | None = None) -> None:
        missing = sorted(n for n in set(names) if not self.crop_ids(n, provenance))
        if missing:
            raise ValidationError(f"crop db missing objects: {', '.join(missing)}")

    def save(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        self.store.flush(os.path.join(directory, "media"))
        index = {
            name: [{"image": iid, "provenance": prov} for iid, prov in rows]
            for name, rows in sorted(self.entries.items())
        }
        atomic_write_json({"objects": index}, os.path.join(directory, "index.json"))

    @staticmethod
    def load(directory: str) -> "CropDB":
        db = CropDB(ImageStore(os.path.join(directory, "media")))
        index = read_json(os.path.join(directory, "index.json"))["objects"]
        for name, rows in index.items():
            db.entries[name] = [(r["image"], r["provenance"]) for r in rows]
        return db


def build_crop_db(
    episode_dirs: list[str],
    db: CropDB | None = None,
    detections_override: str | None = None,
) -> CropDB:
    """Harvest in-domain crops from episode archives using their detections.

    Every detection row becomes one crop of the matching static frame.  Raises
    if an episode's annotation mentions an object with no detection anywhere.

    detections_override points at a JSON file of externally produced boxes,
    {episode_id: {frame_index: {object_name: [x0, y0, x1, y1]}}}; an entry
    there replaces the archived ground truth for that episode.
    """
    db = db or CropDB()
    override = read_json(detections_override) if detections_override else {}
    mentioned: set[str] = set()
    for ep_dir in episode_dirs:
        episode = load_episode(ep_dir)
        det = override.get(episode.id, None)
        if det is None:
            det = load_detections(ep_dir)
        mentioned.update(name for _span, name in episode.annotation.slots)
        for frame_idx, boxes in det.items():
            frame = episode.frames[int(frame_idx)]
            for name, (x0, y0, x1, y1) in boxes.items():
                db.add(name, frame.static_view[y0:y1, x0:x1], "in_domain")
    missing = sorted(m for m in mentioned if not db.crop_ids(m, "in_domain"))
    if missing:
        raise ValidationError(f"detections missing for annotated objects: {', '.join(missing)}")
    return db


def make_external_pool(out_dir: str, seed: int, per_object: int = 8) -> None:
    """Synthesize an out-of-domain crop pool (restyled sprite renders)."""
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_json({"seed": seed, "per_object": per_object}, os.path.join(out_dir, "pool.json"))
    for name in NAMEABLE_OBJECTS:
        obj_dir = os.path.join(out_dir, name)
        os.makedirs(obj_dir, exist_ok=True)
        for k in range(per_object):
            bg = tuple(int(v) for v in rng.integers(30, 226, size=3))
            sprite = raster.object_sprite(name, background=bg)
            scale = int(rng.integers(1, 4))
            img = sprite.repeat(scale, axis=0).repeat(scale, axis=1)
            noise = rng.integers(-20, 21, size=img.shape[:2] + (1,))
            img = np.clip(img.astype(np.int16) + noise, 0, 255).astype(np.uint8)
            path = os.path.join(obj_dir, f"{name}_{k:03d}.png")
            tmp = path + ".tmp"
            with open(tmp, "wb") as f:
                f.write(encode_png(img))
            os.replace(tmp, path)


def ingest_external_crops(db: CropDB, directory: str) -> int:
    """Load <object_name>/*.png from a user directory as external crops."""
    count = 0
    for name in sorted(os.listdir(directory)):
        obj_dir = os.path.join(directory, name)
        if not os.path.isdir(obj_dir):
            continue
        if name not in NAMEABLE_OBJECTS:
            raise ValidationError(f"unknown object directory {name!r} in crop pool")
        for fname in sorted(os.listdir(obj_dir)):
            if fname.endswith(".png"):
                with open(os.path.join(obj_dir, fname), "rb") as f:
                    db.add(name, decode_png(f.read()), "external")
                count += 1
    return count


# ---------------------------------------------------------------- transforms


def chunk_starts(n_actions: int, chunk_len: int = CHUNK_LEN) -> list[int]:
    """Start timesteps of the non-overlapping whole chunks in an episode."""
    return list(range(0, n_actions - chunk_len + 1, chunk_len))


def _target_tokens(episode: Episode, t: int, stats, config) -> tuple[int, ...]:
    chunk = np.stack([normalize(a, stats) for a in episode.actions[t : t + CHUNK_LEN]])
    return tuple(encode_chunk(chunk, config))


def _obs_id(episode: Episode, t: int, store: ImageStore) -> str:
    frame = episode.frames[t]
    return store.put(concat_views(frame.static_view, frame.wrist_view))


def make_lang(episode, t, store, stats=IDENTITY_STATS, config=DEFAULT_CONFIG) -> TrainingSample:
    """LANG route: the annotation text passes through unmodified."""
    instr = Instruction(InstructionForm.LANG, (TextSpan(episode.annotation.text),))
    return TrainingSample(
        id=_sample_id("lang", episode.id, t),
        form=InstructionForm.LANG,
        episode_id=episode.id,
        t=t,
        obs_id=_obs_id(episode, t, store),
        instruction=instr,
        target_tokens=_target_tokens(episode, t, stats, config),
    )


def vos_segments(annotation, crop_ids: list[str]) -> tuple:
    """Replace each slotted mention with an image; non-slot text is untouched."""
    segs: list = []
    cursor = 0
    for ((start, end), _name), iid in zip(annotation.slots, crop_ids):
        if start > cursor:
            segs.append(TextSpan(annotation.text[cursor:start]))
        segs.append(ImageRef(iid))
        cursor = end
    if cursor < len(annotation.text):
        segs.append(TextSpan(annotation.text[cursor:]))
    return tuple(segs)


def make_vos(
    episode,
    t,
    crop_db: CropDB,
    store,
    rng=None,
    provenance: str = "in_domain",
    stats=IDENTITY_STATS,
    config=DEFAULT_CONFIG,
) -> TrainingSample:
    """VOS route: annotated object mentions become crop images."""
    ann = episode.annotation
    if not ann.slots:
        raise ValidationError(
            f"episode {episode.id} has no object slots; route it to the LANG subset"
        )
    rng = rng if rng is not None else _sub_rng("vos", episode.id, t)
    picked = []
    for (_span, name) in ann.slots:
        iid = crop_db.sample(name, rng, provenance)
        store.put_bytes(crop_db.store.get_bytes(iid))
        picked.append(iid)
    instr = Instruction(InstructionForm.VOS, vos_segments(ann, picked))
    return TrainingSample(
        id=_sample_id("vos", episode.id, t, *picked),
        form=InstructionForm.VOS,
        episode_id=episode.id,
        t=t,
        obs_id=_obs_id(episode, t, store),
        instruction=instr,
        target_tokens=_target_tokens(episode, t, stats, config),
    )


def make_oif(
    episode,
    t,
    store,
    style: TextStyle = PLAIN_STYLE,
    rng=None,
    stats=IDENTITY_STATS,
    config=DEFAULT_CONFIG,
) -> TrainingSample:
    """OIF route: the command arrives as a rendered text image."""
    img = render_text_image(episode.annotation.text, style, rng)
    iid = store.put(img)
    instr = Instruction(InstructionForm.OIF, (TextSpan(OIF_PREFIX), ImageRef(iid)))
    return TrainingSample(
        id=_sample_id("oif", episode.id, t, iid),
        form=InstructionForm.OIF,
        episode_id=episode.id,
        t=t,
        obs_id=_obs_id(episode, t, store),
        instruction=instr,
        target_tokens=_target_tokens(episode, t, stats, config),
    )


def vdl_indices(n_frames: int) -> list[int]:
    """Four demonstration frame indices, spread evenly over [0, T-1]."""
    if n_frames < VDL_FRAME_COUNT:
        raise ValidationError(f"need >= {VDL_FRAME_COUNT} frames, got {n_frames}")
    return [round(i * (n_frames - 1) / (VDL_FRAME_COUNT - 1)) for i in range(VDL_FRAME_COUNT)]


def make_vdl(episode, t, store, stats=IDENTITY_STATS, config=DEFAULT_CONFIG) -> TrainingSample | None:
    """VDL route: four static frames summarize the demonstration.

    Episodes shorter than four frames are skipped with a warning.
    """
    if len(episode) < VDL_FRAME_COUNT:
        log.warning("episode %s too short for a video demo (%d frames); skipped", episode.id, len(episode))
        return None
    ids = [store.put(episode.frames[i].static_view) for i in vdl_indices(len(episode))]
    segs = (TextSpan(VDL_PREFIX), *[ImageRef(i) for i in ids])
    instr = Instruction(InstructionForm.VDL, segs)
    return TrainingSample(
        id=_sample_id("vdl", episode.id, t),
        form=InstructionForm.VDL,
        episode_id=episode.id,
        t=t,
        obs_id=_obs_id(episode, t, store),
        instruction=instr,
        target_tokens=_target_tokens(episode, t, stats, config),
    )


def vgr_windows(n_frames: int, seg_len: int = VGR_SEG_LEN, stride: int = VGR_STRIDE) -> list[int]:
    """Window start indices; episodes shorter than seg_len yield none."""
    if seg_len < CHUNK_LEN + 1 or stride < 1:
        raise ValidationError("bad segment geometry")
    return [s for s in range(0, max(n_frames - seg_len, 0) + 1, stride) if s + seg_len <= n_frames]


def extract_vgr_segments(
    episode,
    store,
    seg_len: int = VGR_SEG_LEN,
    stride: int = VGR_STRIDE,
    stats=IDENTITY_STATS,
    config=DEFAULT_CONFIG,
) -> list[TrainingSample]:
    """VGR route: fixed-length windows; the last frame becomes the goal image,
    the first chunk of the window's actions becomes the target."""
    out = []
    for s in vgr_windows(len(episode), seg_len, stride):
        goal_id = store.put(episode.frames[s + seg_len - 1].static_view)
        instr = Instruction(InstructionForm.VGR, (TextSpan(VGR_PREFIX), ImageRef(goal_id)))
        out.append(
            TrainingSample(
                id=_sample_id("vgr", episode.id, s, goal_id),
                form=InstructionForm.VGR,
                episode_id=episode.id,
                t=s,
                obs_id=_obs_id(episode, s, store),
                instruction=instr,
                target_tokens=_target_tokens(episode, s, stats, config),
            )
        )
    return out


# ---------------------------------------------------------------- mixing


def mix_dataset(episode_ids: list[str], fraction: float, seed: int) -> dict:
    """Draw the five per-form subsets: independent draws of ceil(fraction*N)
    episodes each, without replacement inside a subset."""
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    n = len(episode_ids)
    if n == 0:
        raise ValidationError("empty episode corpus")
    k = math.ceil(fraction * n)
    rng = np.random.default_rng(seed)
    draws = {}
    for form in FORM_ORDER:
        picked = rng.choice(n, size=k, replace=False)
        draws[form.value] = sorted(episode_ids[i] for i in picked)
    return {
        "seed": seed,
        "fraction": fraction,
        "n_episodes": n,
        "subset_size": k,
        "total_draws": k * len(FORM_ORDER),
        "subsets": draws,
    }


def build_dataset(
    archive_root: str,
    out_dir: str,
    fraction: float,
    seed: int,
    crop_db: CropDB,
    vgr_seg_len: int = VGR_SEG_LEN,
    vgr_stride: int = VGR_STRIDE,
    config=DEFAULT_CONFIG,
) -> dict:
    """Materialize the mixed five-route dataset from an episode archive.

    Normalization stats are fitted on the whole corpus; the finished sample
    list is shuffled with a recorded permutation; everything needed to
    regenerate the dataset byte-identically lands in manifest.json.
    """
    from .codec import config_hash, save_stats

    ep_dirs = list_episode_dirs(archive_root)
    if not ep_dirs:
        raise ValidationError(f"no episodes under {archive_root}")
    ids = [os.path.basename(d) for d in ep_dirs]
    manifest = mix_dataset(ids, fraction, seed)

    all_actions = []
    for d in ep_dirs:
        meta = read_json(os.path.join(d, "meta.json"))
        all_actions.extend(meta["actions"])
    stats = fit_stats(np.asarray(all_actions))

    drawn_by_episode: dict[str, list[InstructionForm]] = {}
    for form in FORM_ORDER:
        for eid in manifest["subsets"][form.value]:
            drawn_by_episode.setdefault(eid, []).append(form)

    os.makedirs(out_dir, exist_ok=True)
    store = ImageStore(os.path.join(out_dir, "media"))
    samples = []
    for ep_dir, eid in zip(ep_dirs, ids):
        forms = drawn_by_episode.get(eid)
        if not forms:
            continue
        episode = load_episode(ep_dir)
        starts = chunk_starts(episode.actions.shape[0])
        for form in forms:
            if form == InstructionForm.LANG:
                samples.extend(make_lang(episode, t, store, stats, config) for t in starts)
            elif form == InstructionForm.VOS:
                for t in starts:
                    rng = _sub_rng("vos", seed, eid, t)
                    samples.append(make_vos(episode, t, crop_db, store, rng, "in_domain", stats, config))
            elif form == InstructionForm.OIF:
                samples.extend(make_oif(episode, t, store, PLAIN_STYLE, None, stats, config) for t in starts)
            elif form == InstructionForm.VDL:
                for t in starts:
                    s = make_vdl(episode, t, store, stats, config)
                    if s is not None:
                        samples.append(s)
            elif form == InstructionForm.VGR:
                samples.extend(extract_vgr_segments(episode, store, vgr_seg_len, vgr_stride, stats, config))

    perm = np.random.default_rng([seed, 0xD5]).permutation(len(samples))
    samples = [samples[i] for i in perm]

    from .data import write_samples_jsonl

    counts: dict[str, int] = {f.value: 0 for f in FORM_ORDER}
    for s in samples:
        counts[s.form.value] += 1
    manifest["samples_per_form"] = counts
    manifest["n_samples"] = len(samples)
    manifest["shuffle"] = [int(i) for i in perm]
    manifest["codec"] = config.to_json()
    manifest["codec_hash"] = config_hash(config)
    manifest["vgr"] = {"seg_len": vgr_seg_len, "stride": vgr_stride}

    write_samples_jsonl(samples, os.path.join(out_dir, "samples.jsonl"))
    store.flush()
    save_stats(stats, os.path.join(out_dir, "norm_stats.json"))
    atomic_write_json(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def stage_manifest(stage: int, dataset_dir: str | None = None) -> dict:
    """Two-stage training manifest: stage 1 is the grounding warm-up
    placeholder, stage 2 points at a built dataset's shuffled samples."""
    if stage == 1:
        return {
            "stage": 1,
            "purpose": "multi-image grounding warm-up",
            "datasets": [],
            "note": "placeholder; this package only builds the action-tuning data",
        }
    if stage == 2:
        if not dataset_dir:
            raise ValidationError("stage 2 manifest needs a built dataset directory")
        manifest = read_json(os.path.join(dataset_dir, "manifest.json"))
        return {
            "stage": 2,
            "dataset": os.path.abspath(dataset_dir),
            "n_samples": manifest["n_samples"],
            "samples_per_form": manifest["samples_per_form"],
            "shuffle": manifest["shuffle"],
            "codec_hash": manifest["codec_hash"],
        }
    raise ValidationError(f"unknown stage {stage}")
