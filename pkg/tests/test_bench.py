import collections
import hashlib
import os

import pytest

from oevla import bench
from oevla.codec import DEFAULT_CONFIG, config_hash
from oevla.tasks import TASK_IDS, feasible
from oevla.types import ImageRef, InstructionForm, TextSpan, ValidationError
from oevla import world as W


def tree_hash(root):
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for fn in sorted(filenames):
            p = os.path.join(dirpath, fn)
            h.update(os.path.relpath(p, root).encode())
            h.update(open(p, "rb").read())
    return h.hexdigest()


def test_gen_sequences_shape():
    plans = bench.gen_sequences("D", 6, seed=11)
    assert len(plans) == 6
    assert [p["id"] for p in plans] == [f"seq-{i:04d}" for i in range(6)]
    assert all(len(p["tasks"]) == bench.CHAIN_LEN for p in plans)
    assert all(p["reset_seed"] == 11 * 1_000_003 + i for i, p in enumerate(plans))


def test_gen_sequences_deterministic():
    a = bench.gen_sequences("C", 5, seed=4)
    b = bench.gen_sequences("C", 5, seed=4)
    assert a == b
    c = bench.gen_sequences("C", 5, seed=5)
    assert a != c


def test_chains_have_no_immediate_repeats():
    plans = bench.gen_sequences("A", 20, seed=2)
    for p in plans:
        for t1, t2 in zip(p["tasks"], p["tasks"][1:]):
            assert t1 != t2


def test_chains_start_feasible():
    plans = bench.gen_sequences("B", 10, seed=8)
    for p in plans:
        state = W.reset("B", p["reset_seed"])
        assert feasible(p["tasks"][0], state)


def test_task_frequency_within_band():
    plans = bench.gen_sequences("D", 120, seed=31)
    counts = collections.Counter(t for p in plans for t in p["tasks"])
    total = sum(counts.values())
    lo, hi = 0.8 / len(TASK_IDS), 1.2 / len(TASK_IDS)
    for task in TASK_IDS:
        frac = counts[task] / total
        assert lo <= frac <= hi, f"{task}: {frac:.4f} outside [{lo:.4f}, {hi:.4f}]"


def test_suite_lang_instructions(lang_suite):
    assert lang_suite.meta["form"] == "lang"
    assert lang_suite.meta["codec_hash"] == config_hash(DEFAULT_CONFIG)
    for seq in lang_suite.sequences:
        assert len(seq.subtasks) == bench.CHAIN_LEN
        for sub in seq.subtasks:
            inst = sub.instruction
            assert inst.form == InstructionForm.LANG
            assert inst.image_ids == ()
            assert inst.text.strip()


@pytest.fixture(scope="module")
def vos_base_suite():
    return bench.build_suite("A", InstructionForm.VOS, "base", 4, seed=17)


@pytest.fixture(scope="module")
def vos_hard_suite(crop_db):
    return bench.build_suite("A", InstructionForm.VOS, "hard", 4, seed=17, crop_db=crop_db)


def test_vos_base_crops_all_in_domain(vos_base_suite, crop_db):
    # base-difficulty crops come from the evaluation env itself, never the
    # external pool
    external = {
        iid
        for rows in crop_db.entries.values()
        for iid, prov in rows
        if prov == "external"
    }
    seen = 0
    for seq in vos_base_suite.sequences:
        for sub in seq.subtasks:
            for iid in sub.instruction.image_ids:
                seen += 1
                assert iid not in external
    assert seen > 0


def test_vos_hard_crops_all_external(vos_hard_suite, crop_db):
    external = {
        iid
        for rows in crop_db.entries.values()
        for iid, prov in rows
        if prov == "external"
    }
    seen = 0
    for seq in vos_hard_suite.sequences:
        for sub in seq.subtasks:
            for iid in sub.instruction.image_ids:
                seen += 1
                assert iid in external
    assert seen > 0


def test_vos_hard_without_pool_rejected():
    with pytest.raises(ValidationError):
        bench.build_suite("A", InstructionForm.VOS, "hard", 2, seed=1, crop_db=None)


def test_vos_text_matches_base_annotation(vos_base_suite):
    # non-slot words survive verbatim; slot replaced by an image segment
    for seq in vos_base_suite.sequences:
        for sub in seq.subtasks:
            segs = sub.instruction.segments
            kinds = [type(s).__name__ for s in segs]
            assert "ImageRef" in kinds
            assert any(isinstance(s, TextSpan) and s.text for s in segs)


def test_oif_suites_differ_by_difficulty():
    base = bench.build_suite("B", InstructionForm.OIF, "base", 3, seed=6)
    hard = bench.build_suite("B", InstructionForm.OIF, "hard", 3, seed=6)
    base_ids = [
        iid
        for seq in base.sequences
        for sub in seq.subtasks
        for iid in sub.instruction.image_ids
    ]
    hard_ids = [
        iid
        for seq in hard.sequences
        for sub in seq.subtasks
        for iid in sub.instruction.image_ids
    ]
    assert base_ids and hard_ids
    assert set(base_ids).isdisjoint(hard_ids)
    # base renders are reused across sequences for identical text; hard ones
    # are per-instruction randomized so collisions are rare
    assert len(set(hard_ids)) == len(hard_ids)


def test_vgr_goal_present_and_square():
    suite = bench.build_suite("C", InstructionForm.VGR, "base", 3, seed=9)
    for seq in suite.sequences:
        for sub in seq.subtasks:
            ids = sub.instruction.image_ids
            assert len(ids) == 1
            png = suite.store.get_bytes(ids[0])
            from oevla.images import decode_png

            arr = decode_png(png)
            assert arr.shape == (128, 128, 3)


def test_vdl_four_frames():
    suite = bench.build_suite("C", InstructionForm.VDL, "base", 3, seed=9)
    for seq in suite.sequences:
        for sub in seq.subtasks:
            assert len(sub.instruction.image_ids) == 4


def test_hard_vgr_uses_alternate_profiles():
    assert bench._alternate_profile("D", 0, 0) != "D"
    alts = {bench._alternate_profile("D", i, k) for i in range(4) for k in range(5)}
    assert "D" not in alts
    assert len(alts) == 3  # cycles through all three non-eval profiles


def test_save_load_round_trip(tmp_path, lang_suite):
    out = str(tmp_path / "suite")
    bench.save_suite(lang_suite, out)
    loaded = bench.load_suite(out)
    assert loaded.meta == lang_suite.meta
    assert len(loaded.sequences) == len(lang_suite.sequences)
    for a, b in zip(loaded.sequences, lang_suite.sequences):
        assert a.id == b.id
        assert a.reset_seed == b.reset_seed
        assert [s.task for s in a.subtasks] == [s.task for s in b.subtasks]
        for sa, sb in zip(a.subtasks, b.subtasks):
            assert sa.instruction.to_json() == sb.instruction.to_json()


def test_saved_suite_regenerates_byte_identical(tmp_path):
    d1, d2 = str(tmp_path / "s1"), str(tmp_path / "s2")
    for d in (d1, d2):
        suite = bench.build_suite("B", InstructionForm.OIF, "base", 3, seed=14)
        bench.save_suite(suite, d)
    assert tree_hash(d1) == tree_hash(d2)


def test_media_suite_stores_pngs(tmp_path):
    suite = bench.build_suite("A", InstructionForm.VGR, "base", 2, seed=20)
    out = str(tmp_path / "vgr")
    bench.save_suite(suite, out)
    media = os.path.join(out, "media")
    assert os.path.isdir(media)
    assert any(fn.endswith(".png") for fn in os.listdir(media))
