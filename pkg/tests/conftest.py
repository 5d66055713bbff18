import pytest

from oevla import data, forge
from oevla.bench import build_suite
from oevla.types import InstructionForm


@pytest.fixture(scope="session")
def archive_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("archive"))
    forge.generate_archive(out, ["A", "B", "C"], 9, seed=5)
    return out


@pytest.fixture(scope="session")
def crop_db(tmp_path_factory, archive_dir):
    db = forge.build_crop_db(data.list_episode_dirs(archive_dir))
    pool = str(tmp_path_factory.mktemp("pool"))
    forge.make_external_pool(pool, seed=9, per_object=4)
    forge.ingest_external_crops(db, pool)
    return db


@pytest.fixture(scope="session")
def lang_suite():
    return build_suite("D", InstructionForm.LANG, "base", 8, 21)


@pytest.fixture(scope="session")
def padded_episode():
    episode, detections = forge.generate_demo("A", 42, min_frames=85)
    return episode
