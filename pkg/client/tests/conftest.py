import pytest

from evalcli import run_oevla


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory):
    """The 10-sequence loopback suite used by the transparency tests."""
    out = tmp_path_factory.mktemp("suite") / "lang10"
    run_oevla("bench", "gen", "--out", out, "--profile", "D", "--form", "lang",
              "--difficulty", "base", "--n", 10, "--seed", 3)
    return out


@pytest.fixture(scope="session")
def tiny_suite_dir(tmp_path_factory):
    """Single-sequence suite for tests that end the session early."""
    out = tmp_path_factory.mktemp("suite") / "lang1"
    run_oevla("bench", "gen", "--out", out, "--profile", "D", "--form", "lang",
              "--difficulty", "base", "--n", 1, "--seed", 4)
    return out
