import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from _synth import make_regret_stream, make_wide_stream, write_rating_fixture


@pytest.fixture(scope="session")
def rating_fixture_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ratings.svm"
    write_rating_fixture(path)
    return path


@pytest.fixture(scope="session")
def regret_stream():
    return make_regret_stream()


@pytest.fixture(scope="session")
def wide_stream():
    return make_wide_stream()
