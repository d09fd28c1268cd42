import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import DECK_REPO, write_repo  # noqa: E402

CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def deck_repo(tmp_path):
    return write_repo(tmp_path / "deck", DECK_REPO)


@pytest.fixture
def make_repo(tmp_path):
    def _make(files, name="repo"):
        return write_repo(tmp_path / name, files)

    return _make


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: int(k.split()[0][2:])):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
