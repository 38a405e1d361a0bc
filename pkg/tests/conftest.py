import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent
MINI_DIR = REPO_ROOT / "data" / "mini"

STUB_SCORER = TESTS_DIR / "stub_scorer.py"


def stub_command(*flags: str) -> list[str]:
    return [sys.executable, str(STUB_SCORER), *flags]


@pytest.fixture
def stub_cmd():
    return stub_command()


@pytest.fixture(scope="session")
def mini_paths():
    paths = {
        "corpus": MINI_DIR / "corpus.sgml",
        "topics": MINI_DIR / "topics.sgml",
        "qrels": MINI_DIR / "qrels.txt",
        "folds": MINI_DIR / "folds.json",
    }
    for name, p in paths.items():
        assert p.is_file(), f"bundled mini fixture missing: {p}"
    return paths
