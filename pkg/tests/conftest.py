from __future__ import annotations

from pathlib import Path

import pytest

from pausebench.corpus import load_corpus
from pausebench.tokenizer import load_vocab

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def vocab_path() -> Path:
    return FIXTURES / "test_vocab.ranks"


@pytest.fixture(scope="session")
def tokenizer(vocab_path):
    return load_vocab(vocab_path)


@pytest.fixture(scope="session")
def essays_dir() -> Path:
    return FIXTURES / "essays"


@pytest.fixture(scope="session")
def corpus(essays_dir):
    return load_corpus(essays_dir, "*.txt")


@pytest.fixture(scope="session")
def needles_path() -> Path:
    return FIXTURES / "needles.json"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion after a run."""
    lines = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or rep.when != "call":
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            lines[name] = verdict
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(f"{lines[name]:4s}  {name}")
