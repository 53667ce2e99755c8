from pathlib import Path

import pytest

from vflight.pipeline import prepare

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


@pytest.fixture
def fig1():
    return prepare(corpus_text("fig1.vf"))


@pytest.fixture
def fig_a1():
    return prepare(corpus_text("figA1.vf"))


# Acceptance criteria record one line each; they are echoed at the end of the
# run whether or not output capture is on.
CRITERIA: dict[int, str] = {}


def record_criterion(n: int, ok: bool, text: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}"
    CRITERIA[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
