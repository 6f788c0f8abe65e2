import json
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
sys.path.insert(0, str(Path(__file__).resolve().parent))

from symtrans.ir import parse_module  # noqa: E402
from symtrans.solver import find_solver  # noqa: E402

HAVE_SOLVER = find_solver() is not None
needs_solver = pytest.mark.skipif(not HAVE_SOLVER, reason="no SMT solver binary on PATH")


def manifest() -> dict:
    return json.loads((CORPUS / "manifest.json").read_text())["programs"]


def load(name: str):
    return parse_module((CORPUS / f"{name}.sir").read_text())


@pytest.fixture(scope="session")
def corpus_manifest():
    return manifest()


# lines printed by the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
