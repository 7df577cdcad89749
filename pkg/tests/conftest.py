from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))
sys.path.insert(0, str(REPO / "tests"))

FIXTURES = REPO / "fixtures"

BASE_URI = "http://localhost:8080"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def reals_graph():
    from semtex.modsys import build_graph

    return build_graph([FIXTURES / "main" / "reals.tex"])


@pytest.fixture(scope="session")
def compiled_corpus():
    """The fixture corpus compiled once for the whole session."""
    from semtex.cli import compile_corpus

    graph, docs = compile_corpus(
        [
            FIXTURES / "main" / "reals.tex",
            FIXTURES / "main" / "manual.tex",
            FIXTURES / "main" / "vdemo.tex",
        ],
        BASE_URI,
    )
    return graph, {d.doc_path: d for d in docs}
