from pathlib import Path

import pytest

from kgtextbench.graph import KnowledgeGraph, load_labeled_tsv
from kgtextbench.templates import load_templates

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fixture_graph() -> KnowledgeGraph:
    return load_labeled_tsv(
        DATA_DIR / "fixture_entities.tsv",
        DATA_DIR / "fixture_relations.tsv",
        DATA_DIR / "fixture_edges.tsv",
    )


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture(scope="session")
def synth_kg():
    from kgtextbench.synth import build_synthetic_kg

    return build_synthetic_kg(seed=13)


def eid(g: KnowledgeGraph, label: str) -> int:
    for e, lab in g.entities.items():
        if lab == label:
            return e
    raise KeyError(label)


def rid(g: KnowledgeGraph, label: str) -> int:
    for r, lab in g.relations.items():
        if lab == label:
            return r
    raise KeyError(label)


def read_golden(name: str) -> str:
    text = (GOLDEN_DIR / f"{name}.txt").read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text
