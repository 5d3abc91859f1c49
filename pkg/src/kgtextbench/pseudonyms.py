"""Entity-label pseudonymization.

Replaces entity labels with synthetic country-style names drawn from a fixed
CSV pool, so a model cannot answer from memorized facts about the real
entities.  Topology, ids and relation labels are untouched; only the label
map changes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from kgtextbench.graph import KnowledgeGraph
from kgtextbench.sampler import DEFAULT_CORE_CATEGORY, Subgraph

SCOPES = ("core_only", "all_entities")


class PoolExhaustedError(RuntimeError):
    """More entities in scope than usable pseudonyms in the pool."""


@dataclass(frozen=True)
class PseudonymPool:
    """Ordered list of unique synthetic labels."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("pseudonym pool is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("pseudonym pool contains duplicates")

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PseudonymPool":
        """Load a pool from a one-column CSV with header ``label``.

        With no path, the bundled ~700-name pool ships with the package.
        """
        if path is None:
            text = (
                resources.files("kgtextbench")
                .joinpath("data/pseudonyms.csv")
                .read_text(encoding="utf-8")
            )
        else:
            text = Path(path).read_text(encoding="utf-8")
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != "label":
            raise ValueError("pseudonym CSV must start with a 'label' header")
        return cls(labels=tuple(lines[1:]))


@dataclass(frozen=True)
class PseudonymMapping:
    """Injective entity-id -> synthetic-label mapping for one subgraph."""

    pairs: dict[int, str]

    def __post_init__(self) -> None:
        values = list(self.pairs.values())
        if len(set(values)) != len(values):
            raise ValueError("pseudonym mapping is not injective")

    def label(self, original_label: str, entity: int) -> str:
        return self.pairs.get(entity, original_label)


def _scoped_entities(graph: KnowledgeGraph, scope: str, core_category: str) -> list[int]:
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}, got {scope!r}")
    if scope == "all_entities" or not graph.entity_category:
        return sorted(graph.entities)
    return sorted(e for e in graph.entities if graph.entity_category.get(e) == core_category)


def build_mapping(
    subgraph: Subgraph,
    pool: PseudonymPool,
    rng: random.Random,
    scope: str = "core_only",
    core_category: str = DEFAULT_CORE_CATEGORY,
) -> PseudonymMapping:
    """Draw an injective mapping without replacement for the scoped entities.

    Pool entries that collide with any label already present in the subgraph
    are skipped (pseudonyms must stay disjoint from the graph's labels).
    Deterministic for a given rng state.
    """
    graph = subgraph.graph
    scoped = _scoped_entities(graph, scope, core_category)
    existing = set(graph.entities.values())
    usable = [p for p in pool.labels if p not in existing]
    if len(usable) < len(scoped):
        raise PoolExhaustedError(
            f"pool has {len(usable)} usable labels for {len(scoped)} scoped entities"
        )
    drawn = rng.sample(usable, len(scoped))
    return PseudonymMapping(pairs=dict(zip(scoped, drawn)))


def apply_mapping(subgraph: Subgraph, mapping: PseudonymMapping) -> Subgraph:
    """Subgraph with substituted labels; topology and ids unchanged."""
    graph = subgraph.graph
    for e in mapping.pairs:
        if e not in graph.entities:
            raise KeyError(f"mapping references entity {e} absent from subgraph")
    return Subgraph(
        graph=graph.relabelled(mapping.pairs),
        seed_entities=subgraph.seed_entities,
        protected=subgraph.protected,
    )
