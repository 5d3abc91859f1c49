"""Subgraph sampling: seeded ego-graph union, degree filtering, edge pruning.

The pipeline is ego-graphs -> union -> low-degree filter -> random prune,
with an optional protected triple set that must survive both the filter and
the prune (used to guarantee shortest-path edges stay in the graph).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from kgtextbench.graph import KnowledgeGraph, Triple
from kgtextbench.rng import child_rng

log = logging.getLogger(__name__)

DEFAULT_CORE_CATEGORY = "country"
MAX_SAMPLE_ATTEMPTS = 16


class SamplingError(RuntimeError):
    """Sampling could not produce a non-empty subgraph."""


@dataclass(frozen=True)
class SamplingParams:
    """Per-task sampling knobs (seed count, radius, size and degree bounds)."""

    num_seed_entities: int = 10
    radius: int = 1
    max_edges: int = 200
    min_degree: int = 1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_seed_entities < 1 or self.max_edges < 1 or self.min_degree < 1:
            raise ValueError("counts must be >= 1")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.max_edges < self.num_seed_entities:
            raise ValueError("max_edges must be >= num_seed_entities")


@dataclass(frozen=True)
class Subgraph:
    """A sampled subgraph plus the seeds and protected triples behind it."""

    graph: KnowledgeGraph
    seed_entities: tuple[int, ...]
    protected: tuple[Triple, ...] = ()

    def __post_init__(self) -> None:
        for t in self.protected:
            if not self.graph.contains_triple(*t):
                raise ValueError(f"protected triple {tuple(t)} missing from subgraph")


def ego_graph(kg: KnowledgeGraph, entity: int, radius: int) -> list[Triple]:
    """All triples whose two endpoints are within ``radius`` undirected hops.

    Returned in the source graph's stored order.
    """
    within = kg.bfs_distances(entity, max_depth=radius)
    triples: set[Triple] = set()
    for u in within:
        for r, o in kg.out_index.get(u, ()):
            if o in within:
                triples.add(Triple(u, r, o))
    return sorted(triples, key=kg.triple_position)


def min_degree_filter(triples: list[Triple], min_degree: int) -> list[Triple]:
    """Iteratively drop entities with total degree < ``min_degree``.

    Removal of an entity deletes its incident triples, which can push other
    entities below the threshold; iteration runs to a fixed point.
    ``min_degree=1`` is the identity (entities of triples always have >= 1).
    """
    if min_degree < 1:
        raise ValueError("min_degree must be >= 1")
    current = list(triples)
    while True:
        deg: dict[int, int] = {}
        for t in current:
            deg[t.subject] = deg.get(t.subject, 0) + 1
            deg[t.object] = deg.get(t.object, 0) + 1
        doomed = {e for e, d in deg.items() if d < min_degree}
        if not doomed:
            return current
        current = [t for t in current if t.subject not in doomed and t.object not in doomed]


def prune_to_max_edges(
    triples: list[Triple],
    protected: set[Triple],
    max_edges: int,
    rng: random.Random,
) -> list[Triple]:
    """Uniformly drop non-protected triples until at most ``max_edges`` remain.

    Relative order of the kept triples is preserved; deterministic for a
    given rng state.
    """
    if len(protected) > max_edges:
        raise ValueError("more protected triples than max_edges allows")
    if len(triples) <= max_edges:
        return list(triples)
    removable = [t for t in triples if t not in protected]
    n_remove = len(triples) - max_edges
    removed = set(rng.sample(removable, n_remove))
    return [t for t in triples if t not in removed]


def _union_ego_graphs(kg: KnowledgeGraph, seeds: list[int], radius: int) -> list[Triple]:
    union: set[Triple] = set()
    for seed in seeds:
        union.update(ego_graph(kg, seed, radius))
    return sorted(union, key=kg.triple_position)


def _has_duplicate_labels(kg: KnowledgeGraph, triples: list[Triple], seeds: list[int]) -> bool:
    ids = set(seeds)
    for t in triples:
        ids.add(t.subject)
        ids.add(t.object)
    labels = {kg.entities[e] for e in ids}
    return len(labels) != len(ids)


def seed_entity_pool(kg: KnowledgeGraph, core_category: str = DEFAULT_CORE_CATEGORY) -> list[int]:
    """Entities eligible as sampling seeds: the core category when the graph
    is categorised, otherwise every entity."""
    if kg.entity_category:
        pool = kg.entity_ids_by_category(core_category)
        if pool:
            return pool
    return sorted(kg.entities)


def sample_subgraph(
    kg: KnowledgeGraph,
    params: SamplingParams,
    seed_entities: list[int] | None = None,
    protected: tuple[Triple, ...] = (),
    core_category: str = DEFAULT_CORE_CATEGORY,
) -> Subgraph:
    """Draw a subgraph: ego-graph union, min-degree filter, then pruning.

    When ``seed_entities`` is not supplied, seeds are drawn uniformly without
    replacement from the core-entity pool using a child stream of
    ``params.rng_seed``.  If filtering empties the graph the draw is retried
    with the next child stream, up to a bounded number of attempts.
    """
    protected = tuple(Triple(*t) for t in protected)
    for t in protected:
        if not kg.contains_triple(*t):
            raise ValueError(f"protected triple {tuple(t)} not in source graph")
    if seed_entities is not None:
        for e in seed_entities:
            if e not in kg.entities:
                raise KeyError(f"seed entity {e} missing from source graph")

    last_reason = "no attempts made"
    for attempt in range(MAX_SAMPLE_ATTEMPTS):
        rng = child_rng(params.rng_seed, "sample", attempt)
        if seed_entities is None:
            pool = seed_entity_pool(kg, core_category)
            if not pool:
                raise SamplingError("empty seed-entity pool")
            k = min(params.num_seed_entities, len(pool))
            seeds = rng.sample(pool, k)
        else:
            seeds = list(seed_entities)

        union = _union_ego_graphs(kg, seeds, params.radius)
        merged = union
        if protected:
            present = set(union)
            extra = [t for t in protected if t not in present]
            merged = sorted(union + extra, key=kg.triple_position)
        filtered = min_degree_filter(merged, params.min_degree)
        if protected:
            present = set(filtered)
            extra = [t for t in protected if t not in present]
            if extra:
                filtered = sorted(filtered + extra, key=kg.triple_position)
        if not filtered:
            last_reason = f"min-degree filter emptied the graph (attempt {attempt})"
            if seed_entities is not None:
                break
            continue
        pruned = prune_to_max_edges(filtered, set(protected), params.max_edges, rng)
        if _has_duplicate_labels(kg, pruned, seeds):
            last_reason = f"subgraph contains duplicate entity labels (attempt {attempt})"
            if seed_entities is not None:
                break
            continue
        graph = kg.restricted_to(pruned, extra_entities=seeds)
        return Subgraph(graph=graph, seed_entities=tuple(seeds), protected=protected)
    raise SamplingError(last_reason)
