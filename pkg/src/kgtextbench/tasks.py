"""The five benchmark task families.

Each generator produces a question, a gold answer and task metadata over a
sampled subgraph.  All random choices index into id-ordered structures, never
labels, so generation on a pseudonymized twin of a graph makes identical
draws and yields the mapped answers.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Any

from kgtextbench.graph import KnowledgeGraph, Triple
from kgtextbench.sampler import (
    DEFAULT_CORE_CATEGORY,
    SamplingParams,
    Subgraph,
    sample_subgraph,
    seed_entity_pool,
)
from kgtextbench.templates import Templates

log = logging.getLogger(__name__)

TASK_IDS = (
    "TripleRetrieval",
    "ShortestPath",
    "AggByRelation",
    "AggNeighborProperty",
    "HighestDegree",
)

SHORTEST_PATH_ENUM_CAP = 64
_CORRUPTION_TRIES = 32
_PAIR_TRIES = 64


class GenerationError(RuntimeError):
    """The graph cannot support an instance of the requested task."""


class TieError(GenerationError):
    """Highest-degree argmax is not unique; caller should resample."""


@dataclass
class TaskInstance:
    task_id: str
    instance_index: int
    subgraph: Subgraph
    question: str
    gold: Any
    meta: dict[str, Any]
    rng_seed: int
    pseudo: bool = False


# -- TripleRetrieval ---------------------------------------------------------


def gen_triple_retrieval(
    subgraph: Subgraph,
    rng: random.Random,
    templates: Templates,
    instance_index: int = 0,
    rng_seed: int = 0,
    is_positive: bool | None = None,
) -> TaskInstance:
    """Ask whether one triple is present.

    Positives are drawn from the edge set; negatives corrupt one uniformly
    chosen slot of a drawn edge until the result is absent, switching slots
    when a slot cannot produce a miss.  Batch-level 50/50 balance is imposed
    by the caller through ``is_positive``.
    """
    g = subgraph.graph
    if not g.triples:
        raise GenerationError("graph has no edges")
    if is_positive is None:
        is_positive = rng.random() < 0.5
    if is_positive:
        s, r, o = g.triples[rng.randrange(len(g.triples))]
    else:
        base = g.triples[rng.randrange(len(g.triples))]
        entity_ids = list(g.entities)
        relation_ids = list(g.relations)
        slot_order = rng.sample((0, 1, 2), 3)
        corrupted = None
        for slot in slot_order:
            pool = relation_ids if slot == 1 else entity_ids
            for _ in range(_CORRUPTION_TRIES):
                repl = pool[rng.randrange(len(pool))]
                cand = list(base)
                if cand[slot] == repl:
                    continue
                cand[slot] = repl
                if not g.contains_triple(*cand):
                    corrupted = Triple(*cand)
                    break
            if corrupted is not None:
                break
        if corrupted is None:
            raise GenerationError("every corruption of the drawn edge exists in the graph")
        s, r, o = corrupted
    question = templates.question(
        "TripleRetrieval",
        subject=g.entities[s],
        relation=g.relations[r],
        object=g.entities[o],
    )
    meta = {
        "is_positive": is_positive,
        "subject": g.entities[s],
        "relation": g.relations[r],
        "object": g.entities[o],
    }
    return TaskInstance(
        task_id="TripleRetrieval",
        instance_index=instance_index,
        subgraph=subgraph,
        question=question,
        gold=is_positive,
        meta=meta,
        rng_seed=rng_seed,
    )


# -- ShortestPath -------------------------------------------------------------


def _path_edges(kg: KnowledgeGraph, path: list[int]) -> list[Triple]:
    """All source triples linking consecutive path entities, either direction."""
    edges: list[Triple] = []
    for u, v in zip(path, path[1:]):
        for r, o in kg.out_index.get(u, ()):
            if o == v:
                edges.append(Triple(u, r, o))
        for r, s in kg.in_index.get(u, ()):
            if s == v:
                edges.append(Triple(v, r, u))
    return sorted(set(edges), key=kg.triple_position)


def path_survives(g: KnowledgeGraph, path: list[int]) -> bool:
    """True iff every consecutive pair of the path shares an edge in ``g``."""
    for u, v in zip(path, path[1:]):
        if u not in g.entities or v not in g.entities:
            return False
        if v not in g.undirected_neighbors(u):
            return False
    return True


def shortest_path_question_and_gold(
    subgraph: Subgraph,
    kg: KnowledgeGraph,
    source: int,
    destination: int,
    source_paths: list[list[int]],
    capped: bool,
    templates: Templates,
) -> tuple[str, list[list[str]], dict[str, Any]]:
    """Question text, surviving gold paths and metadata on a sampled graph.

    Source paths can run through entities that pruning dropped; those are
    labelled from the source graph (they can never be gold answers, but the
    metadata keeps the full path set for validation).
    """
    g = subgraph.graph

    def label(e: int) -> str:
        return g.entities[e] if e in g.entities else kg.entities[e]

    gold_ids = [p for p in source_paths if path_survives(g, p)]
    if not gold_ids:
        raise GenerationError("no source shortest path survived sampling")
    gold = [[g.entities[e] for e in p] for p in gold_ids]
    question = templates.question(
        "ShortestPath",
        source=g.entities[source],
        destination=g.entities[destination],
    )
    meta = {
        "source": g.entities[source],
        "destination": g.entities[destination],
        "path_length": len(source_paths[0]) - 1,
        "paths_in_source": [[label(e) for e in p] for p in source_paths],
        "enumeration_capped": capped,
    }
    return question, gold, meta


def gen_shortest_path(
    kg: KnowledgeGraph,
    params: SamplingParams,
    rng: random.Random,
    templates: Templates,
    instance_index: int = 0,
    rng_seed: int = 0,
    core_category: str = DEFAULT_CORE_CATEGORY,
    pair: tuple[int, int] | None = None,
) -> TaskInstance:
    """Sample a subgraph guaranteed to contain one source-graph shortest path.

    Two of the sampling seeds become the endpoints; the set of all shortest
    paths between them is computed on the source graph, the lexicographically
    least path's entities join the seed set and its edges are protected
    through pruning.  Gold is every source path whose edges survive.
    """
    pool = seed_entity_pool(kg, core_category)
    if len(pool) < 2:
        raise GenerationError("need at least two eligible seed entities")
    if pair is not None and pair[0] == pair[1]:
        raise ValueError("source and destination must be distinct")

    k = min(params.num_seed_entities, len(pool))
    for _ in range(_PAIR_TRIES):
        seeds = rng.sample(pool, k)
        if pair is None:
            if k < 2:
                raise GenerationError("need at least two seed entities for a pair")
            source, destination = rng.sample(seeds, 2)
        else:
            source, destination = pair
            seeds = list(dict.fromkeys(list(pair) + [s for s in seeds if s not in pair]))
        paths, capped = kg.all_shortest_paths(source, destination, cap=SHORTEST_PATH_ENUM_CAP)
        if not paths:
            if pair is not None:
                raise GenerationError("requested endpoints are not connected")
            continue
        p1 = paths[0]
        protected = tuple(_path_edges(kg, p1))
        extra = [e for e in p1 if e not in seeds]
        sub_params = SamplingParams(
            num_seed_entities=params.num_seed_entities,
            radius=params.radius,
            max_edges=params.max_edges,
            min_degree=params.min_degree,
            rng_seed=rng.getrandbits(63),
        )
        subgraph = sample_subgraph(
            kg,
            sub_params,
            seed_entities=seeds + extra,
            protected=protected,
            core_category=core_category,
        )
        question, gold, meta = shortest_path_question_and_gold(
            subgraph, kg, source, destination, paths, capped, templates
        )
        meta["source_id"] = source
        meta["destination_id"] = destination
        meta["source_path_ids"] = [list(p) for p in paths]
        return TaskInstance(
            task_id="ShortestPath",
            instance_index=instance_index,
            subgraph=subgraph,
            question=question,
            gold=gold,
            meta=meta,
            rng_seed=rng_seed,
        )
    raise GenerationError("could not find a connected seed pair")


# -- Aggregations --------------------------------------------------------------


def agg_by_relation_count(g: KnowledgeGraph, s: int, r: int, direction: str) -> int:
    """Distinct neighbours of ``s`` over relation ``r`` in one direction."""
    if direction == "outgoing":
        return sum(1 for rel, _ in g.out_index.get(s, ()) if rel == r)
    if direction == "incoming":
        return sum(1 for rel, _ in g.in_index.get(s, ()) if rel == r)
    raise ValueError(f"direction must be incoming/outgoing, got {direction!r}")


def agg_neighbor_property_count(g: KnowledgeGraph, s: int, r: int) -> int:
    """Neighbours of ``s`` (either direction) that have an outgoing ``r`` edge.

    A self-loop makes ``s`` its own neighbour, matching the wildcard formula.
    """
    neighbors = {o for _, o in g.out_index.get(s, ())}
    neighbors.update(sub for _, sub in g.in_index.get(s, ()))
    return sum(
        1
        for n in neighbors
        if any(rel == r for rel, _ in g.out_index.get(n, ()))
    )


def _two_stage_choice(
    counts: dict[tuple, int], rng: random.Random
) -> tuple[tuple, int]:
    """Uniform draw over distinct answer values, then over tuples achieving it."""
    values = sorted(set(counts.values()))
    answer = values[rng.randrange(len(values))]
    candidates = sorted(k for k, v in counts.items() if v == answer)
    return candidates[rng.randrange(len(candidates))], answer


def agg_by_relation_table(g: KnowledgeGraph) -> dict[tuple[int, int, str], int]:
    """Realized (anchor, relation, direction) -> count table (counts >= 1)."""
    counts: dict[tuple[int, int, str], int] = {}
    for t in g.triples:
        key_out = (t.subject, t.relation, "outgoing")
        counts[key_out] = counts.get(key_out, 0) + 1
        key_in = (t.object, t.relation, "incoming")
        counts[key_in] = counts.get(key_in, 0) + 1
    return counts


def gen_agg_by_relation(
    subgraph: Subgraph,
    rng: random.Random,
    templates: Templates,
    instance_index: int = 0,
    rng_seed: int = 0,
) -> TaskInstance:
    """Count edges of one type and direction at an anchor entity.

    Sampling is two-stage: first a uniform draw over the distinct realized
    counts, then a uniform draw over the (anchor, relation, direction)
    tuples achieving that count, so answer values are evenly covered.
    """
    g = subgraph.graph
    counts = agg_by_relation_table(g)
    if not counts:
        raise GenerationError("graph has no edges to aggregate")
    (s, r, direction), answer = _two_stage_choice(counts, rng)
    question = templates.question(
        "AggByRelation",
        direction=direction,
        relation=g.relations[r],
        anchor=g.entities[s],
    )
    meta = {
        "anchor": g.entities[s],
        "relation": g.relations[r],
        "direction": direction,
        "true_count": answer,
    }
    return TaskInstance(
        task_id="AggByRelation",
        instance_index=instance_index,
        subgraph=subgraph,
        question=question,
        gold=answer,
        meta=meta,
        rng_seed=rng_seed,
    )


def agg_neighbor_property_table(g: KnowledgeGraph) -> dict[tuple[int, int], int]:
    """Realized (anchor, relation) -> neighbour-property counts (>= 1)."""
    counts: dict[tuple[int, int], int] = {}
    for s in g.entities:
        for r in g.relations:
            c = agg_neighbor_property_count(g, s, r)
            if c:
                counts[(s, r)] = c
    return counts


def gen_agg_neighbor_property(
    subgraph: Subgraph,
    rng: random.Random,
    templates: Templates,
    instance_index: int = 0,
    rng_seed: int = 0,
) -> TaskInstance:
    """Count an anchor's neighbours holding an outgoing property type."""
    g = subgraph.graph
    counts = agg_neighbor_property_table(g)
    if not counts:
        raise GenerationError("graph has no edges to aggregate")
    (s, r), answer = _two_stage_choice(counts, rng)
    question = templates.question(
        "AggNeighborProperty",
        anchor=g.entities[s],
        relation=g.relations[r],
    )
    meta = {
        "anchor": g.entities[s],
        "relation": g.relations[r],
        "true_count": answer,
    }
    return TaskInstance(
        task_id="AggNeighborProperty",
        instance_index=instance_index,
        subgraph=subgraph,
        question=question,
        gold=answer,
        meta=meta,
        rng_seed=rng_seed,
    )


# -- HighestDegree --------------------------------------------------------------

_DEGREE_DIRECTIONS = ("incoming", "outgoing", "total")
_DIRECTION_ARG = {"incoming": "in", "outgoing": "out", "total": "total"}


def gen_highest_degree(
    subgraph: Subgraph,
    rng: random.Random,
    templates: Templates,
    instance_index: int = 0,
    rng_seed: int = 0,
) -> TaskInstance:
    """Identify the entity with the most edges in a drawn direction.

    Exact-match scoring needs a unique gold, so a tied argmax raises
    ``TieError`` and the caller resamples the subgraph.
    """
    g = subgraph.graph
    if not g.triples:
        raise GenerationError("graph has no edges")
    direction = _DEGREE_DIRECTIONS[rng.randrange(3)]
    arg = _DIRECTION_ARG[direction]
    degrees = {e: g.degree(e, arg) for e in g.entities}
    best = max(degrees.values())
    winners = sorted(e for e, d in degrees.items() if d == best)
    if len(winners) != 1:
        raise TieError(f"{len(winners)} entities tie at {direction} degree {best}")
    winner = winners[0]
    question = templates.question("HighestDegree", direction=direction)
    meta = {"direction": direction, "winner_degree": best}
    return TaskInstance(
        task_id="HighestDegree",
        instance_index=instance_index,
        subgraph=subgraph,
        question=question,
        gold=g.entities[winner],
        meta=meta,
        rng_seed=rng_seed,
    )
