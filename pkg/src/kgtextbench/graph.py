"""In-memory directed multigraph with integer ids and label maps.

Entities and relations live in separate id spaces, each id carrying exactly
one label.  Triples are kept in a deterministic order: the TSV loader sorts
by (subject, relation, object) id before construction, and the constructor
preserves whatever order it is given (so that graphs rebuilt from serialized
instances keep their original edge order).  Graphs are immutable after
construction and safe for concurrent reads.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

log = logging.getLogger(__name__)


class LoadError(ValueError):
    """Malformed graph file or dangling id reference."""


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


class KnowledgeGraph:
    """Labelled directed multigraph with per-entity adjacency indices.

    Args:
        entities: mapping of entity id to label.
        relations: mapping of relation id to label.
        triples: iterable of (subject, relation, object) id tuples.
            Duplicates are collapsed (the triple set is a set); the first
            occurrence keeps its position.
        entity_category: optional mapping of entity id to a category label
            such as ``country`` or ``language``.
    """

    def __init__(
        self,
        entities: dict[int, str],
        relations: dict[int, str],
        triples: Iterable[tuple[int, int, int]],
        entity_category: dict[int, str] | None = None,
    ) -> None:
        self.entities: dict[int, str] = dict(entities)
        self.relations: dict[int, str] = dict(relations)
        self.entity_category: dict[int, str] = dict(entity_category or {})
        self.triples: list[Triple] = []
        self.out_index: dict[int, list[tuple[int, int]]] = {}
        self.in_index: dict[int, list[tuple[int, int]]] = {}
        self.duplicates_dropped = 0
        self._triple_set: set[Triple] = set()
        for raw in triples:
            t = Triple(*raw)
            if t in self._triple_set:
                self.duplicates_dropped += 1
                continue
            if t.subject not in self.entities or t.object not in self.entities:
                missing = t.subject if t.subject not in self.entities else t.object
                raise LoadError(f"triple {tuple(t)} references unknown entity id {missing}")
            if t.relation not in self.relations:
                raise LoadError(f"triple {tuple(t)} references unknown relation id {t.relation}")
            self._triple_set.add(t)
            self.triples.append(t)
            self.out_index.setdefault(t.subject, []).append((t.relation, t.object))
            self.in_index.setdefault(t.object, []).append((t.relation, t.subject))
        self._undirected: dict[int, tuple[int, ...]] | None = None
        self._triple_pos: dict[Triple, int] | None = None

    # -- basic queries ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.triples)

    def entity_label(self, e: int) -> str:
        return self.entities[e]

    def relation_label(self, r: int) -> str:
        return self.relations[r]

    def _check_entity(self, e: int) -> None:
        if e not in self.entities:
            raise KeyError(f"unknown entity id {e}")

    def contains_triple(self, s: int, r: int, o: int) -> bool:
        """True iff (s, r, o) is in the triple set.  Ids must be valid."""
        self._check_entity(s)
        self._check_entity(o)
        if r not in self.relations:
            raise KeyError(f"unknown relation id {r}")
        return Triple(s, r, o) in self._triple_set

    def degree(self, e: int, direction: str = "total") -> int:
        """Edge count at ``e``.

        ``direction`` is one of ``in``, ``out``, ``total``.  A self-loop
        contributes 1 to in, 1 to out and 2 to total.
        """
        self._check_entity(e)
        if direction == "out":
            return len(self.out_index.get(e, ()))
        if direction == "in":
            return len(self.in_index.get(e, ()))
        if direction == "total":
            return len(self.out_index.get(e, ())) + len(self.in_index.get(e, ()))
        raise ValueError(f"direction must be in/out/total, got {direction!r}")

    def undirected_neighbors(self, e: int) -> tuple[int, ...]:
        """Distinct neighbours of ``e`` ignoring edge direction, ascending id."""
        self._check_entity(e)
        if self._undirected is None:
            adj: dict[int, set[int]] = {}
            for t in self.triples:
                adj.setdefault(t.subject, set()).add(t.object)
                adj.setdefault(t.object, set()).add(t.subject)
            self._undirected = {e_: tuple(sorted(ns)) for e_, ns in adj.items()}
        return self._undirected.get(e, ())

    def triple_position(self, t: Triple) -> int:
        """Stable position of a triple in the stored order."""
        if self._triple_pos is None:
            self._triple_pos = {t_: i for i, t_ in enumerate(self.triples)}
        return self._triple_pos[t]

    def entity_ids_by_category(self, category: str) -> list[int]:
        """Entity ids with the given category, ascending.  Empty if untagged."""
        return sorted(e for e, c in self.entity_category.items() if c == category)

    # -- traversal -------------------------------------------------------

    def bfs_distances(self, start: int, max_depth: int | None = None) -> dict[int, int]:
        """Undirected hop distances from ``start``, optionally depth-bounded."""
        self._check_entity(start)
        dist = {start: 0}
        frontier = deque([start])
        while frontier:
            u = frontier.popleft()
            d = dist[u]
            if max_depth is not None and d >= max_depth:
                continue
            for v in self.undirected_neighbors(u):
                if v not in dist:
                    dist[v] = d + 1
                    frontier.append(v)
        return dist

    def bfs_distance(self, a: int, b: int) -> int | None:
        """Minimal undirected hop count between ``a`` and ``b``; None if unreachable."""
        self._check_entity(a)
        self._check_entity(b)
        if a == b:
            return 0
        dist = {a: 0}
        frontier = deque([a])
        while frontier:
            u = frontier.popleft()
            for v in self.undirected_neighbors(u):
                if v == b:
                    return dist[u] + 1
                if v not in dist:
                    dist[v] = dist[u] + 1
                    frontier.append(v)
        return None

    def all_shortest_paths(
        self, a: int, b: int, cap: int | None = None
    ) -> tuple[list[list[int]], bool]:
        """Every minimal-length undirected path from ``a`` to ``b``.

        Paths are entity-id sequences ``[a, ..., b]`` in lexicographic order.
        Returns ``(paths, capped)``; ``paths`` is empty when ``b`` is
        unreachable, ``capped`` is True when enumeration stopped at ``cap``.
        Requires ``a != b``.
        """
        self._check_entity(a)
        self._check_entity(b)
        if a == b:
            raise ValueError("all_shortest_paths requires distinct endpoints")
        dist_a = self.bfs_distances(a)
        if b not in dist_a:
            return [], False
        total = dist_a[b]
        dist_b = self.bfs_distances(b, max_depth=total)
        paths: list[list[int]] = []
        capped = False
        stack = [a]

        def descend(u: int) -> bool:
            nonlocal capped
            if u == b:
                paths.append(list(stack))
                if cap is not None and len(paths) >= cap:
                    capped = True
                    return False
                return True
            d = dist_a[u]
            for v in self.undirected_neighbors(u):
                if dist_a.get(v) == d + 1 and dist_b.get(v) == total - d - 1:
                    stack.append(v)
                    ok = descend(v)
                    stack.pop()
                    if not ok:
                        return False
            return True

        descend(a)
        if capped:
            log.warning("shortest-path enumeration capped at %d paths (%d -> %d)", cap, a, b)
        return paths, capped

    # -- construction helpers ---------------------------------------------

    @classmethod
    def from_label_triples(
        cls,
        triples: Sequence[tuple[str, str, str]],
        categories: dict[str, str] | None = None,
    ) -> "KnowledgeGraph":
        """Build a graph from (subject, relation, object) label triples.

        Ids are assigned by first appearance and the given triple order is
        preserved, so round-tripping through labels keeps edge order stable.
        """
        ent_ids: dict[str, int] = {}
        rel_ids: dict[str, int] = {}
        id_triples: list[tuple[int, int, int]] = []
        for s, r, o in triples:
            si = ent_ids.setdefault(s, len(ent_ids))
            ri = rel_ids.setdefault(r, len(rel_ids))
            oi = ent_ids.setdefault(o, len(ent_ids))
            id_triples.append((si, ri, oi))
        entities = {i: lab for lab, i in ent_ids.items()}
        relations = {i: lab for lab, i in rel_ids.items()}
        cat = {}
        if categories:
            cat = {ent_ids[lab]: c for lab, c in categories.items() if lab in ent_ids}
        return cls(entities, relations, id_triples, cat)

    def label_triples(self) -> list[tuple[str, str, str]]:
        """Triples as label tuples, in stored order."""
        return [
            (self.entities[s], self.relations[r], self.entities[o])
            for s, r, o in self.triples
        ]

    def restricted_to(
        self, triples: Sequence[Triple], extra_entities: Iterable[int] = ()
    ) -> "KnowledgeGraph":
        """New graph over a subset of this graph's triples, same id space."""
        ids: dict[int, None] = {}
        for t in triples:
            ids.setdefault(t.subject)
            ids.setdefault(t.object)
        for e in extra_entities:
            ids.setdefault(e)
        entities = {e: self.entities[e] for e in ids}
        rels = {t.relation for t in triples}
        relations = {r: self.relations[r] for r in sorted(rels)}
        cat = {e: self.entity_category[e] for e in ids if e in self.entity_category}
        return KnowledgeGraph(entities, relations, list(triples), cat)

    def relabelled(self, label_map: dict[int, str]) -> "KnowledgeGraph":
        """Copy of the graph with some entity labels substituted."""
        for e in label_map:
            self._check_entity(e)
        entities = {e: label_map.get(e, lab) for e, lab in self.entities.items()}
        return KnowledgeGraph(entities, dict(self.relations), list(self.triples),
                              dict(self.entity_category))


# -- TSV loading -----------------------------------------------------------


def _parse_label_file(path: Path, kind: str) -> tuple[dict[int, str], dict[int, str]]:
    labels: dict[int, str] = {}
    categories: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise LoadError(f"{path}:{lineno}: expected id<TAB>label, got {line!r}")
            try:
                ident = int(parts[0])
            except ValueError:
                raise LoadError(f"{path}:{lineno}: non-integer {kind} id {parts[0]!r}") from None
            if ident in labels:
                raise LoadError(f"{path}:{lineno}: duplicate {kind} id {ident}")
            labels[ident] = parts[1]
            if len(parts) >= 3 and parts[2]:
                categories[ident] = parts[2]
    return labels, categories


def load_labeled_tsv(
    entities_file: str | Path,
    relations_file: str | Path,
    edges_file: str | Path,
) -> KnowledgeGraph:
    """Load a graph from three UTF-8 TSV files.

    ``entities_file`` and ``relations_file`` hold ``id<TAB>label`` lines
    (entities may carry an optional third category column); ``edges_file``
    holds ``head_id<TAB>tail_id<TAB>relation_id`` lines.  Triples are sorted
    by (subject, relation, object) id; duplicate edges are collapsed with a
    logged count.  The returned graph carries a ``load_report`` dict.
    """
    entities_file = Path(entities_file)
    relations_file = Path(relations_file)
    edges_file = Path(edges_file)
    entities, categories = _parse_label_file(entities_file, "entity")
    relations, _ = _parse_label_file(relations_file, "relation")

    triples: list[tuple[int, int, int]] = []
    with open(edges_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise LoadError(
                    f"{edges_file}:{lineno}: expected head<TAB>tail<TAB>relation, got {line!r}"
                )
            try:
                h, t, r = (int(p) for p in parts)
            except ValueError:
                raise LoadError(f"{edges_file}:{lineno}: non-integer id in {line!r}") from None
            if h not in entities:
                raise LoadError(f"{edges_file}:{lineno}: unknown head entity id {h}")
            if t not in entities:
                raise LoadError(f"{edges_file}:{lineno}: unknown tail entity id {t}")
            if r not in relations:
                raise LoadError(f"{edges_file}:{lineno}: unknown relation id {r}")
            triples.append((h, r, t))
    if not triples:
        raise LoadError(f"empty edge file: {edges_file}")

    triples.sort()
    graph = KnowledgeGraph(entities, relations, triples, categories)
    if graph.duplicates_dropped:
        log.info("dropped %d duplicate edges from %s", graph.duplicates_dropped, edges_file)
    label_counts: dict[str, int] = {}
    for lab in graph.entities.values():
        label_counts[lab] = label_counts.get(lab, 0) + 1
    dup_labels = sum(1 for c in label_counts.values() if c > 1)
    if dup_labels:
        log.warning("%d entity labels are shared by more than one id", dup_labels)
    graph.load_report = {  # type: ignore[attr-defined]
        "entities": len(graph.entities),
        "relations": len(graph.relations),
        "triples": len(graph.triples),
        "duplicates_dropped": graph.duplicates_dropped,
        "duplicate_labels": dup_labels,
        "categories": len(graph.entity_category),
    }
    return graph


def load_report_json(graph: KnowledgeGraph) -> str:
    """Structured JSON form of a loaded graph's load report."""
    report = getattr(graph, "load_report", None)
    if report is None:
        report = {
            "entities": len(graph.entities),
            "relations": len(graph.relations),
            "triples": len(graph.triples),
            "duplicates_dropped": graph.duplicates_dropped,
        }
    return json.dumps(report, sort_keys=True)
