"""Independent brute-force answer checkers.

Everything here recomputes gold answers from plain label-triple lists by
direct enumeration, sharing no code with the generators, so generator bugs
cannot hide.  Used by build-time verification, the ``validate`` CLI verb and
the test suite.
"""

from __future__ import annotations

from collections import deque
from typing import Any, Iterable, Sequence

LabelTriple = tuple[str, str, str]

_PATH_ENUM_LIMIT = 100_000


def triple_present(triples: Iterable[LabelTriple], s: str, r: str, o: str) -> bool:
    return any(t == (s, r, o) for t in triples)


def entity_set(triples: Iterable[LabelTriple]) -> set[str]:
    out: set[str] = set()
    for s, _, o in triples:
        out.add(s)
        out.add(o)
    return out


def degree_table(triples: Iterable[LabelTriple], direction: str) -> dict[str, int]:
    table: dict[str, int] = {}
    for s, _, o in triples:
        if direction in ("outgoing", "total"):
            table[s] = table.get(s, 0) + 1
            table.setdefault(o, 0)
        if direction in ("incoming", "total"):
            table[o] = table.get(o, 0) + 1
            table.setdefault(s, 0)
    return table


def agg_by_relation(
    triples: Sequence[LabelTriple], anchor: str, relation: str, direction: str
) -> int:
    if direction == "outgoing":
        return len({o for s, r, o in triples if s == anchor and r == relation})
    if direction == "incoming":
        return len({s for s, r, o in triples if o == anchor and r == relation})
    raise ValueError(f"bad direction {direction!r}")


def agg_neighbor_property(triples: Sequence[LabelTriple], anchor: str, relation: str) -> int:
    count = 0
    for e1 in sorted(entity_set(triples)):
        touches = any(
            (s == anchor and o == e1) or (s == e1 and o == anchor) for s, _, o in triples
        )
        if not touches:
            continue
        if any(s == e1 and r == relation for s, r, _ in triples):
            count += 1
    return count


def _adjacency(triples: Iterable[LabelTriple]) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for s, _, o in triples:
        adj.setdefault(s, set()).add(o)
        adj.setdefault(o, set()).add(s)
    return adj


def _bfs_dist(adj: dict[str, set[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in sorted(adj.get(u, ())):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_paths(
    triples: Sequence[LabelTriple], source: str, destination: str
) -> tuple[int | None, list[list[str]]]:
    """Exhaustive search: (minimal undirected length, all minimal paths).

    Simple-path DFS pruned by a distance table from the destination; intended
    for the small graphs used in verification, with a hard enumeration limit.
    """
    adj = _adjacency(triples)
    if source not in adj or destination not in adj:
        return None, []
    dist_to_dst = _bfs_dist(adj, destination)
    if source not in dist_to_dst:
        return None, []
    total = dist_to_dst[source]
    paths: list[list[str]] = []
    stack = [source]
    visited = {source}

    def walk(u: str, budget: int) -> None:
        if len(paths) >= _PATH_ENUM_LIMIT:
            raise RuntimeError("oracle path enumeration limit exceeded")
        if u == destination:
            paths.append(list(stack))
            return
        if budget == 0:
            return
        for v in sorted(adj.get(u, ())):
            if v in visited or dist_to_dst.get(v, budget + 1) > budget - 1:
                continue
            visited.add(v)
            stack.append(v)
            walk(v, budget - 1)
            stack.pop()
            visited.discard(v)

    walk(source, total)
    return total, paths


def path_is_valid(triples: Sequence[LabelTriple], path: Sequence[str]) -> bool:
    """Consecutive entities of the path share an edge in either direction."""
    if len(path) < 2:
        return False
    pairs = {(s, o) for s, _, o in triples}
    return all((u, v) in pairs or (v, u) in pairs for u, v in zip(path, path[1:]))


# -- instance verification ------------------------------------------------------


def verify_instance(
    task_id: str,
    triples: Sequence[LabelTriple],
    question_meta: dict[str, Any],
    gold: Any,
) -> list[str]:
    """Recompute the instance's answer; return a list of discrepancies."""
    problems: list[str] = []
    meta = question_meta
    if task_id == "TripleRetrieval":
        present = triple_present(triples, meta["subject"], meta["relation"], meta["object"])
        if present != gold:
            problems.append(f"membership scan gives {present}, gold is {gold}")
    elif task_id == "ShortestPath":
        dist, minimal = shortest_paths(triples, meta["source"], meta["destination"])
        if dist != meta["path_length"]:
            problems.append(f"subgraph distance {dist} != stated length {meta['path_length']}")
        if not gold:
            problems.append("gold path set is empty")
        minimal_set = {tuple(p) for p in minimal}
        for p in gold:
            if tuple(p) not in minimal_set:
                problems.append(f"gold path {p} is not a minimal subgraph path")
        expected = [
            p for p in meta["paths_in_source"] if path_is_valid(triples, p)
        ]
        if [list(p) for p in gold] != expected:
            problems.append("gold differs from surviving source paths")
    elif task_id == "AggByRelation":
        count = agg_by_relation(triples, meta["anchor"], meta["relation"], meta["direction"])
        if count != gold:
            problems.append(f"enumerated count {count} != gold {gold}")
    elif task_id == "AggNeighborProperty":
        count = agg_neighbor_property(triples, meta["anchor"], meta["relation"])
        if count != gold:
            problems.append(f"enumerated count {count} != gold {gold}")
    elif task_id == "HighestDegree":
        table = degree_table(triples, meta["direction"])
        best = max(table.values())
        winners = sorted(e for e, d in table.items() if d == best)
        if len(winners) != 1:
            problems.append(f"degree argmax is tied between {winners}")
        elif winners[0] != gold:
            problems.append(f"degree argmax {winners[0]} != gold {gold}")
        elif best != meta["winner_degree"]:
            problems.append(f"winning degree {best} != stated {meta['winner_degree']}")
    else:
        problems.append(f"unknown task id {task_id}")
    return problems
