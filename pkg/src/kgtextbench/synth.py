"""Synthetic source graphs for offline runs and tests.

Mimics the shape of a country-centric knowledge graph: a connected set of
core "country" entities with hub-skewed degrees, plus attribute entities
(languages, organizations, cities, events) hanging off them.  Labels are
invented names, disjoint from the pseudonym pool's suffix families so
pseudonymization stays collision-free.
"""

from __future__ import annotations

import bisect
import random
from pathlib import Path

from kgtextbench.graph import KnowledgeGraph

CORE_RELATIONS = (
    "diplomatic relation",
    "shares border with",
    "replaced by",
    "follows",
    "ally of",
)

# core -> attribute facts
ATTR_OBJECT_RELATIONS = (
    "member of",
    "language used",
    "currency used",
    "participated in",
    "religion practiced",
    "continent",
)

# attribute -> core facts (cities, events and organizations point at countries)
ATTR_SUBJECT_RELATIONS = (
    "capital of",
    "located in",
    "headquartered in",
)

_CORE_STEMS = (
    "Ark", "Bren", "Cal", "Dray", "Esk", "Fal", "Gor", "Hyl", "Ist", "Jor",
    "Kel", "Lum", "Mab", "Nor", "Oss", "Pax", "Quil", "Ros", "Syl", "Tar",
    "Ulm", "Vor", "Wex", "Xan", "Yor", "Zeph", "Bral", "Crev", "Dun", "Erg",
)
_CORE_ENDS = ("athia", "ovene", "umbra", "aris", "ethia", "ontis", "avia_x", "urgh")
_CORE_PREFIX = ("North", "South", "New", "Upper", "Old")
_CORE_LONG = ("Republic of", "Kingdom of", "Federated States of", "Grand Duchy of")

_ATTR_STEMS = (
    "Quen", "Rhiv", "Sald", "Tov", "Ulth", "Vren", "Wyth", "Yand", "Zhor",
    "Ambr", "Brix", "Cyl", "Dov", "Ethr", "Fyn", "Grel", "Hax", "Ith", "Juv",
)


def _core_label(rng: random.Random, taken: set[str]) -> str:
    while True:
        stem = rng.choice(_CORE_STEMS) + rng.choice(("", "a", "o", "en", "ar"))
        end = rng.choice(_CORE_ENDS).replace("_x", "")
        base = stem + end
        roll = rng.random()
        if roll < 0.2:
            label = f"{rng.choice(_CORE_PREFIX)} {base}"
        elif roll < 0.3:
            label = f"{rng.choice(_CORE_LONG)} {base}"
        else:
            label = base
        if label not in taken:
            taken.add(label)
            return label


_ATTR_TAILS = ("", "l", "n", "r", "s", "th", "x", "z", "m", "d")


def _attr_label(rng: random.Random, taken: set[str], category: str) -> str:
    while True:
        stem = (
            rng.choice(_ATTR_STEMS)
            + rng.choice(("a", "e", "i", "o", "u"))
            + rng.choice(_ATTR_TAILS)
        )
        if category == "language":
            label = rng.choice((f"{stem}ish", f"{stem}ese", f"{stem}ian"))
        elif category == "organization":
            label = rng.choice(
                (f"Union of {stem}", f"{stem} Treaty Organization", f"{stem} Trade League")
            )
        elif category == "city":
            label = rng.choice((f"{stem}grad", f"Port {stem}", f"{stem}minster"))
        else:  # event
            label = rng.choice((f"Treaty of {stem}", f"Congress of {stem}", f"{stem} Accords"))
        if label not in taken:
            taken.add(label)
            return label


_ZIPF_CUM: dict[tuple[int, float], list[float]] = {}


def _zipf_pick(rng: random.Random, n: int, skew: float = 1.0) -> int:
    # inverse-rank weights give a few hubs and a long low-degree tail
    cum = _ZIPF_CUM.get((n, skew))
    if cum is None:
        acc = 0.0
        cum = []
        for i in range(n):
            acc += 1.0 / (i + 1) ** skew
            cum.append(acc)
        _ZIPF_CUM[(n, skew)] = cum
    return min(bisect.bisect_left(cum, rng.random() * cum[-1]), n - 1)


def build_synthetic_kg(
    num_core: int = 250,
    num_attr: int = 1500,
    total_edges: int = 5250,
    seed: int = 13,
) -> KnowledgeGraph:
    """Deterministic country-shaped graph with exactly ``total_edges`` edges.

    Cores keep a small outgoing fan-out while most edges point *into* them
    from distinct attribute subjects (cities, events, organizations), the
    shape that makes sampled subgraphs singleton-subject heavy the way the
    real country data is.  The core entities are connected by construction
    (a spanned chain), so any pair can anchor a shortest-path question.
    """
    rng = random.Random(seed)
    taken: set[str] = set()
    cores = [_core_label(rng, taken) for _ in range(num_core)]
    attr_categories = ("language", "organization", "city", "event")
    attrs: list[tuple[str, str]] = []
    for i in range(num_attr):
        category = attr_categories[i % len(attr_categories)]
        attrs.append((_attr_label(rng, taken, category), category))

    entities: dict[int, str] = {}
    categories: dict[int, str] = {}
    for i, label in enumerate(cores):
        entities[i] = label
        categories[i] = "country"
    for j, (label, category) in enumerate(attrs):
        entities[num_core + j] = label
        categories[num_core + j] = category

    all_relations = CORE_RELATIONS + ATTR_OBJECT_RELATIONS + ATTR_SUBJECT_RELATIONS
    relations = {i: r for i, r in enumerate(all_relations)}
    rel_id = {r: i for i, r in relations.items()}

    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()

    def add(t: tuple[int, int, int]) -> bool:
        if t in seen or t[0] == t[2]:
            return False
        seen.add(t)
        triples.append(t)
        return True

    # spanning chain keeps the core component connected
    order = list(range(num_core))
    rng.shuffle(order)
    for a, b in zip(order, order[1:]):
        add((a, rel_id["diplomatic relation"], b))

    n_core_edges = min(len(triples) + int(num_core * 0.6), total_edges // 4)
    guard = 0
    while len(triples) < n_core_edges and guard < total_edges * 100:
        guard += 1
        s = rng.randrange(num_core)
        o = _zipf_pick(rng, num_core, 0.9)
        r = rel_id[CORE_RELATIONS[_zipf_pick(rng, len(CORE_RELATIONS), 0.5)]]
        add((s, r, o))

    attr_rels_by_cat = {
        "language": "language used",
        "organization": "member of",
        "city": "located in",
        "event": "participated in",
    }
    extra_object_rels = ("currency used", "religion practiced", "continent")
    n_core_attr = min(len(triples) + int(num_core * 1.4), total_edges // 2)
    guard = 0
    while len(triples) < n_core_attr and guard < total_edges * 100:
        guard += 1
        s = rng.randrange(num_core)
        j = _zipf_pick(rng, num_attr, 0.4)
        o = num_core + j
        category = categories[o]
        if category in ("language", "organization", "event") or rng.random() < 0.3:
            if rng.random() < 0.2:
                r = rel_id[extra_object_rels[rng.randrange(len(extra_object_rels))]]
            else:
                r = rel_id[attr_rels_by_cat.get(category, "participated in")]
            add((s, r, o))

    # the bulk: distinct attribute subjects each pointing at a few cores
    attr_subject_rels = {
        "city": ("capital of", "located in"),
        "event": ("located in",),
        "organization": ("headquartered in",),
        "language": ("located in",),
    }
    guard = 0
    while len(triples) < total_edges and guard < total_edges * 200:
        guard += 1
        j = rng.randrange(num_attr)
        s = num_core + j
        o = _zipf_pick(rng, num_core, 0.35)
        choices = attr_subject_rels[categories[s]]
        r = rel_id[choices[rng.randrange(len(choices))]]
        add((s, r, o))
    if len(triples) != total_edges:
        raise RuntimeError(f"could not reach {total_edges} edges (got {len(triples)})")

    triples.sort()
    return KnowledgeGraph(entities, relations, triples, categories)


def write_graph_tsv(kg: KnowledgeGraph, out_dir: str | Path) -> list[Path]:
    """Write a graph as the three-file TSV layout the loader reads."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entities_path = out / "entities.tsv"
    relations_path = out / "relations.tsv"
    edges_path = out / "edges.tsv"
    with open(entities_path, "w", encoding="utf-8") as fh:
        for e in sorted(kg.entities):
            category = kg.entity_category.get(e, "")
            row = f"{e}\t{kg.entities[e]}"
            if category:
                row += f"\t{category}"
            fh.write(row + "\n")
    with open(relations_path, "w", encoding="utf-8") as fh:
        for r in sorted(kg.relations):
            fh.write(f"{r}\t{kg.relations[r]}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for s, r, o in kg.triples:
            fh.write(f"{s}\t{o}\t{r}\n")
    return [entities_path, relations_path, edges_path]
