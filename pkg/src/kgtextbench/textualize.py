"""Graph-to-text rendering in the five prompt formats.

Edges are grouped by subject then relation, in first-appearance order of the
graph's stored triples, so rendering is a pure function of the graph.  The
RDF formats address nodes through a deterministic IRI scheme: subjects get
``ex:1, ex:2, ...`` in order of first appearance, object-only entities get
``ex:<anchor>01, ...`` under the anchor that introduced them, relations get
``ex:R1, ...`` by first appearance.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum

from kgtextbench.graph import KnowledgeGraph
from kgtextbench.sampler import Subgraph
from kgtextbench.templates import Templates

EX_NAMESPACE = "http://example.org/countries#"
RDF_NAMESPACE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NAMESPACE = "http://www.w3.org/2000/01/rdf-schema#"


class FormatId(str, Enum):
    LIST_OF_EDGES = "list_of_edges"
    STRUCTURED_JSON = "structured_json"
    STRUCTURED_YAML = "structured_yaml"
    RDF_TURTLE = "rdf_turtle"
    JSON_LD = "json_ld"

    def __str__(self) -> str:  # report-friendly stable name
        return self.value


ALL_FORMATS = tuple(FormatId)


class UnrepresentableLabelError(ValueError):
    """A label cannot be expressed in the target syntax."""

    def __init__(self, format_id: FormatId, kind: str, ident: int, label: str):
        self.format_id = format_id
        self.ident = ident
        super().__init__(
            f"{kind} {ident} label {label!r} cannot be represented in {format_id.value}"
        )


@dataclass(frozen=True)
class TextualizedPrompt:
    """One rendered prompt: instruction preamble, graph body, question."""

    format: FormatId
    preamble: str
    body: str
    question: str | None
    full_prompt: str
    approx_tokens: int

    @property
    def context(self) -> str:
        """Preamble plus graph block, without the question."""
        sep = "\n" if self.format is FormatId.STRUCTURED_JSON else "\n\n"
        return f"{self.preamble}{sep}Knowledge Graph:\n{self.body}"


# -- grouping ---------------------------------------------------------------


def _grouped(g: KnowledgeGraph) -> list[tuple[int, list[tuple[int, list[int]]]]]:
    """Triples grouped subject -> relation -> objects, first-appearance order."""
    per_subject: dict[int, dict[int, list[int]]] = {}
    for t in g.triples:
        per_subject.setdefault(t.subject, {}).setdefault(t.relation, []).append(t.object)
    return [(s, list(rels.items())) for s, rels in per_subject.items()]


# -- IRI scheme --------------------------------------------------------------


@dataclass(frozen=True)
class IriScheme:
    """Deterministic node/relation identifiers for the RDF formats."""

    entity_iri: dict[int, str]
    relation_iri: dict[int, str]
    entity_type: dict[int, str]
    node_order: tuple[int, ...]
    relation_order: tuple[int, ...]
    prefixes: tuple[tuple[str, str], ...] = (
        ("ex", EX_NAMESPACE),
        ("rdf", RDF_NAMESPACE),
        ("rdfs", RDFS_NAMESPACE),
    )


def _type_label(category: str | None) -> str:
    if not category:
        return "ex:Entity"
    camel = "".join(w.capitalize() for w in re.split(r"[\s_-]+", category) if w)
    return f"ex:{camel}"


def assign_iris(g: KnowledgeGraph) -> IriScheme:
    """Assign ``ex:`` identifiers to every entity and relation in ``g``.

    Anchors (entities appearing as a subject) are numbered 1..n; an entity
    seen only as an object is numbered ``anchor*100 + k`` under the first
    anchor whose edges introduce it, bumping to the next free number on
    collision.  ``node_order`` interleaves each anchor with the attribute
    nodes it introduced, matching the rendering layout.
    """
    grouped = _grouped(g)
    entity_iri: dict[int, str] = {}
    entity_num: dict[int, int] = {}
    used: set[int] = set()
    anchors = [s for s, _ in grouped]
    for i, s in enumerate(anchors, start=1):
        entity_num[s] = i
        used.add(i)

    relation_iri: dict[int, str] = {}
    relation_order: list[int] = []
    node_order: list[int] = []
    for anchor_pos, (s, rels) in enumerate(grouped, start=1):
        node_order.append(s)
        k = 0
        for r, objects in rels:
            if r not in relation_iri:
                relation_iri[r] = f"ex:R{len(relation_iri) + 1}"
                relation_order.append(r)
            for o in objects:
                if o in entity_num:
                    continue
                k += 1
                num = anchor_pos * 100 + k
                while num in used:
                    num += 1
                entity_num[o] = num
                used.add(num)
                node_order.append(o)

    for e in g.entities:
        if e not in entity_num:  # isolated entity (e.g. a pruned-away seed)
            num = max(used, default=0) + 1
            entity_num[e] = num
            used.add(num)
    entity_iri = {e: f"ex:{n}" for e, n in entity_num.items()}
    entity_type = {e: _type_label(g.entity_category.get(e)) for e in g.entities}
    return IriScheme(
        entity_iri=entity_iri,
        relation_iri=relation_iri,
        entity_type=entity_type,
        node_order=tuple(node_order),
        relation_order=tuple(relation_order),
    )


# -- per-format bodies --------------------------------------------------------


def _check_loe_label(fmt: FormatId, kind: str, ident: int, label: str) -> str:
    if "," in label or "\n" in label or "(" in label or ")" in label:
        raise UnrepresentableLabelError(fmt, kind, ident, label)
    return label


def _body_list_of_edges(g: KnowledgeGraph) -> str:
    lines = ["Edges: ["]
    flat: list[str] = []
    for s, rels in _grouped(g):
        for r, objects in rels:
            for o in objects:
                sub = _check_loe_label(FormatId.LIST_OF_EDGES, "entity", s, g.entities[s])
                rel = _check_loe_label(FormatId.LIST_OF_EDGES, "relation", r, g.relations[r])
                obj = _check_loe_label(FormatId.LIST_OF_EDGES, "entity", o, g.entities[o])
                flat.append(f"({sub}, {rel}, {obj})")
    lines.extend(f"{edge}," for edge in flat[:-1])
    lines.append(flat[-1])
    lines.append("]")
    return "\n".join(lines)


def _body_structured_json(g: KnowledgeGraph) -> str:
    nested: dict[str, dict[str, list[str]]] = {}
    for s, rels in _grouped(g):
        nested[g.entities[s]] = {
            g.relations[r]: [g.entities[o] for o in objects] for r, objects in rels
        }
    return json.dumps(nested, indent=4, ensure_ascii=False)


_YAML_PLAIN = re.compile(r"[A-Za-z][A-Za-z0-9 .,'()/_-]*")
_YAML_RESERVED = {"true", "false", "yes", "no", "on", "off", "null", "none"}


def _yaml_scalar(label: str) -> str:
    ok = (
        _YAML_PLAIN.fullmatch(label)
        and label == label.strip()
        and "  " not in label
        and ": " not in label
        and not label.endswith(":")
        and " #" not in label
        and label.lower() not in _YAML_RESERVED
    )
    if ok:
        return label
    return json.dumps(label, ensure_ascii=False)


def _body_structured_yaml(g: KnowledgeGraph) -> str:
    blocks: list[str] = []
    for s, rels in _grouped(g):
        lines = [f"{_yaml_scalar(g.entities[s])}:"]
        for r, objects in rels:
            lines.append(f"  {_yaml_scalar(g.relations[r])}:")
            lines.extend(f"    - {_yaml_scalar(g.entities[o])}" for o in objects)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _turtle_string(label: str) -> str:
    escaped = label.replace("\\", "\\\\").replace('"', '\\"')
    escaped = escaped.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
    return f'"{escaped}"'


def _body_rdf_turtle(g: KnowledgeGraph, scheme: IriScheme) -> str:
    blocks = [
        "\n".join(f"@prefix {p}: <{ns}> ." for p, ns in scheme.prefixes),
    ]
    for r in scheme.relation_order:
        blocks.append(
            f"{scheme.relation_iri[r]} a rdf:Property ;\n"
            f"    rdfs:label {_turtle_string(g.relations[r])} ."
        )
    grouped = dict(_grouped(g))
    for e in scheme.node_order:
        lines = [
            f"{scheme.entity_iri[e]} a {scheme.entity_type[e]} ;",
            f"    rdfs:label {_turtle_string(g.entities[e])}",
        ]
        for r, objects in grouped.get(e, []):
            refs = ", ".join(scheme.entity_iri[o] for o in objects)
            lines[-1] += " ;"
            lines.append(f"    {scheme.relation_iri[r]} {refs}")
        lines[-1] += " ."
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _jsonld_str(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def _body_json_ld(g: KnowledgeGraph, scheme: IriScheme) -> str:
    out: list[str] = ["{"]
    out.append('  "@context": {')
    out.append('    "@context": {')
    context = [
        ("ex", EX_NAMESPACE),
        ("label", "rdfs:label"),
        ("rdf", RDF_NAMESPACE),
        ("rdfs", RDFS_NAMESPACE),
        ("type", "@type"),
    ]
    for i, (key, val) in enumerate(context):
        comma = "," if i < len(context) - 1 else ""
        out.append(f'      "{key}": {_jsonld_str(val)}{comma}')
    out.append("    }")
    out.append("  },")
    out.append('  "@graph": [')

    nodes: list[list[str]] = []
    for r in scheme.relation_order:
        nodes.append(
            [
                f'      "@id": "{scheme.relation_iri[r]}",',
                f'      "label": {_jsonld_str(g.relations[r])},',
                '      "type": "rdf:Property"',
            ]
        )
    grouped = dict(_grouped(g))
    for e in scheme.node_order:
        lines = [
            f'      "@id": "{scheme.entity_iri[e]}",',
            f'      "type": "{scheme.entity_type[e]}",',
            f'      "label": {_jsonld_str(g.entities[e])}',
        ]
        for r, objects in grouped.get(e, []):
            lines[-1] += ","
            key = f'      "{scheme.relation_iri[r]}": '
            if len(objects) == 1:
                lines.append(key + '{ "@id": "' + scheme.entity_iri[objects[0]] + '" }')
            else:
                lines.append(key + "[")
                for j, o in enumerate(objects):
                    comma = "," if j < len(objects) - 1 else ""
                    lines.append(f'        {{ "@id": "{scheme.entity_iri[o]}" }}{comma}')
                lines.append("      ]")
        nodes.append(lines)

    for i, lines in enumerate(nodes):
        out.append("    {")
        out.extend(lines)
        out.append("    }," if i < len(nodes) - 1 else "    }")
    out.append("  ]")
    out.append("}")
    return "\n".join(out)


def render_body(g: KnowledgeGraph, format_id: FormatId) -> str:
    """Serialize the graph's triples in one format (no preamble/question)."""
    if not g.triples:
        raise ValueError("cannot render an empty graph")
    if format_id is FormatId.LIST_OF_EDGES:
        return _body_list_of_edges(g)
    if format_id is FormatId.STRUCTURED_JSON:
        return _body_structured_json(g)
    if format_id is FormatId.STRUCTURED_YAML:
        return _body_structured_yaml(g)
    scheme = assign_iris(g)
    if format_id is FormatId.RDF_TURTLE:
        return _body_rdf_turtle(g, scheme)
    if format_id is FormatId.JSON_LD:
        return _body_json_ld(g, scheme)
    raise ValueError(f"unknown format {format_id!r}")


# -- preamble and assembly -----------------------------------------------------


def preamble(
    format_id: FormatId, templates: Templates, swap_loe_json: bool = False
) -> str:
    """Per-format instruction paragraph.

    The published List-of-Edges and Structured-JSON paragraphs describe each
    other's format; they ship verbatim, and ``swap_loe_json=True`` exchanges
    them for callers who want the descriptions to match the bodies.
    """
    section = format_id.value
    if swap_loe_json:
        if format_id is FormatId.LIST_OF_EDGES:
            section = FormatId.STRUCTURED_JSON.value
        elif format_id is FormatId.STRUCTURED_JSON:
            section = FormatId.LIST_OF_EDGES.value
    return templates[f"preamble.{section}"]


def render(
    graph: KnowledgeGraph | Subgraph,
    format_id: FormatId,
    templates: Templates,
    question: str | None = None,
    swap_loe_json: bool = False,
) -> TextualizedPrompt:
    """Render a (sub)graph into a prompt in the requested format.

    ``question`` already carries the task question text; the answer-format
    marker line is appended here so every prompt shares the convention.
    """
    g = graph.graph if isinstance(graph, Subgraph) else graph
    pre = preamble(format_id, templates, swap_loe_json)
    body = render_body(g, format_id)
    sep = "\n" if format_id is FormatId.STRUCTURED_JSON else "\n\n"
    context = f"{pre}{sep}Knowledge Graph:\n{body}"
    if question is None:
        full = context
    else:
        full = f"{context}\n\nQuestion: {question}\n{templates.answer_marker}"
    return TextualizedPrompt(
        format=format_id,
        preamble=pre,
        body=body,
        question=question,
        full_prompt=full,
        approx_tokens=approx_token_count(full),
    )


# -- token estimation -----------------------------------------------------------

# Pieces: alphabetic words, short digit groups, single punctuation marks,
# horizontal-space runs, newline runs with trailing indentation.  Costs
# approximate byte-pair encoders: one token per ~7 letters of a word, one per
# digit group or punctuation character, one for a newline run plus one more
# when it carries indentation, one per mid-line space run longer than the
# single space BPE fuses into the following word.
_TOKEN_PIECE = re.compile(r"[A-Za-z]+|[0-9]{1,3}|[^A-Za-z0-9\s]|[^\S\n]+|\n[\s]*")


def approx_token_count(text: str) -> int:
    """Deterministic approximate subword count; monotone in text length."""
    total = 0
    for m in _TOKEN_PIECE.finditer(text):
        piece = m.group()
        if piece.isspace():
            if "\n" in piece:
                total += 2 if piece.strip("\n") else 1
            elif len(piece) > 1:
                total += 1
        elif piece[0].isalpha():
            total += max(1, math.ceil(len(piece) / 7))
        else:
            total += 1
    return total
