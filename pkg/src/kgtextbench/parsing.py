"""Format-subset parsers that invert ``render_body``.

These recover the label-level triple set from a rendered graph body.  They
are scoped to what the renderer emits (used for round-trip checking and
prompt inspection), not general-purpose Turtle/JSON-LD readers.
"""

from __future__ import annotations

import json
import re

import yaml

from kgtextbench.textualize import FormatId

LabelTriple = tuple[str, str, str]


class BodyParseError(ValueError):
    """Rendered body does not match the expected shape."""


def _parse_list_of_edges(body: str) -> set[LabelTriple]:
    lines = body.split("\n")
    if not lines or lines[0] != "Edges: [" or lines[-1] != "]":
        raise BodyParseError("list-of-edges body must be wrapped in 'Edges: [' ... ']'")
    triples: set[LabelTriple] = set()
    for line in lines[1:-1]:
        line = line.rstrip(",")
        if not (line.startswith("(") and line.endswith(")")):
            raise BodyParseError(f"bad edge line {line!r}")
        parts = line[1:-1].split(", ")
        if len(parts) != 3:
            raise BodyParseError(f"edge line does not split into three parts: {line!r}")
        triples.add((parts[0], parts[1], parts[2]))
    return triples


def _parse_structured_json(body: str) -> set[LabelTriple]:
    nested = json.loads(body)
    triples: set[LabelTriple] = set()
    for subject, rels in nested.items():
        for relation, objects in rels.items():
            for obj in objects:
                triples.add((subject, relation, obj))
    return triples


def _parse_structured_yaml(body: str) -> set[LabelTriple]:
    nested = yaml.safe_load(body)
    if not isinstance(nested, dict):
        raise BodyParseError("YAML body must be a mapping of subjects")
    triples: set[LabelTriple] = set()
    for subject, rels in nested.items():
        for relation, objects in rels.items():
            for obj in objects:
                triples.add((str(subject), str(relation), str(obj)))
    return triples


_TURTLE_STRING = re.compile(r'"((?:[^"\\]|\\.)*)"')
_TURTLE_UNESCAPE = {"\\\\": "\\", '\\"': '"', "\\n": "\n", "\\r": "\r", "\\t": "\t"}


def _turtle_unquote(text: str) -> str:
    m = _TURTLE_STRING.fullmatch(text.strip())
    if not m:
        raise BodyParseError(f"bad Turtle string {text!r}")
    return re.sub(r"\\.", lambda mm: _TURTLE_UNESCAPE.get(mm.group(), mm.group()[1]), m.group(1))


def _split_statements(block: str) -> list[str]:
    """Split a Turtle block on ' ;' separators outside quoted strings."""
    parts: list[str] = []
    buf: list[str] = []
    in_string = False
    i = 0
    while i < len(block):
        ch = block[i]
        if in_string:
            buf.append(ch)
            if ch == "\\" and i + 1 < len(block):
                buf.append(block[i + 1])
                i += 1
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
            buf.append(ch)
        elif ch == " " and block.startswith(" ;", i):
            parts.append("".join(buf))
            buf = []
            i += 1
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts


def _parse_rdf_turtle(body: str) -> set[LabelTriple]:
    blocks = [b for b in body.split("\n\n") if b.strip()]
    rel_labels: dict[str, str] = {}
    node_labels: dict[str, str] = {}
    edges: list[tuple[str, str, str]] = []  # (subject iri, relation iri, object iri)
    for block in blocks:
        if block.startswith("@prefix"):
            continue
        statements = [s.strip() for s in _split_statements(block)]
        head = statements[0]
        m = re.match(r"(ex:\S+) a (\S+)$", head)
        if not m:
            raise BodyParseError(f"bad Turtle block head {head!r}")
        node, node_type = m.group(1), m.group(2)
        for stmt in statements[1:]:
            stmt = stmt.strip()
            if stmt.endswith(" ."):
                stmt = stmt[:-2]
            if stmt.startswith("rdfs:label"):
                label = _turtle_unquote(stmt[len("rdfs:label") :])
                if node_type == "rdf:Property":
                    rel_labels[node] = label
                else:
                    node_labels[node] = label
            else:
                pred, _, refs = stmt.partition(" ")
                for ref in refs.split(", "):
                    edges.append((node, pred, ref.strip()))
    triples: set[LabelTriple] = set()
    for s, p, o in edges:
        try:
            triples.add((node_labels[s], rel_labels[p], node_labels[o]))
        except KeyError as exc:
            raise BodyParseError(f"unresolved Turtle reference {exc}") from None
    return triples


def _parse_json_ld(body: str) -> set[LabelTriple]:
    doc = json.loads(body)
    rel_labels: dict[str, str] = {}
    node_labels: dict[str, str] = {}
    edges: list[tuple[str, str, str]] = []
    for node in doc["@graph"]:
        ident = node["@id"]
        if node.get("type") == "rdf:Property":
            rel_labels[ident] = node["label"]
            continue
        node_labels[ident] = node["label"]
        for key, value in node.items():
            if key in ("@id", "type", "label"):
                continue
            refs = value if isinstance(value, list) else [value]
            for ref in refs:
                edges.append((ident, key, ref["@id"]))
    triples: set[LabelTriple] = set()
    for s, p, o in edges:
        try:
            triples.add((node_labels[s], rel_labels[p], node_labels[o]))
        except KeyError as exc:
            raise BodyParseError(f"unresolved JSON-LD reference {exc}") from None
    return triples


_PARSERS = {
    FormatId.LIST_OF_EDGES: _parse_list_of_edges,
    FormatId.STRUCTURED_JSON: _parse_structured_json,
    FormatId.STRUCTURED_YAML: _parse_structured_yaml,
    FormatId.RDF_TURTLE: _parse_rdf_turtle,
    FormatId.JSON_LD: _parse_json_ld,
}


def parse_body(format_id: FormatId, body: str) -> set[LabelTriple]:
    """Recover the label-level triple set from a rendered body."""
    return _PARSERS[format_id](body)
