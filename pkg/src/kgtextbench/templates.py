"""Prompt template file: preambles, question templates, answer marker.

The file is plain text split into ``[section]`` blocks.  Section bodies keep
internal blank lines and lose exactly one trailing newline, so multi-line
preambles survive verbatim.  Question templates use ``str.format`` named
placeholders.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path


class Templates:
    def __init__(self, sections: dict[str, str]):
        self.sections = sections

    def __getitem__(self, name: str) -> str:
        try:
            return self.sections[name]
        except KeyError:
            raise KeyError(f"missing template section [{name}]") from None

    def question(self, task_id: str, **fields: str) -> str:
        return self[f"question.{task_id}"].format(**fields)

    @property
    def answer_marker(self) -> str:
        return self["answer_marker"]


def parse_templates(text: str) -> Templates:
    sections: dict[str, str] = {}
    name: str | None = None
    buf: list[str] = []

    def flush() -> None:
        if name is not None:
            body = "\n".join(buf)
            while body.endswith("\n"):
                body = body[:-1]
            sections[name] = body.strip("\n")

    for line in text.splitlines():
        if line.startswith("[") and line.rstrip().endswith("]"):
            flush()
            name = line.strip()[1:-1]
            buf = []
        elif name is not None:
            buf.append(line)
    flush()
    return Templates(sections)


def load_templates(path: str | Path | None = None) -> Templates:
    """Load templates from ``path``, or the bundled defaults."""
    if path is None:
        text = (
            resources.files("kgtextbench")
            .joinpath("data/templates.txt")
            .read_text(encoding="utf-8")
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_templates(text)
