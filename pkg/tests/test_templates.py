import pytest

from kgtextbench.templates import load_templates, parse_templates


class TestParsing:
    def test_sections_and_blank_lines(self):
        text = "[a]\nline one\n\nline two\n\n[b]\nother\n"
        t = parse_templates(text)
        assert t["a"] == "line one\n\nline two"
        assert t["b"] == "other"

    def test_missing_section(self):
        t = parse_templates("[a]\nx\n")
        with pytest.raises(KeyError, match="missing template section"):
            t["nope"]

    def test_comments_before_first_section_ignored(self):
        t = parse_templates("# header comment\n[a]\nx\n")
        assert t["a"] == "x"


class TestBundled:
    def test_question_templates_cover_all_tasks(self, templates):
        from kgtextbench.tasks import TASK_IDS

        for task in TASK_IDS:
            assert templates[f"question.{task}"]
        assert "Answer:" in templates.answer_marker

    def test_question_formatting(self, templates):
        q = templates.question(
            "AggByRelation", direction="outgoing",
            relation="diplomatic relation", anchor="Veldoria",
        )
        assert q == (
            "How many outgoing relations of type diplomatic relation does Veldoria have?"
        )

    def test_neighbor_property_wording(self, templates):
        q = templates.question(
            "AggNeighborProperty", anchor="Veldoria", relation="member of"
        )
        assert q == (
            "How many of the directly connected entities to Veldoria have an "
            "outgoing property of type member of in the knowledge graph?"
        )


class TestOverride:
    def test_custom_file_swaps_wording(self, tmp_path, fixture_graph):
        custom = tmp_path / "templates.txt"
        custom.write_text(
            "[preamble.list_of_edges]\nCustom preamble.\n\n"
            "[question.TripleRetrieval]\nIs ({subject}, {relation}, {object}) there?\n\n"
            "[answer_marker]\nFinish with Answer: <x>\n"
        )
        t = load_templates(custom)
        assert t["preamble.list_of_edges"] == "Custom preamble."
        q = t.question("TripleRetrieval", subject="A", relation="r", object="B")
        assert q == "Is (A, r, B) there?"
