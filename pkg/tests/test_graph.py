import pytest
from hypothesis import given, settings

from kgtextbench import oracles
from kgtextbench.graph import KnowledgeGraph, LoadError, load_labeled_tsv

from .conftest import eid
from .strategies import label_graphs


class TestLoad:
    def test_fixture_counts(self, fixture_graph):
        assert len(fixture_graph.triples) == 10
        assert len(fixture_graph.relations) == 4
        assert len(fixture_graph.entities) == 14
        assert fixture_graph.load_report["duplicates_dropped"] == 0

    def test_duplicate_edges_collapse(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\tA\n1\tB\n")
        (tmp_path / "r.tsv").write_text("0\tr\n")
        (tmp_path / "g.tsv").write_text("0\t1\t0\n0\t1\t0\n")
        g = load_labeled_tsv(tmp_path / "e.tsv", tmp_path / "r.tsv", tmp_path / "g.tsv")
        assert len(g.triples) == 1
        assert g.load_report["duplicates_dropped"] == 1

    def test_malformed_line_reports_position(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\tA\n1\tB\n")
        (tmp_path / "r.tsv").write_text("0\tr\n")
        (tmp_path / "g.tsv").write_text("0\t1\t0\nnot-a-line\n")
        with pytest.raises(LoadError, match=r"g\.tsv:2"):
            load_labeled_tsv(tmp_path / "e.tsv", tmp_path / "r.tsv", tmp_path / "g.tsv")

    def test_dangling_id(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\tA\n")
        (tmp_path / "r.tsv").write_text("0\tr\n")
        (tmp_path / "g.tsv").write_text("0\t7\t0\n")
        with pytest.raises(LoadError, match="unknown tail entity id 7"):
            load_labeled_tsv(tmp_path / "e.tsv", tmp_path / "r.tsv", tmp_path / "g.tsv")

    def test_empty_edge_file(self, tmp_path):
        (tmp_path / "e.tsv").write_text("")
        (tmp_path / "r.tsv").write_text("")
        (tmp_path / "g.tsv").write_text("")
        with pytest.raises(LoadError, match="empty edge file"):
            load_labeled_tsv(tmp_path / "e.tsv", tmp_path / "r.tsv", tmp_path / "g.tsv")


class TestQueries:
    def test_contains_triple(self, fixture_graph):
        g = fixture_graph
        brunei, wto, g20 = eid(g, "Brunei"), eid(g, "World Trade Organization"), eid(g, "G20")
        member_of = next(r for r, lab in g.relations.items() if lab == "member of")
        assert g.contains_triple(brunei, member_of, wto)
        assert not g.contains_triple(brunei, member_of, g20)

    def test_contains_unknown_id(self, fixture_graph):
        with pytest.raises(KeyError):
            fixture_graph.contains_triple(999, 0, 0)

    def test_degrees(self, fixture_graph):
        g = fixture_graph
        assert g.degree(eid(g, "South Korea"), "out") == 3
        assert g.degree(eid(g, "Telugu"), "in") == 1
        assert g.degree(eid(g, "Telugu"), "out") == 0
        assert g.degree(eid(g, "Telugu"), "total") == 1

    def test_self_loop_degree(self):
        g = KnowledgeGraph.from_label_triples([("A", "r", "A"), ("A", "r", "B")])
        a = eid(g, "A")
        assert g.degree(a, "in") == 1
        assert g.degree(a, "out") == 2
        assert g.degree(a, "total") == 3

    def test_bfs_distance(self, fixture_graph):
        g = fixture_graph
        assert g.bfs_distance(eid(g, "Ukraine"), eid(g, "Colombia")) == 2
        assert g.bfs_distance(eid(g, "Ukraine"), eid(g, "Ukraine")) == 0
        assert g.bfs_distance(eid(g, "Telugu"), eid(g, "G20")) is None

    def test_all_shortest_paths_fixture(self, fixture_graph):
        g = fixture_graph
        paths, capped = g.all_shortest_paths(eid(g, "Ukraine"), eid(g, "Colombia"))
        assert not capped
        assert paths == [[eid(g, "Ukraine"), eid(g, "South Korea"), eid(g, "Colombia")]]
        paths, _ = g.all_shortest_paths(eid(g, "Telugu"), eid(g, "Marathi"))
        assert paths == [[eid(g, "Telugu"), eid(g, "Andhra Pradesh"), eid(g, "Marathi")]]

    def test_all_shortest_paths_adjacent(self, fixture_graph):
        g = fixture_graph
        paths, _ = g.all_shortest_paths(eid(g, "Brunei"), eid(g, "G20"))
        assert paths == []  # different components
        paths, _ = g.all_shortest_paths(eid(g, "South Korea"), eid(g, "G20"))
        assert paths == [[eid(g, "South Korea"), eid(g, "G20")]]

    def test_all_shortest_paths_same_endpoint_rejected(self, fixture_graph):
        with pytest.raises(ValueError):
            fixture_graph.all_shortest_paths(0, 0)

    def test_path_cap(self):
        # K2,2-style diamond: two distinct 2-hop paths, cap at 1
        g = KnowledgeGraph.from_label_triples(
            [("A", "r", "B"), ("A", "r", "C"), ("B", "r", "D"), ("C", "r", "D")]
        )
        paths, capped = g.all_shortest_paths(eid(g, "A"), eid(g, "D"), cap=1)
        assert capped and len(paths) == 1


class TestProperties:
    @given(label_graphs())
    @settings(max_examples=60, deadline=None)
    def test_index_consistency(self, g):
        out_sum = sum(len(v) for v in g.out_index.values())
        in_sum = sum(len(v) for v in g.in_index.values())
        assert out_sum == len(g.triples) == in_sum
        for e, pairs in g.out_index.items():
            for r, o in pairs:
                assert (r, e) in g.in_index[o]

    @given(label_graphs())
    @settings(max_examples=40, deadline=None)
    def test_bfs_symmetry(self, g):
        nodes = sorted(g.entities)[:5]
        for a in nodes:
            for b in nodes:
                assert g.bfs_distance(a, b) == g.bfs_distance(b, a)

    @given(label_graphs(max_nodes=8, max_edges=14))
    @settings(max_examples=40, deadline=None)
    def test_triangle_inequality(self, g):
        nodes = sorted(g.entities)[:4]
        for a in nodes:
            for b in nodes:
                for c in nodes:
                    dab, dbc, dac = (
                        g.bfs_distance(a, b), g.bfs_distance(b, c), g.bfs_distance(a, c)
                    )
                    if dab is not None and dbc is not None:
                        assert dac is not None and dac <= dab + dbc

    @given(label_graphs(max_nodes=8, max_edges=16))
    @settings(max_examples=60, deadline=None)
    def test_all_shortest_paths_against_enumerator(self, g):
        nodes = sorted(g.entities)
        a, b = nodes[0], nodes[-1]
        if a == b:
            return
        paths, capped = g.all_shortest_paths(a, b)
        assert not capped
        dist, expected = oracles.shortest_paths(
            g.label_triples(), g.entities[a], g.entities[b]
        )
        got = {tuple(g.entities[e] for e in p) for p in paths}
        assert got == {tuple(p) for p in expected}
        if paths:
            assert all(len(p) == g.bfs_distance(a, b) + 1 for p in paths)
            # lexicographic enumeration order by id sequence
            assert paths == sorted(paths)

    @given(label_graphs())
    @settings(max_examples=30, deadline=None)
    def test_label_round_trip_preserves_order(self, g):
        rebuilt = KnowledgeGraph.from_label_triples(g.label_triples())
        assert rebuilt.label_triples() == g.label_triples()
