import json
import os
from pathlib import Path

import pytest
import yaml

from kgtextbench import cli, runner
from kgtextbench.config import ConfigError, load_config
from kgtextbench.synth import build_synthetic_kg, write_graph_tsv


@pytest.fixture(scope="module")
def source_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("source")
    kg = build_synthetic_kg(num_core=60, num_attr=150, total_edges=500, seed=17)
    write_graph_tsv(kg, path)
    return path


def write_config(tmp_path: Path, source_dir: Path, **overrides) -> Path:
    cfg = {
        "source": {
            "entities": str(source_dir / "entities.tsv"),
            "relations": str(source_dir / "relations.tsv"),
            "edges": str(source_dir / "edges.tsv"),
            "core_category": "country",
        },
        "seed": 42,
        "output_dir": str(tmp_path / "out"),
        "pseudonymize": "off",
        "formats": ["list_of_edges", "structured_json"],
        "tasks": {
            "triple_retrieval": {"instances": 3, "max_edges": 50},
            "highest_degree": {"instances": 3, "max_edges": 50},
        },
        "endpoints": [
            {"model_id": "echo", "dialect": "mock", "behavior": "echo_gold"},
        ],
    }
    cfg.update(overrides)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


ALL_TASKS_BLOCK = {
    "triple_retrieval": {"instances": 2, "max_edges": 50},
    "shortest_path": {"instances": 2, "max_edges": 50},
    "highest_degree": {"instances": 2, "max_edges": 50},
    "agg_by_relation": {"instances": 2, "max_edges": 60},
    "agg_neighbor_property": {"instances": 2, "max_edges": 60},
}


class TestConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")

    def test_missing_source(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({"seed": 1}))
        with pytest.raises(ConfigError, match="source"):
            load_config(path)

    def test_unknown_format(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir, formats=["csv"])
        with pytest.raises(ConfigError, match="format"):
            load_config(path)

    def test_missing_endpoints(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir, endpoints=[])
        with pytest.raises(ConfigError, match="endpoint"):
            load_config(path)

    def test_overrides(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path, seed=7, tasks=["HighestDegree"], formats=["json_ld"])
        assert cfg.seed == 7
        assert cfg.enabled_tasks() == ["HighestDegree"]
        assert [f.value for f in cfg.formats] == ["json_ld"]

    def test_digest_tracks_build_settings(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        a = load_config(path).digest()
        assert a == load_config(path).digest()
        assert a != load_config(path, seed=99).digest()
        assert a == load_config(path, formats=["json_ld"]).digest()  # run-only setting


class TestBuild:
    def test_deterministic_rebuild(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir, tasks=ALL_TASKS_BLOCK)
        cfg_a = load_config(path, output_dir=str(tmp_path / "out_a"))
        cfg_b = load_config(path, output_dir=str(tmp_path / "out_b"))
        runner.build(cfg_a)
        runner.build(cfg_b)
        files = sorted(p.name for p in (tmp_path / "out_a").glob("instances_*.jsonl"))
        assert len(files) == 5
        for name in files:
            assert (tmp_path / "out_a" / name).read_bytes() == (
                tmp_path / "out_b" / name
            ).read_bytes()

    def test_triple_retrieval_balance(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir,
            tasks={"triple_retrieval": {"instances": 10, "max_edges": 50}},
        )
        cfg = load_config(path)
        runner.build(cfg)
        instances = runner.load_instances(cfg)
        positives = sum(1 for i in instances if i.gold is True)
        assert positives == 5

    def test_validate_clean(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir, tasks=ALL_TASKS_BLOCK)
        cfg = load_config(path)
        runner.build(cfg)
        assert runner.validate(cfg) == []

    def test_pseudo_twins_share_topology(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir, pseudonymize="both",
            tasks={"highest_degree": {"instances": 2, "max_edges": 50}},
        )
        cfg = load_config(path)
        runner.build(cfg)
        instances = runner.load_instances(cfg)
        plain = {i.instance_index: i for i in instances if not i.pseudo}
        pseudo = {i.instance_index: i for i in instances if i.pseudo}
        assert set(plain) == set(pseudo) == {0, 1}
        for idx in plain:
            a, b = plain[idx].subgraph.graph, pseudo[idx].subgraph.graph
            assert [t[:] for t in a.triples] == [t[:] for t in b.triples]
            assert plain[idx].meta["direction"] == pseudo[idx].meta["direction"]
            assert plain[idx].gold != pseudo[idx].gold  # relabelled winner

    def test_digest_mismatch_refuses_reuse(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path)
        runner.build(cfg)
        other = load_config(path, seed=99)
        with pytest.raises(runner.BuildError, match="different configuration"):
            runner.load_instances(other)
        assert runner.load_instances(other, allow_digest_mismatch=True)

    def test_missing_source_graph(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path)
        cfg.edges_file = tmp_path / "gone.tsv"
        with pytest.raises(runner.BuildError, match="missing"):
            runner.load_source_graph(cfg)


class TestRun:
    def build_and_run(self, tmp_path, source_dir, **overrides):
        path = write_config(tmp_path, source_dir, **overrides)
        cfg = load_config(path)
        runner.build(cfg)
        result = runner.run(cfg)
        return cfg, result

    def test_echo_gold_scores_one(self, tmp_path, source_dir):
        cfg, result = self.build_and_run(tmp_path, source_dir)
        records = runner.load_records(result.records_path)
        # 2 tasks x 3 instances x 2 formats x 1 endpoint
        assert len(records) == 12
        assert all(r.score == 1 for r in records)
        assert result.errors == 0

    def test_single_format_count(self, tmp_path, source_dir):
        cfg, result = self.build_and_run(
            tmp_path, source_dir, formats=["list_of_edges"],
        )
        assert result.new_records == 6

    def test_existing_records_need_resume(self, tmp_path, source_dir):
        cfg, _ = self.build_and_run(tmp_path, source_dir)
        with pytest.raises(runner.BuildError, match="--resume"):
            runner.run(cfg)

    def test_interrupt_and_resume_set_equality(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path)
        runner.build(cfg)
        partial = runner.run(cfg, stop_after=5)
        assert partial.stopped_early and partial.new_records == 5
        resumed = runner.run(cfg, resume=True)
        assert resumed.new_records == 7
        combined = runner.load_records(cfg.output_dir / "records.jsonl")
        assert len(combined) == 12
        assert len({r.key() for r in combined}) == 12

        full_cfg = load_config(path, output_dir=str(tmp_path / "full"))
        runner.build(full_cfg)
        full = runner.run(full_cfg)
        full_records = runner.load_records(full.records_path)

        def semantic(rec):
            d = rec.to_dict()
            d.pop("cache_hit")
            return json.dumps(d, sort_keys=True)

        assert {semantic(r) for r in combined} == {semantic(r) for r in full_records}

    def test_records_file_byte_deterministic(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        outs = []
        for name in ("r1", "r2"):
            cfg = load_config(path, output_dir=str(tmp_path / name))
            runner.build(cfg)
            runner.run(cfg)
            outs.append((tmp_path / name / "records.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_endpoint_failures_tagged_not_fatal(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir,
            endpoints=[
                {"model_id": "echo", "dialect": "mock", "behavior": "echo_gold"},
                {"model_id": "broken", "dialect": "mock"},
            ],
        )
        cfg = load_config(path)
        runner.build(cfg)
        result = runner.run(cfg)
        assert result.new_records == 24
        assert result.errors == 12
        records = runner.load_records(result.records_path)
        broken = [r for r in records if r.model_id == "broken"]
        assert all(r.error is not None and r.score is None for r in broken)


class TestReport:
    def test_report_artifacts(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir, tasks=ALL_TASKS_BLOCK)
        cfg = load_config(path)
        runner.build(cfg)
        runner.run(cfg)
        summary, report_dir = runner.report(cfg)
        assert (report_dir / "summary.csv").exists()
        assert (report_dir / "summary.json").exists()
        assert "best format for echo" in (report_dir / "digest.txt").read_text()
        assert all(c.accuracy == 1.0 for c in summary.cells)
        assert summary.path_length  # meta joined from instance files

    def test_empty_records_error(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path)
        with pytest.raises(runner.BuildError, match="no records"):
            runner.report(cfg)

    def test_render_instance(self, tmp_path, source_dir):
        path = write_config(tmp_path, source_dir)
        cfg = load_config(path)
        runner.build(cfg)
        prompt = runner.render_instance(cfg, "HighestDegree", 0, "list_of_edges")
        assert "Edges: [" in prompt
        assert "Question:" in prompt
        assert prompt.rstrip().endswith('"Answer: <your answer>".')


class TestCli:
    def test_full_cycle_exit_codes(self, tmp_path, source_dir, capsys):
        path = write_config(tmp_path, source_dir)
        assert cli.main(["build", "--config", str(path)]) == 0
        assert cli.main(["run", "--config", str(path)]) == 0
        assert cli.main(["report", "--config", str(path)]) == 0
        assert cli.main(["validate", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "best format for echo" in out

    def test_config_error_is_exit_1(self, tmp_path, capsys):
        missing = tmp_path / "missing.yaml"
        assert cli.main(["build", "--config", str(missing)]) == 1

    def test_partial_failure_is_exit_2(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir,
            endpoints=[{"model_id": "broken", "dialect": "mock"}],
        )
        assert cli.main(["build", "--config", str(path)]) == 0
        assert cli.main(["run", "--config", str(path)]) == 2

    def test_render_verb(self, tmp_path, source_dir, capsys):
        path = write_config(tmp_path, source_dir)
        cli.main(["build", "--config", str(path)])
        code = cli.main([
            "render", "--config", str(path),
            "--task", "TripleRetrieval", "--format", "list_of_edges",
        ])
        assert code == 0
        assert "Knowledge Graph:" in capsys.readouterr().out

    def test_synth_verb(self, tmp_path, capsys):
        code = cli.main(["synth", "--out-dir", str(tmp_path / "kg"), "--edges", "500"])
        assert code == 0
        assert (tmp_path / "kg" / "edges.tsv").exists()


class TestConfigValidationExtras:
    def test_instances_must_be_positive(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir,
            tasks={"triple_retrieval": {"instances": 0}},
        )
        with pytest.raises(ConfigError, match="instances"):
            load_config(path)

    def test_duplicate_model_ids(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir,
            endpoints=[
                {"model_id": "echo", "dialect": "mock"},
                {"model_id": "echo", "dialect": "mock"},
            ],
        )
        with pytest.raises(ConfigError, match="unique"):
            load_config(path)


class TestInstanceSerialization:
    def test_prompt_stable_across_reconstruction(self, tmp_path, source_dir, templates=None):
        from kgtextbench.templates import load_templates
        from kgtextbench.textualize import ALL_FORMATS, render

        path = write_config(tmp_path, source_dir, tasks=ALL_TASKS_BLOCK, pseudonymize="both")
        cfg = load_config(path)
        kg = runner.load_source_graph(cfg)
        tpl = cfg.load_templates()
        runner.build(cfg, kg)
        for inst in runner.load_instances(cfg):
            round_tripped = runner.instance_from_dict(runner.instance_to_dict(inst))
            for fmt in ALL_FORMATS:
                a = render(inst.subgraph, fmt, tpl, question=inst.question).full_prompt
                b = render(round_tripped.subgraph, fmt, tpl, question=round_tripped.question).full_prompt
                assert a == b

    def test_isolated_seed_survives_serialization(self, templates):
        from kgtextbench.graph import KnowledgeGraph
        from kgtextbench.sampler import Subgraph
        from kgtextbench.tasks import TaskInstance

        g = KnowledgeGraph(
            {0: "A", 1: "B", 2: "Lonely"}, {0: "r"}, [(0, 0, 1)], {0: "country"}
        )
        inst = TaskInstance(
            task_id="TripleRetrieval", instance_index=0,
            subgraph=Subgraph(graph=g, seed_entities=(0, 2), protected=()),
            question="q", gold=True,
            meta={"is_positive": True, "subject": "A", "relation": "r", "object": "B"},
            rng_seed=1,
        )
        again = runner.instance_from_dict(runner.instance_to_dict(inst))
        # the label-only seed cannot be represented by label triples and is
        # dropped; triples and answers are untouched
        assert again.subgraph.graph.label_triples() == g.label_triples()
        assert again.gold is True


class TestCrossProcessDeterminism:
    def test_build_immune_to_hash_randomization(self, tmp_path, source_dir):
        import subprocess
        import sys

        config_path = write_config(tmp_path, source_dir, tasks=ALL_TASKS_BLOCK,
                                   pseudonymize="both")
        script = (
            "import sys; from kgtextbench.config import load_config; "
            "from kgtextbench import runner; "
            "cfg = load_config(sys.argv[1], output_dir=sys.argv[2]); "
            "runner.build(cfg)"
        )
        digests = []
        for out_name, hash_seed in (("hs_a", "0"), ("hs_b", "31337")):
            env = dict(os.environ, PYTHONHASHSEED=hash_seed)
            subprocess.run(
                [sys.executable, "-c", script, str(config_path), str(tmp_path / out_name)],
                check=True, env=env, capture_output=True,
            )
            files = sorted((tmp_path / out_name).glob("instances_*.jsonl"))
            assert len(files) == 10
            digests.append([f.read_bytes() for f in files])
        assert digests[0] == digests[1]


class TestPseudoOnlyMode:
    def test_on_writes_only_pseudo_files(self, tmp_path, source_dir):
        path = write_config(
            tmp_path, source_dir, pseudonymize="on",
            tasks={"shortest_path": {"instances": 3, "max_edges": 50},
                   "triple_retrieval": {"instances": 3, "max_edges": 50}},
        )
        cfg = load_config(path)
        runner.build(cfg)
        names = sorted(p.name for p in (tmp_path / "out").glob("instances_*.jsonl"))
        assert names == [
            "instances_ShortestPath_pseudo.jsonl",
            "instances_TripleRetrieval_pseudo.jsonl",
        ]
        assert runner.validate(cfg) == []
        instances = runner.load_instances(cfg)
        assert all(i.pseudo for i in instances)
