"""End-to-end orchestration: build instance files, run endpoints, report.

Build draws N subgraph/question/answer instances per enabled task (plus a
pseudonymized twin sharing the same subgraph and question stream when
requested), verifies every gold answer against the brute-force oracles, and
writes self-contained JSONL files plus a manifest.  Run executes the
instance x format x endpoint cross-product with caching and resume; report
aggregates the record file into the summary tables.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from tqdm import tqdm

from kgtextbench import oracles
from kgtextbench.aggregate import (
    SummaryTable,
    aggregate,
    digest_text,
    write_extra_csvs,
    write_summary_csv,
    write_summary_json,
)
from kgtextbench.config import BenchConfig
from kgtextbench.gateway import AuthError, Gateway, GatewayError
from kgtextbench.graph import KnowledgeGraph, Triple, load_labeled_tsv
from kgtextbench.pseudonyms import PseudonymPool, apply_mapping, build_mapping
from kgtextbench.rng import child_rng, derive_seed
from kgtextbench.sampler import SamplingError, Subgraph, sample_subgraph
from kgtextbench.scoring import EvalRecord, gold_answer_text, score_record
from kgtextbench.tasks import (
    GenerationError,
    TaskInstance,
    gen_agg_by_relation,
    gen_agg_neighbor_property,
    gen_highest_degree,
    gen_shortest_path,
    gen_triple_retrieval,
    shortest_path_question_and_gold,
)
from kgtextbench.templates import Templates
from kgtextbench.textualize import render

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_GEN_ATTEMPTS = 16


class BuildError(RuntimeError):
    """Instance generation failed for a reason retries cannot fix."""


class OracleMismatchError(BuildError):
    """A generated gold answer disagrees with the brute-force oracle: a bug."""


@dataclass
class RunResult:
    records_path: Path
    new_records: int
    skipped: int
    errors: int
    stopped_early: bool = False


def load_source_graph(cfg: BenchConfig) -> KnowledgeGraph:
    for p in (cfg.entities_file, cfg.relations_file, cfg.edges_file):
        if not Path(p).exists():
            raise BuildError(f"source graph file missing: {p}")
    return load_labeled_tsv(cfg.entities_file, cfg.relations_file, cfg.edges_file)


# -- instance serialization -----------------------------------------------------

_PRIVATE_META = ("source_id", "destination_id", "source_path_ids")


def instance_to_dict(inst: TaskInstance) -> dict:
    g = inst.subgraph.graph
    meta = {k: v for k, v in inst.meta.items() if k not in _PRIVATE_META}
    return {
        "instance_index": inst.instance_index,
        "task": inst.task_id,
        "pseudo": inst.pseudo,
        "rng_seed": inst.rng_seed,
        "question": inst.question,
        "gold": inst.gold,
        "meta": meta,
        "subgraph": {
            "triples": [list(t) for t in g.label_triples()],
            "categories": {
                g.entities[e]: c for e, c in sorted(g.entity_category.items())
            },
            "seeds": [g.entities[e] for e in inst.subgraph.seed_entities],
            "protected": [
                [g.entities[s], g.relations[r], g.entities[o]]
                for s, r, o in inst.subgraph.protected
            ],
        },
    }


def instance_from_dict(d: dict) -> TaskInstance:
    sub = d["subgraph"]
    graph = KnowledgeGraph.from_label_triples(
        [tuple(t) for t in sub["triples"]], sub.get("categories") or {}
    )
    label_to_id = {lab: e for e, lab in graph.entities.items()}
    rel_to_id = {lab: r for r, lab in graph.relations.items()}
    # label-only seeds (isolated after pruning) cannot be rebuilt from triples
    seeds = tuple(label_to_id[lab] for lab in sub.get("seeds", []) if lab in label_to_id)
    protected = tuple(
        Triple(label_to_id[s], rel_to_id[r], label_to_id[o])
        for s, r, o in sub.get("protected", [])
    )
    gold = d["gold"]
    if d["task"] == "ShortestPath":
        gold = [list(p) for p in gold]
    return TaskInstance(
        task_id=d["task"],
        instance_index=d["instance_index"],
        subgraph=Subgraph(graph=graph, seed_entities=seeds, protected=protected),
        question=d["question"],
        gold=gold,
        meta=d["meta"],
        rng_seed=d["rng_seed"],
        pseudo=d["pseudo"],
    )


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=True, separators=(",", ":"))


# -- generation -----------------------------------------------------------------


def _verify_or_die(inst: TaskInstance) -> None:
    problems = oracles.verify_instance(
        inst.task_id, inst.subgraph.graph.label_triples(), inst.meta, inst.gold
    )
    if problems:
        raise OracleMismatchError(
            f"{inst.task_id} instance {inst.instance_index}"
            f" (pseudo={inst.pseudo}): {'; '.join(problems)}"
        )


def generate_plain_instance(
    kg: KnowledgeGraph,
    cfg: BenchConfig,
    task_id: str,
    index: int,
    templates: Templates,
    is_positive: bool | None = None,
) -> TaskInstance:
    """One plain instance, retrying sampling until generation succeeds."""
    task_cfg = cfg.tasks[task_id]
    last: Exception | None = None
    for attempt in range(MAX_GEN_ATTEMPTS):
        sample_seed = derive_seed(cfg.seed, task_id, index, "sample", attempt)
        question_seed = derive_seed(cfg.seed, task_id, index, "question", attempt)
        qrng = random.Random(question_seed)
        params = task_cfg.sampling_params(sample_seed)
        try:
            if task_id == "ShortestPath":
                inst = gen_shortest_path(
                    kg, params, qrng, templates, index,
                    rng_seed=question_seed, core_category=cfg.core_category,
                )
            else:
                sub = sample_subgraph(kg, params, core_category=cfg.core_category)
                if task_id == "TripleRetrieval":
                    inst = gen_triple_retrieval(
                        sub, qrng, templates, index, question_seed, is_positive
                    )
                elif task_id == "AggByRelation":
                    inst = gen_agg_by_relation(sub, qrng, templates, index, question_seed)
                elif task_id == "AggNeighborProperty":
                    inst = gen_agg_neighbor_property(sub, qrng, templates, index, question_seed)
                elif task_id == "HighestDegree":
                    inst = gen_highest_degree(sub, qrng, templates, index, question_seed)
                else:
                    raise BuildError(f"unknown task {task_id}")
        except (GenerationError, SamplingError) as exc:
            last = exc
            continue
        _verify_or_die(inst)
        return inst
    raise BuildError(f"{task_id} instance {index}: retries exhausted ({last})")


def make_pseudo_twin(
    cfg: BenchConfig,
    inst: TaskInstance,
    pool: PseudonymPool,
    templates: Templates,
    kg: KnowledgeGraph,
) -> TaskInstance:
    """Pseudonymized twin: same subgraph topology, same question stream."""
    prng = child_rng(cfg.seed, inst.task_id, inst.instance_index, "pseudo")
    mapping = build_mapping(
        inst.subgraph, pool, prng,
        scope=cfg.pseudonym_scope, core_category=cfg.core_category,
    )
    sub_hat = apply_mapping(inst.subgraph, mapping)
    qrng = random.Random(inst.rng_seed)
    if inst.task_id == "ShortestPath":
        question, gold, meta = shortest_path_question_and_gold(
            sub_hat,
            kg,
            inst.meta["source_id"],
            inst.meta["destination_id"],
            [list(p) for p in inst.meta["source_path_ids"]],
            inst.meta["enumeration_capped"],
            templates,
        )
        meta["source_id"] = inst.meta["source_id"]
        meta["destination_id"] = inst.meta["destination_id"]
        meta["source_path_ids"] = inst.meta["source_path_ids"]
        twin = TaskInstance(
            task_id=inst.task_id,
            instance_index=inst.instance_index,
            subgraph=sub_hat,
            question=question,
            gold=gold,
            meta=meta,
            rng_seed=inst.rng_seed,
            pseudo=True,
        )
    else:
        gen = {
            "TripleRetrieval": lambda: gen_triple_retrieval(
                sub_hat, qrng, templates, inst.instance_index, inst.rng_seed,
                is_positive=inst.meta.get("is_positive"),
            ),
            "AggByRelation": lambda: gen_agg_by_relation(
                sub_hat, qrng, templates, inst.instance_index, inst.rng_seed
            ),
            "AggNeighborProperty": lambda: gen_agg_neighbor_property(
                sub_hat, qrng, templates, inst.instance_index, inst.rng_seed
            ),
            "HighestDegree": lambda: gen_highest_degree(
                sub_hat, qrng, templates, inst.instance_index, inst.rng_seed
            ),
        }[inst.task_id]
        twin = gen()
        twin.pseudo = True
    _verify_or_die(twin)
    return twin


def _positivity_plan(cfg: BenchConfig, n: int) -> list[bool]:
    """Exactly ceil(n/2) positives, order shuffled by a dedicated stream."""
    plan = [True] * math.ceil(n / 2) + [False] * (n // 2)
    child_rng(cfg.seed, "TripleRetrieval", "balance").shuffle(plan)
    return plan


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def instance_file_name(task_id: str, pseudo: bool) -> str:
    return f"instances_{task_id}_{'pseudo' if pseudo else 'plain'}.jsonl"


def build(cfg: BenchConfig, kg: KnowledgeGraph | None = None) -> dict:
    """Build all enabled tasks' instance files; returns the manifest dict."""
    kg = kg or load_source_graph(cfg)
    templates = cfg.load_templates()
    digest = cfg.digest()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pool: PseudonymPool | None = None
    if cfg.pseudonymize != "off":
        pool = PseudonymPool.load(cfg.pseudonym_csv)

    files: dict[str, str] = {}
    quiet = not sys.stderr.isatty()
    for task_id in cfg.enabled_tasks():
        n = cfg.tasks[task_id].instances
        plan = _positivity_plan(cfg, n) if task_id == "TripleRetrieval" else [None] * n
        plain: list[TaskInstance] = []
        for index in tqdm(range(n), desc=f"build {task_id}", disable=quiet):
            plain.append(
                generate_plain_instance(kg, cfg, task_id, index, templates, plan[index])
            )
        variants: dict[bool, list[TaskInstance]] = {}
        if cfg.pseudonymize in ("off", "both"):
            variants[False] = plain
        if cfg.pseudonymize in ("on", "both"):
            assert pool is not None
            variants[True] = [
                make_pseudo_twin(cfg, inst, pool, templates, kg) for inst in plain
            ]
        for pseudo, instances in sorted(variants.items()):
            header = {
                "schema_version": SCHEMA_VERSION,
                "kind": "instances",
                "task": task_id,
                "pseudo": pseudo,
                "n": len(instances),
                "config_digest": digest,
            }
            lines = [_dump_line(header)]
            lines.extend(_dump_line(instance_to_dict(i)) for i in instances)
            name = instance_file_name(task_id, pseudo)
            _atomic_write(out / name, "\n".join(lines) + "\n")
            files[name] = hashlib.sha256((out / name).read_bytes()).hexdigest()
        log.info("built %d %s instances (%s)", n, task_id,
                 "+pseudo" if cfg.pseudonymize != "off" else "plain")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": digest,
        "files": files,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


# -- instance loading --------------------------------------------------------------


def load_instances(
    cfg: BenchConfig, allow_digest_mismatch: bool = False
) -> list[TaskInstance]:
    """Read back every instance file named by the manifest, digest-checked."""
    out = Path(cfg.output_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise BuildError(f"no manifest at {manifest_path}; run build first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    instances: list[TaskInstance] = []
    for name in sorted(manifest["files"]):
        lines = (out / name).read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        if header.get("config_digest") != cfg.digest() and not allow_digest_mismatch:
            raise BuildError(
                f"{name}: instance file was built with a different configuration"
                " (pass --allow-config-mismatch to reuse it)"
            )
        for line in lines[1:]:
            instances.append(instance_from_dict(json.loads(line)))
    return instances


# -- running -------------------------------------------------------------------------


@dataclass
class _WorkItem:
    instance: TaskInstance
    format: str
    endpoint_index: int
    prompt: str
    key: tuple


def run(
    cfg: BenchConfig,
    resume: bool = False,
    stop_after: int | None = None,
    gateway: Gateway | None = None,
    allow_digest_mismatch: bool = False,
) -> RunResult:
    """Execute the instance x format x endpoint cross-product with caching.

    Records append to ``records.jsonl`` one line per completion, in a
    deterministic order; ``resume=True`` skips keys already present.
    Endpoint failures become error-tagged records rather than aborting.
    """
    gateway = gateway or Gateway()
    templates = cfg.load_templates()
    instances = load_instances(cfg, allow_digest_mismatch)
    out = Path(cfg.output_dir)
    records_path = out / "records.jsonl"

    existing: set[tuple] = set()
    if records_path.exists():
        if not resume:
            raise BuildError(
                f"{records_path} already exists; pass --resume to continue or remove it"
            )
        for line in records_path.read_text(encoding="utf-8").splitlines():
            rec = EvalRecord.from_dict(json.loads(line))
            existing.add(rec.key())

    work: list[_WorkItem] = []
    skipped = 0
    instances.sort(key=lambda i: (i.task_id, i.pseudo, i.instance_index))
    for inst in instances:
        for fmt in cfg.formats:
            prompt = None
            for ep_i, ep in enumerate(cfg.endpoints):
                key = (ep.model_id, fmt.value, inst.task_id, inst.instance_index, inst.pseudo)
                if key in existing:
                    skipped += 1
                    continue
                if prompt is None:
                    prompt = render(
                        inst.subgraph, fmt, templates,
                        question=inst.question,
                        swap_loe_json=cfg.swap_loe_json_preambles,
                    ).full_prompt
                work.append(_WorkItem(inst, fmt.value, ep_i, prompt, key))
                if cfg.endpoint_behaviors.get(ep.model_id) == "echo_gold":
                    gateway.install_mock_response(
                        ep.model_id, prompt,
                        f"Answer: {gold_answer_text(inst.task_id, inst.gold)}",
                    )

    dead_endpoints: set[str] = set()

    def execute(item: _WorkItem) -> EvalRecord:
        ep = cfg.endpoints[item.endpoint_index]
        inst = item.instance
        base = dict(
            model_id=ep.model_id,
            format=item.format,
            task_id=inst.task_id,
            instance_index=inst.instance_index,
            pseudo=inst.pseudo,
            temperature=ep.temperature,
        )
        if ep.model_id in dead_endpoints:
            return EvalRecord(
                raw_response=None, parsed_answer=None, score=None,
                error="auth_failure", **base,
            )
        try:
            result = gateway.cached_complete(cfg.cache_dir, ep, item.prompt)
        except AuthError as exc:
            dead_endpoints.add(ep.model_id)
            log.error("endpoint %s disabled: %s", ep.model_id, exc)
            return EvalRecord(
                raw_response=None, parsed_answer=None, score=None,
                error="auth_failure", **base,
            )
        except GatewayError as exc:
            return EvalRecord(
                raw_response=None, parsed_answer=None, score=None,
                error=f"endpoint_error: {exc}", **base,
            )
        parsed, exact, flexible, failed = score_record(
            inst.task_id, result.text, inst.gold
        )
        return EvalRecord(
            raw_response=result.text,
            parsed_answer=parsed,
            score=exact,
            flexible_score=flexible,
            parse_failed=failed,
            input_tokens=result.input_tokens,
            output_tokens=result.output_tokens,
            cache_hit=result.cache_hit,
            **base,
        )

    new_records = 0
    errors = 0
    stopped = False
    out.mkdir(parents=True, exist_ok=True)
    workers = max(1, min(cfg.run_concurrency, len(work) or 1))
    with open(records_path, "a", encoding="utf-8") as fh:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(execute, item) for item in work]
            for fut in tqdm(futures, desc="run", disable=not sys.stderr.isatty()):
                if stopped:
                    fut.cancel()
                    continue
                rec = fut.result()
                fh.write(_dump_line(rec.to_dict()) + "\n")
                fh.flush()
                new_records += 1
                if rec.error is not None:
                    errors += 1
                if stop_after is not None and new_records >= stop_after:
                    stopped = True
    return RunResult(
        records_path=records_path,
        new_records=new_records,
        skipped=skipped,
        errors=errors,
        stopped_early=stopped,
    )


# -- reporting ------------------------------------------------------------------------


def load_records(records_path: str | Path) -> list[EvalRecord]:
    path = Path(records_path)
    if not path.exists():
        raise BuildError(f"no records at {path}")
    records = [
        EvalRecord.from_dict(json.loads(line))
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not records:
        raise BuildError("no records")
    return records


def instance_meta_index(instances: list[TaskInstance]) -> dict[tuple, dict]:
    return {
        (i.task_id, i.instance_index, i.pseudo): i.meta for i in instances
    }


def report(
    cfg: BenchConfig, allow_digest_mismatch: bool = False
) -> tuple[SummaryTable, Path]:
    """Aggregate the record file and write the summary artifacts."""
    records = load_records(Path(cfg.output_dir) / "records.jsonl")
    try:
        instances = load_instances(cfg, allow_digest_mismatch)
        meta = instance_meta_index(instances)
    except BuildError:
        meta = None
    summary = aggregate(records, meta)
    report_dir = Path(cfg.output_dir) / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summary, report_dir / "summary.csv")
    write_summary_json(summary, report_dir / "summary.json")
    write_extra_csvs(summary, report_dir)
    (report_dir / "digest.txt").write_text(digest_text(summary), encoding="utf-8")
    return summary, report_dir


def validate(cfg: BenchConfig, allow_digest_mismatch: bool = False) -> list[str]:
    """Re-check every stored gold answer against the oracles."""
    problems: list[str] = []
    for inst in load_instances(cfg, allow_digest_mismatch):
        found = oracles.verify_instance(
            inst.task_id, inst.subgraph.graph.label_triples(), inst.meta, inst.gold
        )
        problems.extend(
            f"{inst.task_id}[{inst.instance_index}, pseudo={inst.pseudo}]: {p}"
            for p in found
        )
    return problems


def render_instance(
    cfg: BenchConfig,
    task_id: str,
    index: int,
    format_name: str,
    pseudo: bool = False,
    allow_digest_mismatch: bool = False,
) -> str:
    """The full prompt for one built instance, for inspection."""
    from kgtextbench.textualize import FormatId

    templates = cfg.load_templates()
    for inst in load_instances(cfg, allow_digest_mismatch):
        if (inst.task_id, inst.instance_index, inst.pseudo) == (task_id, index, pseudo):
            return render(
                inst.subgraph, FormatId(format_name), templates,
                question=inst.question,
                swap_loe_json=cfg.swap_loe_json_preambles,
            ).full_prompt
    raise BuildError(f"no built instance {task_id}[{index}] pseudo={pseudo}")
