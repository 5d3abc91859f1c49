"""Run configuration: a single YAML file drives build, run and report.

Paths inside the file resolve relative to the file's own directory.  Every
output embeds a digest of the build-relevant settings (source, seed, task
parameters, pseudonymization, templates) so instance files can't silently be
reused under a different configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from kgtextbench.gateway import ModelEndpoint
from kgtextbench.pseudonyms import SCOPES
from kgtextbench.sampler import SamplingParams
from kgtextbench.tasks import TASK_IDS
from kgtextbench.templates import Templates, load_templates
from kgtextbench.textualize import FormatId

PSEUDO_MODES = ("off", "on", "both")

# Default per-task sampling parameters (instances per task, seed entities,
# max edges, radius, min degree) for the published benchmark configuration.
TASK_DEFAULTS: dict[str, dict[str, int]] = {
    "TripleRetrieval": dict(instances=100, seed_entities=10, max_edges=200, radius=1, min_degree=1),
    "ShortestPath": dict(instances=100, seed_entities=10, max_edges=200, radius=1, min_degree=1),
    "HighestDegree": dict(instances=100, seed_entities=10, max_edges=200, radius=1, min_degree=1),
    "AggByRelation": dict(instances=100, seed_entities=1, max_edges=200, radius=2, min_degree=2),
    "AggNeighborProperty": dict(instances=100, seed_entities=1, max_edges=200, radius=2, min_degree=2),
}

_TASK_KEYS = {
    "triple_retrieval": "TripleRetrieval",
    "shortest_path": "ShortestPath",
    "agg_by_relation": "AggByRelation",
    "agg_neighbor_property": "AggNeighborProperty",
    "highest_degree": "HighestDegree",
}


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


@dataclass
class TaskConfig:
    enabled: bool
    instances: int
    seed_entities: int
    max_edges: int
    radius: int
    min_degree: int

    def sampling_params(self, rng_seed: int) -> SamplingParams:
        return SamplingParams(
            num_seed_entities=self.seed_entities,
            radius=self.radius,
            max_edges=self.max_edges,
            min_degree=self.min_degree,
            rng_seed=rng_seed,
        )


@dataclass
class BenchConfig:
    entities_file: Path
    relations_file: Path
    edges_file: Path
    seed: int
    output_dir: Path
    cache_dir: Path
    tasks: dict[str, TaskConfig]
    formats: list[FormatId]
    endpoints: list[ModelEndpoint]
    endpoint_behaviors: dict[str, str]
    pseudonymize: str = "off"
    pseudonym_csv: Path | None = None
    pseudonym_scope: str = "core_only"
    core_category: str = "country"
    templates_path: Path | None = None
    swap_loe_json_preambles: bool = False
    run_concurrency: int = 8

    def load_templates(self) -> Templates:
        return load_templates(self.templates_path)

    def enabled_tasks(self) -> list[str]:
        return [t for t in TASK_IDS if t in self.tasks and self.tasks[t].enabled]

    def pseudo_variants(self) -> list[bool]:
        if self.pseudonymize == "off":
            return [False]
        if self.pseudonymize == "on":
            return [True]
        return [False, True]

    def digest(self) -> str:
        """Digest of everything that shapes instance files."""
        payload = {
            "source": [str(self.entities_file), str(self.relations_file), str(self.edges_file)],
            "seed": self.seed,
            "core_category": self.core_category,
            "pseudonymize": self.pseudonymize,
            "pseudonym_scope": self.pseudonym_scope,
            "pseudonym_csv": str(self.pseudonym_csv) if self.pseudonym_csv else None,
            "tasks": {
                t: vars(tc) for t, tc in sorted(self.tasks.items()) if tc.enabled
            },
            "templates_sha256": hashlib.sha256(
                _templates_text(self.templates_path).encode("utf-8")
            ).hexdigest(),
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _templates_text(path: Path | None) -> str:
    if path is None:
        from importlib import resources

        return (
            resources.files("kgtextbench").joinpath("data/templates.txt").read_text("utf-8")
        )
    return Path(path).read_text(encoding="utf-8")


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return mapping[key]


def _as_path(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(
    path: str | Path,
    *,
    seed: int | None = None,
    output_dir: str | None = None,
    tasks: list[str] | None = None,
    formats: list[str] | None = None,
    models: list[str] | None = None,
    pseudo: str | None = None,
) -> BenchConfig:
    """Parse and validate a config file, applying CLI overrides."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    base = path.parent

    source = _require(raw, "source", "config")
    cfg_seed = seed if seed is not None else _require(raw, "seed", "config")
    if not isinstance(cfg_seed, int):
        raise ConfigError("seed must be an integer")

    task_cfgs: dict[str, TaskConfig] = {}
    raw_tasks = raw.get("tasks")
    all_by_default = raw_tasks is None  # no tasks block: run the full benchmark
    raw_tasks = raw_tasks or {}
    for key, task_id in _TASK_KEYS.items():
        block = raw_tasks.get(key, {})
        if block is None:
            block = {}
        defaults = TASK_DEFAULTS[task_id]
        task_cfgs[task_id] = TaskConfig(
            enabled=bool(block.get("enabled", all_by_default or key in raw_tasks)),
            instances=int(block.get("instances", defaults["instances"])),
            seed_entities=int(block.get("seed_entities", defaults["seed_entities"])),
            max_edges=int(block.get("max_edges", defaults["max_edges"])),
            radius=int(block.get("radius", defaults["radius"])),
            min_degree=int(block.get("min_degree", defaults["min_degree"])),
        )
        if task_cfgs[task_id].instances < 1:
            raise ConfigError(f"task {key}: instances must be >= 1")
    if tasks:
        wanted = set(tasks)
        unknown = wanted - set(TASK_IDS)
        if unknown:
            raise ConfigError(f"unknown task names in --tasks: {sorted(unknown)}")
        for task_id in task_cfgs:
            task_cfgs[task_id].enabled = task_id in wanted
    if not any(tc.enabled for tc in task_cfgs.values()):
        raise ConfigError("at least one task must be enabled")

    fmt_names = formats if formats else raw.get("formats", [f.value for f in FormatId])
    try:
        fmt_list = [FormatId(f) for f in fmt_names]
    except ValueError as exc:
        raise ConfigError(f"unknown format name: {exc}") from None
    if not fmt_list:
        raise ConfigError("at least one format must be listed")

    endpoints: list[ModelEndpoint] = []
    behaviors: dict[str, str] = {}
    for i, block in enumerate(raw.get("endpoints", [])):
        model_id = _require(block, "model_id", f"endpoints[{i}]")
        if models and model_id not in models:
            continue
        behavior = block.get("behavior")
        if behavior:
            behaviors[model_id] = behavior
        try:
            endpoints.append(
                ModelEndpoint(
                    model_id=model_id,
                    dialect=block.get("dialect", "generic_chat"),
                    base_url=block.get("base_url"),
                    api_key_env=block.get("api_key_env"),
                    temperature=float(block.get("temperature", 0.0)),
                    max_output_tokens=int(block.get("max_output_tokens", 1024)),
                    concurrency=int(block.get("concurrency", 4)),
                    timeout=float(block.get("timeout", 60.0)),
                    max_retries=int(block.get("max_retries", 4)),
                    replay_dir=block.get("replay_dir"),
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if not endpoints:
        raise ConfigError("at least one endpoint must be configured (after --models filtering)")
    if len({e.model_id for e in endpoints}) != len(endpoints):
        raise ConfigError("endpoint model_id values must be unique")

    pseudo_mode = pseudo if pseudo is not None else raw.get("pseudonymize", "off")
    if pseudo_mode not in PSEUDO_MODES:
        raise ConfigError(f"pseudonymize must be one of {PSEUDO_MODES}")
    scope = raw.get("pseudonym_scope", "core_only")
    if scope not in SCOPES:
        raise ConfigError(f"pseudonym_scope must be one of {SCOPES}")

    out_dir = Path(output_dir) if output_dir else _as_path(base, raw.get("output_dir", "out"))
    cache_dir = _as_path(base, raw["cache_dir"]) if "cache_dir" in raw else out_dir / "cache"

    return BenchConfig(
        entities_file=_as_path(base, _require(source, "entities", "source")),
        relations_file=_as_path(base, _require(source, "relations", "source")),
        edges_file=_as_path(base, _require(source, "edges", "source")),
        seed=cfg_seed,
        output_dir=out_dir,
        cache_dir=cache_dir,
        tasks=task_cfgs,
        formats=fmt_list,
        endpoints=endpoints,
        endpoint_behaviors=behaviors,
        pseudonymize=pseudo_mode,
        pseudonym_csv=_as_path(base, raw["pseudonym_csv"]) if raw.get("pseudonym_csv") else None,
        pseudonym_scope=scope,
        core_category=source.get("core_category", "country"),
        templates_path=_as_path(base, raw["templates"]) if raw.get("templates") else None,
        swap_loe_json_preambles=bool(raw.get("swap_loe_json_preambles", False)),
        run_concurrency=int(raw.get("run_concurrency", 8)),
    )
