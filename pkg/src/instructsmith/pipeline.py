"""End-to-end orchestration: filter, embed, select, assign, generate, emit.

Every stage writes its artifact to the work directory and records progress
in an atomic checkpoint, so an interrupted run resumes from the last
completed stage. Record-level progress during generation is derived from
the append-only exemplar and quarantine files rather than the checkpoint,
which makes the run safe to kill at any point.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .corpus import (
    FilterConfig,
    FilterReport,
    RawCodeRecord,
    apply_filters,
    default_blacklist,
    ingest_records,
    write_records,
)
from .coreset import (
    kcenter_greedy,
    read_selection,
    stratified_kcenter_greedy,
    write_selection,
)
from .decontam import (
    apply_plan,
    audit,
    plan_removal,
    read_benchmark_file,
    write_histogram_csv,
    write_leakage_report,
)
from .discriminator import RuleSet, discriminate, load_ruleset
from .embedding import (
    EmbeddingBackendConfig,
    embed_batch,
    read_embedding_cache,
    write_embedding_cache,
)
from .emitter import read_dataset, to_training_example, write_dataset
from .errors import (
    ConfigError,
    ConsistencyError,
    DiscriminationFailedError,
    GenerationFailedError,
)
from .exemplar_db import ExemplarDB, SamplingPolicy, make_entry
from .generator import generate_instance
from .ioutil import (
    JsonlAppender,
    atomic_write_json,
    iter_jsonl,
    read_json,
    repair_torn_tail,
)
from .llm_backend import BackendConfig, make_chat_backend
from .taskspec import (
    MixPolicy,
    TASK_KINDS,
    assign_tasks,
    default_mix,
    load_task_definitions,
    mix_counts,
)

log = logging.getLogger(__name__)

STAGES = ("filtered", "embedded", "selected", "assigned", "generating", "done")

FILTERED_FILE = "filtered.jsonl"
FILTER_REPORT_FILE = "filter_report.json"
EMBEDDINGS_FILE = "embeddings.jsonl"
SELECTION_FILE = "selection.json"
ASSIGNMENTS_FILE = "assignments.json"
EXEMPLARS_FILE = "exemplars.jsonl"
QUARANTINE_FILE = "quarantine.jsonl"
CHECKPOINT_FILE = "checkpoint.json"
SUMMARY_FILE = "summary.json"
DATASET_FILE = "dataset.jsonl"


@dataclass
class CoresetConfig:
    k: int
    seed: int = 0
    metric: str = "euclidean"
    stratify_by_language: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("coreset.k must be >= 1")

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "metric": self.metric,
                "stratify_by_language": self.stratify_by_language}


@dataclass
class PipelineConfig:
    """Everything one run needs; mirrors the on-disk JSON config."""

    corpus_path: Path
    workdir: Path
    coreset: CoresetConfig
    target_accepted: int
    output_path: Path | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    embedding_backend: EmbeddingBackendConfig = field(
        default_factory=EmbeddingBackendConfig)
    mix: MixPolicy = field(default_factory=default_mix)
    task_file: Path | None = None
    rulesets: dict[str, str] = field(default_factory=dict)
    generation_backend: BackendConfig = field(
        default_factory=lambda: BackendConfig(kind="mock"))
    discrimination_backend: BackendConfig = field(
        default_factory=lambda: BackendConfig(
            kind="mock", extra={"role": "discrimination"}))
    exemplar_db: Path | None = None
    sampling: SamplingPolicy = field(default_factory=SamplingPolicy)
    max_in_flight: int = 1
    retries: dict[str, int] = field(
        default_factory=lambda: {"generation": 2, "discrimination": 2})
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self) -> None:
        if self.target_accepted < 1:
            raise ConfigError("target_accepted must be >= 1")
        if self.max_in_flight < 1:
            raise ConfigError("concurrency.max_in_flight must be >= 1")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        for key in ("generation", "discrimination"):
            if self.retries.get(key, 0) < 0:
                raise ConfigError(f"retries.{key} must be >= 0")
        self.corpus_path = Path(self.corpus_path)
        self.workdir = Path(self.workdir)
        if self.output_path is None:
            self.output_path = self.workdir / DATASET_FILE
        self.output_path = Path(self.output_path)
        if self.exemplar_db is None:
            self.exemplar_db = self.workdir / EXEMPLARS_FILE
        self.exemplar_db = Path(self.exemplar_db)
        if self.task_file is not None:
            self.task_file = Path(self.task_file)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        """Build a config from parsed JSON; relative paths resolve against
        ``base_dir`` (the config file's directory)."""
        base = Path(base_dir)

        def path_of(value):
            if value is None:
                return None
            p = Path(value)
            return p if p.is_absolute() else base / p

        d = dict(d)
        known = {
            "corpus_path", "workdir", "output_path", "filter",
            "embedding_backend", "coreset", "mix", "task_file", "rulesets",
            "generation_backend", "discrimination_backend", "exemplar_db",
            "sampling", "target_accepted", "concurrency", "retries", "seed",
            "checkpoint_every",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for req in ("corpus_path", "workdir", "coreset", "target_accepted"):
            if req not in d:
                raise ConfigError(f"config is missing required key {req!r}")

        filter_d = dict(d.get("filter", {}))
        if "blacklist" not in filter_d:
            filter_d["blacklist"] = default_blacklist()
        try:
            filter_config = FilterConfig(**filter_d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad filter config: {exc}") from exc

        try:
            coreset = CoresetConfig(**d["coreset"])
        except TypeError as exc:
            raise ConfigError(f"bad coreset config: {exc}") from exc

        mix = default_mix() if "mix" not in d else MixPolicy.from_raw(
            {str(k): float(v) for k, v in d["mix"].items()})

        try:
            sampling = SamplingPolicy(**d.get("sampling", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad sampling config: {exc}") from exc

        gen_backend = BackendConfig.from_dict(d.get("generation_backend",
                                                    {"kind": "mock"}))
        disc_d = dict(d.get("discrimination_backend", {"kind": "mock"}))
        disc_backend = BackendConfig.from_dict(disc_d)
        disc_backend.extra.setdefault("role", "discrimination")

        retries = {"generation": 2, "discrimination": 2}
        retries.update({str(k): int(v) for k, v in d.get("retries", {}).items()})

        conc = d.get("concurrency", {})
        if not isinstance(conc, dict):
            raise ConfigError("concurrency must be an object")

        try:
            embedding_backend = EmbeddingBackendConfig.from_dict(
                d.get("embedding_backend", {"kind": "mock"}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad embedding_backend config: {exc}") from exc

        return cls(
            corpus_path=path_of(d["corpus_path"]),
            workdir=path_of(d["workdir"]),
            output_path=path_of(d.get("output_path")),
            filter=filter_config,
            embedding_backend=embedding_backend,
            coreset=coreset,
            mix=mix,
            task_file=path_of(d.get("task_file")),
            rulesets={str(k): str(v) for k, v in d.get("rulesets", {}).items()},
            generation_backend=gen_backend,
            discrimination_backend=disc_backend,
            exemplar_db=path_of(d.get("exemplar_db")),
            sampling=sampling,
            target_accepted=int(d["target_accepted"]),
            max_in_flight=int(conc.get("max_in_flight", 1)),
            retries=retries,
            seed=int(d.get("seed", 0)),
            checkpoint_every=int(d.get("checkpoint_every", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "corpus_path": str(self.corpus_path),
            "workdir": str(self.workdir),
            "output_path": str(self.output_path),
            "filter": {
                "min_code_chars": self.filter.min_code_chars,
                "max_code_chars": self.filter.max_code_chars,
                "blacklist": list(self.filter.blacklist),
                "match_scope": self.filter.match_scope,
            },
            "embedding_backend": {
                "kind": self.embedding_backend.kind,
                "endpoint": self.embedding_backend.endpoint,
                "model_name": self.embedding_backend.model_name,
                "dim": self.embedding_backend.dim,
                "batch_size": self.embedding_backend.batch_size,
                "max_in_flight": self.embedding_backend.max_in_flight,
            },
            "coreset": self.coreset.to_dict(),
            "mix": dict(self.mix.weights),
            "task_file": str(self.task_file) if self.task_file else None,
            "rulesets": dict(self.rulesets),
            "generation_backend": {
                "kind": self.generation_backend.kind,
                "endpoint": self.generation_backend.endpoint,
                "model_name": self.generation_backend.model_name,
                "extra": dict(self.generation_backend.extra),
            },
            "discrimination_backend": {
                "kind": self.discrimination_backend.kind,
                "endpoint": self.discrimination_backend.endpoint,
                "model_name": self.discrimination_backend.model_name,
                "extra": dict(self.discrimination_backend.extra),
            },
            "exemplar_db": str(self.exemplar_db),
            "sampling": {
                "n_good": self.sampling.n_good,
                "n_bad": self.sampling.n_bad,
                "same_task_only": self.sampling.same_task_only,
            },
            "target_accepted": self.target_accepted,
            "concurrency": {"max_in_flight": self.max_in_flight},
            "retries": dict(self.retries),
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return PipelineConfig.from_dict(obj, base_dir=path.parent)


@dataclass
class CheckpointState:
    """Where a run stands: last completed stage plus derived progress."""

    stage: str
    config_fingerprint: str = ""
    seed: int = 0
    processed_record_ids: list[str] = field(default_factory=list)
    accepted_per_task: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ConsistencyError(f"unknown stage {self.stage!r}")

    @property
    def stage_index(self) -> int:
        return STAGES.index(self.stage)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "config_fingerprint": self.config_fingerprint,
            "seed": self.seed,
            "processed_record_ids": list(self.processed_record_ids),
            "accepted_per_task": dict(self.accepted_per_task),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckpointState":
        return cls(
            stage=str(d["stage"]),
            config_fingerprint=str(d.get("config_fingerprint", "")),
            seed=int(d.get("seed", 0)),
            processed_record_ids=[str(r) for r in d.get("processed_record_ids", [])],
            accepted_per_task={str(k): int(v)
                               for k, v in d.get("accepted_per_task", {}).items()},
        )


@dataclass
class RunSummary:
    """Funnel accounting for one run; emitted == good by construction."""

    counts: dict[str, int]
    realized_mix: dict[str, dict]
    stage_seconds: dict[str, float]
    dataset_path: str
    target_accepted: int

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "realized_mix": {k: dict(v) for k, v in self.realized_mix.items()},
            "stage_seconds": {k: round(v, 3)
                              for k, v in self.stage_seconds.items()},
            "dataset_path": self.dataset_path,
            "target_accepted": self.target_accepted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        return cls(
            counts={str(k): int(v) for k, v in d["counts"].items()},
            realized_mix={str(k): dict(v)
                          for k, v in d.get("realized_mix", {}).items()},
            stage_seconds={str(k): float(v)
                           for k, v in d.get("stage_seconds", {}).items()},
            dataset_path=str(d.get("dataset_path", "")),
            target_accepted=int(d.get("target_accepted", 0)),
        )


class _Checkpointer:
    """Atomic checkpoint writes with monotone stage enforcement."""

    def __init__(self, path: Path, fingerprint: str, seed: int):
        self.path = path
        self.fingerprint = fingerprint
        self.seed = seed
        self.last: CheckpointState | None = None

    def read(self) -> CheckpointState | None:
        if not self.path.exists():
            return None
        state = CheckpointState.from_dict(read_json(self.path))
        self.last = state
        return state

    def write(self, stage: str, processed: Sequence[str] = (),
              accepted_per_task: dict[str, int] | None = None) -> CheckpointState:
        state = CheckpointState(
            stage=stage,
            config_fingerprint=self.fingerprint,
            seed=self.seed,
            processed_record_ids=list(processed),
            accepted_per_task=dict(accepted_per_task or {}),
        )
        if self.last is not None and state.stage_index < self.last.stage_index:
            raise ConsistencyError(
                f"stage would regress from {self.last.stage} to {stage}")
        atomic_write_json(self.path, state.to_dict())
        self.last = state
        return state


def _quarantine_entries(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [obj for _, obj in iter_jsonl(path, tolerate_torn_tail=True)]


def _require_artifact(path: Path, stage: str) -> Path:
    if not path.exists():
        raise ConsistencyError(
            f"checkpoint says stage {stage!r} is done but {path} is missing")
    return path


def run(config: PipelineConfig, *, resume: bool = False,
        generation_backend=None, discrimination_backend=None,
        after_record: Callable[[str, str], None] | None = None,
        stop_after: str | None = None) -> RunSummary | None:
    """Execute the full pipeline; see module docstring for the stage list.

    ``resume`` continues a checkpointed run in the same workdir instead of
    refusing to touch it. Injected backends override the configured ones
    (tests use this to inspect transcripts). ``after_record`` is invoked as
    ``after_record(record_id, outcome)`` once each record's outcome is
    durably committed; outcomes are "good", "bad", and "quarantined".
    ``stop_after="generating"`` skips emission (the stage CLI uses it) and
    returns None; a later resume finishes the run.
    """
    if stop_after not in (None, "generating"):
        raise ConfigError("stop_after must be None or 'generating'")
    t_start = time.perf_counter()
    workdir = config.workdir
    workdir.mkdir(parents=True, exist_ok=True)
    checkpointer = _Checkpointer(workdir / CHECKPOINT_FILE,
                                 config.fingerprint(), config.seed)
    state = checkpointer.read()
    if state is not None and not resume:
        raise ConfigError(
            f"{workdir} holds a checkpointed run (stage {state.stage}); "
            f"resume it or use a fresh workdir")
    if state is not None and state.config_fingerprint != config.fingerprint():
        raise ConsistencyError(
            "checkpoint was written by a different config; refusing to resume")
    done_index = state.stage_index if state is not None else -1
    stage_seconds: dict[str, float] = {}

    def timed(name: str, fn):
        t0 = time.perf_counter()
        result = fn()
        stage_seconds[name] = time.perf_counter() - t0
        return result

    # -- filter ------------------------------------------------------------
    def stage_filter():
        if done_index >= STAGES.index("filtered"):
            kept = ingest_records(_require_artifact(workdir / FILTERED_FILE,
                                                    "filtered"))
            report = FilterReport(**read_json(
                _require_artifact(workdir / FILTER_REPORT_FILE, "filtered")))
            return kept, report
        records = ingest_records(config.corpus_path)
        kept, report = apply_filters(records, config.filter)
        if not kept:
            raise ConsistencyError("no records survive filtering")
        write_records(kept, workdir / FILTERED_FILE)
        atomic_write_json(workdir / FILTER_REPORT_FILE, report.to_dict())
        checkpointer.write("filtered")
        return kept, report

    kept, filter_report = timed("filter", stage_filter)
    log.info("filter: kept %d of %d records", filter_report.kept_count,
             filter_report.input_count)

    # -- embed -------------------------------------------------------------
    def stage_embed():
        cache_path = workdir / EMBEDDINGS_FILE
        if done_index >= STAGES.index("embedded"):
            _require_artifact(cache_path, "embedded")
            ids, vectors = read_embedding_cache(cache_path,
                                                tolerate_torn_tail=True)
            if ids != [r.id for r in kept]:
                raise ConsistencyError(
                    f"{cache_path} does not match the filtered corpus")
            return vectors
        cache_path.unlink(missing_ok=True)
        vectors = embed_batch([r.code for r in kept], config.embedding_backend)
        write_embedding_cache(cache_path, [r.id for r in kept], vectors)
        checkpointer.write("embedded")
        return vectors

    vectors = timed("embed", stage_embed)

    # -- select ------------------------------------------------------------
    def stage_select():
        path = workdir / SELECTION_FILE
        if done_index >= STAGES.index("selected"):
            return read_selection(_require_artifact(path, "selected")).selected_ids
        cs = config.coreset
        if cs.stratify_by_language:
            selection = stratified_kcenter_greedy(
                vectors, [r.language for r in kept], cs.k,
                seed=cs.seed, metric=cs.metric)
        else:
            selection = kcenter_greedy(vectors, cs.k, seed=cs.seed,
                                       metric=cs.metric)
        write_selection(path, selection, [r.id for r in kept])
        checkpointer.write("selected")
        return [kept[i].id for i in selection.selected_indices]

    selected_ids = timed("select", stage_select)
    log.info("select: %d of %d records chosen", len(selected_ids), len(kept))

    # -- assign ------------------------------------------------------------
    def stage_assign():
        path = workdir / ASSIGNMENTS_FILE
        if done_index >= STAGES.index("assigned"):
            obj = read_json(_require_artifact(path, "assigned"))
            return {str(k): str(v) for k, v in obj["assignment"].items()}
        assignment = assign_tasks(selected_ids, config.mix, seed=config.seed)
        atomic_write_json(path, {
            "seed": config.seed,
            "assignment": assignment,
            "counts": mix_counts(assignment),
        })
        checkpointer.write("assigned")
        return assignment

    assignment = timed("assign", stage_assign)

    # -- generate ----------------------------------------------------------
    taskdefs = load_task_definitions(config.task_file)
    rulesets: dict[str, RuleSet] = {}
    for kind in TASK_KINDS:
        source = config.rulesets.get(kind, taskdefs[kind].rule_set_id)
        rulesets[kind] = load_ruleset(source)
    gen_backend = generation_backend or make_chat_backend(
        config.generation_backend)
    disc_backend = discrimination_backend or make_chat_backend(
        config.discrimination_backend)

    db = ExemplarDB.load(config.exemplar_db)
    quarantine_path = workdir / QUARANTINE_FILE
    repair_torn_tail(quarantine_path)
    quarantined = _quarantine_entries(quarantine_path)
    processed: set[str] = {e.instance.source_record_id for e in db.entries()}
    processed.update(str(q["record_id"]) for q in quarantined)
    accepted_per_task = {kind: 0 for kind in TASK_KINDS}
    for e in db.entries():
        if e.label == "Good":
            accepted_per_task[e.task_kind] += 1
    accepted = sum(accepted_per_task.values())

    records_by_id = {r.id: r for r in kept}
    pending = [rid for rid in selected_ids if rid not in processed]

    def process_one(rid: str):
        record = records_by_id[rid]
        kind = assignment[rid]
        try:
            instance = generate_instance(
                record, taskdefs[kind], db, gen_backend,
                retries=config.retries["generation"],
                sampling_policy=config.sampling, seed=config.seed)
        except GenerationFailedError as exc:
            return ("quarantined", {"record_id": rid, "task": kind,
                                    "stage": "generation", "error": str(exc),
                                    "attempts": exc.attempts})
        try:
            report = discriminate(
                instance, rulesets[kind], disc_backend,
                retries=config.retries["discrimination"])
        except DiscriminationFailedError as exc:
            return ("quarantined", {"record_id": rid, "task": kind,
                                    "stage": "discrimination",
                                    "error": str(exc),
                                    "attempts": exc.attempts})
        return ("entry", make_entry(instance, report))

    def stage_generate():
        nonlocal accepted
        if done_index >= STAGES.index("done") or not pending:
            return
        since_checkpoint = 0
        with JsonlAppender(quarantine_path) as qlog, \
                ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            i = 0
            while i < len(pending) and accepted < config.target_accepted:
                wave = pending[i:i + config.max_in_flight]
                i += len(wave)
                futures = [pool.submit(process_one, rid) for rid in wave]
                for rid, future in zip(wave, futures):
                    if accepted >= config.target_accepted:
                        break
                    kind_of_outcome, payload = future.result()
                    if kind_of_outcome == "quarantined":
                        qlog.append(payload)
                        quarantined.append(payload)
                        outcome = "quarantined"
                        log.warning("record %s: quarantined at %s", rid,
                                    payload["stage"])
                    else:
                        db.insert(payload)
                        outcome = "good" if payload.label == "Good" else "bad"
                        if payload.label == "Good":
                            accepted += 1
                            accepted_per_task[payload.task_kind] += 1
                        log.info("record %s: %s (%d/%d accepted)", rid,
                                 outcome, accepted, config.target_accepted)
                    processed.add(rid)
                    since_checkpoint += 1
                    if since_checkpoint >= config.checkpoint_every:
                        checkpointer.write("generating", sorted(processed),
                                           accepted_per_task)
                        since_checkpoint = 0
                    if after_record is not None:
                        after_record(rid, outcome)
        checkpointer.write("generating", sorted(processed), accepted_per_task)

    timed("generate", stage_generate)
    if stop_after == "generating":
        db.close()
        return None

    # -- emit --------------------------------------------------------------
    def stage_emit():
        goods = [e for e in db.entries() if e.label == "Good"]
        goods = goods[:config.target_accepted]
        examples = [to_training_example(e.instance) for e in goods]
        dataset_summary = write_dataset(examples, config.output_path)
        return goods, dataset_summary

    goods, dataset_summary = timed("emit", stage_emit)
    db.close()

    good_count = sum(1 for e in db.entries() if e.label == "Good")
    bad_count = sum(1 for e in db.entries() if e.label == "Bad")
    emitted = dataset_summary["count"]
    realized_mix = {}
    for kind in TASK_KINDS:
        count = dataset_summary["per_task_counts"][kind]
        realized_mix[kind] = {
            "count": count,
            "percent": round(100.0 * count / emitted, 2) if emitted else 0.0,
        }
    summary = RunSummary(
        counts={
            "ingested": filter_report.input_count,
            "filtered_kept": filter_report.kept_count,
            "selected": len(selected_ids),
            # generated counts records whose processing completed, whatever
            # the outcome; work discarded at the stop boundary is unprocessed
            "generated": good_count + bad_count + len(quarantined),
            "good": good_count,
            "bad": bad_count,
            "quarantined": len(quarantined),
            "emitted": emitted,
        },
        realized_mix=realized_mix,
        stage_seconds=stage_seconds,
        dataset_path=str(config.output_path),
        target_accepted=config.target_accepted,
    )
    atomic_write_json(workdir / SUMMARY_FILE, summary.to_dict())
    checkpointer.write("done", sorted(processed), accepted_per_task)
    log.info("run complete in %.1fs: %s", time.perf_counter() - t_start,
             summary.counts)
    return summary


def dataset_as_train_pairs(examples, embed_field: str = "output"
                           ) -> list[tuple[str, str]]:
    """Unique-id (id, text) pairs for auditing a dataset file.

    ``embed_field`` picks what gets embedded: the "output" (code) field or
    "instruction+output".
    """
    if embed_field not in ("output", "instruction+output"):
        raise ConfigError("embed_field must be 'output' or 'instruction+output'")

    def text_of(ex):
        if embed_field == "output":
            return ex.output
        return ex.instruction + "\n" + ex.output

    return [(f"{i}:{ex.source_record_id}" if ex.source_record_id else str(i),
             text_of(ex)) for i, ex in enumerate(examples)]


def audit_and_plan(train_path: str | Path, bench_path: str | Path,
                   out_dir: str | Path,
                   backend: EmbeddingBackendConfig | None = None,
                   top_k: int = 3, n_per_item: int = 3,
                   *, embed_field: str = "output") -> dict:
    """Decontamination driver: audit a dataset file against a benchmark file,
    write the report, histogram CSV, plan, and the cleaned dataset.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = backend or EmbeddingBackendConfig()
    examples = read_dataset(train_path)
    train = dataset_as_train_pairs(examples, embed_field)
    bench = read_benchmark_file(bench_path)
    report = audit(train, bench, backend, top_k=top_k)
    write_leakage_report(out_dir / "leakage_report.json", report)
    write_histogram_csv(out_dir / "leakage_histogram.csv", report)
    plan = plan_removal(report, n_per_item=n_per_item)
    atomic_write_json(out_dir / "decontam_plan.json", plan.to_dict())
    kept_pairs = apply_plan(plan, train)
    kept_index = {tid for tid, _ in kept_pairs}
    cleaned = [ex for (tid, _), ex in zip(train, examples) if tid in kept_index]
    cleaned_summary = write_dataset(cleaned, out_dir / "dataset.cleaned.jsonl")
    return {
        "average_top1": report.average_top1,
        "removed": len(examples) - len(cleaned),
        "remaining": cleaned_summary["count"],
        "report_path": str(out_dir / "leakage_report.json"),
        "plan_path": str(out_dir / "decontam_plan.json"),
        "cleaned_path": str(out_dir / "dataset.cleaned.jsonl"),
    }
