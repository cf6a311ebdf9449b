"""Arena evaluation, ranking, report emission, and the run store.

A run evaluates every (system, dataset) pair in the manifest, derives one
SystemSummary per system (average EER over its datasets plus pooled EER
over the concatenation of all its joined rows), and wraps everything in a
RunRecord that can be rendered (markdown/csv/json) or appended to a
line-delimited run store.
"""

from __future__ import annotations

import json
import os
import tempfile
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ArenaError, ManifestError, StoreError
from .metrics import EvalReport, evaluate, format_percent, pooled_eer
from .protocol import ArenaManifest, join, parse_protocol, parse_scores
from .stats import EerMatrix

RECORD_VERSION = 1

RANK_KEYS = ("pooled_eer", "average_eer")

EMIT_FORMATS = ("markdown", "csv", "json")


@dataclass(frozen=True)
class SystemSummary:
    """One leaderboard row: per-dataset EERs plus the two aggregate EERs.

    ``pooled_eer`` is None for systems evaluated with dataset gaps: pooling
    over fewer datasets than the others would not be comparable, so such
    systems are footnoted instead.
    """

    system_id: str
    average_eer: float
    pooled_eer: float | None
    per_dataset_eer: dict[str, float]
    param_count_millions: float | None = None
    average_auc: float | None = None
    category: str | None = None
    gap_datasets: tuple[str, ...] = ()


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    timestamp: str
    manifest_digest: str
    tool_version: str
    record_version: int
    dataset_ids: tuple[str, ...]
    reports: tuple[EvalReport, ...]
    summaries: tuple[SystemSummary, ...]

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["dataset_ids"] = list(self.dataset_ids)
        for s in doc["summaries"]:
            s["gap_datasets"] = list(s["gap_datasets"])
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        return cls(
            run_id=doc["run_id"],
            timestamp=doc["timestamp"],
            manifest_digest=doc["manifest_digest"],
            tool_version=doc["tool_version"],
            record_version=doc["record_version"],
            dataset_ids=tuple(doc["dataset_ids"]),
            reports=tuple(EvalReport(**r) for r in doc["reports"]),
            summaries=tuple(
                SystemSummary(**{**s, "gap_datasets": tuple(s.get("gap_datasets", ()))})
                for s in doc["summaries"]
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    def eer_matrix(self) -> EerMatrix:
        """Dense EER grid over the systems that cover every dataset."""
        rows, ids = [], []
        for s in self.summaries:
            if s.gap_datasets:
                continue
            ids.append(s.system_id)
            rows.append([s.per_dataset_eer[d] for d in self.dataset_ids])
        return EerMatrix.build(ids, self.dataset_ids, np.asarray(rows))


def evaluate_arena(manifest: ArenaManifest, tool_version: str = "0", jobs: int = 1) -> RunRecord:
    """Evaluate every (system, dataset) pair bound by the manifest.

    Output is deterministic for fixed inputs up to run_id and timestamp;
    reports are ordered system-major in manifest order regardless of the
    worker count.
    """
    trial_sets = {}
    for d in manifest.datasets:
        try:
            trial_sets[d.dataset_id] = parse_protocol(d.protocol_path, d.format,
                                                      dataset_id=d.dataset_id)
        except ArenaError as e:
            raise type(e)(f"dataset {d.dataset_id!r}: {e}") from e
    pairs = []
    for system in manifest.systems:
        for dataset in manifest.datasets:
            if dataset.dataset_id in system.score_paths:
                pairs.append((system, dataset))
            elif not manifest.allow_gaps:
                raise ManifestError(
                    f"system {system.system_id!r} has no scores for dataset {dataset.dataset_id!r}"
                )

    def work(pair):
        system, dataset = pair
        try:
            scores = parse_scores(
                system.score_paths[dataset.dataset_id],
                polarity=system.polarity,
                system_id=system.system_id,
                dataset_id=dataset.dataset_id,
            )
            joined = join(trial_sets[dataset.dataset_id], scores, mode=manifest.join_mode)
            report = evaluate(joined.rows, system.system_id, dataset.dataset_id)
            return report, joined.rows
        except ArenaError as e:
            raise type(e)(f"system {system.system_id!r}, dataset {dataset.dataset_id!r}: {e}") from e

    if jobs == 1:
        results = [work(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, pairs))

    by_pair = {(s.system_id, d.dataset_id): res for (s, d), res in zip(pairs, results)}
    reports = []
    summaries = []
    for system in manifest.systems:
        own_reports = []
        own_rows = []
        gaps = []
        for dataset in manifest.datasets:
            key = (system.system_id, dataset.dataset_id)
            if key in by_pair:
                report, rows = by_pair[key]
                own_reports.append(report)
                own_rows.append(rows)
            else:
                gaps.append(dataset.dataset_id)
        reports.extend(own_reports)
        per_dataset = {r.dataset_id: r.eer for r in own_reports}
        pooled = None
        if not gaps:
            pooled = pooled_eer(own_rows)[0]
        summaries.append(
            SystemSummary(
                system_id=system.system_id,
                average_eer=float(np.mean([r.eer for r in own_reports])),
                pooled_eer=pooled,
                per_dataset_eer=per_dataset,
                param_count_millions=system.param_count_millions,
                average_auc=float(np.mean([r.auc for r in own_reports])),
                category=system.category,
                gap_datasets=tuple(gaps),
            )
        )

    return RunRecord(
        run_id=uuid.uuid4().hex[:12],
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        manifest_digest=manifest.digest,
        tool_version=tool_version,
        record_version=RECORD_VERSION,
        dataset_ids=tuple(manifest.dataset_ids()),
        reports=tuple(reports),
        summaries=tuple(summaries),
    )


def _rank_tuple(summary: SystemSummary, key: str):
    primary = getattr(summary, key)
    other = summary.average_eer if key == "pooled_eer" else summary.pooled_eer
    return (
        primary is None,
        primary if primary is not None else 0.0,
        other is None,
        other if other is not None else 0.0,
        summary.system_id,
    )


def rank(summaries, key: str = "pooled_eer") -> list[SystemSummary]:
    """Ascending by key; ties broken by the other EER key, then system_id.

    Systems without a pooled EER (gap rows) sort after all ranked systems.
    The order is total, so permuting the input never changes the output.
    """
    if key not in RANK_KEYS:
        raise ValueError(f"unknown ranking key {key!r}; expected one of {RANK_KEYS}")
    if not summaries:
        raise ValueError("rank() needs at least one summary")
    return sorted(summaries, key=lambda s: _rank_tuple(s, key))


def _fmt_cell(value: float | None, best: float | None) -> str:
    if value is None:
        return "-"
    text = format_percent(value)
    return f"**{text}**" if best is not None and value == best else text


def emit(record: RunRecord, format: str, sort: str = "pooled_eer") -> str:
    """Render a RunRecord as markdown, csv, or json.

    Markdown shows the systems x datasets EER grid (percent, 2 decimals,
    best per column bold) plus Average and Pooled columns; csv and json
    carry full precision. Rows are ranked by ``sort``.
    """
    if format == "json":
        return record.to_json() + "\n"
    ranked = rank(record.summaries, key=sort)
    datasets = list(record.dataset_ids)
    has_params = any(s.param_count_millions is not None for s in ranked)
    has_category = any(s.category is not None for s in ranked)

    if format == "csv":
        header = ["system_id"]
        if has_category:
            header.append("category")
        if has_params:
            header.append("param_count_millions")
        header += datasets + ["average_eer", "pooled_eer"]
        lines = [",".join(header)]
        for s in ranked:
            row = [s.system_id]
            if has_category:
                row.append(s.category or "")
            if has_params:
                row.append("" if s.param_count_millions is None else repr(s.param_count_millions))
            row += ["" if d in s.gap_datasets else repr(s.per_dataset_eer[d]) for d in datasets]
            row.append(repr(s.average_eer))
            row.append("" if s.pooled_eer is None else repr(s.pooled_eer))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}; expected one of {EMIT_FORMATS}")

    def col_best(values):
        values = [v for v in values if v is not None]
        return min(values) if values else None

    best_by_ds = {d: col_best([s.per_dataset_eer.get(d) for s in ranked]) for d in datasets}
    best_avg = col_best([s.average_eer for s in ranked])
    best_pooled = col_best([s.pooled_eer for s in ranked])

    header = ["System"]
    if has_category:
        header.append("Category")
    if has_params:
        header.append("Params (M)")
    header += datasets + ["Average", "Pooled"]
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join(["---"] * len(header)) + " |",
    ]
    footnote = False
    for s in ranked:
        name = s.system_id + ("*" if s.gap_datasets else "")
        footnote = footnote or bool(s.gap_datasets)
        row = [name]
        if has_category:
            row.append(s.category or "-")
        if has_params:
            row.append("-" if s.param_count_millions is None else f"{s.param_count_millions:.2f}")
        for d in datasets:
            v = None if d in s.gap_datasets else s.per_dataset_eer.get(d)
            row.append(_fmt_cell(v, best_by_ds[d]))
        row.append(_fmt_cell(s.average_eer, best_avg))
        row.append(_fmt_cell(s.pooled_eer, best_pooled))
        lines.append("| " + " | ".join(row) + " |")
    if footnote:
        lines.append("")
        lines.append(
            "\\* evaluated with dataset gaps; average covers its datasets only and pooled EER is omitted."
        )
    return "\n".join(lines) + "\n"


def _lock_path(store_path: Path) -> Path:
    return store_path.with_name(store_path.name + ".lock")


def store_append(store_path: str | Path, record: RunRecord) -> None:
    """Append one record to the run store atomically (temp file + rename).

    Holds an advisory lock on a sidecar lock file, so concurrent appenders
    on the same host serialize instead of interleaving.
    """
    import fcntl

    store_path = Path(store_path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    line = record.to_json() + "\n"
    with open(_lock_path(store_path), "w") as lock_fh:
        fcntl.flock(lock_fh, fcntl.LOCK_EX)
        try:
            existing = store_path.read_bytes() if store_path.exists() else b""
            fd, tmp_name = tempfile.mkstemp(dir=store_path.parent, prefix=store_path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as tmp:
                    tmp.write(existing + line.encode("utf-8"))
                    tmp.flush()
                    os.fsync(tmp.fileno())
                os.replace(tmp_name, store_path)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
        except OSError as e:
            raise StoreError(f"cannot append to store {store_path}: {e}") from e
        finally:
            fcntl.flock(lock_fh, fcntl.LOCK_UN)


@dataclass(frozen=True)
class StoreIssue:
    line_number: int
    byte_offset: int
    reason: str


def store_list(store_path: str | Path) -> tuple[list[RunRecord], list[StoreIssue]]:
    """Read records in append order; corrupt lines become issues, not errors."""
    store_path = Path(store_path)
    if not store_path.exists():
        return [], []
    records: list[RunRecord] = []
    issues: list[StoreIssue] = []
    offset = 0
    with open(store_path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line_offset = offset
            offset += len(raw)
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            try:
                records.append(RunRecord.from_json(text))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                issues.append(StoreIssue(lineno, line_offset, f"{type(e).__name__}: {e}"))
    return records, issues
