"""df-arena command line: eval, pool, leaderboard, correlate, augment, history, score.

Exit codes are stable across subcommands: 0 success, 1 data/runtime
failure (one machine-parsable JSON error record on stderr), 2 usage error.
stdout carries only the documented payload; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .augment import AugmentSpec, augment_corpus
from .errors import ArenaError
from .leaderboard import RECORD_VERSION, emit, evaluate_arena, store_append, store_list
from .metrics import evaluate, pooled_eer
from .protocol import (
    MANIFEST_VERSION,
    POLARITIES,
    PROTOCOL_FORMATS,
    join,
    load_manifest,
    parse_protocol,
    parse_scores,
    run_external_scorer,
    serialize_scores,
)
from .stats import correlate_matrix, load_matrix_csv

log = logging.getLogger("df_arena")

_VERSION_TEXT = (
    f"df-arena {__version__} (manifest_version {MANIFEST_VERSION}, record_version {RECORD_VERSION})"
)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _default_jobs() -> int:
    raw = os.environ.get("DF_ARENA_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_payload(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="df-arena", description=__doc__)
    p.add_argument("--version", action="version", version=_VERSION_TEXT)
    p.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"])
    sub = p.add_subparsers(dest="subcommand", required=True)

    evalp = sub.add_parser("eval", help="evaluate one score file against one protocol")
    evalp.add_argument("--protocol", required=True)
    evalp.add_argument("--scores", required=True)
    evalp.add_argument("--protocol-format", default="two-column", choices=PROTOCOL_FORMATS)
    evalp.add_argument("--polarity", default="higher-is-bonafide", choices=POLARITIES)
    evalp.add_argument("--mode", default="strict", choices=["strict", "intersect"])
    evalp.add_argument("--threshold", type=float, default=None,
                       help="fixed accuracy/F1 threshold (default: the EER threshold)")
    evalp.add_argument("--system-id", default=None)
    evalp.add_argument("--dataset-id", default=None)
    evalp.add_argument("--out", default=None)
    evalp.set_defaults(func=cmd_eval)

    poolp = sub.add_parser("pool", help="pooled EER over several protocol/score pairs")
    poolp.add_argument("--pair", nargs=2, action="append", required=True,
                       metavar=("PROTOCOL", "SCORES"))
    poolp.add_argument("--protocol-format", default="two-column", choices=PROTOCOL_FORMATS)
    poolp.add_argument("--polarity", default="higher-is-bonafide", choices=POLARITIES)
    poolp.add_argument("--mode", default="strict", choices=["strict", "intersect"])
    poolp.add_argument("--out", default=None)
    poolp.set_defaults(func=cmd_pool)

    lbp = sub.add_parser("leaderboard", help="evaluate a manifest and render the ranking")
    lbp.add_argument("--manifest", required=True)
    lbp.add_argument("--sort", default="pooled_eer", choices=["pooled_eer", "average_eer"])
    lbp.add_argument("--format", default="markdown", choices=["markdown", "csv", "json"])
    lbp.add_argument("--store", default=None, help="append the run to this store file")
    lbp.add_argument("--out", default=None)
    lbp.add_argument("--jobs", type=_positive_int, default=_default_jobs())
    lbp.set_defaults(func=cmd_leaderboard)

    corrp = sub.add_parser("correlate", help="correlate dataset EER columns with the average")
    corrp.add_argument("--matrix", required=True, help="CSV: rows=systems, columns=datasets")
    corrp.add_argument("--bins", type=_positive_int, default=None, help="mutual-information bins")
    corrp.add_argument("--systems", default=None, help="comma-separated system subset")
    corrp.add_argument("--format", default="csv", choices=["csv", "json"])
    corrp.add_argument("--out", default=None)
    corrp.set_defaults(func=cmd_correlate)

    augp = sub.add_parser("augment", help="perturb a WAV corpus deterministically")
    augp.add_argument("--in", dest="in_dir", required=True)
    augp.add_argument("--out", dest="out_dir", required=True)
    augp.add_argument("--category", required=True, choices=["noise", "music", "speech", "reverb"])
    augp.add_argument("--source", required=True, help="interferer/RIR directory")
    augp.add_argument("--snr-low", type=float, default=None)
    augp.add_argument("--snr-high", type=float, default=None)
    augp.add_argument("--clip-policy", default="peak-normalize", choices=["peak-normalize", "hard-clip"])
    augp.add_argument("--seed", type=int, required=True)
    augp.add_argument("--jobs", type=_positive_int, default=_default_jobs())
    augp.set_defaults(func=cmd_augment)

    histp = sub.add_parser("history", help="list runs appended to a store")
    histp.add_argument("--store", required=True)
    histp.add_argument("--format", default="text", choices=["text", "json"])
    histp.add_argument("--out", default=None)
    histp.set_defaults(func=cmd_history)

    scorep = sub.add_parser("score", help="run an external scorer and write a score file")
    scorep.add_argument("--cmd", required=True, help="scorer command line")
    scorep.add_argument("--list", dest="audio_list", required=True,
                        help="file of newline-separated audio paths")
    scorep.add_argument("--timeout", type=float, default=None)
    scorep.add_argument("--system-id", default="external")
    scorep.add_argument("--out", default=None)
    scorep.set_defaults(func=cmd_score)

    return p


def cmd_eval(args) -> int:
    trials = parse_protocol(args.protocol, args.protocol_format, dataset_id=args.dataset_id)
    scores = parse_scores(args.scores, polarity=args.polarity,
                          system_id=args.system_id, dataset_id=trials.dataset_id)
    joined = join(trials, scores, mode=args.mode)
    if joined.dropped_trials or joined.dropped_scores:
        log.info("intersect join dropped %d trials and %d scores",
                 joined.dropped_trials, joined.dropped_scores)
    report = evaluate(joined.rows, scores.system_id, trials.dataset_id,
                      decision_threshold=args.threshold)
    _write_payload(json.dumps(dataclasses.asdict(report), indent=2) + "\n", args.out)
    return 0


def cmd_pool(args) -> int:
    joined_sets = []
    n_bona = n_spoof = 0
    for protocol_path, score_path in args.pair:
        trials = parse_protocol(protocol_path, args.protocol_format)
        scores = parse_scores(score_path, polarity=args.polarity)
        joined = join(trials, scores, mode=args.mode)
        joined_sets.append(joined.rows)
        n_bona += sum(1 for label, _ in joined.rows if label == "bonafide")
        n_spoof += sum(1 for label, _ in joined.rows if label == "spoof")
    value, threshold = pooled_eer(joined_sets)
    payload = {
        "pooled_eer": value,
        "pooled_eer_threshold": threshold,
        "n_sets": len(joined_sets),
        "n_bonafide": n_bona,
        "n_spoof": n_spoof,
    }
    _write_payload(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


_REPORT_SUFFIX = {"markdown": "md", "csv": "csv", "json": "json"}


def cmd_leaderboard(args) -> int:
    manifest = load_manifest(args.manifest)
    record = evaluate_arena(manifest, tool_version=__version__, jobs=args.jobs)
    if args.store:
        store_append(args.store, record)
        log.info("appended run %s to %s", record.run_id, args.store)
    payload = emit(record, args.format, sort=args.sort)
    if args.out is None and manifest.output_dir is not None:
        # manifest-declared output directory: keep a copy next to the run data
        manifest.output_dir.mkdir(parents=True, exist_ok=True)
        report_path = manifest.output_dir / f"leaderboard.{_REPORT_SUFFIX[args.format]}"
        report_path.write_text(payload, encoding="utf-8")
        log.info("report written to %s", report_path)
    _write_payload(payload, args.out)
    return 0


def cmd_correlate(args) -> int:
    matrix = load_matrix_csv(args.matrix)
    if args.systems:
        wanted = [s.strip() for s in args.systems.split(",") if s.strip()]
        matrix = matrix.subset(wanted)
    report = correlate_matrix(matrix, bins=args.bins)
    payload = report.to_csv() if args.format == "csv" else report.to_json()
    _write_payload(payload, args.out)
    return 0


def cmd_augment(args) -> int:
    has_low, has_high = args.snr_low is not None, args.snr_high is not None
    if args.category == "reverb" and (has_low or has_high):
        raise UsageError("--snr-low/--snr-high do not apply to --category reverb")
    if has_low != has_high:
        raise UsageError("--snr-low and --snr-high must be given together")
    if has_low and args.snr_low > args.snr_high:
        raise UsageError(f"invalid SNR range: --snr-low {args.snr_low} > --snr-high {args.snr_high}")
    snr_range = (args.snr_low, args.snr_high) if has_low else None
    spec = AugmentSpec(
        category=args.category,
        source_dir=Path(args.source),
        seed=args.seed,
        snr_range_db=snr_range,
        clip_policy=args.clip_policy,
    )
    summary = augment_corpus(args.in_dir, args.out_dir, spec, jobs=args.jobs)
    payload = {
        "category": summary.category,
        "seed": summary.seed,
        "files_processed": summary.n_processed,
        "manifest": summary.manifest_path,
        "entries": [dataclasses.asdict(e) for e in summary.entries],
        "failures": [{"input": path, "reason": reason} for path, reason in summary.failures],
    }
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    if summary.failures:
        _error_record(ArenaError(f"{len(summary.failures)} file(s) failed; see summary"))
        return 1
    return 0


def cmd_history(args) -> int:
    records, issues = store_list(args.store)
    if args.format == "json":
        payload = {
            "runs": [
                {
                    "run_id": r.run_id,
                    "timestamp": r.timestamp,
                    "manifest_digest": r.manifest_digest,
                    "tool_version": r.tool_version,
                    "n_systems": len(r.summaries),
                    "n_datasets": len(r.dataset_ids),
                }
                for r in records
            ],
            "issues": [dataclasses.asdict(i) for i in issues],
        }
        _write_payload(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        lines = [
            f"{r.run_id}  {r.timestamp}  digest={r.manifest_digest[:12]}  "
            f"systems={len(r.summaries)}  datasets={len(r.dataset_ids)}"
            for r in records
        ]
        lines += [
            f"unreadable record at line {i.line_number} (byte offset {i.byte_offset}): {i.reason}"
            for i in issues
        ]
        _write_payload("\n".join(lines) + ("\n" if lines else ""), args.out)
    return 0


def cmd_score(args) -> int:
    score_set = run_external_scorer(
        args.cmd, args.audio_list, timeout=args.timeout, system_id=args.system_id
    )
    _write_payload(serialize_scores(score_set), args.out)
    return 0


class UsageError(Exception):
    """Raised by subcommands for argument combinations argparse cannot check."""


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _error_record(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(record) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    try:
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))  # exits 2
    except ArenaError as e:
        _error_record(e)
        return 1
    except Exception as e:  # unexpected runtime failure: still exit 1, record kept parsable
        log.debug("unexpected failure", exc_info=True)
        _error_record(e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
