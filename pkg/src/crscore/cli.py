"""Command-line front end composing the analysis modules into runs and gates.

Exit codes form a total contract:

* 0 — success, nothing flagged
* 1 — input, validation, or configuration error (details on stderr as JSON)
* 2 — the analysis ran and a fairness, drift, stability, or composite flag
  fired, for use as a CI gate

One-shot analyses are driven by flags; ``report`` runs a composed set of
analyses from a JSON run-config file. Either way the resolved configuration
is echoed into every report header.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .agreement import agreement_report
from .composites import CompositeSpec, blp_weights, composite_evaluation
from .errors import ConfigInvalidError, CrScoreError
from .fairness import fairness_flags, subgroup_metrics
from .ledger import (
    STATUSES,
    SystemKind,
    gap_report,
    load_ledger,
    new_ledger,
    render_markdown,
    save_ledger,
    set_entry,
)
from .llm.backend import BackendConfig
from .llm.batch import (
    BatchResult,
    apply_scores,
    consistency_run,
    read_batch_jsonl,
    score_batch,
)
from .reliability import (
    ConsistencyReport,
    TrendReport,
    consistency_run_compare,
    trend_monitor,
)
from .reports import FORMATS, ReportDocument, check_formats, write_report
from .scoredata import (
    LATEST,
    ConditionalDistribution,
    Dataset,
    RatingSource,
    SourceKind,
    align,
    conditional_distribution,
    export_csv,
    ingest_csv,
    load_manifest,
    session_runs,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits the process with code 2 on usage errors, which would
    # collide with the flag exit code; remap onto the error code instead.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _print_errors(errors: Sequence[tuple[str, str]]) -> None:
    payload = {"errors": [{"type": kind, "message": message} for kind, message in errors]}
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)


# ---------------------------------------------------------------------------
# small parsing and validation helpers


def _id_list(raw: str) -> list[str]:
    ids = [part.strip() for part in raw.split(",") if part.strip()]
    if not ids:
        raise ConfigInvalidError(f"empty id list: {raw!r}")
    return ids


def _component_lists(raw: object) -> list[tuple[str, ...]]:
    out: list[tuple[str, ...]] = []
    for entry in raw or ():  # type: ignore[union-attr]
        if isinstance(entry, str):
            out.append(tuple(_id_list(entry)))
        else:
            out.append(tuple(str(c) for c in entry))
    return out


def _session(raw: object) -> str | None:
    """Map the CLI/session-config spelling onto a session selector."""
    if raw is None or raw == "untagged":
        return None
    return str(raw)


def _rate(name: str, value: object) -> float:
    value = float(value)  # type: ignore[arg-type]
    if not 0.0 <= value <= 1.0:
        raise ConfigInvalidError(f"{name} must be in [0, 1], got {value}")
    return value


def _nonnegative(name: str, value: object) -> float:
    value = float(value)  # type: ignore[arg-type]
    if not (math.isfinite(value) and value >= 0.0):
        raise ConfigInvalidError(f"{name} must be finite and >= 0, got {value}")
    return value


def _require(params: Mapping, key: str, analysis: str) -> object:
    value = params.get(key)
    if value is None:
        raise ConfigInvalidError(f"{analysis} analysis requires {key!r}")
    return value


def _load_dataset(data: str | Path, manifest: str | Path) -> Dataset:
    return ingest_csv(data, load_manifest(manifest))


# ---------------------------------------------------------------------------
# analysis runners, shared by the one-shot commands and `report`
#
# Each runner takes the dataset plus a flat parameter mapping and returns
# (document, flagged, summary line).


def _conditional_markdown(cond: ConditionalDistribution) -> str:
    lines = [
        f"### {cond.target_source} conditional on {cond.condition_source}",
        "",
        "| level | n | q1 | median | q3 |",
        "|---|---|---|---|---|",
    ]
    for row in cond.rows:
        lines.append(
            f"| {row.level} | {row.count} | {row.q1:g} | {row.median:g} | {row.q3:g} |"
        )
    return "\n".join(lines) + "\n"


def _run_agreement(dataset: Dataset, params: Mapping) -> tuple[ReportDocument, bool, str]:
    reference = str(_require(params, "reference", "agreement"))
    comparison = str(_require(params, "comparison", "agreement"))
    item = params.get("item")
    session = params.get("session", LATEST)
    record_filter = (lambda r: r.item_id == item) if item else None
    aligned = align(
        dataset,
        [reference, comparison],
        record_filter=record_filter,
        session=_session(session) if session != LATEST else LATEST,
    )
    report = agreement_report(aligned, reference, comparison)
    body = report.to_json_dict()
    markdown = report.to_markdown()
    if params.get("conditional"):
        cond = conditional_distribution(aligned, reference, comparison)
        body["conditional"] = cond.to_json_dict()
        markdown += "\n" + _conditional_markdown(cond)

    config = {
        "analysis": "agreement",
        "reference": reference,
        "comparison": comparison,
        "session": session,
        "pooling": "single-item" if item else "pooled",
    }
    if item:
        config["item"] = item
    name = str(params.get("name") or f"agreement-{comparison}-vs-{reference}")
    doc = ReportDocument(
        name=name,
        title=f"Agreement: {comparison} vs {reference}",
        config=config,
        body=body,
        body_markdown=markdown,
    )
    qwk = report.kappas.get("quadratic")
    shown = f"{qwk:.4f}" if qwk is not None else report.statuses["kappa_quadratic"]
    summary = (
        f"agreement {comparison} vs {reference}: n={report.n} "
        f"exact={report.rates.exact:.4f} qwk={shown}"
    )
    return doc, False, summary


def _run_composite(dataset: Dataset, params: Mapping) -> tuple[ReportDocument, bool, str]:
    benchmark = str(_require(params, "benchmark", "composite"))
    pair_with = str(_require(params, "pair_with", "composite"))
    margin = _nonnegative("margin", params.get("margin", 0.10))

    singles = [s for entry in params.get("single") or () for s in _id_list(str(entry))]
    means = _component_lists(params.get("mean"))
    blps = _component_lists(params.get("blp"))
    weighted = params.get("weighted") or ()

    specs: list[CompositeSpec] = []
    for source_id in singles:
        specs.append(CompositeSpec((source_id,), label=source_id))
    for components in means:
        specs.append(CompositeSpec(components))
    for raw in weighted:
        try:
            specs.append(
                CompositeSpec(
                    components=tuple(str(c) for c in raw["components"]),
                    weights=tuple(float(w) for w in raw["weights"]),
                    intercept=float(raw.get("intercept", 0.0)),
                    label=str(raw.get("label", "")),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ConfigInvalidError(
                f"weighted composite needs components and weights: {exc}"
            ) from exc
    if not specs and not blps:
        raise ConfigInvalidError(
            "composite analysis needs at least one of single/mean/weighted/blp"
        )

    ordered: list[str] = []
    for sid in [
        *(c for components in ([tuple(singles)] + means + blps) for c in components),
        *(c for raw in weighted for c in raw.get("components", ())),
        benchmark,
        pair_with,
    ]:
        if sid not in ordered:
            ordered.append(str(sid))
    aligned = align(dataset, ordered)
    for components in blps:
        specs.append(blp_weights(aligned.select([*components, benchmark])))

    evaluation = composite_evaluation(aligned, specs, benchmark, pair_with, margin=margin)
    config = {
        "analysis": "composite",
        "benchmark": benchmark,
        "pair_with": pair_with,
        "margin": margin,
        "composites": [spec.to_json_dict() for spec in specs],
    }
    name = str(params.get("name") or f"composite-vs-{benchmark}")
    doc = ReportDocument(
        name=name,
        title=f"Composite evaluation vs {benchmark}",
        config=config,
        body=evaluation.to_json_dict(),
        body_markdown=evaluation.to_markdown(),
    )
    flagged_count = sum(1 for row in evaluation.rows if row.flagged)
    summary = (
        f"composite vs {benchmark}: n={evaluation.n} pair_r={evaluation.pair_r:.4f} "
        f"composites={len(evaluation.rows)} flagged={flagged_count}"
    )
    return doc, evaluation.any_flag, summary


def _run_fairness(dataset: Dataset, params: Mapping) -> tuple[ReportDocument, bool, str]:
    facet = str(_require(params, "facet", "fairness"))
    human = str(_require(params, "human", "fairness"))
    machine = str(_require(params, "machine", "fairness"))
    t_smd = _nonnegative("t_smd", params.get("t_smd", 0.15))
    t_qwk_drop = _nonnegative("t_qwk_drop", params.get("t_qwk_drop", 0.10))
    min_n = int(params.get("min_n", 50))
    if min_n < 0:
        raise ConfigInvalidError(f"min_n must be >= 0, got {min_n}")

    metrics = subgroup_metrics(dataset, facet, human, machine)
    flags = fairness_flags(metrics, t_smd=t_smd, t_qwk_drop=t_qwk_drop, min_n=min_n)
    body = {"subgroups": metrics.to_json_dict(), "flags": flags.to_json_dict()}
    markdown = metrics.to_markdown() + "\n" + flags.to_markdown()

    config = {
        "analysis": "fairness",
        "facet": facet,
        "human": human,
        "machine": machine,
        "t_smd": t_smd,
        "t_qwk_drop": t_qwk_drop,
        "min_n": min_n,
    }
    name = str(params.get("name") or f"fairness-{facet}")
    doc = ReportDocument(
        name=name,
        title=f"Fairness: {machine} vs {human} by {facet}",
        config=config,
        body=body,
        body_markdown=markdown,
    )
    summary = (
        f"fairness {facet}: groups={len(metrics.groups)} flags={len(flags.flags)}"
    )
    return doc, flags.any_flag, summary


def _consistency_markdown(report: ConsistencyReport) -> str:
    lines = [
        f"## Consistency over {report.runs} runs (n = {report.n})",
        "",
        f"- worst pairwise exact agreement: {report.worst_exact:.4f}",
        f"- threshold: {report.threshold:.4f}",
        f"- stable: {'yes' if report.stable else 'no'}",
        "",
        "| pair | exact | qwk |",
        "|---|---|---|",
    ]
    labels = report.run_labels
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            qwk = report.qwk_matrix[i][j]
            shown = (
                f"{qwk:.4f}"
                if qwk is not None
                else report.qwk_statuses.get(f"{labels[i]}|{labels[j]}", "undefined")
            )
            lines.append(
                f"| {labels[i]} vs {labels[j]} | {report.exact_matrix[i][j]:.4f} | {shown} |"
            )
    return "\n".join(lines) + "\n"


def _run_consistency(dataset: Dataset, params: Mapping) -> tuple[ReportDocument, bool, str]:
    source = str(_require(params, "source", "consistency"))
    sessions_raw = _require(params, "sessions", "consistency")
    if isinstance(sessions_raw, str):
        sessions = _id_list(sessions_raw)
    else:
        sessions = [str(s) for s in sessions_raw]  # type: ignore[union-attr]
    threshold = _rate("threshold", params.get("threshold", 0.95))

    _, vectors = session_runs(dataset, source, sessions)
    report = consistency_run_compare(
        vectors, dataset.scale, threshold=threshold, labels=sessions
    )
    config = {
        "analysis": "consistency",
        "source": source,
        "sessions": list(sessions),
        "threshold": threshold,
    }
    name = str(params.get("name") or f"consistency-{source}")
    doc = ReportDocument(
        name=name,
        title=f"Consistency: {source} across repeat runs",
        config=config,
        body=report.to_json_dict(),
        body_markdown=_consistency_markdown(report),
    )
    summary = (
        f"consistency {source}: runs={report.runs} n={report.n} "
        f"worst_exact={report.worst_exact:.4f} stable={'yes' if report.stable else 'no'}"
    )
    return doc, not report.stable, summary


def _trend_markdown(report: TrendReport) -> str:
    smd_shown = f"{report.smd:.4f}" if report.smd is not None else report.smd_status
    qwk_shown = f"{report.qwk:.4f}" if report.qwk is not None else report.qwk_status
    return (
        f"## Trend: {report.baseline_tag} -> {report.current_tag} (n = {report.n})\n"
        f"\n"
        f"- standardized mean difference: {smd_shown} (threshold {report.t_smd:g})\n"
        f"- exact agreement: {report.exact_rate:.4f} (threshold {report.t_exact:g})\n"
        f"- qwk: {qwk_shown}\n"
        f"- drift flag: {'FIRED' if report.drift_flag else 'clear'}\n"
    )


def _run_trend(dataset: Dataset, params: Mapping) -> tuple[ReportDocument, bool, str]:
    source = str(_require(params, "source", "trend"))
    baseline = str(_require(params, "baseline", "trend"))
    current = str(_require(params, "current", "trend"))
    t_smd = _nonnegative("t_smd", params.get("t_smd", 0.15))
    t_exact = _rate("t_exact", params.get("t_exact", 0.90))

    baseline_aligned = align(dataset, [source], session=_session(baseline))
    current_aligned = align(dataset, [source], session=_session(current))
    report = trend_monitor(
        baseline_aligned,
        current_aligned,
        t_smd=t_smd,
        t_exact=t_exact,
        baseline_tag=baseline,
        current_tag=current,
    )
    config = {
        "analysis": "trend",
        "source": source,
        "baseline": baseline,
        "current": current,
        "t_smd": t_smd,
        "t_exact": t_exact,
    }
    name = str(params.get("name") or f"trend-{source}-{baseline}-to-{current}")
    doc = ReportDocument(
        name=name,
        title=f"Trend: {source}, {baseline} to {current}",
        config=config,
        body=report.to_json_dict(),
        body_markdown=_trend_markdown(report),
    )
    smd_shown = f"{report.smd:.4f}" if report.smd is not None else report.smd_status
    summary = (
        f"trend {source} {baseline}->{current}: n={report.n} "
        f"exact={report.exact_rate:.4f} smd={smd_shown} "
        f"drift={'FIRED' if report.drift_flag else 'clear'}"
    )
    return doc, report.drift_flag, summary


_RUNNERS = {
    "agreement": _run_agreement,
    "composite": _run_composite,
    "fairness": _run_fairness,
    "consistency": _run_consistency,
    "trend": _run_trend,
}


def _run_and_emit(
    dataset: Dataset,
    kind: str,
    params: Mapping,
    out_dir: str | Path,
    formats: Sequence[str],
) -> int:
    doc, flagged, summary = _RUNNERS[kind](dataset, params)
    for path in write_report(doc, out_dir, formats):
        print(f"wrote {path}")
    print(summary)
    return EXIT_FLAGGED if flagged else EXIT_OK


# ---------------------------------------------------------------------------
# run-config files (composed runs)


@dataclass(frozen=True)
class RunConfig:
    """A composed evaluation run: one dataset, several analyses."""

    data: Path
    manifest: Path
    analyses: tuple[Mapping[str, object], ...]
    output_dir: Path
    formats: tuple[str, ...]


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalidError(f"cannot read run config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalidError("run config must be a JSON object")
    for key in ("data", "manifest", "analyses"):
        if key not in raw:
            raise ConfigInvalidError(f"run config missing {key!r}")
    analyses = raw["analyses"]
    if not isinstance(analyses, list) or not analyses:
        raise ConfigInvalidError("run config must select at least one analysis")
    for analysis in analyses:
        if not isinstance(analysis, dict) or "kind" not in analysis:
            raise ConfigInvalidError("every analysis needs a 'kind'")
        if analysis["kind"] not in _RUNNERS:
            raise ConfigInvalidError(
                f"unknown analysis kind {analysis['kind']!r}, "
                f"expected one of {sorted(_RUNNERS)}"
            )
    formats = check_formats(tuple(raw.get("formats", FORMATS)))

    base = path.parent

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    return RunConfig(
        data=resolve(str(raw["data"])),
        manifest=resolve(str(raw["manifest"])),
        analyses=tuple(analyses),
        output_dir=resolve(str(raw.get("output_dir", "."))),
        formats=formats,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    scale = dataset.scale
    print(
        f"ingested {dataset.n_records} records, {len(dataset.sources)} sources, "
        f"scale {scale.atypical_floor}..{scale.max_reportable} "
        f"(reportable {scale.min_reportable}..{scale.max_reportable})"
    )
    if args.echo_csv:
        export_csv(dataset, args.echo_csv)
        print(f"wrote {args.echo_csv}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    params = {
        "reference": args.reference,
        "comparison": args.comparison,
        "session": args.session,
        "item": args.item,
        "conditional": args.conditional,
        "name": args.name,
    }
    return _run_and_emit(dataset, "agreement", params, args.out_dir, _id_list(args.formats))


def cmd_composite(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    params = {
        "benchmark": args.benchmark,
        "pair_with": args.pair_with,
        "margin": args.margin,
        "single": args.single,
        "mean": args.mean,
        "blp": args.blp,
        "name": args.name,
    }
    return _run_and_emit(dataset, "composite", params, args.out_dir, _id_list(args.formats))


def cmd_fairness(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    params = {
        "facet": args.facet,
        "human": args.human,
        "machine": args.machine,
        "t_smd": args.t_smd,
        "t_qwk_drop": args.t_qwk_drop,
        "min_n": args.min_n,
        "name": args.name,
    }
    return _run_and_emit(dataset, "fairness", params, args.out_dir, _id_list(args.formats))


def cmd_consistency(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    params = {
        "source": args.source,
        "sessions": args.sessions,
        "threshold": args.threshold,
        "name": args.name,
    }
    return _run_and_emit(dataset, "consistency", params, args.out_dir, _id_list(args.formats))


def cmd_trend(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.data, args.manifest)
    params = {
        "source": args.source,
        "baseline": args.baseline,
        "current": args.current,
        "t_smd": args.t_smd,
        "t_exact": args.t_exact,
        "name": args.name,
    }
    return _run_and_emit(dataset, "trend", params, args.out_dir, _id_list(args.formats))


def cmd_report(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    dataset = _load_dataset(cfg.data, cfg.manifest)
    worst = EXIT_OK
    for analysis in cfg.analyses:
        code = _run_and_emit(
            dataset, str(analysis["kind"]), analysis, cfg.output_dir, cfg.formats
        )
        worst = max(worst, code)
    return worst


def _item_row(result) -> dict:
    row: dict = {
        "response_id": result.response_id,
        "ok": result.ok,
        "attempts": result.attempts,
    }
    if result.completion is not None:
        row["score"] = result.completion.score
        if result.completion.warnings:
            row["warnings"] = list(result.completion.warnings)
    if result.failure is not None:
        row["failure"] = {
            "type": type(result.failure).__name__,
            "message": str(result.failure),
        }
    if result.injection_flags:
        row["injection_flags"] = list(result.injection_flags)
    return row


def cmd_llm_score(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    items = read_batch_jsonl(args.batch)
    config = BackendConfig(
        endpoint=args.endpoint,
        model=args.model,
        temperature=args.temperature,
        max_parallel=args.max_parallel,
        max_attempts=args.max_attempts,
        backoff_base=args.backoff_base,
        backoff_factor=args.backoff_factor,
        timeout=args.timeout,
        temperature_justification=args.temperature_justification,
    )
    if args.data and not (args.source and args.out_data):
        raise ConfigInvalidError("--data requires --source and --out-data")

    echo = {
        "analysis": "llm-score",
        "endpoint": config.endpoint,
        "model": config.model,
        "temperature": config.temperature,
        "max_parallel": config.max_parallel,
        "max_attempts": config.max_attempts,
        "parse_mode": args.parse_mode,
        "tag_policy": args.tag_policy,
        "session_tag": args.session_tag,
        "runs": args.runs,
        "items": len(items),
    }
    if config.temperature_justification:
        echo["temperature_justification"] = config.temperature_justification

    batches: tuple[BatchResult, ...]
    flagged = False
    if args.runs > 1:
        echo["threshold"] = _rate("threshold", args.threshold)
        result = consistency_run(
            items,
            config,
            manifest.scale,
            k=args.runs,
            threshold=args.threshold,
            session_prefix=args.session_tag or "run",
            audit_path=args.audit_log,
            parse_mode=args.parse_mode,
            tag_policy=args.tag_policy,
        )
        batches = result.batches
        flagged = not result.report.stable
        body = {
            "consistency": result.report.to_json_dict(),
            "runs": [b.summary_dict() for b in result.batches],
            "excluded_runs": dict(result.excluded),
            "items": {b.session_tag: [_item_row(r) for r in b.results] for b in batches},
        }
        markdown = _consistency_markdown(result.report)
        summary = (
            f"scored {len(items)} items x {args.runs} runs: "
            f"worst_exact={result.report.worst_exact:.4f} "
            f"stable={'yes' if result.report.stable else 'no'}"
        )
    else:
        batch = score_batch(
            items,
            config,
            manifest.scale,
            session_tag=args.session_tag,
            parse_mode=args.parse_mode,
            tag_policy=args.tag_policy,
            audit_path=args.audit_log,
        )
        batches = (batch,)
        body = {
            "summary": batch.summary_dict(),
            "items": [_item_row(r) for r in batch.results],
        }
        failed = [r.response_id for r in batch.results if not r.ok]
        markdown = (
            f"## LLM scoring run {batch.session_tag or '(untagged)'}\n"
            f"\n"
            f"- items: {len(batch.results)}\n"
            f"- scored: {batch.n_ok}\n"
            f"- failed: {batch.n_failed}"
            + (f" ({', '.join(failed)})" if failed else "")
            + "\n"
        )
        summary = f"scored {batch.n_ok}/{len(batch.results)} items ({batch.n_failed} failures)"

    doc = ReportDocument(
        name=args.name or "llm-score",
        title="LLM scoring run",
        config=echo,
        body=body,
        body_markdown=markdown,
    )
    for path in write_report(doc, args.out_dir, _id_list(args.formats)):
        print(f"wrote {path}")

    if args.data:
        dataset = _load_dataset(args.data, args.manifest)
        source: RatingSource | str = args.source
        if args.source not in dataset.source_ids:
            source = RatingSource(id=args.source, kind=SourceKind.GENERATIVE_AI)
        for batch in batches:
            if batch.n_ok:
                dataset = apply_scores(dataset, batch, source)
                source = args.source  # declared after the first application
        export_csv(dataset, args.out_data)
        print(f"wrote {args.out_data}")

    print(summary)
    n_failed = sum(b.n_failed for b in batches)
    if n_failed and args.fail_on_any:
        _print_errors([("ScoringFailures", f"{n_failed} item scoring(s) failed")])
        return EXIT_ERROR
    return EXIT_FLAGGED if flagged else EXIT_OK


def _system_kind(raw: str) -> SystemKind:
    try:
        return SystemKind(raw)
    except ValueError:
        raise ConfigInvalidError(
            f"unknown system kind {raw!r}, expected one of "
            f"{[k.value for k in SystemKind]}"
        ) from None


def cmd_ledger_init(args: argparse.Namespace) -> int:
    kind = _system_kind(args.kind)
    ledger = new_ledger(kind)
    save_ledger(ledger, args.path)
    print(f"initialized {kind.value} ledger with {len(ledger.entries)} items at {args.path}")
    return EXIT_OK


def cmd_ledger_set(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.path)
    root = args.attachment_root or Path(args.path).parent
    updated = set_entry(
        ledger,
        args.item,
        args.status,
        notes=args.notes,
        attachments=tuple(args.attach or ()),
        attachment_root=root,
    )
    save_ledger(updated, args.path)
    print(f"{args.item}: {args.status}")
    return EXIT_OK


def cmd_ledger_gaps(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.path)
    gaps = gap_report(ledger)
    if args.json:
        rows = [
            {
                "id": item.id,
                "evidence_type": item.evidence_type.value,
                "title": item.title,
                "status": status,
            }
            for item, status in gaps
        ]
        print(json.dumps(rows, indent=2, ensure_ascii=False))
    else:
        for item, status in gaps:
            print(f"{item.evidence_type.value}\t{item.id}\t{status}")
        print(f"{len(gaps)} gap(s)")
    return EXIT_FLAGGED if gaps and args.fail_on_gaps else EXIT_OK


def cmd_ledger_render(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.path)
    text = render_markdown(ledger)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="score CSV path")
    parser.add_argument("--manifest", required=True, help="manifest JSON path")


def _add_report_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", default=".", help="directory for report files")
    parser.add_argument(
        "--formats",
        default=",".join(FORMATS),
        help="comma list from {json,markdown} (default both)",
    )
    parser.add_argument("--name", default=None, help="report file stem override")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="crscore",
        description="Evaluate constructed-response scoring systems: agreement, "
        "composites, fairness, repeat-run consistency, trend drift, LLM scoring "
        "runs, and the validity-evidence ledger.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("ingest", help="validate a score CSV against its manifest")
    _add_data_args(p)
    p.add_argument("--echo-csv", default=None, help="re-export the validated dataset here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("evaluate", help="pairwise agreement and accuracy statistics")
    _add_data_args(p)
    p.add_argument("--reference", required=True, help="reference source id (rows)")
    p.add_argument("--comparison", required=True, help="comparison source id (columns)")
    p.add_argument(
        "--session",
        default=LATEST,
        help="session tag, 'latest', or 'untagged' (default latest)",
    )
    p.add_argument("--item", default=None, help="restrict to one item id (default pooled)")
    p.add_argument(
        "--conditional",
        action="store_true",
        help="include the per-level conditional distribution of the comparison score",
    )
    _add_report_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("composite", help="evaluate contributory composite scores")
    _add_data_args(p)
    p.add_argument("--benchmark", required=True, help="benchmark rating source id")
    p.add_argument(
        "--pair-with",
        required=True,
        dest="pair_with",
        help="second rating of the benchmark construct; sets the comparison bar",
    )
    p.add_argument(
        "--single",
        action="append",
        default=None,
        help="source id(s) to evaluate as-is (repeatable, comma list)",
    )
    p.add_argument(
        "--mean",
        action="append",
        default=None,
        help="comma list of components for an equal-weights composite (repeatable)",
    )
    p.add_argument(
        "--blp",
        action="append",
        default=None,
        help="comma list of components for a best-linear-predictor fit "
        "against the benchmark (repeatable)",
    )
    p.add_argument("--margin", type=float, default=0.10, help="flag margin below pair r")
    _add_report_args(p)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("fairness", help="subgroup metrics and fairness flags")
    _add_data_args(p)
    p.add_argument("--facet", required=True, help="group facet name")
    p.add_argument("--human", required=True, help="human reference source id")
    p.add_argument("--machine", required=True, help="machine source id")
    p.add_argument("--t-smd", type=float, default=0.15, dest="t_smd")
    p.add_argument("--t-qwk-drop", type=float, default=0.10, dest="t_qwk_drop")
    p.add_argument(
        "--min-n",
        type=int,
        default=50,
        dest="min_n",
        help="below this group size the shrunken SMD drives the flag",
    )
    _add_report_args(p)
    p.set_defaults(func=cmd_fairness)

    p = sub.add_parser("consistency", help="compare repeat scoring runs of one source")
    _add_data_args(p)
    p.add_argument("--source", required=True, help="source id scored repeatedly")
    p.add_argument(
        "--sessions", required=True, help="comma list of session tags, in run order"
    )
    p.add_argument("--threshold", type=float, default=0.95, help="stability threshold")
    _add_report_args(p)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("trend", help="drift check of a later run against a baseline")
    _add_data_args(p)
    p.add_argument("--source", required=True, help="source id scored in both sessions")
    p.add_argument("--baseline", required=True, help="baseline session tag")
    p.add_argument("--current", required=True, help="current session tag")
    p.add_argument("--t-smd", type=float, default=0.15, dest="t_smd")
    p.add_argument("--t-exact", type=float, default=0.90, dest="t_exact")
    _add_report_args(p)
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("llm", help="LLM scoring harness")
    llm_sub = p.add_subparsers(dest="llm_command", required=True, metavar="subcommand")
    p = llm_sub.add_parser("score", help="score a JSONL batch through a chat backend")
    p.add_argument("--batch", required=True, help="batch JSONL path")
    p.add_argument("--manifest", required=True, help="manifest JSON (declares the scale)")
    p.add_argument("--endpoint", required=True, help="chat-completion endpoint URL")
    p.add_argument("--model", required=True, help="model identifier")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument(
        "--temperature-justification",
        default=None,
        dest="temperature_justification",
        help="required when temperature exceeds 1.0; recorded in the run summary",
    )
    p.add_argument("--max-parallel", type=int, default=4, dest="max_parallel")
    p.add_argument("--max-attempts", type=int, default=3, dest="max_attempts")
    p.add_argument("--backoff-base", type=float, default=1.0, dest="backoff_base")
    p.add_argument("--backoff-factor", type=float, default=2.0, dest="backoff_factor")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--session-tag", default="", dest="session_tag")
    p.add_argument(
        "--parse-mode", choices=("strict", "lenient"), default="strict", dest="parse_mode"
    )
    p.add_argument(
        "--tag-policy",
        choices=("random_per_request", "fixed_appendix"),
        default="random_per_request",
        dest="tag_policy",
    )
    p.add_argument("--audit-log", required=True, dest="audit_log", help="audit JSONL path")
    p.add_argument("--runs", type=int, default=1, help="repeat count; >1 compares runs")
    p.add_argument("--threshold", type=float, default=0.95, help="stability threshold")
    p.add_argument(
        "--fail-on-any",
        action="store_true",
        dest="fail_on_any",
        help="exit 1 when any item fails instead of summarizing",
    )
    p.add_argument("--data", default=None, help="score CSV to add the results to")
    p.add_argument("--source", default=None, help="source id for the applied scores")
    p.add_argument("--out-data", default=None, dest="out_data", help="updated CSV path")
    _add_report_args(p)
    p.set_defaults(func=cmd_llm_score)

    p = sub.add_parser("ledger", help="validity-evidence ledger")
    ledger_sub = p.add_subparsers(dest="ledger_command", required=True, metavar="subcommand")

    p = ledger_sub.add_parser("init", help="create an all-missing ledger for a system kind")
    p.add_argument(
        "--kind",
        required=True,
        help=f"one of {[k.value for k in SystemKind]}",
    )
    p.add_argument("--path", required=True, help="ledger JSON path")
    p.set_defaults(func=cmd_ledger_init)

    p = ledger_sub.add_parser("set", help="set one evidence item's status")
    p.add_argument("--path", required=True, help="ledger JSON path")
    p.add_argument("--item", required=True, help="evidence item id")
    p.add_argument("--status", required=True, choices=STATUSES)
    p.add_argument("--notes", default="")
    p.add_argument(
        "--attach",
        action="append",
        default=None,
        help="report file backing the entry (repeatable)",
    )
    p.add_argument(
        "--attachment-root",
        default=None,
        dest="attachment_root",
        help="directory attachments are resolved against (default: ledger directory)",
    )
    p.set_defaults(func=cmd_ledger_set)

    p = ledger_sub.add_parser("gaps", help="list missing/partial evidence items")
    p.add_argument("--path", required=True, help="ledger JSON path")
    p.add_argument("--json", action="store_true", help="emit the gap list as JSON")
    p.add_argument(
        "--fail-on-gaps",
        action="store_true",
        dest="fail_on_gaps",
        help="exit 2 when any gap remains",
    )
    p.set_defaults(func=cmd_ledger_gaps)

    p = ledger_sub.add_parser("render", help="render the ledger as a Markdown table")
    p.add_argument("--path", required=True, help="ledger JSON path")
    p.add_argument("--out", default=None, help="write here instead of stdout")
    p.set_defaults(func=cmd_ledger_render)

    p = sub.add_parser("report", help="run a composed analysis set from a run config")
    p.add_argument("--config", required=True, help="run-config JSON path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _print_errors([("usage", str(exc))])
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    try:
        return args.func(args)
    except CrScoreError as exc:
        _print_errors([(type(exc).__name__, str(exc))])
        return EXIT_ERROR
    except OSError as exc:
        _print_errors([(type(exc).__name__, str(exc))])
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
