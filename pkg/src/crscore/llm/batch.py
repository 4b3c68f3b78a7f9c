"""Batch scoring driver: bounded parallelism, retries, audit logging, and
repeat-run consistency checks.

One batch item is one response to score. Items are independent: a failure is
recorded against its item and the batch always completes. Output order equals
input order no matter how completions interleave. Every item produces exactly
one audit-log line carrying the raw completion (or failure), so a five-item
batch yields a five-line JSONL file reviewers can read without the tool.

Only transient failures are retried (transport errors, timeouts, rate limits,
server statuses); an unparseable completion is a terminal result for the
item, since resending the same prompt at temperature 0 would mostly buy the
same bad completion again.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..errors import (
    BackendError,
    ConfigInvalidError,
    CrScoreError,
    DuplicateResponseIdError,
    InsufficientRunsError,
    ParseFailureError,
)
from ..reliability import ConsistencyReport, consistency_run_compare
from ..scoredata import Dataset, RatingSource, ScoreScale, SourceKind
from .backend import BackendConfig, ChatBackend, HttpChatBackend, is_retryable
from .completions import ParsedCompletion, parse_completion
from .prompts import DEFAULT_INJECTION_PATTERNS, build_prompt, detect_injection


@dataclass(frozen=True)
class BatchItem:
    """One response to score."""

    response_id: str
    question: str
    rubric: str
    answer: str


@dataclass(frozen=True)
class ItemResult:
    """Outcome for one batch item: a parsed completion or a typed failure.

    ``attempts`` counts backend calls made for the item; ``raw`` holds the
    last raw completion received, if any, even when parsing failed.
    """

    response_id: str
    completion: ParsedCompletion | None
    failure: CrScoreError | None
    attempts: int
    raw: str | None
    injection_flags: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.completion is not None

    def audit_dict(self) -> dict:
        out: dict = {
            "response_id": self.response_id,
            "ok": self.ok,
            "attempts": self.attempts,
            "injection_flags": list(self.injection_flags),
        }
        if self.raw is not None:
            out["raw_completion"] = self.raw
        if self.completion is not None:
            out["score"] = self.completion.score
            out["reasons"] = list(self.completion.reasons)
            if self.completion.warnings:
                out["warnings"] = list(self.completion.warnings)
        if self.failure is not None:
            out["error"] = type(self.failure).__name__
            out["error_detail"] = str(self.failure)
        return out


@dataclass(frozen=True)
class BatchResult:
    """All item results of one run, in input order, plus run-level context."""

    session_tag: str
    results: tuple[ItemResult, ...]
    model: str
    temperature: float
    temperature_justification: str | None

    @property
    def n_ok(self) -> int:
        return sum(1 for r in self.results if r.ok)

    @property
    def n_failed(self) -> int:
        return len(self.results) - self.n_ok

    def scores(self) -> dict[str, int]:
        """response_id -> score for the successful items."""
        return {r.response_id: r.completion.score for r in self.results if r.completion}

    def summary_dict(self) -> dict:
        out = {
            "session_tag": self.session_tag,
            "model": self.model,
            "temperature": self.temperature,
            "items": len(self.results),
            "ok": self.n_ok,
            "failed": self.n_failed,
        }
        if self.temperature_justification:
            out["temperature_justification"] = self.temperature_justification
        return out


def read_batch_jsonl(path: str | Path) -> list[BatchItem]:
    """Read batch items from JSONL, one object per line.

    Each object needs response_id, question, rubric, and answer, all
    non-empty strings; ids must be unique within the file.
    """
    items = []
    seen: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigInvalidError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
        try:
            item = BatchItem(
                response_id=str(raw["response_id"]),
                question=str(raw["question"]),
                rubric=str(raw["rubric"]),
                answer=str(raw["answer"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigInvalidError(
                f"{path}:{line_no}: missing field {exc} "
                "(need response_id, question, rubric, answer)"
            ) from exc
        if item.response_id in seen:
            raise DuplicateResponseIdError(
                f"{path}:{line_no}: duplicate response_id {item.response_id!r}"
            )
        seen.add(item.response_id)
        items.append(item)
    if not items:
        raise ConfigInvalidError(f"{path}: no batch items")
    return items


def _score_one(
    item: BatchItem,
    backend: ChatBackend,
    config: BackendConfig,
    scale: ScoreScale,
    parse_mode: str,
    tag_policy: str,
    injection_patterns: Sequence[str],
    sleep: Callable[[float], None],
) -> ItemResult:
    flags = detect_injection(item.answer, injection_patterns)
    bundle = build_prompt(item.question, item.rubric, item.answer, tag_policy=tag_policy)

    raw: str | None = None
    failure: CrScoreError | None = None
    attempts = 0
    for attempt in range(1, config.max_attempts + 1):
        attempts = attempt
        try:
            raw = backend.complete(bundle.rendered)
            failure = None
            break
        except BackendError as exc:
            exc.attempts = attempt
            failure = exc
            if not is_retryable(exc) or attempt == config.max_attempts:
                break
            sleep(config.backoff_delay(attempt))

    if failure is not None:
        return ItemResult(
            response_id=item.response_id,
            completion=None,
            failure=failure,
            attempts=attempts,
            raw=raw,
            injection_flags=flags,
        )

    assert raw is not None
    try:
        completion = parse_completion(raw, scale, mode=parse_mode, rubric_text=item.rubric)
    except CrScoreError as exc:
        parse_failure = ParseFailureError(f"{type(exc).__name__}: {exc}", attempts=attempts)
        return ItemResult(
            response_id=item.response_id,
            completion=None,
            failure=parse_failure,
            attempts=attempts,
            raw=raw,
            injection_flags=flags,
        )
    return ItemResult(
        response_id=item.response_id,
        completion=completion,
        failure=None,
        attempts=attempts,
        raw=raw,
        injection_flags=flags,
    )


def write_audit_log(path: str | Path, batch: BatchResult) -> None:
    """Persist one JSONL line per item, in input order."""
    lines = [json.dumps(r.audit_dict(), ensure_ascii=False) for r in batch.results]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def score_batch(
    items: Sequence[BatchItem],
    config: BackendConfig,
    scale: ScoreScale,
    session_tag: str = "",
    backend: ChatBackend | None = None,
    parse_mode: str = "strict",
    tag_policy: str = "random_per_request",
    injection_patterns: Sequence[str] = DEFAULT_INJECTION_PATTERNS,
    audit_path: str | Path | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> BatchResult:
    """Score every item once, with per-item retries, never aborting the batch.

    Returns one result per item in input order. When ``backend`` is omitted
    an HTTP backend is built from ``config``; any injected object with a
    ``complete`` method works in its place.
    """
    ids = [item.response_id for item in items]
    if len(set(ids)) != len(ids):
        raise DuplicateResponseIdError("batch response ids must be unique")
    if not items:
        raise ConfigInvalidError("batch contains no items")

    own_backend = backend is None
    if backend is None:
        backend = HttpChatBackend(config)
    try:
        with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
            futures = [
                pool.submit(
                    _score_one,
                    item,
                    backend,
                    config,
                    scale,
                    parse_mode,
                    tag_policy,
                    injection_patterns,
                    sleep,
                )
                for item in items
            ]
            results = tuple(f.result() for f in futures)
    finally:
        if own_backend:
            backend.close()  # type: ignore[union-attr]

    batch = BatchResult(
        session_tag=session_tag,
        results=results,
        model=config.model,
        temperature=config.temperature,
        temperature_justification=config.temperature_justification,
    )
    if audit_path is not None:
        write_audit_log(audit_path, batch)
    return batch


def apply_scores(
    dataset: Dataset,
    batch: BatchResult,
    source: RatingSource | str,
) -> Dataset:
    """Write a batch's successful scores into the dataset under the batch's
    session tag. Failed items are simply absent; the audit log has them."""
    if isinstance(source, str):
        source = RatingSource(id=source, kind=SourceKind.GENERATIVE_AI)
    return dataset.with_scores(source, batch.session_tag or None, batch.scores())


@dataclass(frozen=True)
class ConsistencyRunResult:
    """Outcome of scoring the same items several times.

    Runs where any item failed are excluded from the comparison and listed in
    ``excluded`` with their failure counts; the report covers the complete
    runs only.
    """

    report: ConsistencyReport
    batches: tuple[BatchResult, ...]
    excluded: dict[str, int]


def _per_run_audit_path(path: str | Path | None, tag: str) -> Path | None:
    if path is None:
        return None
    path = Path(path)
    return path.with_name(f"{path.stem}-{tag}{path.suffix}")


def consistency_run(
    items: Sequence[BatchItem],
    config: BackendConfig,
    scale: ScoreScale,
    k: int,
    threshold: float = 0.95,
    backend: ChatBackend | None = None,
    session_prefix: str = "run",
    audit_path: str | Path | None = None,
    **batch_kwargs,
) -> ConsistencyRunResult:
    """Score the items ``k`` times under identical configuration and compare
    the runs' scores.

    Run ``i`` is stored under session tag ``run-i``; when an audit path is
    given, each run writes its own log with the run tag inserted before the
    extension. A run with any failed item cannot be compared positionally and
    is excluded (reported with its failure count); at least two complete runs
    are required.
    """
    if k < 2:
        raise InsufficientRunsError(f"consistency needs k >= 2 runs, got {k}")
    batches = tuple(
        score_batch(
            items,
            config,
            scale,
            session_tag=f"{session_prefix}-{i + 1}",
            backend=backend,
            audit_path=_per_run_audit_path(audit_path, f"{session_prefix}-{i + 1}"),
            **batch_kwargs,
        )
        for i in range(k)
    )

    complete: list[tuple[str, list[int]]] = []
    excluded: dict[str, int] = {}
    for batch in batches:
        if batch.n_failed:
            excluded[batch.session_tag] = batch.n_failed
            continue
        complete.append(
            (batch.session_tag, [r.completion.score for r in batch.results])  # type: ignore[union-attr]
        )
    if len(complete) < 2:
        raise InsufficientRunsError(
            f"only {len(complete)} of {k} runs completed without failures; "
            "need at least 2 to compare"
        )
    report = consistency_run_compare(
        [scores for _, scores in complete],
        scale,
        threshold=threshold,
        labels=[label for label, _ in complete],
    )
    return ConsistencyRunResult(report=report, batches=batches, excluded=excluded)
