"""Data model, ingestion, validation, and alignment of multi-source score data.

The model is deliberately flat: a :class:`Dataset` owns a score scale, a list
of rating sources, and one :class:`ResponseRecord` per test-taker response.
Every record may carry scores from several sources, and a source may score the
same response in several sessions (distinguished by ``session_tag``), which is
what repeat-scoring consistency checks and trend monitoring operate on.

Datasets and alignments are immutable after construction and safe to share
across analysis tasks. CSV is the interchange format; a JSON manifest carries
the scale and source declarations that a CSV cannot.

CSV schema
    required columns ``response_id,item_id``; optional ``program_id,text``;
    one score column per source and session, named ``score.<source_id>`` for
    untagged scores or ``score.<source_id>@<session_tag>`` for tagged ones;
    group columns named ``group.<facet>``. Empty cells are missing values.

Manifest schema
    ``{"scale": {"min": int, "max": int, "atypical_floor": int},
    "sources": [{"id": str, "kind": "human|feature_engine|generative_ai",
    "label": str}]}``
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigInvalidError,
    DuplicateResponseIdError,
    DuplicateScoreError,
    EmptyAlignmentError,
    InvalidScaleError,
    LengthMismatchError,
    ManifestError,
    MissingColumnError,
    NonIntegerScoreError,
    ScoreOutOfScaleError,
    UnexpectedColumnError,
    UnknownSourceError,
)

LATEST = "latest"

_REQUIRED_COLUMNS = ("response_id", "item_id")
_OPTIONAL_COLUMNS = ("program_id", "text")


class SourceKind(str, Enum):
    HUMAN = "human"
    FEATURE_ENGINE = "feature_engine"
    GENERATIVE_AI = "generative_ai"


@dataclass(frozen=True)
class ScoreScale:
    """Integer score range, including the floor for atypical responses.

    ``atypical_floor`` is the score assigned to off-topic or otherwise
    unscoreable responses (typically 0, below the reportable range).
    """

    min_reportable: int
    max_reportable: int
    atypical_floor: int = 0

    def __post_init__(self) -> None:
        if not (self.atypical_floor <= self.min_reportable <= self.max_reportable):
            raise InvalidScaleError(
                f"scale must satisfy atypical_floor <= min <= max, got "
                f"({self.atypical_floor}, {self.min_reportable}, {self.max_reportable})"
            )
        if self.max_reportable - self.atypical_floor < 1:
            raise InvalidScaleError("scale must span at least two score points")

    @property
    def levels(self) -> range:
        """All levels a stored score may take, floor through max."""
        return range(self.atypical_floor, self.max_reportable + 1)

    @property
    def n_levels(self) -> int:
        return self.max_reportable - self.atypical_floor + 1

    def contains(self, score: int) -> bool:
        return self.atypical_floor <= score <= self.max_reportable

    def check(self, score: int, context: str = "") -> int:
        if not self.contains(score):
            where = f" ({context})" if context else ""
            raise ScoreOutOfScaleError(
                f"score {score} outside [{self.atypical_floor}, {self.max_reportable}]{where}"
            )
        return score


@dataclass(frozen=True)
class RatingSource:
    id: str
    kind: SourceKind
    label: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("source id must be non-empty")


@dataclass(frozen=True)
class ScoreEntry:
    """One score from one source, optionally tagged with a scoring session."""

    value: int
    session_tag: str | None = None
    timestamp: datetime | None = None


@dataclass(frozen=True)
class ResponseRecord:
    """One test-taker response with its scores from any number of sources.

    ``scores`` maps source id to the entries from that source, at most one per
    session tag. Entries are kept in a canonical order (untagged first, then
    by tag) so datasets built from different column orders compare equal.
    """

    response_id: str
    item_id: str
    program_id: str | None = None
    text: str | None = None
    groups: Mapping[str, str] = field(default_factory=dict)
    scores: Mapping[str, tuple[ScoreEntry, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        canonical = {}
        for source_id, entries in self.scores.items():
            entries = tuple(sorted(entries, key=lambda e: (e.session_tag is not None, e.session_tag or "")))
            tags = [e.session_tag for e in entries]
            if len(tags) != len(set(tags)):
                raise DuplicateScoreError(
                    f"response {self.response_id!r}: multiple scores from {source_id!r} "
                    "share a session tag"
                )
            canonical[source_id] = entries
        object.__setattr__(self, "groups", dict(self.groups))
        object.__setattr__(self, "scores", canonical)

    def score_for(self, source_id: str, session: str | None = LATEST) -> int | None:
        """Score from ``source_id`` for the selected session, or None.

        ``session`` is a tag, ``None`` for the untagged entry, or
        :data:`LATEST` for the most recent entry (greatest timestamp, ties
        broken by position; untimestamped entries count as oldest).
        """
        entries = self.scores.get(source_id, ())
        if not entries:
            return None
        if session == LATEST:
            best = max(
                enumerate(entries),
                key=lambda pair: (pair[1].timestamp or datetime.min, pair[0]),
            )
            return best[1].value
        for entry in entries:
            if entry.session_tag == session:
                return entry.value
        return None


@dataclass(frozen=True)
class Manifest:
    scale: ScoreScale
    sources: tuple[RatingSource, ...]

    def __post_init__(self) -> None:
        ids = [s.id for s in self.sources]
        if len(ids) != len(set(ids)):
            raise ManifestError("source ids must be unique")

    def to_json_dict(self) -> dict:
        return {
            "scale": {
                "min": self.scale.min_reportable,
                "max": self.scale.max_reportable,
                "atypical_floor": self.scale.atypical_floor,
            },
            "sources": [
                {"id": s.id, "kind": s.kind.value, "label": s.label} for s in self.sources
            ],
        }


def load_manifest(path: str | Path) -> Manifest:
    """Read and validate a manifest JSON file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    return manifest_from_dict(raw)


def manifest_from_dict(raw: Mapping) -> Manifest:
    try:
        scale_raw = raw["scale"]
        scale = ScoreScale(
            min_reportable=int(scale_raw["min"]),
            max_reportable=int(scale_raw["max"]),
            atypical_floor=int(scale_raw.get("atypical_floor", 0)),
        )
        sources = tuple(
            RatingSource(id=str(s["id"]), kind=SourceKind(s["kind"]), label=str(s.get("label", "")))
            for s in raw["sources"]
        )
    except InvalidScaleError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc
    if not sources:
        raise ManifestError("manifest declares no sources")
    return Manifest(scale=scale, sources=sources)


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of scored responses under one scale."""

    scale: ScoreScale
    sources: tuple[RatingSource, ...]
    records: tuple[ResponseRecord, ...]

    def __post_init__(self) -> None:
        ids = [s.id for s in self.sources]
        if len(ids) != len(set(ids)):
            raise ManifestError("source ids must be unique")
        declared = set(ids)
        seen: set[str] = set()
        for record in self.records:
            if record.response_id in seen:
                raise DuplicateResponseIdError(f"duplicate response_id {record.response_id!r}")
            seen.add(record.response_id)
            for source_id, entries in record.scores.items():
                if source_id not in declared:
                    raise UnknownSourceError(
                        f"response {record.response_id!r} scored by undeclared source {source_id!r}"
                    )
                for entry in entries:
                    self.scale.check(entry.value, f"response {record.response_id!r}, source {source_id!r}")

    @property
    def n_records(self) -> int:
        return len(self.records)

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sources)

    def source(self, source_id: str) -> RatingSource:
        for s in self.sources:
            if s.id == source_id:
                return s
        raise UnknownSourceError(f"unknown source {source_id!r}")

    def facets(self) -> tuple[str, ...]:
        names: dict[str, None] = {}
        for record in self.records:
            for facet in record.groups:
                names.setdefault(facet, None)
        return tuple(names)

    def session_tags(self, source_id: str) -> tuple[str | None, ...]:
        """Session tags observed for a source, untagged first."""
        self.source(source_id)
        tags: dict[str | None, None] = {}
        for record in self.records:
            for entry in record.scores.get(source_id, ()):
                tags.setdefault(entry.session_tag, None)
        return tuple(sorted(tags, key=lambda t: (t is not None, t or "")))

    def with_scores(
        self,
        source: RatingSource | str,
        session_tag: str | None,
        scores: Mapping[str, int],
        timestamp: datetime | None = None,
    ) -> "Dataset":
        """Return a new dataset with one score per response id added.

        A :class:`RatingSource` not yet declared is appended to the source
        list; a bare id must already be declared. Adding a score to a
        (source, session) slot that already holds one is an error.
        """
        if isinstance(source, RatingSource):
            if source.id in self.source_ids:
                declared = self.source(source.id)
                if declared != source:
                    raise ManifestError(
                        f"source {source.id!r} already declared with different attributes"
                    )
                sources = self.sources
            else:
                sources = self.sources + (source,)
            source_id = source.id
        else:
            self.source(source)
            sources = self.sources
            source_id = source

        by_id = {r.response_id: r for r in self.records}
        unknown = sorted(set(scores) - set(by_id))
        if unknown:
            raise UnknownSourceError(f"scores reference unknown response ids: {unknown[:5]}")

        new_records = []
        for record in self.records:
            if record.response_id not in scores:
                new_records.append(record)
                continue
            entries = dict(record.scores)
            existing = entries.get(source_id, ())
            if any(e.session_tag == session_tag for e in existing):
                raise DuplicateScoreError(
                    f"response {record.response_id!r} already scored by {source_id!r} "
                    f"in session {session_tag!r}"
                )
            entry = ScoreEntry(
                value=int(scores[record.response_id]),
                session_tag=session_tag,
                timestamp=timestamp,
            )
            entries[source_id] = existing + (entry,)
            new_records.append(
                ResponseRecord(
                    response_id=record.response_id,
                    item_id=record.item_id,
                    program_id=record.program_id,
                    text=record.text,
                    groups=record.groups,
                    scores=entries,
                )
            )
        return Dataset(scale=self.scale, sources=sources, records=tuple(new_records))


@dataclass(frozen=True)
class AlignedScores:
    """Two or more same-length score vectors over a shared response set.

    Built by listwise retention: only records carrying a score for every
    requested source survive. ``columns`` preserves the requested source
    order; ``response_ids`` preserves record order.
    """

    scale: ScoreScale
    columns: tuple[tuple[str, tuple[int, ...]], ...]
    response_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise EmptyAlignmentError("alignment needs at least one source column")
        lengths = {len(values) for _, values in self.columns}
        lengths.add(len(self.response_ids))
        if len(lengths) != 1:
            raise LengthMismatchError(
                f"aligned columns have differing lengths: {sorted(lengths)}"
            )
        if self.n < 1:
            raise EmptyAlignmentError("alignment retained no records")
        for source_id, values in self.columns:
            for value in values:
                self.scale.check(value, f"source {source_id!r}")

    @property
    def n(self) -> int:
        return len(self.response_ids)

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(source_id for source_id, _ in self.columns)

    def column(self, source_id: str) -> np.ndarray:
        for sid, values in self.columns:
            if sid == source_id:
                return np.asarray(values, dtype=float)
        raise UnknownSourceError(f"source {source_id!r} not in alignment")

    def column_int(self, source_id: str) -> np.ndarray:
        return self.column(source_id).astype(int)

    def as_matrix(self) -> np.ndarray:
        """Columns stacked as a float matrix of shape (n, n_sources)."""
        return np.column_stack([np.asarray(v, dtype=float) for _, v in self.columns])

    def select(self, source_ids: Sequence[str]) -> "AlignedScores":
        """Reorder/subset columns without re-running retention."""
        return AlignedScores(
            scale=self.scale,
            columns=tuple((sid, self._values(sid)) for sid in source_ids),
            response_ids=self.response_ids,
        )

    def _values(self, source_id: str) -> tuple[int, ...]:
        for sid, values in self.columns:
            if sid == source_id:
                return values
        raise UnknownSourceError(f"source {source_id!r} not in alignment")

    @classmethod
    def from_columns(
        cls,
        scale: ScoreScale,
        columns: Sequence[tuple[str, Sequence[int]]],
        response_ids: Sequence[str] | None = None,
    ) -> "AlignedScores":
        """Build an alignment directly from vectors (used heavily in tests)."""
        cols = tuple((sid, tuple(int(v) for v in values)) for sid, values in columns)
        if response_ids is None:
            n = len(cols[0][1]) if cols else 0
            response_ids = tuple(f"r{i}" for i in range(n))
        return cls(scale=scale, columns=cols, response_ids=tuple(response_ids))


def _split_score_header(header: str) -> tuple[str, str | None]:
    body = header[len("score."):]
    if "@" in body:
        source_id, _, tag = body.partition("@")
        if not tag:
            raise UnexpectedColumnError(f"column {header!r} has an empty session tag")
    else:
        source_id, tag = body, None
    if not source_id:
        raise UnexpectedColumnError(f"column {header!r} names no source")
    return source_id, tag


def ingest_csv(path: str | Path, manifest: Manifest) -> Dataset:
    """Read a score CSV into a validated :class:`Dataset`.

    Errors name the offending file line and column so a failing ingest is
    actionable from the message alone.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(f"{path}: empty file, no header row") from None
        rows = list(reader)

    for required in _REQUIRED_COLUMNS:
        if required not in header:
            raise MissingColumnError(f"{path}: required column {required!r} absent")

    declared = {s.id for s in manifest.sources}
    score_cols: list[tuple[int, str, str, str | None]] = []  # (index, header, source, tag)
    group_cols: list[tuple[int, str]] = []  # (index, facet)
    plain_cols: dict[str, int] = {}
    for idx, name in enumerate(header):
        if name in _REQUIRED_COLUMNS or name in _OPTIONAL_COLUMNS:
            plain_cols[name] = idx
        elif name.startswith("score."):
            source_id, tag = _split_score_header(name)
            if source_id not in declared:
                raise UnknownSourceError(
                    f"{path}: column {name!r} references source {source_id!r} "
                    "not declared in the manifest"
                )
            score_cols.append((idx, name, source_id, tag))
        elif name.startswith("group."):
            facet = name[len("group."):]
            if not facet:
                raise UnexpectedColumnError(f"{path}: column {name!r} names no facet")
            group_cols.append((idx, facet))
        else:
            raise UnexpectedColumnError(
                f"{path}: column {name!r} does not match the schema "
                "(response_id, item_id, program_id, text, score.*, group.*)"
            )

    records = []
    for row_no, row in enumerate(rows, start=2):  # header is line 1
        if not any(cell.strip() for cell in row):
            continue

        def cell(idx: int) -> str:
            return row[idx].strip() if idx < len(row) else ""

        response_id = cell(plain_cols["response_id"])
        item_id = cell(plain_cols["item_id"])
        if not response_id:
            raise MissingColumnError(f"{path}:{row_no}: empty response_id")
        if not item_id:
            raise MissingColumnError(f"{path}:{row_no}: empty item_id")

        scores: dict[str, list[ScoreEntry]] = {}
        for idx, name, source_id, tag in score_cols:
            raw = cell(idx)
            if raw == "":
                continue
            try:
                value = int(raw)
            except ValueError:
                raise NonIntegerScoreError(
                    f"{path}:{row_no}: column {name!r}: {raw!r} is not an integer"
                ) from None
            if not manifest.scale.contains(value):
                raise ScoreOutOfScaleError(
                    f"{path}:{row_no}: column {name!r}: score {value} outside "
                    f"[{manifest.scale.atypical_floor}, {manifest.scale.max_reportable}]"
                )
            scores.setdefault(source_id, []).append(ScoreEntry(value=value, session_tag=tag))

        groups = {facet: cell(idx) for idx, facet in group_cols if cell(idx)}

        program_idx = plain_cols.get("program_id")
        text_idx = plain_cols.get("text")
        records.append(
            ResponseRecord(
                response_id=response_id,
                item_id=item_id,
                program_id=cell(program_idx) or None if program_idx is not None else None,
                text=cell(text_idx) or None if text_idx is not None else None,
                groups=groups,
                scores={sid: tuple(entries) for sid, entries in scores.items()},
            )
        )

    dataset = Dataset(scale=manifest.scale, sources=manifest.sources, records=tuple(records))
    if not dataset.records:
        raise MissingColumnError(f"{path}: no data rows")
    return dataset


def export_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back to the canonical CSV schema.

    Column order is deterministic: identifiers, text, score columns per
    declared source (untagged session first, then tags sorted), then group
    columns sorted by facet. Timestamps are not representable in CSV and are
    dropped.
    """
    has_program = any(r.program_id is not None for r in dataset.records)
    has_text = any(r.text is not None for r in dataset.records)

    score_headers: list[tuple[str, str | None]] = []
    for source in dataset.sources:
        for tag in dataset.session_tags(source.id):
            score_headers.append((source.id, tag))
    facets = sorted({f for r in dataset.records for f in r.groups})

    header = ["response_id", "item_id"]
    if has_program:
        header.append("program_id")
    if has_text:
        header.append("text")
    header += [
        f"score.{sid}" if tag is None else f"score.{sid}@{tag}" for sid, tag in score_headers
    ]
    header += [f"group.{facet}" for facet in facets]

    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for record in dataset.records:
            row = [record.response_id, record.item_id]
            if has_program:
                row.append(record.program_id or "")
            if has_text:
                row.append(record.text or "")
            for sid, tag in score_headers:
                value = record.score_for(sid, session=tag)
                row.append("" if value is None else str(value))
            for facet in facets:
                row.append(record.groups.get(facet, ""))
            writer.writerow(row)


def export_manifest(dataset: Dataset, path: str | Path) -> None:
    manifest = Manifest(scale=dataset.scale, sources=dataset.sources)
    Path(path).write_text(json.dumps(manifest.to_json_dict(), indent=2) + "\n", encoding="utf-8")


def align(
    dataset: Dataset,
    source_ids: Sequence[str],
    record_filter: Callable[[ResponseRecord], bool] | None = None,
    session: str | None | Mapping[str, str | None] = LATEST,
) -> AlignedScores:
    """Listwise-align the requested sources over the dataset's records.

    Retains exactly the records (passing ``record_filter``, if given) that
    carry a score for every requested source under the session selector;
    record order is preserved. ``session`` is a single selector for all
    sources or a per-source mapping; see :meth:`ResponseRecord.score_for`.
    """
    if not source_ids:
        raise UnknownSourceError("at least one source id is required")
    for source_id in source_ids:
        dataset.source(source_id)
    if len(set(source_ids)) != len(source_ids):
        raise UnknownSourceError(f"duplicate source ids in alignment request: {list(source_ids)}")

    def selector(source_id: str) -> str | None:
        if isinstance(session, Mapping):
            return session.get(source_id, LATEST)
        return session

    kept_ids: list[str] = []
    vectors: dict[str, list[int]] = {sid: [] for sid in source_ids}
    for record in dataset.records:
        if record_filter is not None and not record_filter(record):
            continue
        values = [record.score_for(sid, session=selector(sid)) for sid in source_ids]
        if any(v is None for v in values):
            continue
        kept_ids.append(record.response_id)
        for sid, value in zip(source_ids, values):
            vectors[sid].append(value)

    if not kept_ids:
        raise EmptyAlignmentError(
            f"no record carries scores for all of {list(source_ids)}"
        )
    return AlignedScores(
        scale=dataset.scale,
        columns=tuple((sid, tuple(vectors[sid])) for sid in source_ids),
        response_ids=tuple(kept_ids),
    )


def session_runs(
    dataset: Dataset, source_id: str, session_tags: Sequence[str]
) -> tuple[tuple[str, ...], list[tuple[int, ...]]]:
    """One score vector per session tag for a single source.

    Keeps exactly the records scored under every requested tag, in record
    order, so the vectors are positionally comparable run to run. Returns
    the retained response ids and one vector per tag, in tag order.
    """
    dataset.source(source_id)
    if not session_tags:
        raise EmptyAlignmentError("at least one session tag is required")
    if len(set(session_tags)) != len(session_tags):
        raise ConfigInvalidError(f"duplicate session tags: {list(session_tags)}")

    kept_ids: list[str] = []
    vectors: list[list[int]] = [[] for _ in session_tags]
    for record in dataset.records:
        values = [record.score_for(source_id, session=tag) for tag in session_tags]
        if any(v is None for v in values):
            continue
        kept_ids.append(record.response_id)
        for vector, value in zip(vectors, values):
            vector.append(value)
    if not kept_ids:
        raise EmptyAlignmentError(
            f"no record carries {source_id!r} scores under all of {list(session_tags)}"
        )
    return tuple(kept_ids), [tuple(v) for v in vectors]


@dataclass(frozen=True)
class ConditionalSummaryRow:
    """Distribution of the target score at one level of the conditioning score."""

    level: int
    count: int
    q1: float
    median: float
    q3: float


@dataclass(frozen=True)
class ConditionalDistribution:
    condition_source: str
    target_source: str
    rows: tuple[ConditionalSummaryRow, ...]

    def to_json_dict(self) -> dict:
        return {
            "condition_source": self.condition_source,
            "target_source": self.target_source,
            "rows": [
                {"level": r.level, "count": r.count, "q1": r.q1, "median": r.median, "q3": r.q3}
                for r in self.rows
            ],
        }


def _median(values: Sequence[int]) -> float:
    # Even counts take the mean of the central two.
    return float(statistics.median(values))


def _quartiles(values: Sequence[int]) -> tuple[float, float]:
    """Quartiles as medians of the lower/upper halves, halves excluding the
    overall median when the count is odd (Moore-McCabe rule). A single value
    is its own quartile."""
    ordered = sorted(values)
    n = len(ordered)
    if n == 1:
        return float(ordered[0]), float(ordered[0])
    half = n // 2
    lower = ordered[:half]
    upper = ordered[half + 1:] if n % 2 else ordered[half:]
    return _median(lower), _median(upper)


def conditional_distribution(
    aligned: AlignedScores, condition_source: str, target_source: str
) -> ConditionalDistribution:
    """Per-level summary of the target score conditional on the other score.

    One row per observed condition level, ascending.
    """
    condition = aligned.column_int(condition_source)
    target = aligned.column_int(target_source)
    rows = []
    for level in sorted(set(condition.tolist())):
        values = target[condition == level].tolist()
        q1, q3 = _quartiles(values)
        rows.append(
            ConditionalSummaryRow(
                level=int(level), count=len(values), q1=q1, median=_median(values), q3=q3
            )
        )
    return ConditionalDistribution(
        condition_source=condition_source, target_source=target_source, rows=tuple(rows)
    )
