"""Validity-evidence ledger: a machine-readable checklist of the evidence a
scoring system's use should rest on, with status tracking and gap reporting.

The catalog of evidence items is data, not code: a versioned JSON manifest
packaged with the library maps each item to the evidence type it belongs to
and the scoring-system kinds it applies to. A ledger instantiates the catalog
for one system kind and tracks, per item, whether the evidence is provided,
partial, missing, or not applicable. Attachments are references to report
artifacts produced elsewhere (file paths), never embedded blobs, so a ledger
stays a small reviewable JSON document. Markdown output is a pure render of
the ledger.

For a few catalog items one analysis documents more than one decision row of
the underlying evidence grid (the catalog manifest records this mapping), so
the grid's row count exceeds the item count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    ConfigInvalidError,
    MissingAttachmentError,
    NoteRequiredError,
    UnknownItemError,
)


class SystemKind(str, Enum):
    HUMAN = "Human"
    CONSTRUCT_FEATURE_AI = "ConstructFeatureAI"
    GENERAL_LINGUISTIC_AI = "GeneralLinguisticOrEmbeddingAI"
    GENERATIVE_AI = "GenerativeAI"


class EvidenceType(str, Enum):
    INTERNAL_STRUCTURE = "InternalStructure"
    EXTERNAL_RELATIONS = "RelationsToExternalVariables"
    RESPONSE_PROCESSES = "ResponseProcesses"
    TEST_CONTENT = "TestContent"
    CONSEQUENCES_OF_USE = "ConsequencesOfUse"
    FAIRNESS = "Fairness"


STATUSES = ("provided", "partial", "missing", "not_applicable")
GAP_STATUSES = ("missing", "partial")

_TYPE_HEADINGS = {
    EvidenceType.INTERNAL_STRUCTURE: "Internal Structure",
    EvidenceType.EXTERNAL_RELATIONS: "Relations to External Variables",
    EvidenceType.RESPONSE_PROCESSES: "Response Processes",
    EvidenceType.TEST_CONTENT: "Test Content",
    EvidenceType.CONSEQUENCES_OF_USE: "Consequences of Use",
    EvidenceType.FAIRNESS: "Fairness",
}


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    evidence_type: EvidenceType
    title: str
    description: str
    applicable_kinds: frozenset[SystemKind]


@dataclass(frozen=True)
class Catalog:
    version: int
    items: tuple[EvidenceItem, ...]
    documentation_rows: Mapping[str, tuple[dict, ...]]

    def __post_init__(self) -> None:
        ids = [item.id for item in self.items]
        if len(ids) != len(set(ids)):
            raise ConfigInvalidError("catalog item ids must be unique")

    def item(self, item_id: str) -> EvidenceItem:
        for item in self.items:
            if item.id == item_id:
                return item
        raise UnknownItemError(f"no catalog item {item_id!r}")

    def for_kind(self, kind: SystemKind) -> tuple[EvidenceItem, ...]:
        return tuple(i for i in self.items if kind in i.applicable_kinds)


def _parse_catalog(raw: dict) -> Catalog:
    items = tuple(
        EvidenceItem(
            id=entry["id"],
            evidence_type=EvidenceType(entry["evidence_type"]),
            title=entry["title"],
            description=entry["description"],
            applicable_kinds=frozenset(SystemKind(k) for k in entry["applicable_kinds"]),
        )
        for entry in raw["items"]
    )
    rows = {
        kind: tuple(dict(row) for row in row_list)
        for kind, row_list in raw.get("documentation_rows", {}).items()
    }
    return Catalog(version=int(raw["version"]), items=items, documentation_rows=rows)


def builtin_catalog() -> Catalog:
    """The packaged evidence catalog."""
    text = resources.files("crscore").joinpath("catalog.json").read_text(encoding="utf-8")
    return _parse_catalog(json.loads(text))


def required_items(kind: SystemKind, catalog: Catalog | None = None) -> list[EvidenceItem]:
    """Catalog items applicable to the kind, in catalog order."""
    catalog = catalog or builtin_catalog()
    return list(catalog.for_kind(kind))


@dataclass(frozen=True)
class LedgerEntry:
    item_id: str
    status: str = "missing"
    notes: str = ""
    attachments: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ConfigInvalidError(
                f"status must be one of {STATUSES}, got {self.status!r}"
            )
        if self.status == "not_applicable" and not self.notes.strip():
            raise NoteRequiredError(
                f"item {self.item_id!r}: not_applicable requires an explanatory note"
            )
        object.__setattr__(self, "attachments", tuple(self.attachments))

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "notes": self.notes,
            "attachments": list(self.attachments),
        }


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class EvidenceLedger:
    """Evidence statuses for one scoring system, one entry per catalog item
    applicable to its kind."""

    kind: SystemKind
    catalog_version: int
    entries: Mapping[str, LedgerEntry]
    created: str
    updated: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))

    def entry(self, item_id: str) -> LedgerEntry:
        if item_id not in self.entries:
            raise UnknownItemError(
                f"item {item_id!r} is not applicable to kind {self.kind.value}"
            )
        return self.entries[item_id]


def new_ledger(
    kind: SystemKind,
    catalog: Catalog | None = None,
    now: Callable[[], str] = _utc_now,
) -> EvidenceLedger:
    """A fresh ledger with every applicable item marked missing."""
    catalog = catalog or builtin_catalog()
    stamp = now()
    return EvidenceLedger(
        kind=kind,
        catalog_version=catalog.version,
        entries={item.id: LedgerEntry(item_id=item.id) for item in catalog.for_kind(kind)},
        created=stamp,
        updated=stamp,
    )


def set_entry(
    ledger: EvidenceLedger,
    item_id: str,
    status: str,
    notes: str = "",
    attachments: Sequence[str] = (),
    attachment_root: str | Path | None = None,
    now: Callable[[], str] = _utc_now,
) -> EvidenceLedger:
    """Replace one entry, returning the updated ledger.

    Attachment references on provided/partial entries must point at existing
    files (resolved against ``attachment_root`` when given). Setting an entry
    to the value it already has is a no-op that leaves the ledger unchanged,
    so repeated identical updates are idempotent.
    """
    if item_id not in ledger.entries:
        raise UnknownItemError(
            f"item {item_id!r} is not applicable to kind {ledger.kind.value}"
        )
    entry = LedgerEntry(
        item_id=item_id,
        status=status,
        notes=notes,
        attachments=tuple(attachments),
    )
    if entry.status in ("provided", "partial"):
        root = Path(attachment_root) if attachment_root is not None else Path(".")
        for ref in entry.attachments:
            path = Path(ref)
            if not path.is_absolute():
                path = root / path
            if not path.exists():
                raise MissingAttachmentError(
                    f"item {item_id!r}: attachment {ref!r} does not exist"
                )
    if ledger.entries[item_id] == entry:
        return ledger
    entries = dict(ledger.entries)
    entries[item_id] = entry
    return replace(ledger, entries=entries, updated=now())


def gap_report(
    ledger: EvidenceLedger, catalog: Catalog | None = None
) -> list[tuple[EvidenceItem, str]]:
    """Items still lacking evidence (missing or partial), with their status.

    Ordered by evidence type (catalog enumeration order), then catalog order
    within a type; empty only when everything is provided or not applicable.
    """
    catalog = catalog or builtin_catalog()
    type_order = {t: i for i, t in enumerate(EvidenceType)}
    rows = [
        (item, ledger.entries[item.id].status)
        for item in catalog.for_kind(ledger.kind)
        if ledger.entries[item.id].status in GAP_STATUSES
    ]
    rows.sort(key=lambda pair: type_order[pair[0].evidence_type])
    return rows


def _escape_cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def render_markdown(ledger: EvidenceLedger, catalog: Catalog | None = None) -> str:
    """Three-column Markdown table of the ledger, grouped by evidence type.

    The type cell is shown on a group's first row only, mirroring the grid
    layout this checklist descends from. Pure function of the ledger's
    entries (timestamps excluded), so output is byte-stable.
    """
    catalog = catalog or builtin_catalog()
    lines = [
        f"# Validity evidence ledger: {ledger.kind.value}",
        "",
        f"Catalog version {ledger.catalog_version}.",
        "",
        "| Type of Evidence | Decision or Analysis to Document | Evidence |",
        "|---|---|---|",
    ]
    last_type: EvidenceType | None = None
    for item in catalog.for_kind(ledger.kind):
        entry = ledger.entries[item.id]
        type_cell = "" if item.evidence_type == last_type else _TYPE_HEADINGS[item.evidence_type]
        last_type = item.evidence_type
        evidence_cell = entry.status
        if entry.notes:
            evidence_cell += f": {entry.notes}"
        if entry.attachments:
            evidence_cell += " [" + ", ".join(entry.attachments) + "]"
        lines.append(
            f"| {_escape_cell(type_cell)} | {_escape_cell(item.title)} "
            f"| {_escape_cell(evidence_cell)} |"
        )
    return "\n".join(lines) + "\n"


def save_ledger(ledger: EvidenceLedger, path: str | Path) -> None:
    payload = {
        "kind": ledger.kind.value,
        "catalog_version": ledger.catalog_version,
        "created": ledger.created,
        "updated": ledger.updated,
        "entries": {
            item_id: entry.to_json_dict() for item_id, entry in sorted(ledger.entries.items())
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_ledger(path: str | Path, catalog: Catalog | None = None) -> EvidenceLedger:
    """Read a ledger document, checking it still matches the catalog."""
    catalog = catalog or builtin_catalog()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        kind = SystemKind(raw["kind"])
        entries = {
            item_id: LedgerEntry(
                item_id=item_id,
                status=body["status"],
                notes=body.get("notes", ""),
                attachments=tuple(body.get("attachments", ())),
            )
            for item_id, body in raw["entries"].items()
        }
        ledger = EvidenceLedger(
            kind=kind,
            catalog_version=int(raw["catalog_version"]),
            entries=entries,
            created=str(raw["created"]),
            updated=str(raw["updated"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalidError(f"cannot read ledger {path}: {exc}") from exc

    expected = {item.id for item in catalog.for_kind(ledger.kind)}
    actual = set(ledger.entries)
    if actual != expected:
        orphans = sorted(actual - expected)
        absent = sorted(expected - actual)
        problems = []
        if orphans:
            problems.append(f"orphan entries {orphans[:5]}")
        if absent:
            problems.append(f"entries absent for {absent[:5]}")
        raise ConfigInvalidError(
            f"ledger does not cover the catalog for {ledger.kind.value}: "
            + "; ".join(problems)
        )
    return ledger
