"""Report emission: JSON and Markdown documents with a configuration header.

Every report echoes the resolved configuration that produced it, so a file
on disk is self-describing. Output is deterministic for a fixed input and
configuration; the only run-varying content is the generation timestamp,
confined to a single header field (JSON) or header line (Markdown).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import ConfigInvalidError

FORMATS = ("json", "markdown")

_EXTENSIONS = {"json": ".json", "markdown": ".md"}


def utc_now() -> str:
    """Current UTC time as an ISO 8601 string, second precision."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class ReportDocument:
    """One analysis result ready for emission in either format.

    ``name`` is the output file stem; ``body`` and ``body_markdown`` carry
    the same content in the two formats.
    """

    name: str
    title: str
    config: Mapping[str, object]
    body: Mapping[str, object]
    body_markdown: str

    def render_json(self, now: Callable[[], str] = utc_now) -> str:
        payload = {
            "report": self.name,
            "generated_at": now(),
            "config": dict(self.config),
            "body": self.body,
        }
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def render_markdown(self, now: Callable[[], str] = utc_now) -> str:
        config = json.dumps(dict(self.config), sort_keys=True, ensure_ascii=False)
        return (
            f"# {self.title}\n"
            f"\n"
            f"Generated at {now()}.\n"
            f"\n"
            f"Configuration: `{config}`\n"
            f"\n"
            f"{self.body_markdown.rstrip()}\n"
        )


def check_formats(formats: Sequence[str]) -> tuple[str, ...]:
    """Validate a format selection, preserving order."""
    formats = tuple(formats)
    if not formats:
        raise ConfigInvalidError("at least one output format is required")
    for fmt in formats:
        if fmt not in FORMATS:
            raise ConfigInvalidError(
                f"unknown report format {fmt!r}, expected a subset of {list(FORMATS)}"
            )
    return formats


def write_report(
    doc: ReportDocument,
    out_dir: str | Path,
    formats: Sequence[str] = FORMATS,
    now: Callable[[], str] = utc_now,
) -> list[Path]:
    """Write the document once per requested format; returns the paths."""
    formats = check_formats(formats)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out_dir / f"{doc.name}{_EXTENSIONS[fmt]}"
        text = doc.render_json(now) if fmt == "json" else doc.render_markdown(now)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
