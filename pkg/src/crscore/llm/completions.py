"""Parsing and validation of {score, reasons} completions.

A completion is free text that should contain one JSON object holding an
integer score and an array of three reason objects. The parser extracts the
first top-level JSON object by balanced-brace scan (string literals and
escapes respected), so leading or trailing prose never breaks extraction.

Strict mode enforces the full contract: integer score in range, exactly three
non-empty reasons, none copied verbatim out of the rubric. Lenient mode
salvages the score, the payload of record, whenever it is valid, and
downgrades reasons problems to warnings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..errors import (
    ConfigInvalidError,
    NoJsonFoundError,
    ReasonsMalformedError,
    ScoreMissingError,
    ScoreOutOfScaleError,
)
from ..scoredata import ScoreScale

PARSE_MODES = ("strict", "lenient")
REQUIRED_REASONS = 3


@dataclass(frozen=True)
class ParsedCompletion:
    """Validated completion: the score, its reasons, and what was tolerated."""

    score: int
    reasons: tuple[str, ...]
    raw: str
    warnings: tuple[str, ...] = ()

    def to_appendix_json(self) -> str:
        """Serialize back to the JSON shape the prompt asks for."""
        return json.dumps(
            {"score": self.score, "reasons": [{"reason": r} for r in self.reasons]},
            indent=2,
        )


def _balanced_candidates(text: str):
    """Balanced ``{...}`` chunks in order of opening position.

    Brace counting skips braces inside string literals, honoring backslash
    escapes.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for pos in range(start, len(text)):
            ch = text[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : pos + 1]
                    break
        start = text.find("{", start + 1)


def extract_first_json_object(text: str) -> dict:
    """The first balanced ``{...}`` in the text that parses as a JSON object.

    Balanced chunks that are not valid JSON are skipped, so prose braces
    before the payload never break extraction.
    """
    for candidate in _balanced_candidates(text):
        try:
            payload = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(payload, dict):
            return payload
    raise NoJsonFoundError("no parseable JSON object found in completion")


def _coerce_score(value, warnings: list[str], strict: bool) -> int:
    if isinstance(value, bool):
        raise ScoreMissingError("score is a boolean, not an integer")
    if isinstance(value, int):
        return value
    if not strict:
        if isinstance(value, float) and value.is_integer():
            warnings.append(f"score given as float {value!r}, coerced to integer")
            return int(value)
        if isinstance(value, str):
            try:
                coerced = int(value.strip())
            except ValueError:
                raise ScoreMissingError(f"score {value!r} is not an integer") from None
            warnings.append(f"score given as string {value!r}, coerced to integer")
            return coerced
    raise ScoreMissingError(f"score {value!r} is not an integer")


def _reason_text(entry) -> str | None:
    if isinstance(entry, str):
        return entry
    if isinstance(entry, dict) and isinstance(entry.get("reason"), str):
        return entry["reason"]
    return None


def parse_completion(
    text: str,
    scale: ScoreScale,
    mode: str = "strict",
    rubric_text: str | None = None,
) -> ParsedCompletion:
    """Extract and validate the completion's score and reasons.

    An invalid score fails in both modes; it is the value of record. Reasons
    violations (wrong count, empty, malformed entries, verbatim rubric copies
    when ``rubric_text`` is supplied) fail only in strict mode and are
    reported as warnings in lenient mode.
    """
    if mode not in PARSE_MODES:
        raise ConfigInvalidError(f"unknown parse mode {mode!r}, expected one of {PARSE_MODES}")
    strict = mode == "strict"

    payload = extract_first_json_object(text)
    if "score" not in payload:
        raise ScoreMissingError('completion JSON has no "score" key')

    warnings: list[str] = []
    score = _coerce_score(payload["score"], warnings, strict)
    if not scale.contains(score):
        raise ScoreOutOfScaleError(
            f"score {score} outside [{scale.atypical_floor}, {scale.max_reportable}]"
        )

    reasons: list[str] = []
    problems: list[str] = []
    raw_reasons = payload.get("reasons")
    if not isinstance(raw_reasons, list):
        problems.append('"reasons" is missing or not an array')
        raw_reasons = []
    for i, entry in enumerate(raw_reasons):
        reason = _reason_text(entry)
        if reason is None:
            problems.append(f"reasons[{i}] is not a reason object or string")
        elif not reason.strip():
            problems.append(f"reasons[{i}] is empty")
        else:
            if rubric_text is not None and reason.strip() in rubric_text:
                problems.append(f"reasons[{i}] is copied verbatim from the rubric")
            reasons.append(reason)
    if len(raw_reasons) != REQUIRED_REASONS:
        problems.append(f"expected {REQUIRED_REASONS} reasons, got {len(raw_reasons)}")

    if problems:
        if strict:
            raise ReasonsMalformedError("; ".join(problems))
        warnings.extend(problems)

    return ParsedCompletion(
        score=score,
        reasons=tuple(reasons),
        raw=text,
        warnings=tuple(warnings),
    )
