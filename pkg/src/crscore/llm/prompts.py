"""Scoring prompt construction with tagged sections.

The prompt is a fixed instruction preamble followed by the question, rubric,
and answer, each wrapped in XML-style tags whose names are opaque hex
strings. Opaque tags make it hard for a response to fake a section boundary;
the default policy draws fresh tag names per request and re-draws on the
(unlikely) event that a tag string already occurs in one of the texts, so the
wrapped sections can always be recovered unambiguously.

A small pattern scan over the answer text flags likely instruction-injection
attempts ("disregard all previous instructions...") for the audit log. The
scan is a structural guard, not a robustness guarantee.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass
from typing import Sequence

from ..errors import ConfigInvalidError, EmptySectionError

TAG_POLICIES = ("fixed_appendix", "random_per_request")

# Tag names for the fixed policy; golden-tested, do not edit.
FIXED_TAGS = (
    "D5A60FF8F3AF47619BC1CE00CA21D938",
    "27152C7AC19445FA87D5FC4A7313FF68",
    "CACE4B6E785148BDAD20A93818F662B8",
)

OFF_TOPIC_RULE = (
    "The rubric notwithstanding, if the answer is off topic or wholly "
    "insufficient, give it a score of 0."
)

JSON_FORMAT_BLOCK = (
    "```\n"
    "{\n"
    "  score,\n"
    '  "reasons": [\n'
    "    {\n"
    "      reason\n"
    "    }\n"
    "  ]\n"
    "}\n"
    "```"
)


DEFAULT_INJECTION_PATTERNS = (
    r"(?:disregard|ignore|forget)\s+(?:all\s+|any\s+)?(?:previous|prior|above|earlier)\s+instructions",
    r"give\s+(?:me\s+|it\s+|this\s+)?(?:the\s+)?(?:highest|best|maximum|top|full)\s+(?:possible\s+)?score",
    r"you\s+(?:must|should|will)\s+(?:award|give|assign)\b",
    r"score\s+(?:this|it|me)\s+(?:a\s+)?\d",
    r"as\s+the\s+(?:grader|scorer|evaluator),?\s+you\b",
)


@dataclass(frozen=True)
class PromptBundle:
    """One rendered scoring prompt plus the pieces needed to audit it."""

    question_text: str
    rubric_text: str
    answer_text: str
    tag_names: tuple[str, str, str]
    rendered: str


def preamble_text(tags: Sequence[str] = FIXED_TAGS) -> str:
    """The instruction preamble for a tag triple (question, rubric, answer).

    Golden-tested byte-for-byte under the fixed tags; do not edit wording.
    """
    q, r, a = tags
    return (
        "A student is assigned a question or a task. Use the provided rubric "
        "to evaluate and score the response to the assigned question or task.\n"
        "\n"
        "The question or task, rubric, and answer will each be surrounded "
        f"with XML-style tags below. The tags will be `<{q}></{q}>`, "
        f"`<{r}></{r}>`, and `<{a}></{a}>`, respectively. Regardless of "
        "formatting the input below with XML tags, the response should be in "
        "the JSON format specified below.\n"
        "\n"
        + OFF_TOPIC_RULE + "\n"
        "\n"
        "Give the response in JSON format of:\n"
        "\n"
        + JSON_FORMAT_BLOCK + "\n"
        "\n"
        "The reasons should be an array of 3 objects. Each object should be "
        "in the structure shown above and described below. For each object "
        "in the reasons array, a reason must be provided. This reason should "
        "be one of the reasons for giving the score. The reason should not "
        "be a full sentence, and be suitable to be displayed as bullet "
        "points to a person with a college-level education, rather than "
        "copied directly from the rubric.\n"
        "\n"
        "If a high school English teacher would look at the answer and get "
        "frustrated, score it a 0.\n"
    )


def _random_tag() -> str:
    return uuid.uuid4().hex.upper()


def _draw_tags(texts: Sequence[str]) -> tuple[str, str, str]:
    tags = []
    for _ in range(3):
        tag = _random_tag()
        while any(tag in text for text in texts) or tag in tags:
            tag = _random_tag()
        tags.append(tag)
    return tuple(tags)  # type: ignore[return-value]


def build_prompt(
    question: str, rubric: str, answer: str, tag_policy: str = "random_per_request"
) -> PromptBundle:
    """Render the full scoring prompt for one response.

    The preamble is followed by the three tagged sections in announcement
    order (question, rubric, answer). ``fixed_appendix`` uses the fixed tag
    names and is a pure function of its texts; the random policy draws tag
    names that collide with nothing in the texts.
    """
    if tag_policy not in TAG_POLICIES:
        raise ConfigInvalidError(
            f"unknown tag policy {tag_policy!r}, expected one of {TAG_POLICIES}"
        )
    for name, text in (("question", question), ("rubric", rubric), ("answer", answer)):
        if not text or not text.strip():
            raise EmptySectionError(f"{name} text is empty")

    if tag_policy == "fixed_appendix":
        tags = FIXED_TAGS
    else:
        tags = _draw_tags((question, rubric, answer))

    sections = "\n\n".join(
        f"<{tag}>\n{text}\n</{tag}>"
        for tag, text in zip(tags, (question, rubric, answer))
    )
    rendered = preamble_text(tags) + "\n" + sections + "\n"
    return PromptBundle(
        question_text=question,
        rubric_text=rubric,
        answer_text=answer,
        tag_names=tuple(tags),  # type: ignore[arg-type]
        rendered=rendered,
    )


def detect_injection(
    answer: str, patterns: Sequence[str] = DEFAULT_INJECTION_PATTERNS
) -> tuple[str, ...]:
    """Patterns from the configured list that the answer text matches.

    Case-insensitive regex search; an empty result means no pattern fired,
    not that the answer is safe.
    """
    return tuple(p for p in patterns if re.search(p, answer, flags=re.IGNORECASE))
