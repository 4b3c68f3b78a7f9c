from __future__ import annotations

import json

import pytest

from crscore import (
    ConfigInvalidError,
    NoJsonFoundError,
    ReasonsMalformedError,
    ScoreMissingError,
    ScoreOutOfScaleError,
)
from crscore.llm import extract_first_json_object, parse_completion
from helpers import SCALE_1_5, completion_json


def test_parses_clean_appendix_shape():
    parsed = parse_completion(completion_json(4), SCALE_1_5)
    assert parsed.score == 4
    assert parsed.reasons == ("clear thesis", "uneven evidence", "minor mechanics")
    assert parsed.warnings == ()
    assert parsed.raw == completion_json(4)


def test_round_trips_to_appendix_json():
    parsed = parse_completion(completion_json(3), SCALE_1_5)
    again = parse_completion(parsed.to_appendix_json(), SCALE_1_5)
    assert (again.score, again.reasons) == (parsed.score, parsed.reasons)
    payload = json.loads(parsed.to_appendix_json())
    assert payload == {
        "score": 3,
        "reasons": [
            {"reason": "clear thesis"},
            {"reason": "uneven evidence"},
            {"reason": "minor mechanics"},
        ],
    }


def test_extracts_payload_from_surrounding_prose():
    text = "Sure! Here is my evaluation:\n" + completion_json(2) + "\nHope that helps."
    assert parse_completion(text, SCALE_1_5).score == 2


def test_prose_braces_before_payload_are_skipped():
    text = "think {hard} about {this one... " + completion_json(5) + " done"
    assert extract_first_json_object(text)["score"] == 5


def test_first_json_object_wins():
    text = completion_json(1) + "\n" + completion_json(5)
    assert parse_completion(text, SCALE_1_5).score == 1


def test_braces_inside_string_literals_do_not_confuse_the_scan():
    payload = json.dumps(
        {
            "score": 4,
            "reasons": [
                {"reason": 'uses "{braces}" and \\" escapes'},
                {"reason": "balanced } anyway"},
                {"reason": "fine"},
            ],
        }
    )
    parsed = parse_completion(payload, SCALE_1_5)
    assert parsed.score == 4
    assert parsed.reasons[0] == 'uses "{braces}" and \\" escapes'


def test_no_json_at_all():
    with pytest.raises(NoJsonFoundError):
        parse_completion("I refuse to answer in JSON.", SCALE_1_5)
    with pytest.raises(NoJsonFoundError):
        parse_completion("unbalanced { opening only", SCALE_1_5)
    with pytest.raises(NoJsonFoundError):
        parse_completion("[1, 2, 3]", SCALE_1_5)  # array, not object


def test_score_bounds_use_atypical_floor():
    assert parse_completion(completion_json(0), SCALE_1_5).score == 0
    with pytest.raises(ScoreOutOfScaleError) as err:
        parse_completion(completion_json(6), SCALE_1_5)
    assert "outside [0, 5]" in str(err.value)
    with pytest.raises(ScoreOutOfScaleError):
        parse_completion(completion_json(-1), SCALE_1_5)


def test_missing_or_non_integer_score():
    with pytest.raises(ScoreMissingError):
        parse_completion('{"reasons": []}', SCALE_1_5)
    with pytest.raises(ScoreMissingError):
        parse_completion(completion_json(True), SCALE_1_5)
    with pytest.raises(ScoreMissingError):
        parse_completion(completion_json(3.5), SCALE_1_5, mode="lenient")
    with pytest.raises(ScoreMissingError):
        parse_completion(completion_json("four"), SCALE_1_5, mode="lenient")


def test_strict_rejects_coercible_scores_lenient_warns():
    with pytest.raises(ScoreMissingError):
        parse_completion(completion_json(4.0), SCALE_1_5)
    parsed = parse_completion(completion_json(4.0), SCALE_1_5, mode="lenient")
    assert parsed.score == 4
    assert parsed.warnings == ("score given as float 4.0, coerced to integer",)

    with pytest.raises(ScoreMissingError):
        parse_completion(completion_json("4"), SCALE_1_5)
    parsed = parse_completion(completion_json(" 4 "), SCALE_1_5, mode="lenient")
    assert parsed.score == 4
    assert parsed.warnings == ("score given as string ' 4 ', coerced to integer",)


def test_strict_requires_exactly_three_reasons():
    two = json.dumps({"score": 3, "reasons": [{"reason": "a"}, {"reason": "b"}]})
    with pytest.raises(ReasonsMalformedError) as err:
        parse_completion(two, SCALE_1_5)
    assert "expected 3 reasons, got 2" in str(err.value)

    four = completion_json(3, reasons=("a", "b", "c", "d"))
    with pytest.raises(ReasonsMalformedError):
        parse_completion(four, SCALE_1_5)

    lenient = parse_completion(two, SCALE_1_5, mode="lenient")
    assert lenient.score == 3
    assert lenient.reasons == ("a", "b")
    assert "expected 3 reasons, got 2" in lenient.warnings


def test_strict_rejects_empty_and_malformed_reasons():
    bad = json.dumps(
        {"score": 3, "reasons": [{"reason": "  "}, 17, {"reason": "ok"}]}
    )
    with pytest.raises(ReasonsMalformedError) as err:
        parse_completion(bad, SCALE_1_5)
    message = str(err.value)
    assert "reasons[0] is empty" in message
    assert "reasons[1] is not a reason object or string" in message

    missing = json.dumps({"score": 3})
    with pytest.raises(ReasonsMalformedError) as err:
        parse_completion(missing, SCALE_1_5)
    assert '"reasons" is missing or not an array' in str(err.value)


def test_bare_string_reasons_are_accepted():
    text = json.dumps({"score": 2, "reasons": ["one", "two", "three"]})
    parsed = parse_completion(text, SCALE_1_5)
    assert parsed.reasons == ("one", "two", "three")


def test_verbatim_rubric_reasons_rejected_when_rubric_given():
    rubric = "Award 5 when the response presents a clear, well-supported thesis."
    copied = completion_json(
        5, reasons=("a clear, well-supported thesis", "good flow", "few errors")
    )
    with pytest.raises(ReasonsMalformedError) as err:
        parse_completion(copied, SCALE_1_5, rubric_text=rubric)
    assert "reasons[0] is copied verbatim from the rubric" in str(err.value)
    # same completion passes without rubric context
    assert parse_completion(copied, SCALE_1_5).score == 5
    lenient = parse_completion(copied, SCALE_1_5, mode="lenient", rubric_text=rubric)
    assert lenient.score == 5
    assert any("copied verbatim" in w for w in lenient.warnings)


def test_invalid_score_fails_even_in_lenient_mode():
    with pytest.raises(ScoreOutOfScaleError):
        parse_completion(completion_json(9), SCALE_1_5, mode="lenient")


def test_unknown_mode_rejected():
    with pytest.raises(ConfigInvalidError):
        parse_completion(completion_json(3), SCALE_1_5, mode="charitable")
