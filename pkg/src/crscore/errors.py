"""Exception types shared across the toolkit.

Every error raised by crscore derives from :class:`CrScoreError` so callers can
catch toolkit failures with one handler. Statistics that are mathematically
undefined on the given data (zero variance, degenerate marginals, ...) raise
subclasses of :class:`UndefinedStatisticError`; report builders catch these and
record the ``status`` string instead of a number, so serialized reports never
contain NaN.
"""

from __future__ import annotations


class CrScoreError(Exception):
    """Base class for all toolkit errors."""


# --- data model / ingestion ---------------------------------------------

class InvalidScaleError(CrScoreError):
    """Score scale bounds violate their ordering constraints."""


class ManifestError(CrScoreError):
    """Dataset manifest is malformed or inconsistent."""


class MissingColumnError(CrScoreError):
    """A required CSV column is absent."""


class UnexpectedColumnError(CrScoreError):
    """A CSV column does not match the dataset schema."""


class ScoreOutOfScaleError(CrScoreError):
    """A score lies outside [atypical_floor, max_reportable]."""


class NonIntegerScoreError(CrScoreError):
    """A score cell is not an integer literal."""


class DuplicateResponseIdError(CrScoreError):
    """Two rows carry the same response_id."""


class DuplicateScoreError(CrScoreError):
    """A (source, session_tag) pair already holds a score for a response."""


class UnknownSourceError(CrScoreError):
    """A source id is not declared in the dataset."""


class EmptyAlignmentError(CrScoreError):
    """No record carries a score for every requested source."""


# --- statistics ----------------------------------------------------------

class InsufficientDataError(CrScoreError):
    """Fewer observations than the statistic requires."""


class ArityMismatchError(CrScoreError):
    """An operation got a different number of score columns than it expects."""


class UndefinedStatisticError(CrScoreError):
    """A statistic is undefined on the given data.

    ``status`` is a stable machine-readable tag recorded in reports in place
    of a numeric value.
    """

    status = "undefined"


class ZeroVarianceError(UndefinedStatisticError):
    status = "zero_variance"


class DegenerateMarginalsError(UndefinedStatisticError):
    status = "degenerate_marginals"


class ZeroTrueScoreVarianceError(UndefinedStatisticError):
    status = "zero_true_score_variance"


class PerfectCollinearityError(UndefinedStatisticError):
    status = "perfect_collinearity"


# --- reliability / trend -------------------------------------------------

class InsufficientDoublesError(CrScoreError):
    """Too few double-scored responses to estimate rater error."""


class LengthMismatchError(CrScoreError):
    """Score vectors that must be aligned have different lengths."""


class MixedRatingDesignError(CrScoreError):
    """Ratings-per-response is not uniform across responses."""


class TrendSetMismatchError(CrScoreError):
    """Baseline and current sessions do not cover the same response ids."""


class InsufficientRunsError(CrScoreError):
    """Fewer than two usable scoring runs for a consistency comparison."""


# --- composites ----------------------------------------------------------

class UnknownComponentError(CrScoreError):
    """A composite references a source id missing from the aligned columns."""


class SingularDesignError(CrScoreError):
    """The component Gram matrix is singular; least squares has no solution."""


# --- fairness ------------------------------------------------------------

class UnknownFacetError(CrScoreError):
    """No record carries the requested group facet."""


class TooFewGroupsError(CrScoreError):
    """Empirical-Bayes shrinkage needs at least two groups."""


# --- LLM harness ---------------------------------------------------------

class EmptySectionError(CrScoreError):
    """A prompt section (question, rubric, answer) is empty."""


class ConfigInvalidError(CrScoreError):
    """Backend configuration violates its constraints."""


class NoJsonFoundError(CrScoreError):
    """The completion text contains no JSON object."""


class ScoreMissingError(CrScoreError):
    """The completion JSON has no usable score field."""


class ReasonsMalformedError(CrScoreError):
    """The reasons block violates the strict-mode shape rules."""


class BackendError(CrScoreError):
    """Base class for per-item backend failures."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class BackendTimeoutError(BackendError):
    """The backend did not answer within the configured timeout."""


class BackendHttpError(BackendError):
    """The backend answered with a non-success HTTP status."""

    def __init__(self, message: str, status_code: int, attempts: int = 1):
        super().__init__(message, attempts)
        self.status_code = status_code


class ParseFailureError(BackendError):
    """A completion was received but could not be parsed/validated."""


# --- evidence ledger ------------------------------------------------------

class UnknownItemError(CrScoreError):
    """An evidence item id is not in the catalog for the ledger's kind."""


class NoteRequiredError(CrScoreError):
    """Status not_applicable requires an explanatory note."""


class MissingAttachmentError(CrScoreError):
    """An attachment reference points at a file that does not exist."""
