"""Agreement and accuracy statistics for pairs of score vectors.

All statistics operate on an aligned pair: a machine (or second-rater) score
vector against a reference vector, usually human. The confusion matrix is
always laid out over the full scale range so that matrices from different
samples on the same scale are directly comparable, even when some levels were
never awarded.

Statistics that are undefined for a given sample (zero variance, degenerate
marginals) raise typed exceptions carrying a short status string; report
builders catch these and record the status instead of a number. No statistic
here ever returns NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    ArityMismatchError,
    DegenerateMarginalsError,
    InsufficientDataError,
    UndefinedStatisticError,
    ZeroVarianceError,
)
from .scoredata import AlignedScores, ScoreScale

WEIGHTINGS = ("quadratic", "linear", "unweighted")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of (reference level, comparison level) pairs over a full scale.

    Rows index the reference source, columns the comparison source. ``levels``
    lists the score value for each row/column index.
    """

    levels: tuple[int, ...]
    counts: np.ndarray  # shape (k, k), ints

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=int)
        k = len(self.levels)
        if counts.shape != (k, k):
            raise ArityMismatchError(
                f"counts shape {counts.shape} does not match {k} levels"
            )
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def proportions(self) -> np.ndarray:
        if self.n == 0:
            raise InsufficientDataError("empty confusion matrix")
        return self.counts / self.n

    def to_json_dict(self) -> dict:
        return {"levels": list(self.levels), "counts": self.counts.tolist()}


def confusion_matrix(reference: np.ndarray, comparison: np.ndarray, scale: ScoreScale) -> ConfusionMatrix:
    """Tabulate score pairs over every level of the scale."""
    reference = np.asarray(reference, dtype=int)
    comparison = np.asarray(comparison, dtype=int)
    if reference.shape != comparison.shape or reference.ndim != 1:
        raise ArityMismatchError(
            f"score vectors must be 1-d and same length, got {reference.shape} and {comparison.shape}"
        )
    if reference.size == 0:
        raise InsufficientDataError("cannot tabulate zero score pairs")
    levels = tuple(scale.levels)
    offset = scale.atypical_floor
    k = scale.n_levels
    for vec, name in ((reference, "reference"), (comparison, "comparison")):
        for value in vec:
            scale.check(int(value), name)
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (reference - offset, comparison - offset), 1)
    return ConfusionMatrix(levels=levels, counts=counts)


@dataclass(frozen=True)
class AgreementRates:
    exact: float
    adjacent: float
    discrepant: float

    def to_json_dict(self) -> dict:
        return {"exact": self.exact, "adjacent": self.adjacent, "discrepant": self.discrepant}


def agreement_rates(matrix: ConfusionMatrix) -> AgreementRates:
    """Exact, adjacent (off by one), and discrepant (off by two or more)
    agreement as proportions of all pairs. The three always sum to 1."""
    n = matrix.n
    if n == 0:
        raise InsufficientDataError("empty confusion matrix")
    k = len(matrix.levels)
    idx = np.arange(k)
    dist = np.abs(idx[:, None] - idx[None, :])
    # sum integer counts first so e.g. full agreement is exactly 1.0
    exact = float(int(matrix.counts[dist == 0].sum()) / n)
    adjacent = float(int(matrix.counts[dist == 1].sum()) / n)
    discrepant = float(int(matrix.counts[dist >= 2].sum()) / n)
    return AgreementRates(exact=exact, adjacent=adjacent, discrepant=discrepant)


def _weight_matrix(k: int, weighting: str) -> np.ndarray:
    """Disagreement weights over a k-level scale; 0 on the diagonal."""
    if weighting not in WEIGHTINGS:
        raise ArityMismatchError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")
    if k < 2:
        raise ArityMismatchError("weighting needs at least a two-level scale")
    idx = np.arange(k)
    diff = np.abs(idx[:, None] - idx[None, :])
    if weighting == "quadratic":
        return (diff / (k - 1)) ** 2
    if weighting == "linear":
        return diff / (k - 1)
    return (diff > 0).astype(float)


def weighted_kappa(matrix: ConfusionMatrix, weighting: str = "quadratic") -> float:
    """Chance-corrected agreement: 1 minus the ratio of observed to
    chance-expected disagreement, under the chosen disagreement weights.

    Chance expectation is the product of the observed marginals. When every
    pair falls in a single cell the expected disagreement is zero and the
    statistic is undefined (degenerate marginals).
    """
    p = matrix.proportions()
    k = len(matrix.levels)
    w = _weight_matrix(k, weighting)
    row = p.sum(axis=1)
    col = p.sum(axis=0)
    expected = np.outer(row, col)
    denom = float((w * expected).sum())
    if denom == 0.0:
        raise DegenerateMarginalsError(
            "chance-expected disagreement is zero; kappa is undefined"
        )
    observed = float((w * p).sum())
    return 1.0 - observed / denom


def pearson_from_values(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two float vectors.

    This is the single correlation routine shared across the package, so that
    a correlation reported by one analysis is bit-for-bit the value another
    analysis consumes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ArityMismatchError(f"vectors must be 1-d and same length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise InsufficientDataError("correlation needs at least two pairs")
    xc = x - x.mean()
    yc = y - y.mean()
    ssx = float(xc @ xc)
    ssy = float(yc @ yc)
    if ssx == 0.0 or ssy == 0.0:
        which = []
        if ssx == 0.0:
            which.append("first")
        if ssy == 0.0:
            which.append("second")
        raise ZeroVarianceError(f"{' and '.join(which)} vector is constant; correlation undefined")
    r = float(xc @ yc) / np.sqrt(ssx * ssy)
    return float(min(1.0, max(-1.0, r)))


def pearson_r(aligned: AlignedScores, source_a: str, source_b: str) -> float:
    return pearson_from_values(aligned.column(source_a), aligned.column(source_b))


def smd(reference: np.ndarray, comparison: np.ndarray) -> float:
    """Standardized mean difference, comparison minus reference, divided by
    the pooled standard deviation (mean of the two sample variances).

    Positive values mean the comparison source scores higher than the
    reference on average.
    """
    reference = np.asarray(reference, dtype=float)
    comparison = np.asarray(comparison, dtype=float)
    if reference.shape != comparison.shape or reference.ndim != 1:
        raise ArityMismatchError(
            f"vectors must be 1-d and same length, got {reference.shape} and {comparison.shape}"
        )
    if reference.size < 2:
        raise InsufficientDataError("standardized mean difference needs at least two pairs")
    var_a = float(np.var(reference, ddof=1))
    var_b = float(np.var(comparison, ddof=1))
    pooled = np.sqrt((var_a + var_b) / 2.0)
    if pooled == 0.0:
        raise ZeroVarianceError("both vectors are constant; standardized mean difference undefined")
    return float((comparison.mean() - reference.mean()) / pooled)


@dataclass(frozen=True)
class AgreementReport:
    """Full head-to-head comparison of one source against a reference.

    ``statuses`` records, per statistic name, either ``"ok"`` or the status
    string of the exception that made it undefined; undefined statistics are
    absent from the numeric fields rather than set to NaN.
    """

    reference_source: str
    comparison_source: str
    n: int
    matrix: ConfusionMatrix
    rates: AgreementRates
    kappas: Mapping[str, float]
    pearson: float | None
    smd: float | None
    statuses: Mapping[str, str]

    def to_json_dict(self) -> dict:
        out = {
            "reference_source": self.reference_source,
            "comparison_source": self.comparison_source,
            "n": self.n,
            "confusion_matrix": self.matrix.to_json_dict(),
            "rates": self.rates.to_json_dict(),
            "kappa": dict(self.kappas),
            "statuses": dict(self.statuses),
        }
        if self.pearson is not None:
            out["pearson_r"] = self.pearson
        if self.smd is not None:
            out["smd"] = self.smd
        return out

    def to_markdown(self) -> str:
        lines = [
            f"## Agreement: {self.comparison_source} vs {self.reference_source}",
            "",
            f"- n = {self.n}",
            f"- exact agreement: {self.rates.exact:.4f}",
            f"- adjacent agreement: {self.rates.adjacent:.4f}",
            f"- discrepant: {self.rates.discrepant:.4f}",
        ]
        for weighting in WEIGHTINGS:
            if weighting in self.kappas:
                lines.append(f"- kappa ({weighting}): {self.kappas[weighting]:.4f}")
            else:
                lines.append(f"- kappa ({weighting}): {self.statuses['kappa_' + weighting]}")
        lines.append(
            f"- pearson r: {self.pearson:.4f}" if self.pearson is not None
            else f"- pearson r: {self.statuses['pearson_r']}"
        )
        lines.append(
            f"- smd: {self.smd:.4f}" if self.smd is not None
            else f"- smd: {self.statuses['smd']}"
        )
        lines += ["", "### Confusion matrix (rows: reference, columns: comparison)", ""]
        levels = self.matrix.levels
        lines.append("| | " + " | ".join(str(l) for l in levels) + " |")
        lines.append("|" + "---|" * (len(levels) + 1))
        for i, level in enumerate(levels):
            row = " | ".join(str(int(c)) for c in self.matrix.counts[i])
            lines.append(f"| **{level}** | {row} |")
        return "\n".join(lines) + "\n"


def agreement_report(
    aligned: AlignedScores, reference_source: str, comparison_source: str
) -> AgreementReport:
    """Compute every pairwise statistic, downgrading undefined ones to a
    status entry instead of failing the whole report."""
    ref = aligned.column_int(reference_source)
    cmp_ = aligned.column_int(comparison_source)
    matrix = confusion_matrix(ref, cmp_, aligned.scale)
    rates = agreement_rates(matrix)

    statuses: dict[str, str] = {"rates": "ok"}
    kappas: dict[str, float] = {}
    for weighting in WEIGHTINGS:
        try:
            kappas[weighting] = weighted_kappa(matrix, weighting)
            statuses[f"kappa_{weighting}"] = "ok"
        except UndefinedStatisticError as exc:
            statuses[f"kappa_{weighting}"] = exc.status

    pearson: float | None
    try:
        pearson = pearson_from_values(ref.astype(float), cmp_.astype(float))
        statuses["pearson_r"] = "ok"
    except UndefinedStatisticError as exc:
        pearson = None
        statuses["pearson_r"] = exc.status

    smd_value: float | None
    try:
        smd_value = smd(ref.astype(float), cmp_.astype(float))
        statuses["smd"] = "ok"
    except UndefinedStatisticError as exc:
        smd_value = None
        statuses["smd"] = exc.status

    return AgreementReport(
        reference_source=reference_source,
        comparison_source=comparison_source,
        n=aligned.n,
        matrix=matrix,
        rates=rates,
        kappas=kappas,
        pearson=pearson,
        smd=smd_value,
        statuses=statuses,
    )
