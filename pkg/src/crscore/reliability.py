"""Reliability statistics: rater error, true-score accuracy, repeat-scoring
consistency, and trend-set drift monitoring.

The centerpiece is the proportional reduction in mean squared error of a
machine score as a predictor of the *true* score, the expectation of a human
rating over raters. Because the true score is latent, its variance and the
rater error variance are estimated from double-scored responses; the
machine's MSE against the true score is then recovered from its observed MSE
against the (noisy) human average by subtracting the rater noise share.

Consistency analysis re-scores the same responses several times and asks how
often the system agrees with itself; trend monitoring re-scores a fixed
response set in a later scoring period and flags drift against the baseline
period.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ArityMismatchError,
    InsufficientDataError,
    InsufficientDoublesError,
    InsufficientRunsError,
    LengthMismatchError,
    TrendSetMismatchError,
    UndefinedStatisticError,
    ZeroTrueScoreVarianceError,
    ZeroVarianceError,
)
from .scoredata import AlignedScores, ScoreScale
from .agreement import agreement_rates, confusion_matrix, smd, weighted_kappa


@dataclass(frozen=True)
class RaterErrorEstimate:
    """Rater noise decomposition from double-scored responses.

    ``error_variance`` is the variance of a single rating around the true
    score; ``true_score_variance`` is the variance of the true score itself,
    estimated as the covariance between two independent ratings of the same
    responses. ``n_double`` counts the double-scored responses used.
    """

    error_variance: float
    true_score_variance: float
    n_double: int

    @property
    def single_rating_reliability(self) -> float:
        """Share of a single rating's variance that is true-score variance."""
        total = self.true_score_variance + self.error_variance
        if total <= 0.0:
            raise ZeroVarianceError("ratings carry no variance at all")
        return self.true_score_variance / total


def rater_error_from_values(first: np.ndarray, second: np.ndarray) -> RaterErrorEstimate:
    """Estimate rater error and true-score variance from two ratings per
    response.

    Error variance is half the mean squared disagreement between the two
    ratings; true-score variance is their sample covariance. Both estimates
    assume the two ratings are exchangeable draws around the same true score.
    """
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.shape != second.shape or first.ndim != 1:
        raise ArityMismatchError(
            f"rating vectors must be 1-d and same length, got {first.shape} and {second.shape}"
        )
    n = first.size
    if n < 2:
        raise InsufficientDoublesError(f"need at least 2 double-scored responses, got {n}")
    diff = first - second
    error_variance = float((diff @ diff) / (2.0 * n))
    true_score_variance = float(np.cov(first, second, ddof=1)[0, 1])
    return RaterErrorEstimate(
        error_variance=error_variance,
        true_score_variance=true_score_variance,
        n_double=n,
    )


def rater_error(aligned: AlignedScores) -> RaterErrorEstimate:
    """Rater error from a two-column alignment of first and second ratings."""
    if len(aligned.columns) != 2:
        raise ArityMismatchError(
            f"rater error needs exactly two rating columns, got {len(aligned.columns)}"
        )
    first_id, second_id = aligned.source_ids
    return rater_error_from_values(aligned.column(first_id), aligned.column(second_id))


@dataclass(frozen=True)
class PrmseEstimate:
    """Proportional reduction in MSE against the latent true score.

    ``mse_vs_average`` is the machine's raw MSE against the observed k-rating
    human average; ``mse_vs_true`` is that MSE with the rater noise share
    removed, floored at zero. ``mse_clamped`` records whether the floor was
    hit, which signals an error-variance estimate larger than the observed
    MSE supports.
    """

    value: float
    mse_vs_average: float
    mse_vs_true: float
    mse_clamped: bool
    n: int
    ratings_per_response: int

    def to_json_dict(self) -> dict:
        return {
            "prmse": self.value,
            "mse_vs_average": self.mse_vs_average,
            "mse_vs_true": self.mse_vs_true,
            "mse_clamped": self.mse_clamped,
            "n": self.n,
            "ratings_per_response": self.ratings_per_response,
        }


def prmse(
    machine: np.ndarray,
    h_mean: np.ndarray,
    est: RaterErrorEstimate,
    k: int = 1,
) -> PrmseEstimate:
    """Proportional reduction in MSE of the machine score as a true-score
    predictor, relative to predicting the mean for everyone.

    ``h_mean`` holds the mean of ``k`` human ratings per response. Its noise
    contributes error_variance / k to the observed MSE; subtracting that
    yields the MSE against the true score, and the statistic is one minus the
    ratio of that MSE to the true-score variance.
    """
    machine = np.asarray(machine, dtype=float)
    h_mean = np.asarray(h_mean, dtype=float)
    if machine.shape != h_mean.shape or machine.ndim != 1:
        raise ArityMismatchError(
            f"vectors must be 1-d and same length, got {machine.shape} and {h_mean.shape}"
        )
    if machine.size < 2:
        raise InsufficientDataError("true-score accuracy needs at least two responses")
    if k < 1:
        raise ArityMismatchError("ratings per response must be a positive integer")
    if est.true_score_variance <= 0.0:
        raise ZeroTrueScoreVarianceError(
            "estimated true-score variance is not positive; accuracy against the "
            "true score is undefined"
        )
    diff = machine - h_mean
    mse_vs_average = float((diff @ diff) / machine.size)
    mse_vs_true = mse_vs_average - est.error_variance / k
    clamped = mse_vs_true < 0.0
    if clamped:
        mse_vs_true = 0.0
    return PrmseEstimate(
        value=1.0 - mse_vs_true / est.true_score_variance,
        mse_vs_average=mse_vs_average,
        mse_vs_true=mse_vs_true,
        mse_clamped=clamped,
        n=machine.size,
        ratings_per_response=k,
    )


@dataclass(frozen=True)
class ConsistencyReport:
    """Self-agreement of repeat scoring runs over the same responses.

    ``exact_matrix`` and ``qwk_matrix`` are symmetric run-by-run matrices;
    the exact-rate diagonal is exactly 1. QWK entries that are undefined for
    a pair (degenerate marginals, e.g. two constant runs) are None, with the
    reason recorded in ``qwk_statuses`` under ``"label_a|label_b"``.
    Stability is judged on the worst pairwise exact rate.
    """

    run_labels: tuple[str, ...]
    n: int
    exact_matrix: tuple[tuple[float, ...], ...]
    qwk_matrix: tuple[tuple[float | None, ...], ...]
    qwk_statuses: Mapping[str, str]
    worst_exact: float
    threshold: float
    stable: bool

    @property
    def runs(self) -> int:
        return len(self.run_labels)

    def pairwise_exact(self, label_a: str, label_b: str) -> float:
        i = self.run_labels.index(label_a)
        j = self.run_labels.index(label_b)
        return self.exact_matrix[i][j]

    def to_json_dict(self) -> dict:
        return {
            "run_labels": list(self.run_labels),
            "runs": self.runs,
            "n": self.n,
            "exact_matrix": [list(row) for row in self.exact_matrix],
            "qwk_matrix": [list(row) for row in self.qwk_matrix],
            "qwk_statuses": dict(self.qwk_statuses),
            "worst_exact": self.worst_exact,
            "threshold": self.threshold,
            "stable": self.stable,
        }


def consistency_run_compare(
    runs: Sequence[Sequence[int]],
    scale: ScoreScale,
    threshold: float = 0.95,
    labels: Sequence[str] | None = None,
) -> ConsistencyReport:
    """Compare two or more scoring runs over the same responses, in order.

    Exact agreement and quadratic kappa are computed for every run pair;
    the report is stable when the worst pairwise exact rate meets the
    threshold.
    """
    if len(runs) < 2:
        raise InsufficientRunsError(f"need at least 2 runs, got {len(runs)}")
    if labels is None:
        labels = tuple(f"run-{i + 1}" for i in range(len(runs)))
    else:
        labels = tuple(labels)
        if len(labels) != len(runs):
            raise ArityMismatchError(f"{len(runs)} runs but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise InsufficientRunsError(f"run labels must be unique, got {list(labels)}")
    vectors = [np.asarray(values, dtype=int) for values in runs]
    lengths = {v.size for v in vectors}
    if len(lengths) != 1:
        raise LengthMismatchError(f"runs have differing lengths: {sorted(lengths)}")
    n = vectors[0].size
    if n == 0:
        raise InsufficientDataError("runs contain no responses")

    r = len(vectors)
    exact = [[1.0] * r for _ in range(r)]
    qwk: list[list[float | None]] = [[None] * r for _ in range(r)]
    statuses: dict[str, str] = {}
    for i in range(r):
        for j in range(i, r):
            matrix = confusion_matrix(vectors[i], vectors[j], scale)
            exact[i][j] = exact[j][i] = agreement_rates(matrix).exact
            try:
                value = weighted_kappa(matrix, "quadratic")
                qwk[i][j] = qwk[j][i] = value
            except UndefinedStatisticError as exc:
                statuses[f"{labels[i]}|{labels[j]}"] = exc.status

    worst_exact = min(exact[i][j] for i in range(r) for j in range(i + 1, r))
    return ConsistencyReport(
        run_labels=labels,
        n=n,
        exact_matrix=tuple(tuple(row) for row in exact),
        qwk_matrix=tuple(tuple(row) for row in qwk),
        qwk_statuses=statuses,
        worst_exact=worst_exact,
        threshold=threshold,
        stable=worst_exact >= threshold,
    )


@dataclass(frozen=True)
class TrendReport:
    """Drift assessment of a later scoring of the fixed trend set against the
    baseline scoring.

    Undefined statistics carry None plus a status string; the drift flag
    fires when the standardized mean difference magnitude exceeds ``t_smd``
    or exact agreement falls below ``t_exact``.
    """

    baseline_tag: str
    current_tag: str
    n: int
    smd: float | None
    smd_status: str
    exact_rate: float
    qwk: float | None
    qwk_status: str
    t_smd: float
    t_exact: float
    drift_flag: bool

    def to_json_dict(self) -> dict:
        out = {
            "baseline_tag": self.baseline_tag,
            "current_tag": self.current_tag,
            "n": self.n,
            "smd_status": self.smd_status,
            "exact_rate": self.exact_rate,
            "qwk_status": self.qwk_status,
            "t_smd": self.t_smd,
            "t_exact": self.t_exact,
            "drift_flag": self.drift_flag,
        }
        if self.smd is not None:
            out["smd"] = self.smd
        if self.qwk is not None:
            out["qwk"] = self.qwk
        return out


def trend_monitor(
    baseline: AlignedScores,
    current: AlignedScores,
    t_smd: float = 0.15,
    t_exact: float = 0.90,
    baseline_tag: str = "baseline",
    current_tag: str = "current",
) -> TrendReport:
    """Compare a later scoring of the trend set against the baseline scoring.

    Both alignments must carry exactly one score column over the identical
    response ids; the current session is matched to the baseline's order by
    response id.
    """
    for name, aligned in (("baseline", baseline), ("current", current)):
        if len(aligned.columns) != 1:
            raise ArityMismatchError(
                f"{name} alignment must carry exactly one score column, "
                f"got {len(aligned.columns)}"
            )
    if set(baseline.response_ids) != set(current.response_ids):
        missing = sorted(set(baseline.response_ids) ^ set(current.response_ids))
        raise TrendSetMismatchError(
            f"sessions do not cover the same trend set; {len(missing)} ids differ "
            f"(first few: {missing[:5]})"
        )

    base_values = baseline.column_int(baseline.source_ids[0])
    current_by_id = dict(zip(current.response_ids, current.columns[0][1]))
    cur_values = np.asarray(
        [current_by_id[rid] for rid in baseline.response_ids], dtype=int
    )

    matrix = confusion_matrix(base_values, cur_values, baseline.scale)
    exact = agreement_rates(matrix).exact

    smd_value: float | None
    try:
        smd_value = smd(base_values.astype(float), cur_values.astype(float))
        smd_status = "ok"
    except UndefinedStatisticError as exc:
        smd_value = None
        smd_status = exc.status

    qwk_value: float | None
    try:
        qwk_value = weighted_kappa(matrix, "quadratic")
        qwk_status = "ok"
    except UndefinedStatisticError as exc:
        qwk_value = None
        qwk_status = exc.status

    drift = (smd_value is not None and abs(smd_value) > t_smd) or exact < t_exact
    return TrendReport(
        baseline_tag=baseline_tag,
        current_tag=current_tag,
        n=baseline.n,
        smd=smd_value,
        smd_status=smd_status,
        exact_rate=exact,
        qwk=qwk_value,
        qwk_status=qwk_status,
        t_smd=t_smd,
        t_exact=t_exact,
        drift_flag=drift,
    )
