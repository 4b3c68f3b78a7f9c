from __future__ import annotations

import numpy as np
import pytest

from crscore import (
    ArityMismatchError,
    ConfusionMatrix,
    DegenerateMarginalsError,
    InsufficientDataError,
    ScoreScale,
    ZeroVarianceError,
    agreement_rates,
    agreement_report,
    align,
    confusion_matrix,
    pearson_from_values,
    pearson_r,
    smd,
    weighted_kappa,
)
from helpers import SCALE_1_5, make_dataset

# Frozen five-level reference table; the statistics below were computed by
# hand (exact fractions) before the implementation existed.
REFERENCE_COUNTS = [
    [0, 3, 6, 0, 0],
    [0, 10, 26, 1, 0],
    [0, 3, 49, 55, 1],
    [0, 0, 15, 63, 10],
    [0, 0, 0, 3, 1],
]
REFERENCE_MATRIX = ConfusionMatrix(levels=(1, 2, 3, 4, 5), counts=np.array(REFERENCE_COUNTS))
REFERENCE_QWK = 74.0 / 137.0  # = 0.5401459854014599


def test_confusion_matrix_tabulates_over_full_scale():
    matrix = confusion_matrix(np.array([1, 1, 5]), np.array([1, 2, 5]), SCALE_1_5)
    assert matrix.levels == (0, 1, 2, 3, 4, 5)
    assert matrix.n == 3
    assert matrix.counts[1][1] == 1
    assert matrix.counts[1][2] == 1
    assert matrix.counts[5][5] == 1
    assert matrix.counts.sum() == 3


def test_confusion_matrix_rejects_bad_input():
    with pytest.raises(InsufficientDataError):
        confusion_matrix(np.array([]), np.array([]), SCALE_1_5)
    with pytest.raises(ArityMismatchError):
        confusion_matrix(np.array([1, 2]), np.array([1]), SCALE_1_5)


def test_reference_table_rates_are_exact_fractions():
    rates = agreement_rates(REFERENCE_MATRIX)
    assert REFERENCE_MATRIX.n == 246
    assert rates.exact == pytest.approx(123 / 246, abs=1e-15)
    assert rates.adjacent == pytest.approx(115 / 246, abs=1e-15)
    assert rates.discrepant == pytest.approx(8 / 246, abs=1e-15)
    assert rates.exact + rates.adjacent + rates.discrepant == pytest.approx(1.0, abs=1e-12)


def test_reference_table_quadratic_kappa_frozen_value():
    assert weighted_kappa(REFERENCE_MATRIX, "quadratic") == pytest.approx(
        REFERENCE_QWK, abs=1e-12
    )


def test_rates_sum_to_one_on_random_tables():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = rng.integers(0, 6, size=50)
        b = rng.integers(0, 6, size=50)
        rates = agreement_rates(confusion_matrix(a, b, SCALE_1_5))
        assert rates.exact + rates.adjacent + rates.discrepant == pytest.approx(1.0, abs=1e-12)


def test_kappa_identity_and_weighting_order():
    a = np.array([1, 2, 3, 4, 5, 2, 3])
    assert weighted_kappa(confusion_matrix(a, a, SCALE_1_5), "quadratic") == pytest.approx(1.0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.integers(1, 6, size=60)
        noise = np.clip(x + rng.integers(-1, 2, size=60), 1, 5)
        matrix = confusion_matrix(x, noise, SCALE_1_5)
        kq = weighted_kappa(matrix, "quadratic")
        kl = weighted_kappa(matrix, "linear")
        ku = weighted_kappa(matrix, "unweighted")
        # near-diagonal disagreement penalizes heavier weightings less
        assert kq >= kl - 1e-12
        assert kl >= ku - 1e-12


def test_kappa_swap_of_two_adjacent_levels_is_minus_one():
    a = np.array([1, 2, 1, 2])
    b = np.array([2, 1, 2, 1])
    matrix = confusion_matrix(a, b, SCALE_1_5)
    for weighting in ("quadratic", "linear", "unweighted"):
        assert weighted_kappa(matrix, weighting) == pytest.approx(-1.0, abs=1e-12)


def test_kappa_reflection_about_scale_midpoint_is_minus_one():
    # reflect b = (max + floor) - a; a's mean sits on the midpoint
    scale = ScoreScale(min_reportable=1, max_reportable=5, atypical_floor=0)
    a = np.array([0, 5, 1, 4, 2, 3])
    b = (scale.max_reportable + scale.atypical_floor) - a
    matrix = confusion_matrix(a, b, scale)
    assert weighted_kappa(matrix, "quadratic") == pytest.approx(-1.0, abs=1e-12)


def test_kappa_invariant_to_unobserved_edge_levels():
    a = np.array([1, 2, 3, 3, 4, 5, 2, 4])
    b = np.array([2, 2, 3, 4, 4, 5, 1, 4])
    narrow = ScoreScale(min_reportable=1, max_reportable=5, atypical_floor=1)
    wide = ScoreScale(min_reportable=1, max_reportable=5, atypical_floor=0)
    assert weighted_kappa(confusion_matrix(a, b, narrow)) == pytest.approx(
        weighted_kappa(confusion_matrix(a, b, wide)), abs=1e-12
    )


def test_kappa_symmetric_under_transpose():
    rng = np.random.default_rng(19)
    for _ in range(10):
        a = rng.integers(0, 6, size=40)
        b = rng.integers(0, 6, size=40)
        forward = weighted_kappa(confusion_matrix(a, b, SCALE_1_5))
        backward = weighted_kappa(confusion_matrix(b, a, SCALE_1_5))
        assert forward == pytest.approx(backward, abs=1e-12)


def test_kappa_degenerate_marginals():
    a = np.array([3, 3, 3])
    matrix = confusion_matrix(a, a, SCALE_1_5)
    with pytest.raises(DegenerateMarginalsError) as excinfo:
        weighted_kappa(matrix)
    assert excinfo.value.status == "degenerate_marginals"


def test_kappa_unknown_weighting():
    with pytest.raises(ArityMismatchError):
        weighted_kappa(REFERENCE_MATRIX, "cubic")


def test_pearson_pinned_example():
    assert pearson_from_values(np.array([1, 2, 3, 4]), np.array([1, 3, 2, 4])) == pytest.approx(
        0.8, abs=1e-15
    )


def test_pearson_affine_invariance_and_clamp():
    rng = np.random.default_rng(5)
    x = rng.normal(size=30)
    y = rng.normal(size=30)
    r = pearson_from_values(x, y)
    assert pearson_from_values(2.5 * x + 1.0, y) == pytest.approx(r, abs=1e-12)
    assert pearson_from_values(x, -3.0 * y + 4.0) == pytest.approx(-r, abs=1e-12)
    assert pearson_from_values(x, 2.0 * x + 1.0) == 1.0
    assert pearson_from_values(x, -x) == -1.0
    assert -1.0 <= pearson_from_values(x, y) <= 1.0


def test_pearson_zero_variance_names_the_constant_vector():
    with pytest.raises(ZeroVarianceError, match="second"):
        pearson_from_values(np.array([1.0, 2.0, 3.0]), np.array([4.0, 4.0, 4.0]))
    with pytest.raises(ZeroVarianceError, match="first"):
        pearson_from_values(np.array([4.0, 4.0, 4.0]), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(InsufficientDataError):
        pearson_from_values(np.array([1.0]), np.array([2.0]))


def test_pearson_r_uses_aligned_columns():
    dataset = make_dataset({"h1": [1, 2, 3, 4], "g": [1, 3, 2, 4]})
    aligned = align(dataset, ["h1", "g"])
    assert pearson_r(aligned, "h1", "g") == pytest.approx(0.8, abs=1e-15)


def test_smd_pinned_example_and_antisymmetry():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([2.0, 3.0, 4.0, 5.0])
    value = smd(a, b)
    assert value == pytest.approx(0.7745966692414834, abs=1e-15)
    assert smd(b, a) == pytest.approx(-value, abs=1e-15)


def test_smd_shift_invariance_and_errors():
    rng = np.random.default_rng(13)
    a = rng.normal(size=25)
    b = rng.normal(size=25) + 0.4
    assert smd(a + 7.0, b + 7.0) == pytest.approx(smd(a, b), abs=1e-12)
    with pytest.raises(ZeroVarianceError):
        smd(np.array([2.0, 2.0]), np.array([3.0, 3.0]))
    with pytest.raises(InsufficientDataError):
        smd(np.array([1.0]), np.array([2.0]))


def test_agreement_report_ok_path():
    dataset = make_dataset({"h1": [1, 2, 3, 3, 4, 5], "g": [2, 2, 3, 4, 4, 5]})
    aligned = align(dataset, ["h1", "g"])
    report = agreement_report(aligned, "h1", "g")
    assert report.reference_source == "h1"
    assert report.comparison_source == "g"
    assert report.n == 6
    assert report.rates.exact == pytest.approx(4 / 6)
    assert set(report.kappas) == {"quadratic", "linear", "unweighted"}
    assert all(status == "ok" for status in report.statuses.values())
    payload = report.to_json_dict()
    assert payload["pearson_r"] == pytest.approx(report.pearson)
    assert payload["statuses"]["smd"] == "ok"
    text = report.to_markdown()
    assert "| **3** |" in text
    assert "exact" in text


def test_agreement_report_degrades_per_statistic():
    dataset = make_dataset({"h1": [3, 3, 3, 3], "g": [3, 3, 3, 3]})
    aligned = align(dataset, ["h1", "g"])
    report = agreement_report(aligned, "h1", "g")
    assert report.rates.exact == 1.0
    assert "quadratic" not in report.kappas
    assert report.statuses["kappa_quadratic"] == "degenerate_marginals"
    assert report.pearson is None
    assert report.statuses["pearson_r"] == "zero_variance"
    assert report.smd is None
    assert report.statuses["smd"] == "zero_variance"
    payload = report.to_json_dict()
    assert "pearson_r" not in payload
    assert "smd" not in payload
