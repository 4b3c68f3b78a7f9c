from __future__ import annotations

import numpy as np
import pytest

from crscore import (
    AlignedScores,
    ArityMismatchError,
    CompositeSpec,
    InsufficientDataError,
    PerfectCollinearityError,
    SingularDesignError,
    UnknownComponentError,
    align,
    blp_weights,
    build_composite,
    composite_evaluation,
    correlation_report,
    partial_correlation,
    partial_correlation_from_values,
    pearson_from_values,
    semipartial_correlation_from_values,
)
from helpers import SCALE_1_5, make_dataset


def residual_on(v, z):
    design = np.column_stack([np.ones(len(z)), z])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return v - design @ coef


def test_partial_matches_residual_regression_oracle():
    rng = np.random.default_rng(101)
    for _ in range(50):
        z = rng.normal(size=50)
        x = 0.6 * z + rng.normal(size=50)
        y = -0.3 * z + rng.normal(size=50)
        expected = pearson_from_values(residual_on(x, z), residual_on(y, z))
        assert partial_correlation_from_values(x, y, z) == pytest.approx(expected, abs=1e-10)


def test_semipartial_matches_residual_regression_oracle():
    rng = np.random.default_rng(103)
    for _ in range(50):
        z = rng.normal(size=50)
        x = 0.6 * z + rng.normal(size=50)
        y = -0.3 * z + rng.normal(size=50)
        expected = pearson_from_values(residual_on(x, z), y)
        assert semipartial_correlation_from_values(x, y, z) == pytest.approx(
            expected, abs=1e-10
        )


def test_semipartial_magnitude_never_exceeds_partial():
    rng = np.random.default_rng(107)
    for _ in range(50):
        z = rng.normal(size=40)
        x = 0.5 * z + rng.normal(size=40)
        y = 0.4 * z + rng.normal(size=40)
        semi = semipartial_correlation_from_values(x, y, z)
        part = partial_correlation_from_values(x, y, z)
        assert abs(semi) <= abs(part) + 1e-12


def test_partial_affine_invariant_in_control():
    rng = np.random.default_rng(109)
    z = rng.normal(size=30)
    x = 0.7 * z + rng.normal(size=30)
    y = 0.2 * z + rng.normal(size=30)
    base = partial_correlation_from_values(x, y, z)
    assert partial_correlation_from_values(x, y, 3.5 * z - 2.0) == pytest.approx(
        base, abs=1e-10
    )


def test_partial_collinearity_and_size_guards():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    y = np.array([2.0, 1.0, 4.0, 3.0, 5.0])
    with pytest.raises(PerfectCollinearityError):
        partial_correlation_from_values(x, y, 2.0 * x + 1.0)
    with pytest.raises(PerfectCollinearityError):
        partial_correlation_from_values(x, y, -y)
    with pytest.raises(PerfectCollinearityError):
        semipartial_correlation_from_values(x, y, 2.0 * x + 1.0)
    # the one-sided version only adjusts x, so y-collinear controls are fine
    value = semipartial_correlation_from_values(x, y, y.copy())
    assert np.isfinite(value)
    with pytest.raises(InsufficientDataError):
        partial_correlation_from_values(x[:3], y[:3], x[:3] * 0.5)
    with pytest.raises(ArityMismatchError):
        partial_correlation_from_values(x, y[:4], x)


def test_correlation_report_over_alignment():
    dataset = make_dataset(
        {"g": [1, 2, 3, 4, 5, 2], "h1": [2, 2, 3, 5, 4, 1], "wc": [1, 3, 2, 4, 5, 3]}
    )
    aligned = align(dataset, ["g", "h1", "wc"])
    report = correlation_report(aligned)
    assert (report.x, report.y, report.control) == ("g", "h1", "wc")
    assert report.n == 6
    assert report.r_xy == pytest.approx(
        pearson_from_values(aligned.column("g"), aligned.column("h1"))
    )
    assert report.r_xy_given_z == pytest.approx(partial_correlation(aligned))
    payload = report.to_json_dict()
    assert payload["partial"] == report.r_xy_given_z
    assert payload["semipartial"] == report.r_x_given_z_with_y
    with pytest.raises(ArityMismatchError):
        correlation_report(align(dataset, ["g", "h1"]))


# composite specs


def test_composite_spec_validation():
    with pytest.raises(UnknownComponentError):
        CompositeSpec(components=())
    with pytest.raises(UnknownComponentError):
        CompositeSpec(components=("a", "a"))
    with pytest.raises(ArityMismatchError):
        CompositeSpec(components=("a",), rounding="ceil")
    with pytest.raises(ArityMismatchError):
        CompositeSpec(components=("a", "b"), weights=(0.5,))
    with pytest.raises(ArityMismatchError):
        CompositeSpec(components=("a",), weights=(float("nan"),))
    with pytest.raises(ArityMismatchError):
        CompositeSpec(components=("a",), weights="magic")
    with pytest.raises(ArityMismatchError):
        CompositeSpec(components=("a",), weights="equal", intercept=1.0)


def test_composite_spec_labels_and_weights():
    equal = CompositeSpec(components=("e", "g"))
    assert equal.label == "mean(e+g)"
    assert equal.resolved_weights() == (0.5, 0.5)
    weighted = CompositeSpec(components=("e", "g"), weights=(0.7, 0.3), intercept=0.5)
    assert weighted.label == "blend(e+g)"
    assert weighted.resolved_weights() == (0.7, 0.3)
    named = CompositeSpec(components=("e",), weights=(1.0,), label="e alone")
    assert named.label == "e alone"
    payload = weighted.to_json_dict()
    assert payload["weights"] == [0.7, 0.3]
    assert payload["intercept"] == 0.5


def test_build_composite_weighted_sum_example():
    aligned = AlignedScores.from_columns(SCALE_1_5, [("e", [3]), ("g", [5])])
    spec = CompositeSpec(components=("e", "g"), weights=(0.7, 0.3), intercept=0.5)
    assert build_composite(aligned, spec).tolist() == pytest.approx([4.1], abs=1e-12)


def test_build_composite_mean_is_symmetric():
    aligned = AlignedScores.from_columns(SCALE_1_5, [("e", [2, 4]), ("g", [4, 2])])
    values = build_composite(aligned, CompositeSpec(components=("e", "g")))
    assert values.tolist() == [3.0, 3.0]


def test_build_composite_rounding_modes():
    aligned = AlignedScores.from_columns(SCALE_1_5, [("e", [1, 2, 3, 4])])
    spec = CompositeSpec(components=("e",), weights=(1.1,), rounding="none")
    assert build_composite(aligned, spec).tolist() == pytest.approx([1.1, 2.2, 3.3, 4.4])
    spec = CompositeSpec(components=("e",), weights=(1.1,), rounding="nearest-half")
    assert build_composite(aligned, spec).tolist() == [1.0, 2.0, 3.5, 4.5]
    spec = CompositeSpec(components=("e",), weights=(1.1,), rounding="nearest-integer")
    assert build_composite(aligned, spec).tolist() == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(UnknownComponentError):
        build_composite(aligned, CompositeSpec(components=("ghost",)))


# blp


def test_blp_recovers_identity_and_affine_targets():
    aligned = AlignedScores.from_columns(
        SCALE_1_5, [("e", [1, 2, 3, 4, 5]), ("t", [1, 2, 3, 4, 5])]
    )
    spec = blp_weights(aligned)
    assert spec.components == ("e",)
    assert spec.resolved_weights()[0] == pytest.approx(1.0, abs=1e-10)
    assert spec.intercept == pytest.approx(0.0, abs=1e-10)
    assert spec.label == "blp(e -> t)"

    affine = AlignedScores.from_columns(
        SCALE_1_5, [("e", [1, 2, 3, 3, 2]), ("t", [1, 3, 5, 5, 3])]
    )
    spec = blp_weights(affine)  # target = 2e - 1
    assert spec.resolved_weights()[0] == pytest.approx(2.0, abs=1e-10)
    assert spec.intercept == pytest.approx(-1.0, abs=1e-10)


def gaussian_elimination_solve(a, b):
    a = [row[:] + [rhs] for row, rhs in zip(a, b)]
    n = len(a)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        a[col], a[pivot] = a[pivot], a[col]
        for row in range(col + 1, n):
            factor = a[row][col] / a[col][col]
            for k in range(col, n + 1):
                a[row][k] -= factor * a[col][k]
    x = [0.0] * n
    for row in range(n - 1, -1, -1):
        x[row] = (a[row][n] - sum(a[row][k] * x[k] for k in range(row + 1, n))) / a[row][row]
    return x


def test_blp_matches_hand_rolled_normal_equations():
    rng = np.random.default_rng(211)
    for _ in range(20):
        e = rng.integers(1, 6, size=30)
        g = rng.integers(1, 6, size=30)
        t = np.clip(np.round(0.5 * e + 0.4 * g + rng.normal(0, 0.5, size=30)), 1, 5)
        aligned = AlignedScores.from_columns(SCALE_1_5, [("e", e), ("g", g), ("t", t)])
        spec = blp_weights(aligned)
        design = np.column_stack([np.ones(30), e, g])
        gram = (design.T @ design).tolist()
        moment = (design.T @ t.astype(float)).tolist()
        expected = gaussian_elimination_solve(gram, moment)
        assert spec.intercept == pytest.approx(expected[0], abs=1e-8)
        assert spec.resolved_weights()[0] == pytest.approx(expected[1], abs=1e-8)
        assert spec.resolved_weights()[1] == pytest.approx(expected[2], abs=1e-8)


def test_blp_beats_equal_weights_in_sample():
    rng = np.random.default_rng(223)
    for _ in range(10):
        e = rng.integers(1, 6, size=40)
        g = rng.integers(1, 6, size=40)
        t = np.clip(np.round(0.8 * e + 0.1 * g + rng.normal(0, 0.4, size=40)), 1, 5)
        aligned = AlignedScores.from_columns(SCALE_1_5, [("e", e), ("g", g), ("t", t)])
        blp = build_composite(aligned, blp_weights(aligned))
        mean = build_composite(aligned, CompositeSpec(components=("e", "g")))
        blp_mse = float(np.mean((blp - t) ** 2))
        mean_mse = float(np.mean((mean - t) ** 2))
        assert blp_mse <= mean_mse + 1e-9


def test_blp_guards():
    base = AlignedScores.from_columns(
        SCALE_1_5, [("e", [1, 2, 3, 4]), ("dup", [1, 2, 3, 4]), ("t", [2, 3, 4, 5])]
    )
    with pytest.raises(SingularDesignError):
        blp_weights(base)
    small = AlignedScores.from_columns(SCALE_1_5, [("e", [1, 2]), ("t", [1, 2])])
    with pytest.raises(InsufficientDataError):
        blp_weights(small)
    single = AlignedScores.from_columns(SCALE_1_5, [("t", [1, 2, 3])])
    with pytest.raises(ArityMismatchError):
        blp_weights(single)


# composite evaluation


def test_composite_evaluation_second_rating_reproduces_pair_r():
    dataset = make_dataset(
        {"h1": [1, 2, 3, 4, 5, 2, 4], "h2": [2, 2, 3, 5, 4, 1, 4]}
    )
    aligned = align(dataset, ["h1", "h2"])
    spec = CompositeSpec(components=("h1",), weights=(1.0,), label="h1 alone")
    evaluation = composite_evaluation(aligned, [spec], benchmark="h2", pair_with="h1")
    assert evaluation.rows[0].r == evaluation.pair_r  # bit-for-bit, same routine
    assert not evaluation.rows[0].flagged
    assert not evaluation.any_flag


def test_composite_evaluation_flags_only_below_margin():
    rng = np.random.default_rng(229)
    n = 200
    h1 = rng.integers(1, 6, size=n)
    h2 = np.clip(h1 + rng.integers(-1, 2, size=n), 1, 5)
    noise = rng.integers(1, 6, size=n)
    aligned = AlignedScores.from_columns(
        SCALE_1_5, [("h1", h1), ("h2", h2), ("e", h2.copy()), ("junk", noise)]
    )
    specs = [
        CompositeSpec(components=("e",), weights=(1.0,), label="faithful"),
        CompositeSpec(components=("junk",), weights=(1.0,), label="junk"),
        CompositeSpec(components=("e", "junk"), label="diluted"),
    ]
    evaluation = composite_evaluation(aligned, specs, benchmark="h1", pair_with="h2")
    rows = {row.label: row for row in evaluation.rows}
    assert rows["faithful"].r == evaluation.pair_r
    assert not rows["faithful"].flagged
    assert rows["junk"].r < rows["diluted"].r < rows["faithful"].r
    assert rows["junk"].flagged
    assert evaluation.any_flag
    payload = evaluation.to_json_dict()
    assert payload["any_flag"] is True
    assert payload["pair_with"] == "h2"
    text = evaluation.to_markdown()
    assert "| junk |" in text
    assert "FLAG" in text


def test_composite_evaluation_margin_boundary_is_strict():
    aligned = AlignedScores.from_columns(
        SCALE_1_5, [("h1", [1, 2, 3, 4]), ("h2", [1, 2, 3, 4]), ("e", [1, 3, 2, 4])]
    )
    spec = CompositeSpec(components=("e",), weights=(1.0,), label="e")
    # pair_r = 1.0, composite r = 0.8: needs margin < 0.2 to flag
    at_margin = composite_evaluation(aligned, [spec], "h1", "h2", margin=0.2)
    assert at_margin.rows[0].r == pytest.approx(0.8, abs=1e-15)
    assert not at_margin.rows[0].flagged
    tighter = composite_evaluation(aligned, [spec], "h1", "h2", margin=0.2 - 1e-9)
    assert tighter.rows[0].flagged


def test_composite_evaluation_constant_composite_degrades():
    aligned = AlignedScores.from_columns(
        SCALE_1_5, [("h1", [1, 2, 3, 4]), ("h2", [1, 3, 2, 4]), ("e", [2, 2, 2, 2])]
    )
    spec = CompositeSpec(components=("e",), weights=(1.0,), label="flat")
    evaluation = composite_evaluation(aligned, [spec], "h1", "h2")
    assert evaluation.rows[0].r is None
    assert evaluation.rows[0].status == "zero_variance"
    assert not evaluation.rows[0].flagged
