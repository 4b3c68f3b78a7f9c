"""Correlation structure among scorers and contributory composite scores.

Partial and semi-partial correlations isolate what one scorer adds over
another: the partial removes a control scorer from both sides, the
semi-partial removes it from one side only, which makes it the direct measure
of a scorer's unique contribution to predicting the other side.

Composites combine several machine scores into one contributory score, either
with caller-chosen weights (equal-weights mean being the common case) or with
weights fit by ordinary least squares against a target column (best linear
predictor). Composite evaluation correlates each candidate composite with a
benchmark rating and compares it against the correlation between two
independent ratings of that benchmark, the ceiling a second scorer is held
to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ArityMismatchError,
    InsufficientDataError,
    PerfectCollinearityError,
    SingularDesignError,
    UndefinedStatisticError,
    UnknownComponentError,
)
from .agreement import pearson_from_values
from .scoredata import AlignedScores

ROUNDINGS = ("none", "nearest-half", "nearest-integer")


def partial_correlation_from_values(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    """Correlation of X and Y with Z removed from both.

    Computed from the three pairwise correlations; equals the correlation of
    the residuals of X on Z with the residuals of Y on Z.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (x.shape == y.shape == z.shape) or x.ndim != 1:
        raise ArityMismatchError("x, y, z must be 1-d vectors of equal length")
    if x.size < 4:
        raise InsufficientDataError(f"partial correlation needs n >= 4, got {x.size}")
    r_xy = pearson_from_values(x, y)
    r_xz = pearson_from_values(x, z)
    r_yz = pearson_from_values(y, z)
    if abs(r_xz) == 1.0 or abs(r_yz) == 1.0:
        raise PerfectCollinearityError(
            "control column is perfectly collinear with a primary column"
        )
    return (r_xy - r_xz * r_yz) / np.sqrt((1.0 - r_xz**2) * (1.0 - r_yz**2))


def semipartial_correlation_from_values(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    """Correlation of Y with the part of X not explained by Z.

    Z is removed from X only; equals the correlation of Y with the residual
    of X on Z. Its magnitude never exceeds the partial correlation's.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (x.shape == y.shape == z.shape) or x.ndim != 1:
        raise ArityMismatchError("x, y, z must be 1-d vectors of equal length")
    if x.size < 4:
        raise InsufficientDataError(f"semi-partial correlation needs n >= 4, got {x.size}")
    r_xy = pearson_from_values(x, y)
    r_xz = pearson_from_values(x, z)
    r_yz = pearson_from_values(y, z)
    if abs(r_xz) == 1.0:
        raise PerfectCollinearityError(
            "control column is perfectly collinear with the adjusted column"
        )
    return (r_xy - r_xz * r_yz) / np.sqrt(1.0 - r_xz**2)


def _three_columns(aligned: AlignedScores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(aligned.columns) != 3:
        raise ArityMismatchError(
            f"expected exactly three columns (x, y, control), got {len(aligned.columns)}"
        )
    a, b, c = aligned.source_ids
    return aligned.column(a), aligned.column(b), aligned.column(c)


def partial_correlation(aligned: AlignedScores) -> float:
    """Partial correlation over a three-column alignment ordered (X, Y, Z)."""
    x, y, z = _three_columns(aligned)
    return partial_correlation_from_values(x, y, z)


def semipartial_correlation(aligned: AlignedScores) -> float:
    """Semi-partial correlation over (X, Y, Z): Z removed from X only."""
    x, y, z = _three_columns(aligned)
    return semipartial_correlation_from_values(x, y, z)


@dataclass(frozen=True)
class CorrelationReport:
    """Full, partial, and semi-partial correlation of X and Y given Z."""

    x: str
    y: str
    control: str
    n: int
    r_xy: float
    r_xy_given_z: float
    r_x_given_z_with_y: float

    def to_json_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "control": self.control,
            "n": self.n,
            "r_xy": self.r_xy,
            "partial": self.r_xy_given_z,
            "semipartial": self.r_x_given_z_with_y,
        }


def correlation_report(aligned: AlignedScores) -> CorrelationReport:
    """All three coefficients for a (X, Y, Z) alignment in one report."""
    x, y, z = _three_columns(aligned)
    x_id, y_id, z_id = aligned.source_ids
    return CorrelationReport(
        x=x_id,
        y=y_id,
        control=z_id,
        n=aligned.n,
        r_xy=pearson_from_values(x, y),
        r_xy_given_z=partial_correlation_from_values(x, y, z),
        r_x_given_z_with_y=semipartial_correlation_from_values(x, y, z),
    )


@dataclass(frozen=True)
class CompositeSpec:
    """Recipe for one contributory composite score.

    ``weights`` is either the literal string ``"equal"`` (resolved to 1/m per
    component with zero intercept) or one finite weight per component.
    ``rounding`` applies after the weighted sum; ties round half to even.
    """

    components: tuple[str, ...]
    weights: tuple[float, ...] | str = "equal"
    intercept: float = 0.0
    rounding: str = "none"
    label: str = ""

    def __post_init__(self) -> None:
        components = tuple(self.components)
        if not components:
            raise UnknownComponentError("composite needs at least one component")
        if len(set(components)) != len(components):
            raise UnknownComponentError(f"duplicate components: {list(components)}")
        object.__setattr__(self, "components", components)
        if self.rounding not in ROUNDINGS:
            raise ArityMismatchError(
                f"unknown rounding {self.rounding!r}, expected one of {ROUNDINGS}"
            )
        if isinstance(self.weights, str):
            if self.weights != "equal":
                raise ArityMismatchError(
                    f"weights must be 'equal' or a vector, got {self.weights!r}"
                )
            if self.intercept != 0.0:
                raise ArityMismatchError("equal-weights composites have intercept 0")
        else:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(components):
                raise ArityMismatchError(
                    f"{len(components)} components but {len(weights)} weights"
                )
            if not all(np.isfinite(weights)) or not np.isfinite(self.intercept):
                raise ArityMismatchError("weights and intercept must be finite")
            object.__setattr__(self, "weights", weights)
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        joined = "+".join(self.components)
        if self.weights == "equal":
            return f"mean({joined})"
        return f"blend({joined})"

    def resolved_weights(self) -> tuple[float, ...]:
        if self.weights == "equal":
            return tuple(1.0 / len(self.components) for _ in self.components)
        return self.weights  # type: ignore[return-value]

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "components": list(self.components),
            "weights": list(self.resolved_weights()),
            "intercept": self.intercept,
            "rounding": self.rounding,
        }


def build_composite(aligned: AlignedScores, spec: CompositeSpec) -> np.ndarray:
    """Per-response weighted sum of the component columns, plus intercept,
    then the requested rounding. Real-valued unless rounding is requested."""
    missing = [c for c in spec.components if c not in aligned.source_ids]
    if missing:
        raise UnknownComponentError(f"components not in alignment: {missing}")
    weights = spec.resolved_weights()
    values = spec.intercept + sum(
        w * aligned.column(c) for w, c in zip(weights, spec.components)
    )
    if spec.rounding == "nearest-half":
        values = np.rint(values * 2.0) / 2.0
    elif spec.rounding == "nearest-integer":
        values = np.rint(values)
    return np.asarray(values, dtype=float)


def blp_weights(aligned: AlignedScores, rounding: str = "none") -> CompositeSpec:
    """Fit the best linear predictor of the last column from the others.

    Ordinary least squares solved by the normal equations (partial-pivoting
    LU factorization), which is ample at this column count. The returned spec
    reproduces the fit when applied to the same alignment.
    """
    if len(aligned.columns) < 2:
        raise ArityMismatchError("need at least one component column plus the target")
    *component_ids, target_id = aligned.source_ids
    m = len(component_ids)
    if aligned.n <= m + 1:
        raise InsufficientDataError(
            f"need more than {m + 1} rows to fit {m} weights plus intercept, got {aligned.n}"
        )
    design = np.column_stack(
        [np.ones(aligned.n)] + [aligned.column(c) for c in component_ids]
    )
    target = aligned.column(target_id)
    gram = design.T @ design
    moment = design.T @ target
    try:
        solution = np.linalg.solve(gram, moment)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError(
            f"component columns are linearly dependent: {exc}"
        ) from exc
    return CompositeSpec(
        components=tuple(component_ids),
        weights=tuple(float(w) for w in solution[1:]),
        intercept=float(solution[0]),
        rounding=rounding,
        label=f"blp({'+'.join(component_ids)} -> {target_id})",
    )


@dataclass(frozen=True)
class CompositeRow:
    """One composite's correlation with the benchmark rating."""

    label: str
    r: float | None
    status: str
    flagged: bool


@dataclass(frozen=True)
class CompositeEvaluation:
    """Candidate composites lined up against the benchmark pair correlation.

    ``pair_r`` is the correlation between the benchmark rating and the second
    rating of the same responses, the level a trustworthy scorer should
    approach. A composite is flagged when its correlation with the benchmark
    falls more than ``margin`` below ``pair_r``.
    """

    benchmark: str
    pair_with: str
    pair_r: float
    n: int
    margin: float
    rows: tuple[CompositeRow, ...]

    @property
    def any_flag(self) -> bool:
        return any(row.flagged for row in self.rows)

    def to_json_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "pair_with": self.pair_with,
            "pair_r": self.pair_r,
            "n": self.n,
            "margin": self.margin,
            "rows": [
                {"label": r.label, "r": r.r, "status": r.status, "flagged": r.flagged}
                for r in self.rows
            ],
            "any_flag": self.any_flag,
        }

    def to_markdown(self) -> str:
        lines = [
            f"## Composite evaluation vs {self.benchmark} (n = {self.n})",
            "",
            f"Benchmark pair r({self.benchmark}, {self.pair_with}) = {self.pair_r:.4f}; "
            f"flag when a composite falls more than {self.margin:.2f} below it.",
            "",
            "| composite | r | flag |",
            "|---|---|---|",
        ]
        for row in self.rows:
            shown = f"{row.r:.4f}" if row.r is not None else row.status
            lines.append(f"| {row.label} | {shown} | {'FLAG' if row.flagged else ''} |")
        return "\n".join(lines) + "\n"


def composite_evaluation(
    aligned: AlignedScores,
    specs: Sequence[CompositeSpec],
    benchmark: str,
    pair_with: str,
    margin: float = 0.10,
) -> CompositeEvaluation:
    """Correlate each composite with the benchmark rating and flag the ones
    that fall more than ``margin`` below the benchmark pair correlation.

    ``pair_with`` names the second, independent rating of the benchmark
    construct; both ids are echoed in the report so the pairing choice is
    explicit.
    """
    bench = aligned.column(benchmark)
    pair = aligned.column(pair_with)
    pair_r = pearson_from_values(bench, pair)

    rows = []
    for spec in specs:
        composite = build_composite(aligned, spec)
        try:
            r = pearson_from_values(composite, bench)
            status = "ok"
        except UndefinedStatisticError as exc:
            r = None
            status = exc.status
        flagged = r is not None and r < pair_r - margin
        rows.append(CompositeRow(label=spec.label, r=r, status=status, flagged=flagged))

    return CompositeEvaluation(
        benchmark=benchmark,
        pair_with=pair_with,
        pair_r=pair_r,
        n=aligned.n,
        margin=margin,
        rows=tuple(rows),
    )
