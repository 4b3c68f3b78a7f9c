"""Subgroup fairness analysis: per-group agreement statistics, threshold
flagging, and empirical-Bayes stabilization of small-group mean differences.

A machine scorer can match human ratings overall while drifting for a
particular subgroup, so the core move is to recompute the same statistics the
agreement module reports, restricted to each group of a demographic facet,
and flag groups whose standardized mean difference or agreement drop exceeds
configured thresholds.

Raw standardized mean differences from small groups are noisy; flagging them
directly produces false alarms, and ignoring them leaves small groups
unassessed. The compromise here shrinks each small group's value toward the
precision-weighted grand mean, by an amount governed by how much true
between-group spread the data supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyAlignmentError,
    InsufficientDataError,
    TooFewGroupsError,
    UndefinedStatisticError,
    UnknownFacetError,
)
from .scoredata import Dataset, align
from .agreement import agreement_rates, confusion_matrix, smd, weighted_kappa


@dataclass(frozen=True)
class GroupRow:
    """Agreement statistics for one group (or the overall pool).

    Statistics undefined for the group carry None plus a status string;
    groups with fewer than two aligned responses are wholly insufficient.
    """

    label: str
    n: int
    smd: float | None
    smd_status: str
    qwk: float | None
    qwk_status: str
    exact: float | None
    exact_status: str

    def to_json_dict(self) -> dict:
        out = {
            "label": self.label,
            "n": self.n,
            "smd_status": self.smd_status,
            "qwk_status": self.qwk_status,
            "exact_status": self.exact_status,
        }
        for name in ("smd", "qwk", "exact"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class SubgroupMetrics:
    """Per-group and overall human-vs-machine statistics for one facet."""

    facet: str
    human_source: str
    machine_source: str
    groups: tuple[GroupRow, ...]
    overall: GroupRow

    def group(self, label: str) -> GroupRow:
        for row in self.groups:
            if row.label == label:
                return row
        raise UnknownFacetError(f"no group {label!r} under facet {self.facet!r}")

    def to_json_dict(self) -> dict:
        return {
            "facet": self.facet,
            "human_source": self.human_source,
            "machine_source": self.machine_source,
            "groups": [g.to_json_dict() for g in self.groups],
            "overall": self.overall.to_json_dict(),
        }

    def to_markdown(self) -> str:
        def cell(value: float | None, status: str) -> str:
            return f"{value:.4f}" if value is not None else status

        lines = [
            f"## Subgroup metrics by {self.facet}: "
            f"{self.machine_source} vs {self.human_source}",
            "",
            "| group | n | smd | qwk | exact |",
            "|---|---|---|---|---|",
        ]
        for row in (*self.groups, self.overall):
            lines.append(
                f"| {row.label} | {row.n} | {cell(row.smd, row.smd_status)} "
                f"| {cell(row.qwk, row.qwk_status)} | {cell(row.exact, row.exact_status)} |"
            )
        return "\n".join(lines) + "\n"


def _group_row(label: str, human: np.ndarray, machine: np.ndarray, scale) -> GroupRow:
    n = human.size
    if n < 2:
        return GroupRow(
            label=label, n=n,
            smd=None, smd_status="insufficient_n",
            qwk=None, qwk_status="insufficient_n",
            exact=None, exact_status="insufficient_n",
        )
    matrix = confusion_matrix(human.astype(int), machine.astype(int), scale)
    exact = agreement_rates(matrix).exact
    try:
        qwk_value: float | None = weighted_kappa(matrix, "quadratic")
        qwk_status = "ok"
    except UndefinedStatisticError as exc:
        qwk_value = None
        qwk_status = exc.status
    try:
        smd_value: float | None = smd(human.astype(float), machine.astype(float))
        smd_status = "ok"
    except UndefinedStatisticError as exc:
        smd_value = None
        smd_status = exc.status
    return GroupRow(
        label=label, n=n,
        smd=smd_value, smd_status=smd_status,
        qwk=qwk_value, qwk_status=qwk_status,
        exact=exact, exact_status="ok",
    )


def subgroup_metrics(
    dataset: Dataset, facet: str, human: str, machine: str
) -> SubgroupMetrics:
    """Human-vs-machine statistics per group of ``facet``, plus overall.

    Groups are the facet's observed values, sorted. Each group's statistics
    are computed on the listwise-aligned records within that group, via the
    same routines the agreement module uses, so a one-group facet reproduces
    the overall row exactly.
    """
    if facet not in dataset.facets():
        raise UnknownFacetError(f"facet {facet!r} appears on no record")
    overall_aligned = align(dataset, [human, machine])
    overall = _group_row(
        "overall",
        overall_aligned.column(human),
        overall_aligned.column(machine),
        dataset.scale,
    )

    labels = sorted(
        {r.groups[facet] for r in dataset.records if facet in r.groups}
    )
    rows = []
    for label in labels:
        try:
            group_aligned = align(
                dataset,
                [human, machine],
                record_filter=lambda r, want=label: r.groups.get(facet) == want,
            )
        except EmptyAlignmentError:
            rows.append(_group_row(label, np.array([]), np.array([]), dataset.scale))
            continue
        rows.append(
            _group_row(
                label,
                group_aligned.column(human),
                group_aligned.column(machine),
                dataset.scale,
            )
        )
    return SubgroupMetrics(
        facet=facet,
        human_source=human,
        machine_source=machine,
        groups=tuple(rows),
        overall=overall,
    )


def eb_shrink(groups: Sequence[tuple[float, int]]) -> list[float]:
    """Shrink per-group standardized mean differences toward the grand mean.

    Method-of-moments empirical Bayes: each group's sampling variance is
    approximated as (1/n)(1 + smd^2/2); the grand mean is the
    precision-weighted mean; the between-group variance is the
    precision-weighted spread around it minus the average sampling variance,
    floored at zero. Each shrunken value is the sampling-variance-weighted
    convex combination of the raw value and the grand mean, so it always lies
    between them. Zero between-group variance collapses every value to the
    grand mean.
    """
    if len(groups) < 2:
        raise TooFewGroupsError(f"shrinkage needs at least 2 groups, got {len(groups)}")
    values = np.asarray([g[0] for g in groups], dtype=float)
    counts = np.asarray([g[1] for g in groups], dtype=float)
    if np.any(counts < 2):
        raise InsufficientDataError("every group needs n >= 2 for shrinkage")

    v = (1.0 / counts) * (1.0 + values**2 / 2.0)
    w = 1.0 / v
    grand_mean = float((w * values).sum() / w.sum())
    between = float((w * (values - grand_mean) ** 2).sum() / w.sum())
    tau_sq = max(0.0, between - float(v.mean()))
    shrunken = (tau_sq * values + v * grand_mean) / (tau_sq + v)
    return [float(s) for s in shrunken]


@dataclass(frozen=True)
class FlaggedGroup:
    label: str
    reasons: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {"label": self.label, "reasons": list(self.reasons)}


@dataclass(frozen=True)
class FairnessFlagReport:
    """Outcome of threshold rules applied to subgroup metrics.

    The rules and the exact values they saw are echoed per flag so a flag is
    auditable from the report alone. Groups below ``min_n`` are judged on the
    shrunken mean difference and annotated; their annotation appears whether
    or not they are flagged.
    """

    facet: str
    t_smd: float
    t_qwk_drop: float
    min_n: int
    flags: tuple[FlaggedGroup, ...]
    annotations: dict[str, str]
    shrunken_smd: dict[str, float]

    @property
    def any_flag(self) -> bool:
        return bool(self.flags)

    def to_json_dict(self) -> dict:
        return {
            "facet": self.facet,
            "thresholds": {
                "t_smd": self.t_smd,
                "t_qwk_drop": self.t_qwk_drop,
                "min_n": self.min_n,
            },
            "flags": [f.to_json_dict() for f in self.flags],
            "annotations": dict(self.annotations),
            "shrunken_smd": dict(self.shrunken_smd),
            "any_flag": self.any_flag,
        }

    def to_markdown(self) -> str:
        lines = [
            f"## Fairness flags for facet {self.facet}",
            "",
            f"Rules: |smd| > {self.t_smd:.2f} (shrunken below n = {self.min_n}); "
            f"overall qwk minus group qwk > {self.t_qwk_drop:.2f}.",
            "",
        ]
        if not self.flags:
            lines.append("No group flagged.")
        else:
            for flag in self.flags:
                lines.append(f"- **{flag.label}**: " + "; ".join(flag.reasons))
        if self.annotations:
            lines.append("")
            for label in sorted(self.annotations):
                lines.append(f"- {label}: {self.annotations[label]}")
        return "\n".join(lines) + "\n"


def fairness_flags(
    metrics: SubgroupMetrics,
    t_smd: float = 0.15,
    t_qwk_drop: float = 0.10,
    min_n: int = 50,
) -> FairnessFlagReport:
    """Apply the threshold rules to every group row.

    A group is flagged when the magnitude of its standardized mean difference
    exceeds ``t_smd``, or when the overall quadratic kappa exceeds the
    group's by more than ``t_qwk_drop``. Groups with n below ``min_n`` are
    judged on the empirical-Bayes shrunken value instead of the raw one,
    computed across all groups with a defined raw value.
    """
    eligible = [
        (row.label, row.smd, row.n) for row in metrics.groups if row.smd is not None
    ]
    shrunken: dict[str, float] = {}
    annotations: dict[str, str] = {}
    small = [row.label for row in metrics.groups if row.smd is not None and row.n < min_n]
    if small and len(eligible) >= 2:
        values = eb_shrink([(s, n) for _, s, n in eligible])
        by_label = dict(zip((label for label, _, _ in eligible), values))
        for label in small:
            shrunken[label] = by_label[label]
            annotations[label] = (
                f"small-n, shrunken: n = {metrics.group(label).n} < {min_n}, "
                f"raw smd {metrics.group(label).smd:+.4f} shrunken to {shrunken[label]:+.4f}"
            )
    elif small:
        for label in small:
            annotations[label] = (
                f"small-n, raw: n = {metrics.group(label).n} < {min_n} but too few "
                "groups to shrink; raw smd used"
            )

    overall_qwk = metrics.overall.qwk
    flags = []
    for row in metrics.groups:
        reasons = []
        if row.smd is not None:
            basis = "shrunken" if row.label in shrunken else "raw"
            value = shrunken.get(row.label, row.smd)
            if abs(value) > t_smd:
                reasons.append(
                    f"|smd| {abs(value):.4f} > {t_smd:.2f} ({basis}, n = {row.n})"
                )
        if overall_qwk is not None and row.qwk is not None:
            drop = overall_qwk - row.qwk
            if drop > t_qwk_drop:
                reasons.append(
                    f"qwk drop {drop:.4f} > {t_qwk_drop:.2f} "
                    f"(overall {overall_qwk:.4f}, group {row.qwk:.4f}, n = {row.n})"
                )
        if reasons:
            flags.append(FlaggedGroup(label=row.label, reasons=tuple(reasons)))

    return FairnessFlagReport(
        facet=metrics.facet,
        t_smd=t_smd,
        t_qwk_drop=t_qwk_drop,
        min_n=min_n,
        flags=tuple(flags),
        annotations=annotations,
        shrunken_smd=shrunken,
    )
