"""Evaluation toolkit for constructed-response scoring systems.

Submodules, roughly in dependency order:

* :mod:`crscore.scoredata` — score data model, CSV/manifest ingest, alignment
* :mod:`crscore.agreement` — confusion matrix, agreement rates, kappa family,
  Pearson correlation, standardized mean difference
* :mod:`crscore.reliability` — rater error, PRMSE, repeat-run consistency,
  trend-set drift monitoring
* :mod:`crscore.composites` — partial/semi-partial correlations and
  contributory composite scores (equal weights, custom weights, BLP)
* :mod:`crscore.fairness` — subgroup metric breakdowns, empirical-Bayes
  shrinkage, fairness flags
* :mod:`crscore.llm` — LLM scoring harness (prompts, parsing, HTTP backend,
  batch and repeat-run drivers)
* :mod:`crscore.ledger` — validity-evidence catalog, ledger, gap reports
* :mod:`crscore.cli` — command-line front end

The names most analyses need are re-exported here; the harness keeps its own
namespace under :mod:`crscore.llm`.
"""

from .errors import (
    ArityMismatchError,
    BackendError,
    BackendHttpError,
    BackendTimeoutError,
    ConfigInvalidError,
    CrScoreError,
    DegenerateMarginalsError,
    DuplicateResponseIdError,
    DuplicateScoreError,
    EmptyAlignmentError,
    EmptySectionError,
    InsufficientDataError,
    InsufficientDoublesError,
    InsufficientRunsError,
    InvalidScaleError,
    LengthMismatchError,
    ManifestError,
    MissingAttachmentError,
    MissingColumnError,
    MixedRatingDesignError,
    NonIntegerScoreError,
    NoteRequiredError,
    NoJsonFoundError,
    ParseFailureError,
    PerfectCollinearityError,
    ReasonsMalformedError,
    ScoreMissingError,
    ScoreOutOfScaleError,
    SingularDesignError,
    TooFewGroupsError,
    TrendSetMismatchError,
    UndefinedStatisticError,
    UnexpectedColumnError,
    UnknownComponentError,
    UnknownFacetError,
    UnknownItemError,
    UnknownSourceError,
    ZeroTrueScoreVarianceError,
    ZeroVarianceError,
)
from .scoredata import (
    LATEST,
    AlignedScores,
    ConditionalDistribution,
    Dataset,
    Manifest,
    RatingSource,
    ResponseRecord,
    ScoreEntry,
    ScoreScale,
    SourceKind,
    align,
    conditional_distribution,
    export_csv,
    export_manifest,
    ingest_csv,
    load_manifest,
    manifest_from_dict,
    session_runs,
)
from .agreement import (
    AgreementRates,
    AgreementReport,
    ConfusionMatrix,
    agreement_rates,
    agreement_report,
    confusion_matrix,
    pearson_from_values,
    pearson_r,
    smd,
    weighted_kappa,
)
from .reliability import (
    ConsistencyReport,
    PrmseEstimate,
    RaterErrorEstimate,
    TrendReport,
    consistency_run_compare,
    prmse,
    rater_error,
    rater_error_from_values,
    trend_monitor,
)
from .composites import (
    CompositeEvaluation,
    CompositeSpec,
    CorrelationReport,
    blp_weights,
    build_composite,
    composite_evaluation,
    correlation_report,
    partial_correlation,
    partial_correlation_from_values,
    semipartial_correlation,
    semipartial_correlation_from_values,
)
from .fairness import (
    FairnessFlagReport,
    SubgroupMetrics,
    eb_shrink,
    fairness_flags,
    subgroup_metrics,
)
from .ledger import (
    Catalog,
    EvidenceItem,
    EvidenceLedger,
    EvidenceType,
    LedgerEntry,
    SystemKind,
    builtin_catalog,
    gap_report,
    load_ledger,
    new_ledger,
    render_markdown,
    required_items,
    save_ledger,
    set_entry,
)
from .reports import ReportDocument, write_report

__version__ = "0.1.0"

__all__ = [
    "AgreementRates",
    "AgreementReport",
    "AlignedScores",
    "ArityMismatchError",
    "BackendError",
    "BackendHttpError",
    "BackendTimeoutError",
    "Catalog",
    "ConfigInvalidError",
    "DegenerateMarginalsError",
    "DuplicateResponseIdError",
    "DuplicateScoreError",
    "EmptyAlignmentError",
    "EmptySectionError",
    "InsufficientDataError",
    "InsufficientDoublesError",
    "InsufficientRunsError",
    "InvalidScaleError",
    "LengthMismatchError",
    "ManifestError",
    "MissingAttachmentError",
    "MissingColumnError",
    "MixedRatingDesignError",
    "NonIntegerScoreError",
    "NoteRequiredError",
    "NoJsonFoundError",
    "ParseFailureError",
    "PerfectCollinearityError",
    "ReasonsMalformedError",
    "ScoreMissingError",
    "ScoreOutOfScaleError",
    "SingularDesignError",
    "TooFewGroupsError",
    "TrendSetMismatchError",
    "UndefinedStatisticError",
    "UnexpectedColumnError",
    "UnknownComponentError",
    "UnknownFacetError",
    "UnknownItemError",
    "UnknownSourceError",
    "ZeroTrueScoreVarianceError",
    "ZeroVarianceError",
    "CompositeEvaluation",
    "CompositeSpec",
    "ConditionalDistribution",
    "ConfusionMatrix",
    "ConsistencyReport",
    "CorrelationReport",
    "CrScoreError",
    "Dataset",
    "EvidenceItem",
    "EvidenceLedger",
    "EvidenceType",
    "FairnessFlagReport",
    "LATEST",
    "LedgerEntry",
    "Manifest",
    "PrmseEstimate",
    "RaterErrorEstimate",
    "RatingSource",
    "ReportDocument",
    "ResponseRecord",
    "ScoreEntry",
    "ScoreScale",
    "SourceKind",
    "SubgroupMetrics",
    "SystemKind",
    "TrendReport",
    "agreement_rates",
    "agreement_report",
    "align",
    "blp_weights",
    "build_composite",
    "builtin_catalog",
    "composite_evaluation",
    "conditional_distribution",
    "confusion_matrix",
    "consistency_run_compare",
    "correlation_report",
    "eb_shrink",
    "export_csv",
    "export_manifest",
    "fairness_flags",
    "gap_report",
    "ingest_csv",
    "load_ledger",
    "load_manifest",
    "manifest_from_dict",
    "new_ledger",
    "partial_correlation",
    "partial_correlation_from_values",
    "pearson_from_values",
    "pearson_r",
    "prmse",
    "rater_error",
    "rater_error_from_values",
    "render_markdown",
    "required_items",
    "save_ledger",
    "session_runs",
    "semipartial_correlation",
    "semipartial_correlation_from_values",
    "set_entry",
    "smd",
    "subgroup_metrics",
    "trend_monitor",
    "weighted_kappa",
    "write_report",
]
