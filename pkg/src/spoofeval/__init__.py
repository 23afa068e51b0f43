"""Evaluation toolkit for spoofing countermeasures in speaker verification.

The package covers the full pipeline: trial protocols and score files
(:mod:`~spoofeval.trialdata`), equal error rate and the ASV-constrained
tandem detection cost (:mod:`~spoofeval.metrics`), CQCC/LFCC feature
extraction (:mod:`~spoofeval.frontends`), diagonal-covariance GMM
classifiers (:mod:`~spoofeval.gmm`), logistic score fusion
(:mod:`~spoofeval.fusion`), and pooled/per-condition result analysis
(:mod:`~spoofeval.analysis`).  The ``spoofeval`` console script exposes
the same functionality as subcommands.
"""

from .analysis import (
    BoxStats,
    ConditionResult,
    PooledResult,
    ReportRow,
    aid_category,
    box_stats,
    condition_breakdown,
    eid_category,
    group_report,
    grouping_by,
    max_min_tdcf,
    pooled_summary,
    repool,
)
from .frontends import (
    AudioBuffer,
    CqccConfig,
    CqccExtractor,
    LfccConfig,
    LfccExtractor,
    cqcc,
    lfcc,
    load_wav,
    read_features,
    save_wav,
    write_features,
)
from .fusion import (
    FusionModel,
    LogisticFusion,
    ScoreMatrix,
    apply_fusion,
    average_fuse,
    combine_score_tables,
    load_fusion_model,
    normalize_by_bonafide_std,
    oracle_sweep,
    parse_score_matrix,
    save_fusion_model,
    serialize_score_matrix,
    train_lr,
)
from .gmm import (
    DiagonalGmm,
    EmConfig,
    Gmm,
    avg_log_likelihood,
    llr_score,
    load_gmm,
    save_gmm,
    train_em,
)
from .metrics import (
    AsvErrorRates,
    CostModel,
    DEFAULT_COST_MODEL,
    ErrorCurve,
    TdcfCoeffs,
    TdcfResult,
    asv_operating_point,
    eer,
    error_curve,
    min_tdcf,
    normalize_bounds_check,
    tdcf_coefficients,
)
from .trialdata import (
    AsvKey,
    CmKey,
    Condition,
    ScoreSet,
    TrialRecord,
    format_score,
    join,
    parse_protocol,
    parse_scores,
    serialize_protocol,
    serialize_scores,
)

__version__ = "0.1.0"

__all__ = [
    "AsvErrorRates",
    "AsvKey",
    "AudioBuffer",
    "BoxStats",
    "CmKey",
    "Condition",
    "ConditionResult",
    "CostModel",
    "CqccConfig",
    "CqccExtractor",
    "DEFAULT_COST_MODEL",
    "DiagonalGmm",
    "EmConfig",
    "ErrorCurve",
    "FusionModel",
    "Gmm",
    "LfccConfig",
    "LfccExtractor",
    "LogisticFusion",
    "PooledResult",
    "ReportRow",
    "ScoreMatrix",
    "ScoreSet",
    "TdcfCoeffs",
    "TdcfResult",
    "TrialRecord",
    "aid_category",
    "apply_fusion",
    "asv_operating_point",
    "average_fuse",
    "avg_log_likelihood",
    "box_stats",
    "combine_score_tables",
    "condition_breakdown",
    "cqcc",
    "eer",
    "eid_category",
    "error_curve",
    "format_score",
    "group_report",
    "grouping_by",
    "join",
    "lfcc",
    "llr_score",
    "load_fusion_model",
    "load_gmm",
    "load_wav",
    "max_min_tdcf",
    "min_tdcf",
    "normalize_bounds_check",
    "normalize_by_bonafide_std",
    "oracle_sweep",
    "parse_protocol",
    "parse_score_matrix",
    "parse_scores",
    "pooled_summary",
    "read_features",
    "repool",
    "save_fusion_model",
    "save_gmm",
    "save_wav",
    "serialize_protocol",
    "serialize_score_matrix",
    "serialize_scores",
    "tdcf_coefficients",
    "train_em",
    "train_lr",
    "write_features",
]
