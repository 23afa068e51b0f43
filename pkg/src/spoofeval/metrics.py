"""Detection error trade-off, EER, and the ASV-constrained tandem cost.

Score convention, fixed across the toolkit: higher scores mean more
positive-like (bona fide for countermeasures, target for speaker
verification), and a trial is accepted exactly when ``score >= threshold``.
No polarity auto-detection is performed anywhere.

The tandem detection cost of a countermeasure (CM) operating in front of a
fixed automatic-speaker-verification (ASV) system is, at CM threshold ``t``::

    tdcf(t) = (c0 + c1 * p_miss(t) + c2 * p_fa(t)) / (c0 + min(c1, c2))

where the denominator is the cost of an uninformative default CM that
accepts or rejects every trial.  ``min_tdcf`` minimizes this over all
candidate thresholds; ``c0 / (c0 + min(c1, c2))`` is the cost of an
error-free CM (the ASV floor) and lower-bounds the minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_nonempty_scores, check_positive, check_unit_interval
from .trialdata import AsvKey, ScoreSet


class CoefficientError(ValueError):
    """Raised when tandem-cost coefficients are inconsistent (negative)."""


class DegenerateCostError(CoefficientError):
    """Raised when the default-CM cost is zero and normalization is undefined."""


@dataclass(frozen=True)
class CostModel:
    """Class priors and decision costs for the tandem cost function.

    Priors must be in (0, 1) and sum to one; costs must be positive.
    """

    p_tar: float = 0.9405
    p_non: float = 0.0095
    p_spoof: float = 0.05
    c_miss: float = 1.0
    c_fa: float = 10.0
    c_fa_spoof: float = 10.0

    def __post_init__(self):
        for name in ("p_tar", "p_non", "p_spoof"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        total = self.p_tar + self.p_non + self.p_spoof
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"priors must sum to 1 (got {total!r})")
        for name in ("c_miss", "c_fa", "c_fa_spoof"):
            check_positive(getattr(self, name), name)


DEFAULT_COST_MODEL = CostModel()


@dataclass(frozen=True)
class AsvErrorRates:
    """Miss, false-alarm, and spoof false-alarm rates of the fixed ASV system."""

    p_miss_asv: float
    p_fa_asv: float
    p_fa_spoof_asv: float

    def __post_init__(self):
        for name in ("p_miss_asv", "p_fa_asv", "p_fa_spoof_asv"):
            check_unit_interval(getattr(self, name), name)


@dataclass(frozen=True)
class TdcfCoeffs:
    """Coefficients of the tandem cost: constant, miss, and false-alarm terms.

    Construction rejects negative coefficients (a pathological ASV operating
    point) and a zero default-CM cost (normalization undefined).
    """

    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            value = getattr(self, name)
            if value < 0.0:
                raise CoefficientError(
                    f"{name} is negative ({value!r}); the ASV operating point "
                    "is inconsistent with the cost model"
                )
        if self.default_cost == 0.0:
            raise DegenerateCostError(
                "default-CM cost c0 + min(c1, c2) is zero; "
                "normalized tandem cost is undefined"
            )

    @property
    def default_cost(self) -> float:
        return self.c0 + min(self.c1, self.c2)

    @property
    def asv_floor(self) -> float:
        return self.c0 / self.default_cost


@dataclass(frozen=True)
class ErrorCurve:
    """Miss/false-alarm rates over all candidate thresholds.

    Thresholds are the sorted distinct pooled scores with ``-inf``/``+inf``
    sentinels, so the curve covers accept-all through reject-all.  ``p_miss``
    is non-decreasing and ``p_fa`` non-increasing along the thresholds.
    """

    thresholds: np.ndarray = field(repr=False)
    p_miss: np.ndarray = field(repr=False)
    p_fa: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("thresholds", "p_miss", "p_fa"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.thresholds) == len(self.p_miss) == len(self.p_fa)):
            raise ValueError("curve arrays must have equal length")
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly ascending")
        if np.any(np.diff(self.p_miss) < 0) or np.any(np.diff(self.p_fa) > 0):
            raise ValueError("p_miss must be non-decreasing and p_fa non-increasing")


@dataclass(frozen=True)
class TdcfResult:
    """Minimum normalized tandem cost with its threshold and the ASV floor.

    Valid results satisfy ``asv_floor <= min_tdcf_norm <= 1``; use
    :func:`normalize_bounds_check` to verify.
    """

    min_tdcf_norm: float
    threshold: float
    asv_floor: float


def error_curve(positive_scores, negative_scores) -> ErrorCurve:
    """Compute miss/false-alarm rates at every distinct pooled score.

    ``p_miss(t)`` is the fraction of positives strictly below ``t`` and
    ``p_fa(t)`` the fraction of negatives at or above ``t`` (accept iff
    ``score >= t``).  Candidate thresholds are the observed scores plus
    infinite sentinels; any minimum of a piecewise-constant cost over
    thresholds is attained on this grid.
    """
    pos = np.sort(as_nonempty_scores(positive_scores, "positive_scores"))
    neg = np.sort(as_nonempty_scores(negative_scores, "negative_scores"))
    pooled = np.unique(np.concatenate([pos, neg]))
    thresholds = np.concatenate(([-np.inf], pooled, [np.inf]))
    n_miss = np.searchsorted(pos, thresholds, side="left")
    n_accept_neg = neg.size - np.searchsorted(neg, thresholds, side="left")
    return ErrorCurve(
        thresholds=thresholds,
        p_miss=n_miss / pos.size,
        p_fa=n_accept_neg / neg.size,
    )


def eer(curve: ErrorCurve) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Returns the exact crossing of ``p_miss`` and ``p_fa`` when one exists on
    the threshold grid; otherwise linearly interpolates between the two
    adjacent operating points straddling ``p_miss == p_fa`` and returns
    their common value.  When the straddling segment ends at an infinite
    sentinel the finite endpoint is reported as the threshold.
    """
    diff = curve.p_miss - curve.p_fa
    idx = int(np.argmax(diff >= 0.0))  # first non-negative; exists (diff ends at +1)
    if diff[idx] == 0.0:
        return float(curve.p_miss[idx]), float(curve.thresholds[idx])
    m0, f0 = curve.p_miss[idx - 1], curve.p_fa[idx - 1]
    m1, f1 = curve.p_miss[idx], curve.p_fa[idx]
    span = (m1 - m0) + (f0 - f1)  # strictly positive: diff increases across idx
    t = (f0 - m0) / span
    value = float(m0 + t * (m1 - m0))
    lo, hi = curve.thresholds[idx - 1], curve.thresholds[idx]
    if np.isinf(lo):
        threshold = float(hi)
    elif np.isinf(hi):
        threshold = float(lo)
    else:
        threshold = float(lo + t * (hi - lo))
    return value, threshold


def asv_operating_point(asv_scores: ScoreSet) -> tuple[float, AsvErrorRates]:
    """Fix the ASV threshold at its target/nontarget EER and measure rates.

    The threshold comes from target (positive) versus nontarget (negative)
    scores only; the miss, false-alarm, and spoof false-alarm rates are then
    all measured at that fixed threshold.
    """
    target = asv_scores.asv_scores(AsvKey.TARGET)
    nontarget = asv_scores.asv_scores(AsvKey.NONTARGET)
    spoof = asv_scores.asv_scores(AsvKey.SPOOF)
    for name, arr in (("target", target), ("nontarget", nontarget), ("spoof", spoof)):
        if arr.size == 0:
            raise ValueError(f"ASV score set has no {name} trials")
    _, threshold = eer(error_curve(target, nontarget))
    rates = AsvErrorRates(
        p_miss_asv=float(np.mean(target < threshold)),
        p_fa_asv=float(np.mean(nontarget >= threshold)),
        p_fa_spoof_asv=float(np.mean(spoof >= threshold)),
    )
    return threshold, rates


def tdcf_coefficients(rates: AsvErrorRates, cost: CostModel = DEFAULT_COST_MODEL) -> TdcfCoeffs:
    """Derive the tandem-cost coefficients from ASV rates and the cost model.

    ``c0`` is the cost the ASV system incurs on bona fide trials, ``c1`` the
    residual miss cost available to the CM, and ``c2`` scales with the rate
    at which spoofs fool the ASV system.
    """
    c0 = cost.p_tar * cost.c_miss * rates.p_miss_asv + cost.p_non * cost.c_fa * rates.p_fa_asv
    c1 = cost.p_tar * cost.c_miss - c0
    c2 = cost.p_spoof * cost.c_fa_spoof * rates.p_fa_spoof_asv
    return TdcfCoeffs(c0=c0, c1=c1, c2=c2)


def min_tdcf(cm_bona_scores, cm_spoof_scores, coeffs: TdcfCoeffs) -> TdcfResult:
    """Minimum normalized tandem cost over all CM thresholds.

    Evaluates the normalized cost at every candidate threshold of the CM
    error curve (bona fide positive, spoof negative) and returns the
    minimum; ties break toward the smallest threshold.
    """
    curve = error_curve(cm_bona_scores, cm_spoof_scores)
    denom = coeffs.default_cost
    costs = (coeffs.c0 + coeffs.c1 * curve.p_miss + coeffs.c2 * curve.p_fa) / denom
    idx = int(np.argmin(costs))  # first occurrence: smallest threshold
    return TdcfResult(
        min_tdcf_norm=float(costs[idx]),
        threshold=float(curve.thresholds[idx]),
        asv_floor=coeffs.asv_floor,
    )


def normalize_bounds_check(result: TdcfResult) -> bool:
    """True iff the result lies in the valid range [ASV floor, 1]."""
    return bool(result.asv_floor <= result.min_tdcf_norm <= 1.0 + 1e-12)
