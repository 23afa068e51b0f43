"""Pooled and per-condition evaluation of countermeasure scores.

The pooled result fixes the verification operating point at the global
target/non-target equal-error threshold and evaluates the normalised
tandem cost over all trials.  A per-condition breakdown keeps that
threshold -- and every bona fide trial -- fixed, and recomputes only the
spoof-dependent quantities per group: the verification spoof
false-accept rate (hence the cost coefficients and the per-group floor)
and the countermeasure spoof errors.  Re-pooling any union of groups
under the global coefficients therefore reproduces the pooled numbers
exactly.

Groups come from trial metadata: the attack id, the full environment id,
or single characters of either (e.g. replay-environment ids are three
letters over {a, b, c} positionally encoding room size, reverberation
time, and talker-to-ASV distance; replay attack ids are two letters over
{A, B, C} encoding attacker-to-talker distance and replay-device
quality).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .metrics import (
    CostModel,
    DEFAULT_COST_MODEL,
    TdcfCoeffs,
    TdcfResult,
    asv_operating_point,
    eer,
    error_curve,
    min_tdcf,
    tdcf_coefficients,
)
from .trialdata import CmKey, ScoreSet, TrialRecord, format_score

__all__ = [
    "AnalysisError",
    "BoxStats",
    "ConditionResult",
    "PooledResult",
    "ReportRow",
    "EID_AXES",
    "AID_AXES",
    "box_stats",
    "eid_category",
    "aid_category",
    "grouping_by",
    "spoof_masks",
    "pooled_summary",
    "condition_breakdown",
    "max_min_tdcf",
    "repool",
    "group_report",
    "condition_csv",
    "condition_json",
    "report_csv",
    "report_json",
]

EID_AXES = {"S": 0, "T60": 1, "DS": 2}
AID_AXES = {"DA": 0, "Q": 1}

_TIE_REL_TOL = 1e-12


class AnalysisError(ValueError):
    """Raised for impossible groupings or inconsistent analysis inputs."""


@dataclass(frozen=True)
class BoxStats:
    """Five-number summary of a sample."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    n: int


def box_stats(values) -> BoxStats:
    """Five-number summary with linearly interpolated quartiles.

    Quartiles follow the inclusive convention (numpy's ``linear``
    percentile method), so the median of an odd-length sample is its
    middle value and of an even-length sample the midpoint of the two
    central values.  A single value yields five equal numbers.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("need at least one value")
    if not np.all(np.isfinite(arr)):
        raise ValueError("values must be finite")
    points = np.percentile(arr, [0, 25, 50, 75, 100], method="linear")
    return BoxStats(
        minimum=float(points[0]),
        q1=float(points[1]),
        median=float(points[2]),
        q3=float(points[3]),
        maximum=float(points[4]),
        n=arr.size,
    )


def eid_category(env_id: str, axis: str) -> str:
    """Single-letter category of a replay environment id.

    ``axis`` selects the position: 'S' (room size), 'T60' (reverberation
    time), or 'Ds' (talker-to-ASV distance).
    """
    key = axis.upper()
    if key not in EID_AXES:
        raise ValueError(f"unknown environment axis {axis!r}; expected one of S, T60, Ds")
    if not (isinstance(env_id, str) and len(env_id) == 3 and all(c in "abc" for c in env_id)):
        raise ValueError(f"environment id must be three letters over abc, got {env_id!r}")
    return env_id[EID_AXES[key]]


def aid_category(attack_id: str, axis: str) -> str:
    """Single-letter category of a replay attack id.

    ``axis`` selects the position: 'Da' (attacker-to-talker distance) or
    'Q' (replay-device quality).
    """
    key = axis.upper()
    if key not in AID_AXES:
        raise ValueError(f"unknown attack axis {axis!r}; expected one of Da, Q")
    if not (isinstance(attack_id, str) and len(attack_id) == 2 and all(c in "ABC" for c in attack_id)):
        raise ValueError(f"attack id must be two letters over ABC, got {attack_id!r}")
    return attack_id[AID_AXES[key]]


def _require_env(record: TrialRecord) -> str:
    env = record.condition.env_id
    if env is None:
        raise AnalysisError(
            f"trial {record.trial_id!r} has no environment id; cannot group by environment"
        )
    return env


def grouping_by(name: str) -> Callable[[TrialRecord], str]:
    """Resolve a grouping name to a key function over trial records.

    Supported names: 'attack', 'env', 'attack-env' (compound
    ``<attack>/<env>`` keys), the environment axes 's', 't60', 'ds', and
    the attack axes 'da', 'q'.
    """
    lowered = name.lower()
    if lowered == "attack":
        return lambda r: r.condition.attack_id
    if lowered == "env":
        return _require_env
    if lowered == "attack-env":
        return lambda r: f"{r.condition.attack_id}/{_require_env(r)}"
    if lowered in ("s", "t60", "ds"):
        return lambda r: eid_category(_require_env(r), lowered)
    if lowered in ("da", "q"):
        return lambda r: aid_category(r.condition.attack_id, lowered)
    raise ValueError(
        f"unknown grouping {name!r}; expected attack, env, attack-env, s, t60, ds, da, or q"
    )


def _resolve_grouping(grouping) -> Callable[[TrialRecord], str]:
    return grouping_by(grouping) if isinstance(grouping, str) else grouping


def spoof_masks(score_set: ScoreSet, grouping) -> dict[str, np.ndarray]:
    """Boolean index masks of the spoof trials in each group, key-sorted."""
    group_fn = _resolve_grouping(grouping)
    n = len(score_set.records)
    collected: dict[str, np.ndarray] = {}
    for idx, record in enumerate(score_set.records):
        if record.cm_key is not CmKey.SPOOF:
            continue
        key = group_fn(record)
        if not isinstance(key, str) or not key:
            raise AnalysisError(f"grouping produced invalid key {key!r} for {record.trial_id!r}")
        if key not in collected:
            collected[key] = np.zeros(n, dtype=bool)
        collected[key][idx] = True
    return {key: collected[key] for key in sorted(collected)}


@dataclass(frozen=True)
class PooledResult:
    """Pooled evaluation: tandem cost, CM equal error rate, and context."""

    tdcf: TdcfResult
    eer: float
    eer_threshold: float
    coeffs: TdcfCoeffs
    asv_threshold: float | None


@dataclass(frozen=True)
class ConditionResult:
    """Per-group evaluation at the fixed verification threshold."""

    key: str
    tdcf: TdcfResult
    eer: float
    n_spoof_cm: int
    n_spoof_asv: int


def _value_of(entry) -> float:
    if isinstance(entry, ConditionResult):
        return entry.tdcf.min_tdcf_norm
    if isinstance(entry, TdcfResult):
        return entry.min_tdcf_norm
    return float(entry)


def _floor_of(entry) -> float | None:
    if isinstance(entry, ConditionResult):
        return entry.tdcf.asv_floor
    if isinstance(entry, TdcfResult):
        return entry.asv_floor
    return None


def pooled_summary(
    cm_set: ScoreSet,
    asv_set: ScoreSet | None = None,
    cost: CostModel = DEFAULT_COST_MODEL,
    coeffs: TdcfCoeffs | None = None,
) -> PooledResult:
    """Evaluate all trials at the global verification operating point.

    Either ``asv_set`` (verification scores, from which the equal-error
    threshold and error rates are derived) or precomputed ``coeffs`` must
    be supplied.
    """
    asv_threshold: float | None = None
    if coeffs is None:
        if asv_set is None:
            raise ValueError("either asv_set or coeffs is required")
        asv_threshold, rates = asv_operating_point(asv_set)
        coeffs = tdcf_coefficients(rates, cost)
    bona = cm_set.bona_fide_scores
    spoof = cm_set.spoof_scores
    tdcf = min_tdcf(bona, spoof, coeffs)
    eer_value, eer_threshold = eer(error_curve(bona, spoof))
    return PooledResult(
        tdcf=tdcf,
        eer=eer_value,
        eer_threshold=eer_threshold,
        coeffs=coeffs,
        asv_threshold=asv_threshold,
    )


def condition_breakdown(
    cm_set: ScoreSet,
    asv_set: ScoreSet | None = None,
    cost: CostModel = DEFAULT_COST_MODEL,
    grouping="attack",
    coeffs: TdcfCoeffs | None = None,
) -> dict[str, ConditionResult]:
    """Per-group tandem cost and equal error rate, key-sorted.

    All bona fide trials are shared across groups; only the spoof trials
    are restricted.  When ``asv_set`` is given, the verification
    threshold stays at the global equal-error point and each group's
    spoof false-accept rate is recomputed from its own verification
    spoof trials, yielding per-group coefficients and floors.  When fixed
    ``coeffs`` are given instead, every group is costed with them.
    """
    group_fn = _resolve_grouping(grouping)
    cm_masks = spoof_masks(cm_set, group_fn)
    if not cm_masks:
        raise AnalysisError("countermeasure scores contain no spoof trials")
    bona = cm_set.bona_fide_scores

    asv_masks: dict[str, np.ndarray] = {}
    rates = None
    threshold = None
    if coeffs is None:
        if asv_set is None:
            raise ValueError("either asv_set or coeffs is required")
        threshold, rates = asv_operating_point(asv_set)
        asv_masks = spoof_masks(asv_set, group_fn)

    results: dict[str, ConditionResult] = {}
    for key, mask in cm_masks.items():
        spoof_scores = cm_set.scores[mask]
        if coeffs is None:
            if key not in asv_masks:
                raise AnalysisError(f"group {key!r} has no spoofed verification trials")
            group_scores = asv_set.scores[asv_masks[key]]
            group_rate = float(np.mean(group_scores >= threshold))
            group_coeffs = tdcf_coefficients(replace(rates, p_fa_spoof_asv=group_rate), cost)
            n_spoof_asv = int(group_scores.size)
        else:
            group_coeffs = coeffs
            n_spoof_asv = 0
        tdcf = min_tdcf(bona, spoof_scores, group_coeffs)
        eer_value, _ = eer(error_curve(bona, spoof_scores))
        results[key] = ConditionResult(
            key=key,
            tdcf=tdcf,
            eer=eer_value,
            n_spoof_cm=int(mask.sum()),
            n_spoof_asv=n_spoof_asv,
        )
    return results


def max_min_tdcf(results: Mapping[str, object]) -> tuple[float, list[str]]:
    """Worst-case group value and every key attaining it.

    Accepts a mapping to :class:`ConditionResult`, :class:`TdcfResult`,
    or plain floats.  Keys within relative tolerance 1e-12 of the maximum
    are all reported, sorted.
    """
    if not results:
        raise ValueError("results must be non-empty")
    values = {key: _value_of(entry) for key, entry in results.items()}
    worst = max(values.values())
    tolerance = _TIE_REL_TOL * max(1.0, abs(worst))
    keys = sorted(key for key, value in values.items() if abs(value - worst) <= tolerance)
    return worst, keys


def repool(
    cm_set: ScoreSet,
    coeffs: TdcfCoeffs,
    grouping="attack",
    keys=None,
) -> TdcfResult:
    """Tandem cost of the union of the named groups under fixed coefficients.

    With ``keys=None`` all groups are pooled, which reproduces the pooled
    evaluation bit for bit.
    """
    masks = spoof_masks(cm_set, grouping)
    if not masks:
        raise AnalysisError("countermeasure scores contain no spoof trials")
    if keys is None:
        chosen = list(masks)
    else:
        chosen = list(keys)
        unknown = [key for key in chosen if key not in masks]
        if unknown:
            raise AnalysisError(f"unknown groups {unknown!r}; available: {sorted(masks)}")
        if not chosen:
            raise AnalysisError("keys must name at least one group")
    union = np.zeros(len(cm_set.records), dtype=bool)
    for key in chosen:
        union |= masks[key]
    return min_tdcf(cm_set.bona_fide_scores, cm_set.scores[union], coeffs)


@dataclass(frozen=True)
class ReportRow:
    """One summary row: a category crossed with a subset of its groups.

    ``subset`` is 'all', 'without_worst', or 'worst_only'; ``stats`` holds
    the five-number summary of the member groups' costs (None when the
    subset is empty, with ``flag='empty'``); ``asv_floor`` is the median
    of the member groups' floors when the inputs carry them.
    """

    category: str
    subset: str
    n_groups: int
    stats: BoxStats | None
    asv_floor: float | None
    flag: str = ""


_SUBSET_ORDER = ("all", "without_worst", "worst_only")


def group_report(
    results: Mapping[str, object],
    category_of: Callable[[str], str],
    worst_keys,
) -> list[ReportRow]:
    """Boxplot-style summary rows per top-level category.

    For each category (of the group keys, via ``category_of``) three rows
    are emitted: all member groups, the members with the worst-case
    groups removed, and the worst-case members alone.  Empty subsets --
    e.g. 'without_worst' for a category whose only group is the worst
    case -- produce a flagged row instead of being dropped.
    """
    if not results:
        raise ValueError("results must be non-empty")
    worst = set(worst_keys)
    by_category: dict[str, list[str]] = {}
    for key in sorted(results):
        by_category.setdefault(category_of(key), []).append(key)

    rows: list[ReportRow] = []
    for category in sorted(by_category):
        members = by_category[category]
        subsets = {
            "all": members,
            "without_worst": [k for k in members if k not in worst],
            "worst_only": [k for k in members if k in worst],
        }
        for subset in _SUBSET_ORDER:
            keys = subsets[subset]
            if not keys:
                rows.append(
                    ReportRow(
                        category=category,
                        subset=subset,
                        n_groups=0,
                        stats=None,
                        asv_floor=None,
                        flag="empty",
                    )
                )
                continue
            stats = box_stats([_value_of(results[k]) for k in keys])
            floors = [_floor_of(results[k]) for k in keys]
            floor = float(np.median([f for f in floors if f is not None])) if all(
                f is not None for f in floors
            ) else None
            rows.append(
                ReportRow(
                    category=category,
                    subset=subset,
                    n_groups=len(keys),
                    stats=stats,
                    asv_floor=floor,
                    flag="",
                )
            )
    return rows


def _render(value: float | None) -> str:
    return "" if value is None else format_score(value, full_precision=True)


def condition_csv(results: Mapping[str, ConditionResult]) -> str:
    """Per-group results as CSV, one key-sorted row per group."""
    lines = ["group,min_tdcf,asv_floor,eer,n_spoof_cm,n_spoof_asv"]
    for key in sorted(results):
        entry = results[key]
        lines.append(
            ",".join(
                [
                    key,
                    _render(entry.tdcf.min_tdcf_norm),
                    _render(entry.tdcf.asv_floor),
                    _render(entry.eer),
                    str(entry.n_spoof_cm),
                    str(entry.n_spoof_asv),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def condition_json(results: Mapping[str, ConditionResult]) -> str:
    """Per-group results as deterministic (key-sorted) JSON."""
    payload = {
        key: {
            "min_tdcf": entry.tdcf.min_tdcf_norm,
            "asv_floor": entry.tdcf.asv_floor,
            "eer": entry.eer,
            "n_spoof_cm": entry.n_spoof_cm,
            "n_spoof_asv": entry.n_spoof_asv,
        }
        for key, entry in results.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_csv(rows) -> str:
    """Summary rows as CSV in category-then-subset order."""
    lines = ["category,subset,n_groups,min,q1,median,q3,max,asv_floor,flag"]
    for row in rows:
        stats = row.stats
        lines.append(
            ",".join(
                [
                    row.category,
                    row.subset,
                    str(row.n_groups),
                    _render(stats.minimum if stats else None),
                    _render(stats.q1 if stats else None),
                    _render(stats.median if stats else None),
                    _render(stats.q3 if stats else None),
                    _render(stats.maximum if stats else None),
                    _render(row.asv_floor),
                    row.flag,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def report_json(rows) -> str:
    """Summary rows as deterministic nested JSON (category -> subset)."""
    payload: dict[str, dict[str, object]] = {}
    for row in rows:
        stats = None
        if row.stats is not None:
            stats = {
                "min": row.stats.minimum,
                "q1": row.stats.q1,
                "median": row.stats.median,
                "q3": row.stats.q3,
                "max": row.stats.maximum,
            }
        payload.setdefault(row.category, {})[row.subset] = {
            "n_groups": row.n_groups,
            "stats": stats,
            "asv_floor": row.asv_floor,
            "flag": row.flag,
        }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
