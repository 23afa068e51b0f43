"""Score-level fusion of countermeasure subsystems.

Scores from several systems over the same trials form a
:class:`ScoreMatrix` (one row per trial, one column per system).  Fusion
trains a prior-weighted logistic regression on those columns: with
``z = w . s + b`` the objective is

    L(w, b) = -prior * mean over bona fide trials of log sigmoid(z)
              - (1 - prior) * mean over spoof trials of log(1 - sigmoid(z))
              [+ 0.5 * l2 * ||w||^2]

minimised by Newton iterations with backtracking line search from the
deterministic start ``w = 0``, ``b = logit(prior)`` (a stationary point
of the objective in ``b``).  The fused score of a trial is the linear
form ``w . s + b`` -- monotone in each input, so single-system fusion
preserves every error-curve operating point.

:func:`oracle_sweep` runs greedy forward selection over systems, at each
size refitting the fusion and recording the subset with the lowest
normalised tandem cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, logit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .metrics import TdcfCoeffs, min_tdcf
from .trialdata import format_score

__all__ = [
    "ScoreMatrix",
    "ScoreMatrixError",
    "FusionModel",
    "FusionModelError",
    "FusionTrainingError",
    "SweepEntry",
    "parse_score_matrix",
    "serialize_score_matrix",
    "combine_score_tables",
    "normalize_by_bonafide_std",
    "average_fuse",
    "lr_loss_grad",
    "train_lr",
    "apply_fusion",
    "oracle_sweep",
    "save_fusion_model",
    "load_fusion_model",
    "LogisticFusion",
]


class ScoreMatrixError(ValueError):
    """Raised for malformed score-matrix text or inconsistent columns."""


class FusionModelError(ValueError):
    """Raised for malformed fusion-model files or mismatched inputs."""


class FusionTrainingError(RuntimeError):
    """Raised when the fusion objective cannot be driven to convergence."""


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-trial scores of several systems over an identical trial list."""

    systems: tuple[str, ...]
    trial_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        systems = tuple(self.systems)
        trial_ids = tuple(self.trial_ids)
        if not systems or any(not isinstance(s, str) or not s for s in systems):
            raise ValueError("systems must be non-empty strings")
        if len(set(systems)) != len(systems):
            raise ValueError("system names must be unique")
        if not trial_ids or any(not isinstance(t, str) or not t for t in trial_ids):
            raise ValueError("trial_ids must be non-empty strings")
        if len(set(trial_ids)) != len(trial_ids):
            raise ValueError("trial ids must be unique")
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(trial_ids), len(systems)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(trial_ids)} trials x {len(systems)} systems"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("scores must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "trial_ids", trial_ids)
        object.__setattr__(self, "values", values)

    @property
    def n_trials(self) -> int:
        return len(self.trial_ids)

    @property
    def n_systems(self) -> int:
        return len(self.systems)

    def column(self, system: str) -> np.ndarray:
        if system not in self.systems:
            raise KeyError(f"unknown system {system!r}")
        return self.values[:, self.systems.index(system)]

    def select(self, systems) -> "ScoreMatrix":
        names = tuple(systems)
        indices = [self.systems.index(name) for name in names]
        return ScoreMatrix(systems=names, trial_ids=self.trial_ids, values=self.values[:, indices])


def parse_score_matrix(text: str) -> ScoreMatrix:
    """Parse the whitespace-separated matrix format.

    The first non-comment line is a header ``trial_id <name> <name> ...``;
    every following line carries a trial id and one score per system.
    Blank lines and lines starting with '#' are skipped.
    """
    header: list[str] | None = None
    trial_ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if header is None:
            if fields[0] != "trial_id" or len(fields) < 2:
                raise ScoreMatrixError(
                    f"line {lineno}: header must be 'trial_id <system> ...', got {line!r}"
                )
            header = fields[1:]
            if len(set(header)) != len(header):
                raise ScoreMatrixError(f"line {lineno}: duplicate system names in header")
            continue
        if len(fields) != len(header) + 1:
            raise ScoreMatrixError(
                f"line {lineno}: expected {len(header) + 1} fields, got {len(fields)}"
            )
        values = []
        for name, token in zip(header, fields[1:]):
            try:
                value = float(token)
            except ValueError:
                raise ScoreMatrixError(
                    f"line {lineno}: unparseable score {token!r} for system {name!r}"
                ) from None
            if not np.isfinite(value):
                raise ScoreMatrixError(f"line {lineno}: non-finite score for system {name!r}")
            values.append(value)
        trial_ids.append(fields[0])
        rows.append(values)
    if header is None:
        raise ScoreMatrixError("no header line found")
    if not rows:
        raise ScoreMatrixError("no score rows found")
    if len(set(trial_ids)) != len(trial_ids):
        seen: set[str] = set()
        dup = next(t for t in trial_ids if t in seen or seen.add(t))
        raise ScoreMatrixError(f"duplicate trial id {dup!r}")
    return ScoreMatrix(systems=tuple(header), trial_ids=tuple(trial_ids), values=np.array(rows))


def serialize_score_matrix(
    matrix: ScoreMatrix, precision: int = 6, full_precision: bool = False
) -> str:
    """Render a matrix in the parseable header + rows layout."""
    lines = ["trial_id " + " ".join(matrix.systems)]
    for trial_id, row in zip(matrix.trial_ids, matrix.values):
        rendered = " ".join(format_score(v, precision, full_precision) for v in row)
        lines.append(f"{trial_id} {rendered}")
    return "\n".join(lines) + "\n"


def combine_score_tables(named_tables: dict[str, dict[str, float]]) -> ScoreMatrix:
    """Assemble per-system ``{trial_id: score}`` tables into one matrix.

    Every table must cover exactly the same trial ids; rows are emitted in
    sorted trial-id order so the result is independent of input ordering.
    """
    if not named_tables:
        raise ScoreMatrixError("no score tables given")
    names = list(named_tables)
    reference = set(named_tables[names[0]])
    if not reference:
        raise ScoreMatrixError(f"system {names[0]!r} has no scores")
    for name in names[1:]:
        ids = set(named_tables[name])
        if ids != reference:
            missing = sorted(reference - ids)[:10]
            extra = sorted(ids - reference)[:10]
            raise ScoreMatrixError(
                f"system {name!r} covers different trials than {names[0]!r} "
                f"(missing {len(reference - ids)}, first {missing}; "
                f"extra {len(ids - reference)}, first {extra})"
            )
    trial_ids = tuple(sorted(reference))
    values = np.array([[named_tables[name][t] for name in names] for t in trial_ids])
    return ScoreMatrix(systems=tuple(names), trial_ids=trial_ids, values=values)


def _as_labels(labels, n_trials: int) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.shape != (n_trials,):
        raise ValueError(f"labels must have shape ({n_trials},), got {arr.shape}")
    if arr.dtype != bool:
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError("labels must be boolean (True/1 = bona fide)")
        arr = arr.astype(bool)
    if not arr.any() or arr.all():
        raise ValueError("labels must contain both bona fide and spoof trials")
    return arr


def _matrix_values(matrix) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(matrix, ScoreMatrix):
        return matrix.values, matrix.systems
    values = np.asarray(matrix, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
        raise ValueError("scores must be a non-empty (trials, systems) matrix")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    return values, tuple(f"s{i}" for i in range(values.shape[1]))


def normalize_by_bonafide_std(scores, bona_mask) -> np.ndarray:
    """Divide one system's scores by the sample std of its bona fide subset.

    Uses the unbiased (ddof=1) standard deviation, so at least two bona
    fide trials with non-identical scores are required.
    """
    values = np.asarray(scores, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("scores must be a non-empty 1-D array")
    if not np.all(np.isfinite(values)):
        raise ValueError("scores must be finite")
    mask = np.asarray(bona_mask)
    if mask.shape != values.shape or mask.dtype != bool:
        raise ValueError("bona_mask must be a boolean array aligned with scores")
    bona = values[mask]
    if bona.size < 2:
        raise ValueError(f"need at least 2 bona fide scores to normalise, got {bona.size}")
    std = float(bona.std(ddof=1))
    if std == 0.0:
        raise ValueError("bona fide scores are constant; cannot normalise by their std")
    return values / std


def average_fuse(matrix) -> np.ndarray:
    """Unweighted mean of the system scores for each trial."""
    values, _ = _matrix_values(matrix)
    return values.mean(axis=1)


def _prior_weights(labels: np.ndarray, prior: float) -> np.ndarray:
    alpha = np.empty(labels.size)
    alpha[labels] = prior / labels.sum()
    alpha[~labels] = (1.0 - prior) / (~labels).sum()
    return alpha


def lr_loss_grad(weights, bias, values, labels, prior: float = 0.5, l2: float = 0.0):
    """Objective value and gradient of the prior-weighted logistic loss.

    Returns ``(loss, grad_weights, grad_bias)``; exposed separately so the
    gradient can be checked against finite differences.
    """
    values, _ = _matrix_values(values)
    labels = _as_labels(labels, values.shape[0])
    if not (0.0 < prior < 1.0):
        raise ValueError(f"prior must lie in (0, 1), got {prior}")
    if l2 < 0.0:
        raise ValueError(f"l2 must be >= 0, got {l2}")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (values.shape[1],):
        raise ValueError(f"weights must have shape ({values.shape[1]},), got {w.shape}")
    alpha = _prior_weights(labels, prior)
    sign = np.where(labels, 1.0, -1.0)
    z = values @ w + float(bias)
    loss = float(np.sum(alpha * np.logaddexp(0.0, -sign * z)) + 0.5 * l2 * (w @ w))
    dz = -alpha * sign * expit(-sign * z)
    grad_w = values.T @ dz + l2 * w
    grad_b = float(dz.sum())
    return loss, grad_w, grad_b


@dataclass(frozen=True)
class FusionModel:
    """A trained linear fusion: fused score = weights . scores + bias."""

    weights: np.ndarray = field(repr=False)
    bias: float
    prior: float
    systems: tuple[str, ...] | None = None

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")
        if not (0.0 < self.prior < 1.0):
            raise ValueError(f"prior must lie in (0, 1), got {self.prior}")
        if self.systems is not None:
            systems = tuple(self.systems)
            if len(systems) != weights.size:
                raise ValueError(
                    f"{len(systems)} system names do not match {weights.size} weights"
                )
            if len(set(systems)) != len(systems):
                raise ValueError("system names must be unique")
            object.__setattr__(self, "systems", systems)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "prior", float(self.prior))

    @property
    def n_systems(self) -> int:
        return self.weights.size


def train_lr(
    matrix,
    labels,
    prior: float = 0.5,
    l2: float = 0.0,
    gtol: float = 1e-8,
    max_iter: int = 100,
    normalize: bool = False,
) -> FusionModel:
    """Fit the prior-weighted logistic fusion by damped Newton iterations.

    Starts from ``w = 0``, ``b = logit(prior)`` and stops once the
    gradient max-norm falls below ``gtol``.  With ``normalize=True`` each
    column is first divided by the sample std of its bona fide subset and
    the learnt weights are rescaled back, so the returned model always
    applies to raw scores.  Raises :class:`FusionTrainingError`, quoting
    the gradient norm reached, if the tolerance is not met within
    ``max_iter`` iterations.
    """
    values, names = _matrix_values(matrix)
    labels = _as_labels(labels, values.shape[0])
    if not (0.0 < prior < 1.0):
        raise ValueError(f"prior must lie in (0, 1), got {prior}")
    if l2 < 0.0:
        raise ValueError(f"l2 must be >= 0, got {l2}")
    if gtol <= 0.0:
        raise ValueError(f"gtol must be > 0, got {gtol}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    scales = np.ones(values.shape[1])
    if normalize:
        scales = np.array(
            [np.std(values[labels, j], ddof=1) for j in range(values.shape[1])]
        )
        if np.any(~np.isfinite(scales)) or np.any(scales <= 0.0):
            raise ValueError("each column needs a positive bona fide std to normalise")
        values = values / scales

    n_trials, n_systems = values.shape
    alpha = _prior_weights(labels, prior)
    sign = np.where(labels, 1.0, -1.0)
    augmented = np.hstack([values, np.ones((n_trials, 1))])

    def evaluate(theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        z = augmented @ theta
        loss = float(
            np.sum(alpha * np.logaddexp(0.0, -sign * z)) + 0.5 * l2 * (theta[:-1] @ theta[:-1])
        )
        dz = -alpha * sign * expit(-sign * z)
        grad = augmented.T @ dz
        grad[:-1] += l2 * theta[:-1]
        return loss, grad, z

    theta = np.zeros(n_systems + 1)
    theta[-1] = float(logit(prior))
    loss, grad, z = evaluate(theta)

    for _ in range(max_iter):
        if float(np.max(np.abs(grad))) < gtol:
            break
        curvature = alpha * expit(z) * expit(-z)
        hessian = augmented.T @ (curvature[:, None] * augmented)
        hessian[:-1, :-1] += l2 * np.eye(n_systems)
        ridge = 1e-12 * max(float(np.trace(hessian)) / (n_systems + 1), 1e-300)
        hessian[np.diag_indices_from(hessian)] += ridge
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, grad, rcond=None)[0]
        descent = float(grad @ step)
        if not np.isfinite(descent) or descent <= 0.0:
            step = grad
            descent = float(grad @ grad)
        scale = 1.0
        while scale > 2.0**-60:
            candidate = theta - scale * step
            cand_loss, cand_grad, cand_z = evaluate(candidate)
            if cand_loss <= loss - 1e-4 * scale * descent:
                theta, loss, grad, z = candidate, cand_loss, cand_grad, cand_z
                break
            scale *= 0.5
        else:
            break

    achieved = float(np.max(np.abs(grad)))
    if achieved >= gtol:
        raise FusionTrainingError(
            f"fusion training did not converge: gradient max-norm {achieved:.3e} "
            f"after {max_iter} iterations (tolerance {gtol:.3e})"
        )
    weights = theta[:-1] / scales
    return FusionModel(
        weights=weights,
        bias=float(theta[-1]),
        prior=prior,
        systems=names if isinstance(matrix, ScoreMatrix) else None,
    )


def apply_fusion(model: FusionModel, matrix) -> np.ndarray:
    """Linear fused score ``weights . scores + bias`` for every trial."""
    values, names = _matrix_values(matrix)
    if values.shape[1] != model.n_systems:
        raise FusionModelError(
            f"matrix has {values.shape[1]} systems, model expects {model.n_systems}"
        )
    if isinstance(matrix, ScoreMatrix) and model.systems is not None and names != model.systems:
        raise FusionModelError(
            f"system names {list(names)} do not match the model's {list(model.systems)}"
        )
    return values @ model.weights + model.bias


@dataclass(frozen=True)
class SweepEntry:
    """One greedy-selection step: subset size, systems chosen, cost reached."""

    k: int
    systems: tuple[str, ...]
    min_tdcf: float


def oracle_sweep(
    matrix,
    labels,
    coeffs: TdcfCoeffs,
    k_max: int | None = None,
    prior: float = 0.5,
    l2: float = 0.0,
    gtol: float = 1e-8,
    max_iter: int = 100,
) -> list[SweepEntry]:
    """Greedy forward selection of systems by normalised tandem cost.

    The size-1 entry is the best single system; each following entry adds
    the system whose refitted fusion with the current subset yields the
    lowest cost.  Ties are broken toward the earliest column.  Systems are
    recorded in selection order.
    """
    values, names = _matrix_values(matrix)
    labels_arr = _as_labels(labels, values.shape[0])
    n_systems = values.shape[1]
    if k_max is None:
        k_max = n_systems
    if not (1 <= k_max <= n_systems):
        raise ValueError(f"k_max must lie in [1, {n_systems}], got {k_max}")

    def cost_of(scores: np.ndarray) -> float:
        return min_tdcf(scores[labels_arr], scores[~labels_arr], coeffs).min_tdcf_norm

    singles = np.array([cost_of(values[:, j]) for j in range(n_systems)])
    best = int(np.argmin(singles))
    selected = [best]
    entries = [SweepEntry(k=1, systems=(names[best],), min_tdcf=float(singles[best]))]
    while len(selected) < k_max:
        best_value: float | None = None
        best_candidate = -1
        for j in range(n_systems):
            if j in selected:
                continue
            columns = selected + [j]
            model = train_lr(
                values[:, columns], labels_arr, prior=prior, l2=l2, gtol=gtol, max_iter=max_iter
            )
            fused = values[:, columns] @ model.weights + model.bias
            value = cost_of(fused)
            if best_value is None or value < best_value:
                best_value = value
                best_candidate = j
        selected.append(best_candidate)
        entries.append(
            SweepEntry(
                k=len(selected),
                systems=tuple(names[j] for j in selected),
                min_tdcf=float(best_value),
            )
        )
    return entries


def save_fusion_model(path, model: FusionModel) -> None:
    """Write a model as ``key = value`` text with full-precision numbers."""
    lines = []
    if model.systems is not None:
        lines.append("systems = " + " ".join(model.systems))
    lines.append(f"prior = {format_score(model.prior, full_precision=True)}")
    lines.append(f"bias = {format_score(model.bias, full_precision=True)}")
    lines.append(
        "weights = " + " ".join(format_score(w, full_precision=True) for w in model.weights)
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_fusion_model(path) -> FusionModel:
    """Read a model written by :func:`save_fusion_model`."""
    path = Path(path)
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FusionModelError(f"{path}: line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in entries:
            raise FusionModelError(f"{path}: line {lineno}: duplicate key {key!r}")
        if key not in {"systems", "prior", "bias", "weights"}:
            raise FusionModelError(f"{path}: line {lineno}: unknown key {key!r}")
        entries[key] = value.strip()
    for required in ("prior", "bias", "weights"):
        if required not in entries:
            raise FusionModelError(f"{path}: missing key {required!r}")
    try:
        prior = float(entries["prior"])
        bias = float(entries["bias"])
        weights = np.array([float(tok) for tok in entries["weights"].split()])
    except ValueError:
        raise FusionModelError(f"{path}: unparseable numeric value") from None
    systems = tuple(entries["systems"].split()) if "systems" in entries else None
    try:
        return FusionModel(weights=weights, bias=bias, prior=prior, systems=systems)
    except ValueError as exc:
        raise FusionModelError(f"{path}: invalid model ({exc})") from None


class LogisticFusion(BaseEstimator):
    """scikit-learn style wrapper around :func:`train_lr`.

    ``fit(X, y)`` expects one row per trial and boolean/0-1 labels with
    True meaning bona fide; ``decision_function`` returns the linear fused
    score.
    """

    def __init__(
        self,
        prior: float = 0.5,
        l2: float = 0.0,
        gtol: float = 1e-8,
        max_iter: int = 100,
        normalize: bool = False,
    ):
        self.prior = prior
        self.l2 = l2
        self.gtol = gtol
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y):
        model = train_lr(
            X,
            y,
            prior=self.prior,
            l2=self.l2,
            gtol=self.gtol,
            max_iter=self.max_iter,
            normalize=self.normalize,
        )
        self.model_ = model
        self.weights_ = model.weights
        self.bias_ = model.bias
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return apply_fusion(self.model_, X)
