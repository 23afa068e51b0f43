"""Diagonal-covariance Gaussian mixture models for frame-level scoring.

Training uses expectation-maximisation with a deterministic
seed-controlled initialisation: component means are frames sampled
without replacement, weights start uniform, and every component starts
from the per-dimension global variance.  Variances are floored at a
configurable fraction of the global variance in every M-step, so the
model stays valid no matter how the data collapses.

An utterance is scored by its average per-frame log-likelihood; a
countermeasure score is the difference of that quantity under a bona fide
model and a spoofed model (:func:`llr_score`), so higher means more bona
fide.

The on-disk layout (little-endian)::

    bytes 0-3   magic b"GMM1"
    bytes 4-7   uint32 component count K
    bytes 8-11  uint32 dimension count D
    bytes 12-   K float64 weights, K*D float64 means, K*D float64
                variances, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

__all__ = [
    "Gmm",
    "EmConfig",
    "GmmFileError",
    "train_em",
    "avg_log_likelihood",
    "llr_score",
    "save_gmm",
    "load_gmm",
    "DiagonalGmm",
]

GMM_MAGIC = b"GMM1"
_GMM_HEADER = struct.Struct("<4sII")

_LOG_2PI = float(np.log(2.0 * np.pi))
_WEIGHT_FLOOR = 1e-10


class GmmFileError(ValueError):
    """Raised when a model file is truncated or malformed."""


@dataclass(frozen=True)
class Gmm:
    """A mixture of diagonal-covariance Gaussians.

    Invariants enforced on construction: matching shapes, finite values,
    strictly positive weights summing to one (within 1e-10), and strictly
    positive variances.
    """

    weights: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise ValueError("weights must be a non-empty 1-D array")
        k = weights.size
        if means.ndim != 2 or means.shape[0] != k or means.shape[1] == 0:
            raise ValueError(f"means must be ({k}, D) with D >= 1, got {means.shape}")
        if variances.shape != means.shape:
            raise ValueError(
                f"variances shape {variances.shape} must match means shape {means.shape}"
            )
        for name, arr in (("weights", weights), ("means", means), ("variances", variances)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"weights must sum to 1 within 1e-10, got {total!r}")
        if np.any(variances <= 0):
            raise ValueError("variances must be strictly positive")
        for name, arr in (("weights", weights), ("means", means), ("variances", variances)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def n_dims(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class EmConfig:
    """Expectation-maximisation settings.

    Training stops after ``max_iters`` iterations or as soon as the
    relative gain in average log-likelihood drops below ``rel_tol``.
    ``var_floor_scale`` scales the per-dimension global variance to obtain
    the variance floor applied in each M-step.
    """

    max_iters: int = 10
    rel_tol: float = 1e-5
    var_floor_scale: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be >= 0")
        if not (0 < self.var_floor_scale):
            raise ValueError("var_floor_scale must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def _as_frames(features, n_dims: int | None = None, name: str = "features") -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty (frames, dims) matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if n_dims is not None and arr.shape[1] != n_dims:
        raise ValueError(f"{name} has {arr.shape[1]} dims, model expects {n_dims}")
    return arr


def _log_joint(x: np.ndarray, x_sq: np.ndarray, gmm_w, gmm_mu, gmm_var) -> np.ndarray:
    """Per-frame, per-component log of weight times Gaussian density."""
    inv_var = 1.0 / gmm_var
    log_const = -0.5 * (gmm_mu.shape[1] * _LOG_2PI + np.sum(np.log(gmm_var), axis=1))
    quad = (
        x_sq @ inv_var.T
        - 2.0 * (x @ (gmm_mu * inv_var).T)
        + np.sum(gmm_mu * gmm_mu * inv_var, axis=1)
    )
    return np.log(gmm_w) + log_const - 0.5 * quad


def train_em(features, n_components: int, config: EmConfig = EmConfig()) -> tuple[Gmm, np.ndarray]:
    """Fit a diagonal GMM by EM; returns the model and the likelihood trace.

    The trace holds the average per-frame log-likelihood at
    initialisation followed by one entry per completed iteration, so its
    length is the number of iterations run plus one.  Identical inputs
    and config produce bit-identical models.
    """
    x = _as_frames(features)
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    n_frames, n_dims = x.shape
    if n_frames < n_components:
        raise ValueError(f"{n_frames} frames cannot initialise {n_components} components")
    global_var = x.var(axis=0)
    if np.any(global_var <= 0):
        dead = int(np.flatnonzero(global_var <= 0)[0])
        raise ValueError(f"dimension {dead} has zero variance across the training frames")
    floor = config.var_floor_scale * global_var

    rng = np.random.default_rng(config.seed)
    chosen = rng.choice(n_frames, size=n_components, replace=False)
    means = x[chosen].copy()
    variances = np.maximum(np.tile(global_var, (n_components, 1)), floor)
    weights = np.full(n_components, 1.0 / n_components)

    x_sq = x * x
    log_joint = _log_joint(x, x_sq, weights, means, variances)
    per_frame = logsumexp(log_joint, axis=1)
    avg_ll = float(per_frame.mean())
    trace = [avg_ll]

    for _ in range(config.max_iters):
        resp = np.exp(log_joint - per_frame[:, None])
        occupancy = resp.sum(axis=0)
        weights = np.maximum(occupancy / n_frames, _WEIGHT_FLOOR)
        weights = weights / weights.sum()
        safe_occ = np.maximum(occupancy, np.finfo(np.float64).tiny)[:, None]
        means = (resp.T @ x) / safe_occ
        second_moment = (resp.T @ x_sq) / safe_occ
        variances = np.maximum(second_moment - means * means, floor)

        log_joint = _log_joint(x, x_sq, weights, means, variances)
        per_frame = logsumexp(log_joint, axis=1)
        new_avg_ll = float(per_frame.mean())
        trace.append(new_avg_ll)
        if new_avg_ll - avg_ll < config.rel_tol * abs(avg_ll):
            avg_ll = new_avg_ll
            break
        avg_ll = new_avg_ll

    return Gmm(weights=weights, means=means, variances=variances), np.asarray(trace)


def avg_log_likelihood(gmm: Gmm, features) -> float:
    """Average per-frame log-likelihood of a feature matrix under a model."""
    x = _as_frames(features, n_dims=gmm.n_dims)
    log_joint = _log_joint(x, x * x, gmm.weights, gmm.means, gmm.variances)
    return float(logsumexp(log_joint, axis=1).mean())


def llr_score(bona_fide_model: Gmm, spoof_model: Gmm, features) -> float:
    """Log-likelihood-ratio countermeasure score (higher = more bona fide)."""
    if bona_fide_model.n_dims != spoof_model.n_dims:
        raise ValueError(
            f"model dimensions differ: {bona_fide_model.n_dims} vs {spoof_model.n_dims}"
        )
    return avg_log_likelihood(bona_fide_model, features) - avg_log_likelihood(
        spoof_model, features
    )


def save_gmm(path, gmm: Gmm) -> None:
    """Write a model in the GMM1 binary layout."""
    header = _GMM_HEADER.pack(GMM_MAGIC, gmm.n_components, gmm.n_dims)
    payload = b"".join(
        arr.astype("<f8").tobytes(order="C") for arr in (gmm.weights, gmm.means, gmm.variances)
    )
    Path(path).write_bytes(header + payload)


def load_gmm(path) -> Gmm:
    """Read a GMM1 file, re-validating every model invariant."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _GMM_HEADER.size:
        raise GmmFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, k, d = _GMM_HEADER.unpack_from(blob)
    if magic != GMM_MAGIC:
        raise GmmFileError(f"{path}: bad magic {magic!r} (expected {GMM_MAGIC!r})")
    if k == 0 or d == 0:
        raise GmmFileError(f"{path}: empty model ({k} components, {d} dims)")
    expected = _GMM_HEADER.size + (k + 2 * k * d) * 8
    if len(blob) != expected:
        raise GmmFileError(
            f"{path}: payload is {len(blob)} bytes, expected {expected} for K={k} D={d}"
        )
    flat = np.frombuffer(blob, dtype="<f8", offset=_GMM_HEADER.size)
    weights = flat[:k].astype(np.float64)
    means = flat[k : k + k * d].astype(np.float64).reshape(k, d)
    variances = flat[k + k * d :].astype(np.float64).reshape(k, d)
    try:
        return Gmm(weights=weights, means=means, variances=variances)
    except ValueError as exc:
        raise GmmFileError(f"{path}: invalid model ({exc})") from None


class DiagonalGmm(BaseEstimator):
    """scikit-learn style wrapper around :func:`train_em`.

    After ``fit`` the learnt parameters are exposed as ``weights_``,
    ``means_``, ``variances_``, the assembled ``model_``, and the average
    log-likelihood trace ``loglik_trace_``.
    """

    def __init__(
        self,
        n_components: int = 512,
        max_iters: int = 10,
        rel_tol: float = 1e-5,
        var_floor_scale: float = 1e-3,
        seed: int = 0,
    ):
        self.n_components = n_components
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.var_floor_scale = var_floor_scale
        self.seed = seed

    def fit(self, X, y=None):
        config = EmConfig(
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            var_floor_scale=self.var_floor_scale,
            seed=self.seed,
        )
        model, trace = train_em(X, self.n_components, config)
        self.model_ = model
        self.weights_ = model.weights
        self.means_ = model.means
        self.variances_ = model.variances
        self.loglik_trace_ = trace
        return self

    def score_samples(self, X) -> np.ndarray:
        """Per-frame log-likelihood under the fitted model."""
        check_is_fitted(self, "model_")
        x = _as_frames(X, n_dims=self.model_.n_dims, name="X")
        log_joint = _log_joint(
            x, x * x, self.model_.weights, self.model_.means, self.model_.variances
        )
        return logsumexp(log_joint, axis=1)

    def score(self, X, y=None) -> float:
        """Average per-frame log-likelihood of ``X``."""
        return float(self.score_samples(X).mean())
