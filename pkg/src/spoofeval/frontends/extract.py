"""Cepstral feature pipelines for spoofing countermeasures.

Two frontends are provided, each returning a ``(frames, dims)`` matrix of
static coefficients concatenated with their delta and delta-delta
dynamics:

* :func:`cqcc` -- constant-Q cepstral coefficients: constant-Q power
  spectrogram, log compression, uniform resampling of the geometric
  frequency axis, DCT-II, dynamics (default 30 + 30 + 30 = 90 dims);
* :func:`lfcc` -- linear-frequency cepstral coefficients: framed power
  spectrum, linear triangular filterbank, log compression, DCT-II,
  dynamics (default 20 + 20 + 20 = 60 dims).

``CqccExtractor`` and ``LfccExtractor`` wrap the pipelines as stateless
scikit-learn transformers operating on :class:`AudioBuffer` objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .audio import AudioBuffer
from .dsp import (
    LOG_FLOOR,
    cq_frequencies,
    cq_kernel_lengths,
    cqt,
    dct_ii,
    deltas,
    frame_signal,
    linear_filterbank,
    power_spectrum,
    uniform_resample,
)

__all__ = [
    "CqccConfig",
    "LfccConfig",
    "cqcc",
    "lfcc",
    "CqccExtractor",
    "LfccExtractor",
]


@dataclass(frozen=True)
class CqccConfig:
    """Parameters of the constant-Q cepstral frontend.

    ``hop`` may be left as None, in which case the hop is derived from the
    sample rate as ``resample_period * ceil(n_min / resample_period)``
    where ``n_min`` is the shortest (highest-frequency) kernel length --
    the smallest multiple of the resampling period covering that kernel.
    """

    f_min: float = 15.0
    f_max: float = 8000.0
    bins_per_octave: int = 96
    resample_period: int = 16
    n_static: int = 30
    hop: int | None = None

    def __post_init__(self):
        if not (0 < self.f_min < self.f_max):
            raise ValueError(f"need 0 < f_min < f_max, got {self.f_min} and {self.f_max}")
        if self.bins_per_octave < 1:
            raise ValueError("bins_per_octave must be >= 1")
        if self.resample_period < 1:
            raise ValueError("resample_period must be >= 1")
        if self.n_static < 1:
            raise ValueError("n_static must be >= 1")
        if self.n_static > self.n_uniform():
            raise ValueError(
                f"n_static {self.n_static} exceeds the {self.n_uniform()} uniform bins"
            )
        if self.hop is not None and self.hop < 1:
            raise ValueError("hop must be >= 1 when given")

    @property
    def n_bins(self) -> int:
        return int(math.ceil(self.bins_per_octave * math.log2(self.f_max / self.f_min)))

    def n_uniform(self) -> int:
        return self.resample_period * max(1, int(np.rint(self.n_bins / self.resample_period)))

    def hop_for(self, sample_rate: int) -> int:
        if self.hop is not None:
            return self.hop
        freqs = cq_frequencies(self.f_min, self.f_max, self.bins_per_octave)
        n_min = int(cq_kernel_lengths(freqs, sample_rate, self.bins_per_octave)[-1])
        return self.resample_period * math.ceil(n_min / self.resample_period)

    @property
    def n_dims(self) -> int:
        return 3 * self.n_static


@dataclass(frozen=True)
class LfccConfig:
    """Parameters of the linear-frequency cepstral frontend."""

    win_len_ms: float = 20.0
    hop_ms: float = 10.0
    n_fft: int = 512
    f_min: float = 30.0
    f_max: float = 8000.0
    n_filters: int = 20
    n_static: int = 20

    def __post_init__(self):
        if self.win_len_ms <= 0 or self.hop_ms <= 0 or self.hop_ms > self.win_len_ms:
            raise ValueError(
                f"need 0 < hop_ms <= win_len_ms, got hop {self.hop_ms} and window {self.win_len_ms}"
            )
        if not (0 <= self.f_min < self.f_max):
            raise ValueError(f"need 0 <= f_min < f_max, got {self.f_min} and {self.f_max}")
        if self.n_filters < 1:
            raise ValueError("n_filters must be >= 1")
        if not (1 <= self.n_static <= self.n_filters):
            raise ValueError(
                f"n_static must be in [1, n_filters], got {self.n_static} with "
                f"{self.n_filters} filters"
            )
        if self.n_fft < 1:
            raise ValueError("n_fft must be >= 1")

    def win_len(self, sample_rate: int) -> int:
        return int(round(self.win_len_ms / 1000.0 * sample_rate))

    def hop(self, sample_rate: int) -> int:
        return int(round(self.hop_ms / 1000.0 * sample_rate))

    @property
    def n_dims(self) -> int:
        return 3 * self.n_static


def _with_dynamics(static: np.ndarray) -> np.ndarray:
    d1 = deltas(static)
    d2 = deltas(d1)
    return np.concatenate([static, d1, d2], axis=1)


def cqcc(audio: AudioBuffer, config: CqccConfig = CqccConfig()) -> np.ndarray:
    """Constant-Q cepstral coefficient matrix for one utterance.

    Returns a ``(frames, 3 * n_static)`` float64 matrix.  The input must
    be long enough to hold the lowest-frequency analysis kernel; at the
    default 15 Hz / 96 bins-per-octave setting this requires roughly nine
    seconds of 16 kHz audio, so shorter material needs a config with a
    higher ``f_min`` or a lower ``bins_per_octave``.
    """
    if config.f_max > audio.sample_rate / 2:
        raise ValueError(
            f"f_max {config.f_max} exceeds the Nyquist frequency {audio.sample_rate / 2}"
        )
    hop = config.hop_for(audio.sample_rate)
    spectrum = cqt(
        audio.samples,
        audio.sample_rate,
        config.f_min,
        config.f_max,
        config.bins_per_octave,
        hop,
    )
    power = spectrum.real**2 + spectrum.imag**2
    log_power = np.log(np.maximum(power, LOG_FLOOR))
    freqs = cq_frequencies(config.f_min, config.f_max, config.bins_per_octave)
    uniform = uniform_resample(
        log_power, freqs, config.f_min, config.f_max, config.resample_period
    )
    static = dct_ii(uniform.T, config.n_static)
    return _with_dynamics(static)


def lfcc(audio: AudioBuffer, config: LfccConfig = LfccConfig()) -> np.ndarray:
    """Linear-frequency cepstral coefficient matrix for one utterance.

    Returns a ``(frames, 3 * n_static)`` float64 matrix.
    """
    win_len = config.win_len(audio.sample_rate)
    hop = config.hop(audio.sample_rate)
    if win_len > config.n_fft:
        raise ValueError(
            f"window of {win_len} samples exceeds FFT size {config.n_fft}; "
            "raise n_fft or shorten the window"
        )
    frames = frame_signal(audio.samples, win_len, hop)
    power = power_spectrum(frames, n_fft=config.n_fft, window="hamming")
    bank = linear_filterbank(
        config.n_filters, config.n_fft, audio.sample_rate, config.f_min, config.f_max
    )
    energies = power @ bank.T
    log_energies = np.log(np.maximum(energies, LOG_FLOOR))
    static = dct_ii(log_energies, config.n_static)
    return _with_dynamics(static)


class CqccExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from audio buffers to CQCC matrices.

    Parameters mirror :class:`CqccConfig`; ``transform`` accepts a single
    :class:`AudioBuffer` or an iterable of them and returns one feature
    matrix or a list of matrices accordingly.
    """

    def __init__(
        self,
        f_min: float = 15.0,
        f_max: float = 8000.0,
        bins_per_octave: int = 96,
        resample_period: int = 16,
        n_static: int = 30,
        hop: int | None = None,
    ):
        self.f_min = f_min
        self.f_max = f_max
        self.bins_per_octave = bins_per_octave
        self.resample_period = resample_period
        self.n_static = n_static
        self.hop = hop

    def _config(self) -> CqccConfig:
        return CqccConfig(
            f_min=self.f_min,
            f_max=self.f_max,
            bins_per_octave=self.bins_per_octave,
            resample_period=self.resample_period,
            n_static=self.n_static,
            hop=self.hop,
        )

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X):
        config = self._config()
        if isinstance(X, AudioBuffer):
            return cqcc(X, config)
        return [cqcc(item, config) for item in X]


class LfccExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from audio buffers to LFCC matrices."""

    def __init__(
        self,
        win_len_ms: float = 20.0,
        hop_ms: float = 10.0,
        n_fft: int = 512,
        f_min: float = 30.0,
        f_max: float = 8000.0,
        n_filters: int = 20,
        n_static: int = 20,
    ):
        self.win_len_ms = win_len_ms
        self.hop_ms = hop_ms
        self.n_fft = n_fft
        self.f_min = f_min
        self.f_max = f_max
        self.n_filters = n_filters
        self.n_static = n_static

    def _config(self) -> LfccConfig:
        return LfccConfig(
            win_len_ms=self.win_len_ms,
            hop_ms=self.hop_ms,
            n_fft=self.n_fft,
            f_min=self.f_min,
            f_max=self.f_max,
            n_filters=self.n_filters,
            n_static=self.n_static,
        )

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X):
        config = self._config()
        if isinstance(X, AudioBuffer):
            return lfcc(X, config)
        return [lfcc(item, config) for item in X]
