"""Signal-processing building blocks shared by the feature extractors.

Conventions fixed here and relied on by callers and tests:

* framing lays windows at offsets 0, hop, 2*hop, ...; the count of full
  frames is ``floor((n - win_len) / hop) + 1`` and one extra zero-padded
  tail frame is appended iff samples remain beyond the last full frame;
* the constant-Q frequency table is built by the exact recurrence
  ``f[k+1] = f[k] * 2**(1 / bins_per_octave)`` so consecutive-bin ratios
  are bit-identical;
* constant-Q analysis frames are centre-aligned: every bin's window is
  centred inside the span of the longest (lowest-frequency) kernel;
* spectral compression uses ``log(max(p, 1e-20))``;
* cepstra come from the orthonormal DCT-II;
* dynamic (delta) features use a +-2 frame regression window with
  edge-replicated boundaries.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.interpolate import CubicSpline

LOG_FLOOR = 1e-20


def _as_signal(samples, name: str = "samples") -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def frame_signal(samples, win_len: int, hop: int) -> np.ndarray:
    """Slice a signal into overlapping frames of ``win_len`` samples.

    Frames start at offsets 0, hop, 2*hop, ...  All frames that fit
    entirely are returned, plus one zero-padded tail frame when samples
    remain past the last full frame.
    """
    x = _as_signal(samples)
    if not (0 < hop <= win_len):
        raise ValueError(f"hop must satisfy 0 < hop <= win_len, got hop={hop} win_len={win_len}")
    n = x.size
    if n < win_len:
        raise ValueError(f"signal of {n} samples is shorter than one window ({win_len})")
    n_full = (n - win_len) // hop + 1
    frames = sliding_window_view(x, win_len)[: (n_full - 1) * hop + 1 : hop]
    if (n - win_len) % hop != 0:
        tail_start = n_full * hop
        tail = np.zeros((1, win_len))
        tail[0, : n - tail_start] = x[tail_start:]
        frames = np.concatenate([frames, tail], axis=0)
    else:
        frames = np.array(frames)
    return frames


def _resolve_window(window, length: int) -> np.ndarray:
    if isinstance(window, str):
        if window == "hamming":
            return np.hamming(length)
        if window == "rectangular":
            return np.ones(length)
        raise ValueError(f"unknown window {window!r}; use 'hamming', 'rectangular', or an array")
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (length,):
        raise ValueError(f"window array must have shape ({length},), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("window array must be finite")
    return w


def power_spectrum(frames, n_fft: int = 512, window="hamming") -> np.ndarray:
    """Windowed power spectrum, ``n_fft // 2 + 1`` bins per frame.

    Accepts a single frame (1-D) or a frame stack (2-D); the output
    matches the input's dimensionality.
    """
    arr = np.asarray(frames, dtype=np.float64)
    single = arr.ndim == 1
    frames2d = np.atleast_2d(arr)
    if frames2d.ndim != 2 or frames2d.shape[1] == 0:
        raise ValueError("frames must be a 1-D frame or a 2-D frame stack")
    length = frames2d.shape[1]
    if length > n_fft:
        raise ValueError(f"frame length {length} exceeds FFT size {n_fft}")
    w = _resolve_window(window, length)
    spectrum = np.fft.rfft(frames2d * w, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    return power[0] if single else power


def linear_filterbank(
    n_filters: int, n_fft: int, sample_rate: int, f_min: float, f_max: float
) -> np.ndarray:
    """Triangular filters with linearly spaced centres and 50% overlap.

    Returns an ``(n_filters, n_fft // 2 + 1)`` weight matrix; each row is
    a unit-height triangle whose base runs from the previous centre to the
    next one.
    """
    if n_filters < 1:
        raise ValueError("n_filters must be >= 1")
    if not (0 <= f_min < f_max):
        raise ValueError(f"need 0 <= f_min < f_max, got {f_min} and {f_max}")
    if f_max > sample_rate / 2:
        raise ValueError(f"f_max {f_max} exceeds the Nyquist frequency {sample_rate / 2}")
    edges = np.linspace(f_min, f_max, n_filters + 2)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    bank = np.zeros((n_filters, bin_freqs.size))
    for i in range(n_filters):
        lo, centre, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_freqs - lo) / (centre - lo)
        falling = (hi - bin_freqs) / (hi - centre)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def dct_ii(values, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, keeping ``n_out`` terms."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[-1] < n_out:
        raise ValueError(f"cannot keep {n_out} DCT terms from length {arr.shape[-1]}")
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    return dct(arr, type=2, norm="ortho", axis=-1)[..., :n_out]


def deltas(features, half_window: int = 2) -> np.ndarray:
    """Regression-slope dynamic coefficients over ``+-half_window`` frames.

    The sequence is edge-replicated before the weighted difference, so the
    output has the same shape as the input.  A constant-slope input yields
    that slope exactly at every frame away from the replicated edges.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("features must be a non-empty (frames, dims) matrix")
    if half_window < 1:
        raise ValueError("half_window must be >= 1")
    w = half_window
    n = feats.shape[0]
    padded = np.pad(feats, ((w, w), (0, 0)), mode="edge")
    num = np.zeros_like(feats)
    for offset in range(1, w + 1):
        num += offset * (padded[w + offset : w + offset + n] - padded[w - offset : w - offset + n])
    denom = 2.0 * sum(offset**2 for offset in range(1, w + 1))
    return num / denom


def cq_frequencies(f_min: float, f_max: float, bins_per_octave: int) -> np.ndarray:
    """Geometric centre-frequency table for constant-Q analysis.

    ``K = ceil(bins_per_octave * log2(f_max / f_min))`` bins starting at
    ``f_min``; each frequency is the previous one times exactly
    ``2**(1 / bins_per_octave)``, so ``freqs[k + 1] / freqs[k]`` reproduces
    the ratio without rounding drift.
    """
    if not (0 < f_min < f_max):
        raise ValueError(f"need 0 < f_min < f_max, got {f_min} and {f_max}")
    if bins_per_octave < 1:
        raise ValueError("bins_per_octave must be >= 1")
    n_bins = int(np.ceil(bins_per_octave * np.log2(f_max / f_min)))
    ratio = 2.0 ** (1.0 / bins_per_octave)
    freqs = np.empty(n_bins)
    value = float(f_min)
    for k in range(n_bins):
        freqs[k] = value
        value = value * ratio
    return freqs


def cq_kernel_lengths(freqs, sample_rate: int, bins_per_octave: int) -> np.ndarray:
    """Per-bin analysis window lengths ``ceil(Q * sample_rate / f_k)``.

    ``Q = 1 / (2**(1 / bins_per_octave) - 1)`` keeps the frequency-domain
    bandwidth proportional to each bin's centre frequency.
    """
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    lengths = np.ceil(q * sample_rate / np.asarray(freqs, dtype=np.float64))
    return lengths.astype(np.int64)


def cqt(
    samples,
    sample_rate: int,
    f_min: float,
    f_max: float,
    bins_per_octave: int,
    hop: int,
) -> np.ndarray:
    """Constant-Q spectrogram, one complex row per geometric bin.

    Every bin correlates the signal against a Hamming-windowed complex
    exponential of its own length, normalised by the window sum.  Frames
    are centre-aligned within the span of the longest kernel and advance
    by ``hop`` samples; the frame count is the same for every bin and the
    trailing partial span is dropped.  Signals shorter than the longest
    kernel are rejected.
    """
    x = _as_signal(samples)
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if f_max > sample_rate / 2:
        raise ValueError(f"f_max {f_max} exceeds the Nyquist frequency {sample_rate / 2}")
    freqs = cq_frequencies(f_min, f_max, bins_per_octave)
    lengths = cq_kernel_lengths(freqs, sample_rate, bins_per_octave)
    n_max = int(lengths[0])
    n = x.size
    if n < n_max:
        raise ValueError(
            f"signal of {n} samples is shorter than the longest analysis kernel "
            f"({n_max} samples at f_min={f_min} Hz)"
        )
    n_frames = (n - n_max) // hop + 1
    centre = n_max // 2
    out = np.empty((freqs.size, n_frames), dtype=np.complex128)
    for k in range(freqs.size):
        n_k = int(lengths[k])
        idx = np.arange(n_k)
        window = np.hamming(n_k)
        phase = 2.0 * np.pi * freqs[k] * idx / sample_rate
        kernel_re = window * np.cos(phase)
        kernel_im = window * np.sin(phase)
        scale = 1.0 / window.sum()
        offset = centre - n_k // 2
        segments = sliding_window_view(x, n_k)[offset : offset + (n_frames - 1) * hop + 1 : hop]
        out[k] = (segments @ kernel_re - 1j * (segments @ kernel_im)) * scale
    return out


def uniform_resample(values, freqs, f_min: float, f_max: float, period: int) -> np.ndarray:
    """Resample per-column spectra from a geometric to a uniform axis.

    Fits a natural cubic spline through ``(freqs, values)`` along axis 0
    and evaluates it on ``linspace(f_min, f_max, n_uniform)`` where
    ``n_uniform = period * max(1, rint(len(freqs) / period))``, i.e. the
    nearest multiple of ``period`` to the input bin count.
    """
    arr = np.asarray(values, dtype=np.float64)
    grid_in = np.asarray(freqs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != grid_in.size:
        raise ValueError("values must be a (bins, frames) matrix aligned with freqs")
    if grid_in.size < 2 or np.any(np.diff(grid_in) <= 0):
        raise ValueError("freqs must be strictly increasing with at least two entries")
    if period < 1:
        raise ValueError("period must be >= 1")
    n_uniform = period * max(1, int(np.rint(grid_in.size / period)))
    grid_out = np.linspace(f_min, f_max, n_uniform)
    spline = CubicSpline(grid_in, arr, axis=0, bc_type="natural", extrapolate=True)
    return spline(grid_out)
