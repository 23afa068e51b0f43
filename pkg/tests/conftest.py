"""Shared fixtures: independent metric oracles and synthetic audio."""

from __future__ import annotations

import numpy as np
import pytest

from spoofeval import AudioBuffer


# ---------------------------------------------------------------------------
# Brute-force metric oracles.
#
# These deliberately avoid the vectorised searchsorted route used by the
# package: thresholds are enumerated one by one and each error rate is
# recounted with a fresh elementwise comparison.
# ---------------------------------------------------------------------------

def oracle_curve(pos, neg):
    """(thresholds, p_miss, p_fa) by per-threshold recounting."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    thresholds = [-np.inf] + sorted(set(pos.tolist()) | set(neg.tolist())) + [np.inf]
    p_miss, p_fa = [], []
    for t in thresholds:
        p_miss.append(np.count_nonzero(pos < t) / pos.size)
        p_fa.append(np.count_nonzero(neg >= t) / neg.size)
    return np.array(thresholds), np.array(p_miss), np.array(p_fa)


def oracle_min_tdcf(bona, spoof, c0, c1, c2):
    """(value, threshold) minimising the normalised tandem cost."""
    thresholds, p_miss, p_fa = oracle_curve(bona, spoof)
    denom = c0 + min(c1, c2)
    best_value, best_threshold = None, None
    for t, pm, pf in zip(thresholds, p_miss, p_fa):
        value = (c0 + c1 * pm + c2 * pf) / denom
        if best_value is None or value < best_value:
            best_value, best_threshold = value, t
    return best_value, best_threshold


def oracle_eer(pos, neg):
    """(value, threshold) of the miss/false-alarm crossing."""
    thresholds, p_miss, p_fa = oracle_curve(pos, neg)
    for i in range(len(thresholds)):
        diff = p_miss[i] - p_fa[i]
        if diff == 0.0:
            return p_miss[i], thresholds[i]
        if diff > 0.0:
            m0, f0 = p_miss[i - 1], p_fa[i - 1]
            m1, f1 = p_miss[i], p_fa[i]
            frac = (f0 - m0) / ((m1 - m0) + (f0 - f1))
            value = m0 + frac * (m1 - m0)
            lo, hi = thresholds[i - 1], thresholds[i]
            if np.isinf(lo):
                return value, hi
            if np.isinf(hi):
                return value, lo
            return value, lo + frac * (hi - lo)
    raise AssertionError("no crossing found")


# ---------------------------------------------------------------------------
# Synthetic audio: two audibly distinct classes.
# ---------------------------------------------------------------------------

SAMPLE_RATE = 16000


def multi_tone(rng, duration_s: float = 1.0, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """A few random harmonics plus a little noise, peak-limited."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(120.0, 420.0)
    x = np.zeros(n)
    for harmonic in range(1, 4):
        x += (0.3 / harmonic) * np.sin(2.0 * np.pi * f0 * harmonic * t + rng.uniform(0, 2 * np.pi))
    x += 0.01 * rng.standard_normal(n)
    return np.clip(x, -0.99, 0.99)


def distorted_tone(rng, duration_s: float = 1.0, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """The same tones passed through a memoryless cubic distortion."""
    x = multi_tone(rng, duration_s, sample_rate)
    y = x + 0.9 * x**3
    peak = np.max(np.abs(y))
    return np.clip(0.9 * y / peak, -0.99, 0.99)


def tone_buffer(rng, spoofed: bool = False, duration_s: float = 1.0) -> AudioBuffer:
    samples = distorted_tone(rng, duration_s) if spoofed else multi_tone(rng, duration_s)
    return AudioBuffer(samples=samples, sample_rate=SAMPLE_RATE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
