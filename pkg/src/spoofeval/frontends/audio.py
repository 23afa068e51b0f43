"""PCM audio container and WAV file access.

Only RIFF/WAVE files holding 16-bit PCM mono audio at the expected sample
rate are accepted; anything else is rejected rather than resampled or
remixed.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_PCM16_SCALE = 32768.0


class AudioFormatError(ValueError):
    """Raised for unreadable or unsupported audio files."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples in [-1, 1] with their sample rate in Hz."""

    samples: np.ndarray = field(repr=False)
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        peak = float(np.max(np.abs(samples)))
        if peak > 1.0:
            raise ValueError(f"samples must lie in [-1, 1] (peak {peak:.6g})")
        if not (isinstance(self.sample_rate, (int, np.integer)) and self.sample_rate > 0):
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path, expected_rate: int = 16000) -> AudioBuffer:
    """Read a 16-bit PCM mono WAV file recorded at ``expected_rate``.

    Raises
    ------
    AudioFormatError
        If the file is not a valid WAV container, is not mono 16-bit PCM,
        or has a different sample rate (no resampling is performed).
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            comptype = wav.getcomptype()
            n_frames = wav.getnframes()
            payload = wav.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from None
    if comptype != "NONE" or width != 2:
        raise AudioFormatError(f"{path}: only uncompressed 16-bit PCM is supported")
    if channels != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got {channels} channels")
    if rate != expected_rate:
        raise AudioFormatError(
            f"{path}: unsupported sample rate {rate} Hz (expected {expected_rate})"
        )
    if n_frames == 0:
        raise AudioFormatError(f"{path}: empty audio stream")
    samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / _PCM16_SCALE
    return AudioBuffer(samples=samples, sample_rate=rate)


def save_wav(path, audio: AudioBuffer) -> None:
    """Write an AudioBuffer as 16-bit PCM mono WAV."""
    pcm = np.clip(np.rint(audio.samples * _PCM16_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(audio.sample_rate)
        wav.writeframes(pcm.tobytes())
