"""Audio ingestion, DSP primitives, and cepstral feature extraction."""

from .audio import AudioBuffer, AudioFormatError, load_wav, save_wav
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
from .extract import (
    CqccConfig,
    CqccExtractor,
    LfccConfig,
    LfccExtractor,
    cqcc,
    lfcc,
)
from .featio import (
    FEATURE_MAGIC,
    FeatureFileError,
    read_features,
    write_features,
    write_features_csv,
)

__all__ = [
    "AudioBuffer",
    "AudioFormatError",
    "load_wav",
    "save_wav",
    "LOG_FLOOR",
    "cq_frequencies",
    "cq_kernel_lengths",
    "cqt",
    "dct_ii",
    "deltas",
    "frame_signal",
    "linear_filterbank",
    "power_spectrum",
    "uniform_resample",
    "CqccConfig",
    "CqccExtractor",
    "LfccConfig",
    "LfccExtractor",
    "cqcc",
    "lfcc",
    "FEATURE_MAGIC",
    "FeatureFileError",
    "read_features",
    "write_features",
    "write_features_csv",
]
