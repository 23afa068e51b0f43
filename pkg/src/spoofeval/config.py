"""Run configuration for the command-line tools.

Configs are INI-style ``key = value`` files with a fixed registry of
sections and keys; anything unknown is a hard error rather than a
warning, so typos cannot silently fall back to defaults.  Command-line
flags override file values.  Every command echoes the effective
configuration it ran with next to its outputs, which makes reruns
reproducible from the artefacts alone.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .frontends import CqccConfig, LfccConfig
from .gmm import EmConfig
from .metrics import CostModel

__all__ = ["ConfigError", "RunConfig", "KNOWN_KEYS"]


class ConfigError(ValueError):
    """Raised for unknown sections/keys or unparseable values."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> parser; registry order fixes the echo layout.
KNOWN_KEYS: dict[str, dict[str, type | object]] = {
    "features": {
        "frontend": str,
        "sample_rate": int,
    },
    "cost": {
        "p_tar": float,
        "p_non": float,
        "p_spoof": float,
        "c_miss": float,
        "c_fa": float,
        "c_fa_spoof": float,
    },
    "cqcc": {
        "f_min": float,
        "f_max": float,
        "bins_per_octave": int,
        "resample_period": int,
        "n_static": int,
        "hop": int,
    },
    "lfcc": {
        "win_len_ms": float,
        "hop_ms": float,
        "n_fft": int,
        "f_min": float,
        "f_max": float,
        "n_filters": int,
        "n_static": int,
    },
    "em": {
        "n_components": int,
        "max_iters": int,
        "rel_tol": float,
        "var_floor_scale": float,
        "seed": int,
    },
    "fusion": {
        "prior": float,
        "l2": float,
        "gtol": float,
        "max_iter": int,
        "normalize": _parse_bool,
    },
}

_FRONTENDS = ("cqcc", "lfcc")


class RunConfig:
    """Validated section/key string values with typed accessors."""

    def __init__(self, values: dict[tuple[str, str], str] | None = None):
        self._values: dict[tuple[str, str], str] = {}
        for (section, key), value in (values or {}).items():
            self.override(section, key, value)

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        """Parse a config file; ``None`` yields an all-defaults config."""
        config = cls()
        if path is None:
            return config
        path = Path(path)
        parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#", ";")
        )
        try:
            text = path.read_text(encoding="utf-8")
            parser.read_string(text, source=str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in KNOWN_KEYS:
                raise ConfigError(
                    f"{path}: unknown section [{section}]; known: {sorted(KNOWN_KEYS)}"
                )
            for key, value in parser.items(section):
                try:
                    config.override(section, key, value)
                except ConfigError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
        return config

    def override(self, section: str, key: str, value) -> None:
        """Set one value (as from a flag), validating section, key, and type."""
        if section not in KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]; known: {sorted(KNOWN_KEYS)}")
        if key not in KNOWN_KEYS[section]:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}]; "
                f"known: {sorted(KNOWN_KEYS[section])}"
            )
        text = str(value)
        self._parse(section, key, text)
        self._values[(section, key)] = text

    def _parse(self, section: str, key: str, text: str):
        parser = KNOWN_KEYS[section][key]
        try:
            return parser(text)
        except ValueError:
            raise ConfigError(
                f"bad value {text!r} for {section}.{key} (expected {getattr(parser, '__name__', 'value')})"
            ) from None

    def get(self, section: str, key: str, default=None):
        if (section, key) in self._values:
            return self._parse(section, key, self._values[(section, key)])
        return default

    def _section_kwargs(self, section: str) -> dict[str, object]:
        return {
            key: self._parse(section, key, text)
            for (sec, key), text in self._values.items()
            if sec == section
        }

    def frontend(self) -> str:
        name = self.get("features", "frontend", "cqcc")
        if name not in _FRONTENDS:
            raise ConfigError(f"unknown frontend {name!r}; expected one of {_FRONTENDS}")
        return name

    def sample_rate(self) -> int:
        rate = self.get("features", "sample_rate", 16000)
        if rate <= 0:
            raise ConfigError(f"features.sample_rate must be positive, got {rate}")
        return rate

    def cost_model(self) -> CostModel:
        try:
            return CostModel(**self._section_kwargs("cost"))
        except ValueError as exc:
            raise ConfigError(f"invalid [cost] section: {exc}") from None

    def cqcc_config(self) -> CqccConfig:
        try:
            return CqccConfig(**self._section_kwargs("cqcc"))
        except ValueError as exc:
            raise ConfigError(f"invalid [cqcc] section: {exc}") from None

    def lfcc_config(self) -> LfccConfig:
        try:
            return LfccConfig(**self._section_kwargs("lfcc"))
        except ValueError as exc:
            raise ConfigError(f"invalid [lfcc] section: {exc}") from None

    def em_config(self) -> EmConfig:
        kwargs = self._section_kwargs("em")
        kwargs.pop("n_components", None)
        try:
            return EmConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"invalid [em] section: {exc}") from None

    def n_components(self, default: int = 512) -> int:
        value = self.get("em", "n_components", default)
        if value < 1:
            raise ConfigError(f"em.n_components must be >= 1, got {value}")
        return value

    def fusion_kwargs(self) -> dict[str, object]:
        kwargs = self._section_kwargs("fusion")
        if "prior" in kwargs and not (0.0 < kwargs["prior"] < 1.0):
            raise ConfigError(f"fusion.prior must lie in (0, 1), got {kwargs['prior']}")
        return kwargs

    def render(self) -> str:
        """Effective configuration: every known key with its active value."""
        lines = []
        for section, keys in KNOWN_KEYS.items():
            lines.append(f"[{section}]")
            for key in keys:
                if (section, key) in self._values:
                    rendered = self._values[(section, key)]
                else:
                    rendered = _DEFAULT_RENDER.get((section, key), "")
                if rendered == "":
                    continue
                lines.append(f"{key} = {rendered}")
            lines.append("")
        return "\n".join(lines)


def _defaults() -> dict[tuple[str, str], str]:
    cost = CostModel()
    cqcc = CqccConfig()
    lfcc = LfccConfig()
    em = EmConfig()
    values: dict[tuple[str, str], str] = {
        ("features", "frontend"): "cqcc",
        ("features", "sample_rate"): "16000",
        ("cost", "p_tar"): repr(cost.p_tar),
        ("cost", "p_non"): repr(cost.p_non),
        ("cost", "p_spoof"): repr(cost.p_spoof),
        ("cost", "c_miss"): repr(cost.c_miss),
        ("cost", "c_fa"): repr(cost.c_fa),
        ("cost", "c_fa_spoof"): repr(cost.c_fa_spoof),
        ("cqcc", "f_min"): repr(cqcc.f_min),
        ("cqcc", "f_max"): repr(cqcc.f_max),
        ("cqcc", "bins_per_octave"): str(cqcc.bins_per_octave),
        ("cqcc", "resample_period"): str(cqcc.resample_period),
        ("cqcc", "n_static"): str(cqcc.n_static),
        ("cqcc", "hop"): "",
        ("lfcc", "win_len_ms"): repr(lfcc.win_len_ms),
        ("lfcc", "hop_ms"): repr(lfcc.hop_ms),
        ("lfcc", "n_fft"): str(lfcc.n_fft),
        ("lfcc", "f_min"): repr(lfcc.f_min),
        ("lfcc", "f_max"): repr(lfcc.f_max),
        ("lfcc", "n_filters"): str(lfcc.n_filters),
        ("lfcc", "n_static"): str(lfcc.n_static),
        ("em", "n_components"): "512",
        ("em", "max_iters"): str(em.max_iters),
        ("em", "rel_tol"): repr(em.rel_tol),
        ("em", "var_floor_scale"): repr(em.var_floor_scale),
        ("em", "seed"): str(em.seed),
        ("fusion", "prior"): "0.5",
        ("fusion", "l2"): "0.0",
        ("fusion", "gtol"): "1e-08",
        ("fusion", "max_iter"): "100",
        ("fusion", "normalize"): "false",
    }
    return values


_DEFAULT_RENDER = _defaults()
