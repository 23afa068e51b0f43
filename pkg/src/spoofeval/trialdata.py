"""Trial protocols, score files, and their join into scored trial sets.

Two line-based UTF-8 text formats are used throughout the toolkit:

* protocol file -- five whitespace-separated fields per line::

      speaker_id  trial_id  env_id  attack_id  key

  ``env_id`` is a three-character token over ``{a, b, c}`` (acoustic
  environment) or ``-`` when absent.  ``attack_id`` is ``-`` for bona fide
  trials and an attack label (e.g. ``A17`` or ``AA``) otherwise.  The key
  field holds either countermeasure keys (``bonafide``/``spoof``) or
  speaker-verification keys (``target``/``nontarget``/``spoof``); the caller
  declares which key set applies.

* score file -- two fields per line: ``trial_id score``.

Blank lines and lines starting with ``#`` are skipped in both formats.
Files may use LF or CRLF endings; serialization emits LF.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ProtocolError(ValueError):
    """Raised for malformed or inconsistent protocol files."""


class ScoreFileError(ValueError):
    """Raised for malformed score files."""


class JoinError(ValueError):
    """Raised when a protocol and a score file do not cover the same trials."""


class CmKey(enum.Enum):
    """Countermeasure ground-truth label."""

    BONA_FIDE = "bonafide"
    SPOOF = "spoof"


class AsvKey(enum.Enum):
    """Speaker-verification ground-truth label."""

    TARGET = "target"
    NONTARGET = "nontarget"
    SPOOF = "spoof"


_ENV_ALPHABET = frozenset("abc")

NO_ATTACK = "-"


def _check_env_id(env_id: str | None) -> None:
    if env_id is None:
        return
    if len(env_id) != 3 or any(c not in _ENV_ALPHABET for c in env_id):
        raise ProtocolError(
            f"malformed env_id {env_id!r}: expected 3 characters over {{a,b,c}}"
        )


@dataclass(frozen=True)
class Condition:
    """Attack/environment labels attached to one trial.

    ``attack_id`` is ``"-"`` exactly when the trial is bona fide; ``env_id``
    is ``None`` for scenarios without simulated acoustics.
    """

    attack_id: str
    env_id: str | None = None

    def __post_init__(self):
        if not self.attack_id or any(c.isspace() for c in self.attack_id):
            raise ProtocolError(f"invalid attack_id {self.attack_id!r}")
        _check_env_id(self.env_id)

    @property
    def is_attack(self) -> bool:
        return self.attack_id != NO_ATTACK


@dataclass(frozen=True)
class TrialRecord:
    """One protocol line: identifiers, condition, and ground-truth keys.

    ``asv_key`` is set only when the protocol was parsed with the
    speaker-verification key set; ``cm_key`` is always available (target and
    nontarget trials are bona fide).
    """

    trial_id: str
    condition: Condition
    cm_key: CmKey
    asv_key: AsvKey | None = None
    speaker_id: str = "-"

    def __post_init__(self):
        if not self.trial_id or any(c.isspace() for c in self.trial_id):
            raise ProtocolError(f"invalid trial_id {self.trial_id!r}")
        if (self.cm_key is CmKey.SPOOF) != self.condition.is_attack:
            raise ProtocolError(
                f"trial {self.trial_id}: attack_id must be '-' exactly for "
                f"bona fide trials (got {self.condition.attack_id!r} with "
                f"key {self.cm_key.value})"
            )
        if self.asv_key is not None:
            spoofed = self.asv_key is AsvKey.SPOOF
            if spoofed != (self.cm_key is CmKey.SPOOF):
                raise ProtocolError(
                    f"trial {self.trial_id}: ASV key {self.asv_key.value} "
                    f"conflicts with CM key {self.cm_key.value}"
                )


_CM_TOKENS = {k.value: k for k in CmKey}
_ASV_TOKENS = {k.value: k for k in AsvKey}


def _content_lines(text: str):
    """Yield (line_number, stripped_line) skipping blanks and '#' comments."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_protocol(text: str, keys: str = "cm") -> list[TrialRecord]:
    """Parse a protocol file into trial records, preserving file order.

    Parameters
    ----------
    text : str
        Protocol file contents.
    keys : {"cm", "asv"}
        Which key set the fifth field uses: ``bonafide``/``spoof`` for
        countermeasure protocols, ``target``/``nontarget``/``spoof`` for
        speaker-verification protocols.

    Raises
    ------
    ProtocolError
        On wrong field count, duplicate ``trial_id``, unknown key token,
        malformed ``env_id``, or attack/key inconsistency.  Messages carry
        the offending line number.
    """
    if keys not in ("cm", "asv"):
        raise ValueError(f"keys must be 'cm' or 'asv', got {keys!r}")
    records: list[TrialRecord] = []
    seen: set[str] = set()
    for lineno, line in _content_lines(text):
        fields = line.split()
        if len(fields) != 5:
            raise ProtocolError(
                f"line {lineno}: expected 5 fields, got {len(fields)}"
            )
        speaker_id, trial_id, env_token, attack_id, key_token = fields
        if trial_id in seen:
            raise ProtocolError(f"line {lineno}: duplicate trial_id {trial_id!r}")
        seen.add(trial_id)

        env_id = None if env_token == "-" else env_token
        try:
            if keys == "cm":
                if key_token not in _CM_TOKENS:
                    raise ProtocolError(
                        f"unknown key {key_token!r} (expected bonafide/spoof)"
                    )
                cm_key, asv_key = _CM_TOKENS[key_token], None
            else:
                if key_token not in _ASV_TOKENS:
                    raise ProtocolError(
                        f"unknown key {key_token!r} "
                        f"(expected target/nontarget/spoof)"
                    )
                asv_key = _ASV_TOKENS[key_token]
                cm_key = CmKey.SPOOF if asv_key is AsvKey.SPOOF else CmKey.BONA_FIDE
            record = TrialRecord(
                trial_id=trial_id,
                condition=Condition(attack_id=attack_id, env_id=env_id),
                cm_key=cm_key,
                asv_key=asv_key,
                speaker_id=speaker_id,
            )
        except ProtocolError as exc:
            raise ProtocolError(f"line {lineno}: {exc}") from None
        records.append(record)
    return records


def parse_scores(text: str) -> dict[str, float]:
    """Parse a score file into a trial_id -> score map at full precision.

    Raises
    ------
    ScoreFileError
        On wrong field count, duplicate ``trial_id``, unparseable numbers,
        or non-finite (NaN/inf) scores.
    """
    scores: dict[str, float] = {}
    for lineno, line in _content_lines(text):
        fields = line.split()
        if len(fields) != 2:
            raise ScoreFileError(
                f"line {lineno}: expected 2 fields, got {len(fields)}"
            )
        trial_id, token = fields
        if trial_id in scores:
            raise ScoreFileError(f"line {lineno}: duplicate trial_id {trial_id!r}")
        try:
            value = float(token)
        except ValueError:
            raise ScoreFileError(
                f"line {lineno}: unparseable score {token!r}"
            ) from None
        if not math.isfinite(value):
            raise ScoreFileError(f"line {lineno}: non-finite score {token!r}")
        scores[trial_id] = value
    return scores


@dataclass(frozen=True)
class ScoreSet:
    """Trial records joined with their detector scores, in protocol order."""

    records: tuple[TrialRecord, ...]
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or len(scores) != len(self.records):
            raise ValueError("scores must be a 1-D array aligned with records")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.records)

    def cm_mask(self, key: CmKey) -> np.ndarray:
        return np.array([r.cm_key is key for r in self.records], dtype=bool)

    def asv_mask(self, key: AsvKey) -> np.ndarray:
        return np.array([r.asv_key is key for r in self.records], dtype=bool)

    def cm_scores(self, key: CmKey) -> np.ndarray:
        return self.scores[self.cm_mask(key)]

    def asv_scores(self, key: AsvKey) -> np.ndarray:
        return self.scores[self.asv_mask(key)]

    @property
    def bona_fide_scores(self) -> np.ndarray:
        return self.cm_scores(CmKey.BONA_FIDE)

    @property
    def spoof_scores(self) -> np.ndarray:
        return self.cm_scores(CmKey.SPOOF)

    def to_protocol_text(self) -> str:
        return serialize_protocol(self.records)

    def to_scores_text(self, precision: int = 6, full_precision: bool = False) -> str:
        pairs = ((r.trial_id, s) for r, s in zip(self.records, self.scores))
        return serialize_scores(pairs, precision=precision, full_precision=full_precision)


def join(records: list[TrialRecord], scores: dict[str, float]) -> ScoreSet:
    """Pair every protocol trial with its score, keeping protocol order.

    Raises
    ------
    JoinError
        If the two inputs do not cover exactly the same trials.  The
        message reports the mismatch count and the first 10 trial ids; a
        fully disjoint pair is reported as an empty intersection.
    """
    protocol_ids = {r.trial_id for r in records}
    if not protocol_ids & scores.keys():
        raise JoinError("empty intersection: no trial id appears in both inputs")
    missing = [r.trial_id for r in records if r.trial_id not in scores]
    if missing:
        raise JoinError(
            f"{len(missing)} protocol trial(s) have no score; "
            f"first {min(10, len(missing))}: {', '.join(missing[:10])}"
        )
    extra = [t for t in scores if t not in protocol_ids]
    if extra:
        raise JoinError(
            f"{len(extra)} score(s) have no protocol entry; "
            f"first {min(10, len(extra))}: {', '.join(extra[:10])}"
        )
    values = np.array([scores[r.trial_id] for r in records], dtype=np.float64)
    return ScoreSet(records=tuple(records), scores=values)


def serialize_protocol(records) -> str:
    """Render trial records in the five-field protocol format (LF endings)."""
    lines = []
    for r in records:
        key = r.asv_key.value if r.asv_key is not None else r.cm_key.value
        env = r.condition.env_id if r.condition.env_id is not None else "-"
        lines.append(
            f"{r.speaker_id} {r.trial_id} {env} {r.condition.attack_id} {key}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def format_score(value: float, precision: int = 6, full_precision: bool = False) -> str:
    """Format one score: `precision` significant digits, or shortest exact."""
    if full_precision:
        return repr(float(value))
    return f"{value:.{precision}g}"


def serialize_scores(pairs, precision: int = 6, full_precision: bool = False) -> str:
    """Render (trial_id, score) pairs in the two-field score format.

    ``full_precision`` emits the shortest decimal that parses back to the
    identical double, so serialize/parse round-trips exactly.
    """
    if isinstance(pairs, dict):
        pairs = pairs.items()
    lines = [
        f"{trial_id} {format_score(value, precision, full_precision)}"
        for trial_id, value in pairs
    ]
    return "\n".join(lines) + ("\n" if lines else "")
