"""Manifest and hypothesis wire formats, and the B1-B4 condition registry.

These JSON-lines schemas are the complete contract between this toolkit and
any ASR training/inference backend; ``docs/formats.md`` documents them field
by field. Writers emit bytes deterministically: fixed key order, compact
separators, UTF-8, ``\\n`` terminated lines, entries sorted by
``(speaker_id, utt_id)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import DataError
from .splitting import Split

SCHEMA_VERSION = 1


class DuplicateUttId(DataError):
    pass


class InvalidEntry(DataError):
    pass


class MalformedLine(DataError):
    pass


class DuplicateHypothesis(DataError):
    pass


class Lineage(str, Enum):
    PRETRAINED = "pretrained"
    SI_ADAPTED = "si_adapted"


class Condition(str, Enum):
    """The four adaptation settings.

    B1: vanilla pre-trained model, no adaptation.
    B2: population-level (speaker-independent) fine-tuning only.
    B3: two-stage - speaker-specific fine-tuning warm-started from B2.
    B4: speaker-specific fine-tuning directly from the pre-trained model.
    """

    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"

    @property
    def init_lineage(self) -> Lineage:
        return {
            Condition.B1: Lineage.PRETRAINED,
            Condition.B2: Lineage.SI_ADAPTED,
            Condition.B3: Lineage.SI_ADAPTED,
            Condition.B4: Lineage.PRETRAINED,
        }[self]

    @property
    def personalization(self) -> bool:
        return self in (Condition.B3, Condition.B4)

    def to_dict(self) -> dict:
        return {
            "id": self.value,
            "init_lineage": self.init_lineage.value,
            "personalization": self.personalization,
        }


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    audio_path: str
    text: str
    speaker_id: str
    split: Split
    dataset: str
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None
    condition: Optional[Condition] = None

    def to_json_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "utt_id": self.utt_id,
            "audio_path": self.audio_path,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "text": self.text,
            "speaker_id": self.speaker_id,
            "split": self.split.value,
            "condition": self.condition.value if self.condition else None,
            "dataset": self.dataset,
        }


@dataclass(frozen=True)
class HypothesisEntry:
    utt_id: str
    hypothesis: str
    condition: Condition
    speaker_id: str
    decode_meta: Optional[dict] = None

    def to_json_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "utt_id": self.utt_id,
            "hypothesis": self.hypothesis,
            "condition": self.condition.value,
            "speaker_id": self.speaker_id,
            "decode_meta": self.decode_meta,
        }


@dataclass
class HypothesisSet:
    entries: list[HypothesisEntry]
    by_key: dict[tuple[str, str], HypothesisEntry] = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_key:
            self.by_key = {(e.condition.value, e.utt_id): e for e in self.entries}

    def get_text(self, condition: Condition, utt_id: str) -> Optional[str]:
        entry = self.by_key.get((condition.value, utt_id))
        return entry.hypothesis if entry is not None else None

    def conditions(self) -> set[Condition]:
        return {e.condition for e in self.entries}


def _validate_entry(entry: ManifestEntry) -> None:
    if not entry.utt_id:
        raise InvalidEntry("manifest entry with empty utt_id")
    if not entry.text:
        raise InvalidEntry(f"manifest entry {entry.utt_id}: empty reference text")
    if not entry.speaker_id:
        raise InvalidEntry(f"manifest entry {entry.utt_id}: empty speaker_id")
    if not entry.audio_path:
        raise InvalidEntry(f"manifest entry {entry.utt_id}: empty audio_path")
    if (entry.start_ms is None) != (entry.end_ms is None):
        raise InvalidEntry(
            f"manifest entry {entry.utt_id}: start_ms and end_ms must come together"
        )
    if entry.start_ms is not None and entry.start_ms > entry.end_ms:
        raise InvalidEntry(
            f"manifest entry {entry.utt_id}: start_ms {entry.start_ms} > end_ms {entry.end_ms}"
        )


def _dump_line(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n"


def write_manifest(entries: Iterable[ManifestEntry], path: Union[str, Path]) -> None:
    """Validate and write entries sorted by (speaker_id, utt_id).

    An empty entry list produces an empty (0 byte) file.
    """
    entries = list(entries)
    seen: set[str] = set()
    for entry in entries:
        _validate_entry(entry)
        if entry.utt_id in seen:
            raise DuplicateUttId(f"duplicate utt_id {entry.utt_id!r} in manifest")
        seen.add(entry.utt_id)
    ordered = sorted(entries, key=lambda e: (e.speaker_id, e.utt_id))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in ordered:
            fh.write(_dump_line(entry.to_json_dict()))


def read_manifest(path: Union[str, Path]) -> list[ManifestEntry]:
    """Read and re-validate a manifest file."""
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"{exc.msg}", line_no=line_no) from exc
            if not isinstance(data, dict) or data.get("v") != SCHEMA_VERSION:
                raise MalformedLine("not a v1 manifest entry", line_no=line_no)
            try:
                entry = ManifestEntry(
                    utt_id=data["utt_id"],
                    audio_path=data["audio_path"],
                    start_ms=data.get("start_ms"),
                    end_ms=data.get("end_ms"),
                    text=data["text"],
                    speaker_id=data["speaker_id"],
                    split=Split(data["split"]),
                    condition=Condition(data["condition"]) if data.get("condition") else None,
                    dataset=data["dataset"],
                )
            except (KeyError, ValueError) as exc:
                raise MalformedLine(f"bad manifest entry: {exc}", line_no=line_no) from exc
            _validate_entry(entry)
            if entry.utt_id in seen:
                raise DuplicateUttId(
                    f"duplicate utt_id {entry.utt_id!r}", line_no=line_no
                )
            seen.add(entry.utt_id)
            entries.append(entry)
    return entries


def write_hypotheses(entries: Iterable[HypothesisEntry], path: Union[str, Path]) -> None:
    """Write hypothesis entries sorted by (condition, speaker_id, utt_id)."""
    ordered = sorted(
        entries, key=lambda e: (e.condition.value, e.speaker_id, e.utt_id)
    )
    seen: set[tuple[str, str]] = set()
    for entry in ordered:
        key = (entry.condition.value, entry.utt_id)
        if key in seen:
            raise DuplicateHypothesis(
                f"duplicate hypothesis for {entry.utt_id!r} under {entry.condition.value}"
            )
        seen.add(key)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in ordered:
            fh.write(_dump_line(entry.to_json_dict()))


def read_hypotheses(path: Union[str, Path]) -> HypothesisSet:
    """Parse a hypothesis file.

    A duplicate utt_id within one condition is an error; an empty hypothesis
    string is legal (it scores as all-deletions).
    """
    entries: list[HypothesisEntry] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"{exc.msg}", line_no=line_no) from exc
            if not isinstance(data, dict) or data.get("v") != SCHEMA_VERSION:
                raise MalformedLine("not a v1 hypothesis entry", line_no=line_no)
            try:
                entry = HypothesisEntry(
                    utt_id=data["utt_id"],
                    hypothesis=data["hypothesis"],
                    condition=Condition(data["condition"]),
                    speaker_id=data["speaker_id"],
                    decode_meta=data.get("decode_meta"),
                )
            except (KeyError, ValueError) as exc:
                raise MalformedLine(f"bad hypothesis entry: {exc}", line_no=line_no) from exc
            if not isinstance(entry.hypothesis, str):
                raise MalformedLine("hypothesis must be a string", line_no=line_no)
            key = (entry.condition.value, entry.utt_id)
            if key in seen:
                raise DuplicateHypothesis(
                    f"duplicate hypothesis for {entry.utt_id!r} under {entry.condition.value}",
                    line_no=line_no,
                )
            seen.add(key)
            entries.append(entry)
    return HypothesisSet(entries)
