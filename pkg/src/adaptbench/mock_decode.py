"""Reference-corrupting mock decoder for GPU-free pipeline exercises.

Hypotheses are derived from manifest reference text by applying seeded
substitution/deletion/insertion noise. All randomness is hash-derived from
``(seed, condition, model speaker, utt_id, position)``, so output is
byte-identical across runs, platforms and degrees of parallelism, and does
not depend on the order utterances are processed in. Per-condition rate
offsets let a run make B3 look better than B4 so the delta analytics have
something real to chew on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional

from .manifest import Condition, HypothesisEntry, ManifestEntry

MOCK_VOCAB = (
    "apple", "river", "stone", "yellow", "quiet", "window", "garden",
    "candle", "mirror", "button", "pillow", "thunder", "violet", "marble",
    "copper", "lantern",
)


@dataclass(frozen=True)
class CorruptionRates:
    substitution: float = 0.0
    deletion: float = 0.0
    insertion: float = 0.0

    def shifted(self, offset: float) -> "CorruptionRates":
        clamp = lambda x: min(max(x, 0.0), 1.0)
        return CorruptionRates(
            substitution=clamp(self.substitution + offset),
            deletion=clamp(self.deletion + offset),
            insertion=clamp(self.insertion + offset),
        )


def _unit(*parts: str) -> float:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _pick(*parts: str) -> str:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return MOCK_VOCAB[digest[0] % len(MOCK_VOCAB)]


def corrupt_words(words: list[str], rates: CorruptionRates, key: str) -> list[str]:
    out: list[str] = []
    for i, word in enumerate(words):
        pos = str(i)
        if _unit(key, pos, "del") < rates.deletion:
            pass
        elif _unit(key, pos, "sub") < rates.substitution:
            out.append(_pick(key, pos, "subword"))
        else:
            out.append(word)
        if _unit(key, pos, "ins") < rates.insertion:
            out.append(_pick(key, pos, "insword"))
    return out


def mock_decode(
    entries: Iterable[ManifestEntry],
    condition: Condition,
    rates: CorruptionRates,
    seed: int,
    model_speaker: Optional[str] = None,
) -> list[HypothesisEntry]:
    """One hypothesis per manifest entry, with rate-controlled corruption."""
    hyps = []
    for entry in entries:
        key = "\x1f".join(
            [str(seed), condition.value, model_speaker or "", entry.utt_id]
        )
        hypothesis = " ".join(corrupt_words(entry.text.split(), rates, key))
        meta = {"temperature": 0, "beam_size": 5, "backend": "mock"}
        if model_speaker:
            meta["model_speaker"] = model_speaker
        hyps.append(
            HypothesisEntry(
                utt_id=entry.utt_id,
                hypothesis=hypothesis,
                condition=condition,
                speaker_id=entry.speaker_id,
                decode_meta=meta,
            )
        )
    return hyps
