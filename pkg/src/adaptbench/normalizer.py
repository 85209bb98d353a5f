"""Deterministic conversion of parsed utterances into clean ASR target text.

All CHAT marker symbols are removed; the words themselves are kept unless a
policy flag says otherwise. Retraced and repeated words are audible speech,
so they stay in the target by default (only the markers go). Surface forms
with an intended-word replacement are swapped for the replacement, which may
be several words. Non-standard phonological transcriptions without a
replacement have no orthographic target and are always dropped.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .chat_parser import (
    AnnotationKind,
    ChatDocument,
    TimeAlignment,
    Token,
    TokenKind,
    Utterance,
)

# characters that must never survive into normalized text
_FORBIDDEN = re.compile(r"[\[\]<>•\x00-\x1f\x7f]")
# in-word CHAT noise: lengthening ":", blocked-word "^"
_INWORD_MARKS = re.compile(r"[:^]")
_EDGE_PUNCT = ".,;?!\"”“"


@dataclass(frozen=True)
class NormalizationPolicy:
    """Flags controlling which token classes survive normalization."""

    apply_replacements: bool = True
    keep_retraced_words: bool = True
    drop_unintelligible: bool = True
    drop_nonspeech: bool = True
    drop_fragments: bool = True
    lowercase: bool = False

    def fingerprint(self) -> str:
        """Stable 12-hex-digit digest; changes iff any field changes."""
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:12]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationPolicy":
        return cls(**data)


@dataclass(frozen=True)
class NormalizedUtterance:
    utt_id: str
    speaker_code: str
    text: str
    alignment: Optional[TimeAlignment]
    provenance: str

    @property
    def is_empty(self) -> bool:
        return not self.text

    def to_dict(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "speaker_code": self.speaker_code,
            "text": self.text,
            "start_ms": self.alignment.start_ms if self.alignment else None,
            "end_ms": self.alignment.end_ms if self.alignment else None,
            "empty": self.is_empty,
            "provenance": self.provenance,
        }


def _clean_surface(surface: str) -> list[str]:
    """Strip CHAT symbol noise from one surface form; may yield 0..n words."""
    s = surface
    for prefix in ("&=", "&+", "&-", "&"):
        if s.startswith(prefix):
            s = s[len(prefix):]
            break
    s = s.split("@", 1)[0]
    s = s.replace("(", "").replace(")", "")
    s = _INWORD_MARKS.sub("", s)
    s = s.replace("_", " ").replace("+", " ")
    s = _FORBIDDEN.sub("", s)
    words = []
    for word in s.split():
        word = word.strip(_EDGE_PUNCT)
        if word:
            words.append(word)
    return words


def _clean_replacement(replacement: str) -> list[str]:
    return [w for part in replacement.split() for w in _clean_surface(part)]


def normalize_utterance(utt: Utterance, policy: NormalizationPolicy) -> NormalizedUtterance:
    """Render one utterance as clean space-joined target text.

    Total: never raises; an utterance may normalize to the empty string.
    """
    dropped: set[int] = set()
    if not policy.keep_retraced_words:
        for ann in utt.annotations:
            if ann.kind in (AnnotationKind.RETRACE, AnnotationKind.REPETITION):
                dropped.update(range(*ann.scope))
    group_repl: dict[int, tuple[int, str]] = {}
    if policy.apply_replacements:
        for ann in utt.annotations:
            if ann.kind == AnnotationKind.REPLACEMENT and ann.replacement:
                start, end = ann.scope
                group_repl[start] = (end, ann.replacement)

    words: list[str] = []
    i = 0
    tokens = utt.tokens
    while i < len(tokens):
        if i in dropped:
            i += 1
            continue
        if i in group_repl:
            end, replacement = group_repl[i]
            words.extend(_clean_replacement(replacement))
            i = max(end, i + 1)
            continue
        tok = tokens[i]
        i += 1
        if tok.replacement and policy.apply_replacements:
            words.extend(_clean_replacement(tok.replacement))
            continue
        if tok.kind == TokenKind.UNINTELLIGIBLE and policy.drop_unintelligible:
            continue
        if tok.kind == TokenKind.NONSPEECH and policy.drop_nonspeech:
            continue
        if tok.kind == TokenKind.FRAGMENT and policy.drop_fragments:
            continue
        if tok.kind == TokenKind.PHONOLOGICAL:
            # no orthographic target without an applied replacement
            continue
        words.extend(_clean_surface(tok.surface))

    text = " ".join(words)
    if policy.lowercase:
        text = text.lower()
    return NormalizedUtterance(
        utt_id=utt.utt_id,
        speaker_code=utt.speaker_code,
        text=text,
        alignment=utt.alignment,
        provenance=policy.fingerprint(),
    )


def normalize_corpus(
    docs: Iterable[ChatDocument], policy: NormalizationPolicy
) -> list[NormalizedUtterance]:
    """Normalize every utterance in document order.

    Utterances that normalize to the empty string are kept in the output
    (flagged via ``is_empty``) so the splitter can account for them.
    """
    return [
        normalize_utterance(utt, policy) for doc in docs for utt in doc.utterances
    ]


def utterance_from_words(utt_id: str, speaker_code: str, words: list[str]) -> Utterance:
    """Build a plain-word utterance, e.g. for re-normalization checks."""
    tokens = []
    offset = 0
    for word in words:
        tokens.append(
            Token(surface=word, kind=TokenKind.WORD, span=(offset, offset + len(word.encode("utf-8"))))
        )
        offset += len(word.encode("utf-8")) + 1
    return Utterance(
        utt_id=utt_id,
        speaker_code=speaker_code,
        tokens=tokens,
        annotations=[],
        alignment=None,
        raw_text=" ".join(words),
    )
