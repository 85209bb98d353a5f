"""Selection of the speaker-independent fine-tuning pool.

Utterances carrying a pronunciation-error tag are the training signal for
population-level adaptation; utterances carrying a semantic-error tag are
excluded because the produced audio and the target text no longer agree.
An utterance tagged with both is excluded: exclusion always wins.

This filter applies only to the SI pool. Speaker-specific fine-tuning uses
all of a target speaker's utterances, unfiltered.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .chat_parser import AnnotationKind, ErrorClass, Utterance
from .normalizer import NormalizationPolicy, normalize_utterance


class FilterReason(str, Enum):
    HAS_PRONUNCIATION_TAG = "has_pronunciation_tag"
    HAS_SEMANTIC_TAG = "has_semantic_tag"
    NO_RELEVANT_TAG = "no_relevant_tag"
    EMPTY_AFTER_NORMALIZATION = "empty_after_normalization"


@dataclass(frozen=True)
class FilterDecision:
    utt_id: str
    included: bool
    reasons: tuple[FilterReason, ...]

    def to_dict(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "included": self.included,
            "reasons": [r.value for r in self.reasons],
        }


def classify_utterance(utt: Utterance) -> set[ErrorClass]:
    """Collect the error classes of all error-code annotations."""
    return {
        ann.error_class
        for ann in utt.annotations
        if ann.kind == AnnotationKind.ERROR_CODE and ann.error_class is not None
    }


def filter_si(
    utts: Iterable[Utterance], policy: Optional[NormalizationPolicy] = None
) -> list[FilterDecision]:
    """One decision per utterance, order preserved.

    Included iff a pronunciation tag is present, no semantic tag is present,
    and the utterance does not normalize to the empty string.
    """
    policy = policy or NormalizationPolicy()
    decisions = []
    for utt in utts:
        classes = classify_utterance(utt)
        reasons: list[FilterReason] = []
        if ErrorClass.PRONUNCIATION in classes:
            reasons.append(FilterReason.HAS_PRONUNCIATION_TAG)
        if ErrorClass.SEMANTIC in classes:
            reasons.append(FilterReason.HAS_SEMANTIC_TAG)
        if not reasons:
            reasons.append(FilterReason.NO_RELEVANT_TAG)
        empty = normalize_utterance(utt, policy).is_empty
        if empty:
            reasons.append(FilterReason.EMPTY_AFTER_NORMALIZATION)
        included = (
            ErrorClass.PRONUNCIATION in classes
            and ErrorClass.SEMANTIC not in classes
            and not empty
        )
        decisions.append(FilterDecision(utt.utt_id, included, tuple(reasons)))
    return decisions
