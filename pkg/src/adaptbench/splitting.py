"""Speaker-disjoint partitioning and per-speaker train/valid/test splits.

The central constraint is speaker disjointness: the speakers selected for
personalization (SS) never contribute a single utterance to the
speaker-independent (SI) training pool. Target speakers are the top fraction
(default 10%) ranked by available audio duration.

Two split schemes exist for a target speaker's own data:

- ``ratio811``: a deterministic shuffle followed by a contiguous 8:1:1 cut,
- ``blocks``: word-list corpora with a standard three-block layout; Block 2
  is the test set and a 10% validation holdout is taken from Blocks 1 and 3.

Shuffles are hash-ordered (SHA-256 over ``seed, speaker, utt_id``), so one
speaker's split never changes when other speakers are added or removed, and
results are identical across platforms and processes.

Bucket sizes use largest-remainder apportionment: exact totals, every bucket
within one utterance of its quota, with remainder ties resolved in favor of
the smaller quota (validation before test before train).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import DataError
from .si_filter import FilterDecision


class EmptySpeakerList(DataError):
    pass


class TooFewUtterances(DataError):
    pass


class MissingBlockLabel(DataError):
    pass


class EmptyBlock2(DataError):
    pass


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class Rounding(str, Enum):
    CEIL = "ceil"
    ROUND = "round"
    FLOOR = "floor"


class SplitScheme(str, Enum):
    RATIO811 = "ratio811"
    BLOCKS = "blocks"


@dataclass(frozen=True)
class CorpusUtterance:
    """Common record consumed by the splitter and manifest builder."""

    utt_id: str
    speaker_id: str
    text: str
    duration_ms: int = 0
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None
    block: Optional[int] = None
    audio_path: Optional[str] = None


@dataclass(frozen=True)
class SpeakerStat:
    speaker_id: str
    total_duration_ms: int
    utterance_count: int


@dataclass(frozen=True)
class SpeakerPartition:
    ss_speakers: frozenset[str]
    si_speakers: frozenset[str]
    fraction: float
    rounding: Rounding

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "fraction": self.fraction,
            "rounding": self.rounding.value,
            "ss_speakers": sorted(self.ss_speakers),
            "si_speakers": sorted(self.si_speakers),
        }


@dataclass
class SplitAssignment:
    assignments: dict[str, Split]
    scheme: SplitScheme
    seed: int

    def bucket(self, split: Split) -> list[str]:
        return [u for u, s in self.assignments.items() if s == split]

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "scheme": self.scheme.value,
            "seed": self.seed,
            "assignments": {u: s.value for u, s in sorted(self.assignments.items())},
        }


def speaker_stats(utts: Iterable[CorpusUtterance]) -> list[SpeakerStat]:
    """Aggregate duration and count per speaker, sorted by speaker id.

    Unaligned utterances contribute zero duration but still count.
    """
    totals: dict[str, list[int]] = {}
    for u in utts:
        entry = totals.setdefault(u.speaker_id, [0, 0])
        entry[0] += max(u.duration_ms, 0)
        entry[1] += 1
    return [
        SpeakerStat(spk, duration, count)
        for spk, (duration, count) in sorted(totals.items())
    ]


def rank_speakers(stats: Sequence[SpeakerStat]) -> list[str]:
    """Speakers by descending duration; ties break lexicographically."""
    return [
        s.speaker_id
        for s in sorted(stats, key=lambda s: (-s.total_duration_ms, s.speaker_id))
    ]


def _exact(value: Union[float, int, Fraction]) -> Fraction:
    """Lift a config-supplied ratio to an exact rational.

    Decimal-looking floats (0.1, 0.8) become the decimal fraction they were
    written as, so quota remainder ties compare exactly.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


def select_ss(
    ranked: Sequence[str], fraction: float, rounding: Rounding = Rounding.ROUND
) -> SpeakerPartition:
    """Select the top ``fraction`` of ranked speakers as SS targets.

    ``k = rounding(fraction * N)`` clamped to ``1 <= k <= N``. ROUND is
    round-half-up for platform independence.
    """
    if not ranked:
        raise EmptySpeakerList("cannot select target speakers from an empty list")
    n = len(ranked)
    raw = _exact(fraction) * n
    if rounding == Rounding.CEIL:
        k = math.ceil(raw)
    elif rounding == Rounding.FLOOR:
        k = math.floor(raw)
    else:
        k = math.floor(raw + Fraction(1, 2))
    k = min(max(k, 1), n)
    return SpeakerPartition(
        ss_speakers=frozenset(ranked[:k]),
        si_speakers=frozenset(ranked[k:]),
        fraction=fraction,
        rounding=rounding,
    )


def apportion(total: int, weights: Sequence[float], min_one: bool = False) -> list[int]:
    """Largest-remainder apportionment of ``total`` over ``weights``.

    Sizes always sum to ``total``. Remainder ties favor the bucket with the
    smaller quota, then the earlier bucket. With ``min_one`` every bucket
    gets at least one item (requires ``total >= len(weights)``), taking from
    the largest bucket when necessary. Quotas are computed exactly, so ties
    behave as written, not as floating point happens to round.
    """
    quotas = [_exact(w) * total for w in weights]
    sizes = [math.floor(q) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(
        range(len(weights)),
        key=lambda i: (-(quotas[i] - sizes[i]), quotas[i], i),
    )
    for i in order[:leftover]:
        sizes[i] += 1
    if min_one:
        if total < len(weights):
            raise ValueError("cannot give every bucket one item")
        while min(sizes) == 0:
            zero = sizes.index(0)
            donor = max(range(len(sizes)), key=lambda i: (sizes[i], -i))
            sizes[donor] -= 1
            sizes[zero] += 1
    return sizes


def shuffle_key(seed: int, speaker_id: str, utt_id: str) -> str:
    """Portable deterministic ordering key (SHA-256 of the identifiers)."""
    payload = f"{seed}\x1f{speaker_id}\x1f{utt_id}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _hash_order(utts: Sequence[CorpusUtterance], seed: int, speaker_id: str):
    return sorted(utts, key=lambda u: (shuffle_key(seed, speaker_id, u.utt_id), u.utt_id))


RATIO_811 = (0.8, 0.1, 0.1)


def split_ratio(utts: Sequence[CorpusUtterance], seed: int) -> SplitAssignment:
    """8:1:1 split of one speaker's utterances, deterministic under the seed.

    Requires at least three utterances so every bucket is non-empty.
    """
    if len(utts) < 3:
        raise TooFewUtterances(
            f"need at least 3 utterances to split, got {len(utts)}"
        )
    speakers = {u.speaker_id for u in utts}
    if len(speakers) != 1:
        raise DataError(f"split_ratio expects one speaker, got {sorted(speakers)}")
    (speaker_id,) = speakers
    ordered = _hash_order(utts, seed, speaker_id)
    n_train, n_valid, n_test = apportion(len(ordered), RATIO_811, min_one=True)
    assignments: dict[str, Split] = {}
    for idx, u in enumerate(ordered):
        if idx < n_train:
            assignments[u.utt_id] = Split.TRAIN
        elif idx < n_train + n_valid:
            assignments[u.utt_id] = Split.VALID
        else:
            assignments[u.utt_id] = Split.TEST
    return SplitAssignment(assignments, SplitScheme.RATIO811, seed)


def split_blocks(
    utts: Sequence[CorpusUtterance], seed: int, holdout_fraction: float = 0.10
) -> SplitAssignment:
    """Block scheme: Block 2 tests; Blocks 1 and 3 train minus a validation
    holdout of ``holdout_fraction`` (largest remainder, hash-ordered)."""
    for u in utts:
        if u.block not in (1, 2, 3):
            raise MissingBlockLabel(
                f"utterance {u.utt_id} has block label {u.block!r}, expected 1, 2 or 3"
            )
    test = [u for u in utts if u.block == 2]
    if not test:
        raise EmptyBlock2("no utterances in block 2: nothing to test on")
    pool = [u for u in utts if u.block in (1, 3)]
    assignments: dict[str, Split] = {u.utt_id: Split.TEST for u in test}
    if pool:
        speakers = {u.speaker_id for u in pool}
        if len(speakers) != 1:
            raise DataError(
                f"split_blocks expects one speaker, got {sorted(speakers)}"
            )
        (speaker_id,) = speakers
        _, n_valid = apportion(len(pool), (1.0 - holdout_fraction, holdout_fraction))
        ordered = _hash_order(pool, seed, speaker_id)
        for idx, u in enumerate(ordered):
            assignments[u.utt_id] = Split.VALID if idx < n_valid else Split.TRAIN
    return SplitAssignment(assignments, SplitScheme.BLOCKS, seed)


def build_si_pool(
    partition: SpeakerPartition,
    utts: Sequence[CorpusUtterance],
    decisions: Optional[Sequence[FilterDecision]] = None,
) -> list[str]:
    """Utterance ids feeding speaker-independent training.

    Only SI-group speakers contribute. When filter decisions are supplied
    (conversational corpora) only included utterances survive; word-list
    corpora pass ``None`` and contribute everything non-empty.
    """
    included = (
        {d.utt_id for d in decisions if d.included} if decisions is not None else None
    )
    pool = []
    for u in utts:
        if u.speaker_id not in partition.si_speakers:
            continue
        if not u.text:
            continue
        if included is not None and u.utt_id not in included:
            continue
        pool.append(u.utt_id)
    return pool
