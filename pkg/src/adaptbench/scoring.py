"""Scoring-time text normalization, edit-distance alignment and WER/CER.

Both hypotheses and references pass through the same normalizer before
alignment. The normalizer is a frozen, documented step list (not a bit-exact
clone of any external tool): NFKC fold, lowercase, punctuation stripping
that keeps in-word apostrophes, whitespace collapse, a bundled
British-to-American spelling table, and a bundled contraction/colloquialism
table ("hafta" -> "have to" lives there). Custom word-sequence rules apply
after the builtins, in file order.

WER and CER are micro-averages: summed edit counts over summed reference
lengths. Error rates above 100% are perfectly representable (a hypothesis
much longer than its reference).
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import DataError


class EmptyReferenceCorpus(DataError):
    pass


class SpeakerWithNoReference(DataError):
    pass


# word characters: unicode letters/digits plus apostrophe (kept in-word only)
_NON_WORD = re.compile(r"[^\w']+|_", re.UNICODE)
_EDGE_APOSTROPHES = re.compile(r"(?<![\w])'+|'+(?![\w])", re.UNICODE)

# Bundled British -> American spellings (word-for-word, applied per word).
UK_US_SPELLINGS: dict[str, str] = {
    "analyse": "analyze", "analysed": "analyzed", "analyses": "analyzes",
    "analysing": "analyzing", "apologise": "apologize", "apologised": "apologized",
    "armour": "armor", "behaviour": "behavior", "behaviours": "behaviors",
    "calibre": "caliber", "cancelled": "canceled", "cancelling": "canceling",
    "capitalise": "capitalize", "catalogue": "catalog", "catalogues": "catalogs",
    "centre": "center", "centred": "centered", "centres": "centers",
    "cheque": "check", "cheques": "checks", "colour": "color",
    "coloured": "colored", "colours": "colors", "cosy": "cozy",
    "counselling": "counseling", "defence": "defense", "dialogue": "dialog",
    "dialogues": "dialogs", "emphasise": "emphasize", "emphasised": "emphasized",
    "favour": "favor", "favourite": "favorite", "favourites": "favorites",
    "fibre": "fiber", "flavour": "flavor", "flavours": "flavors",
    "fulfil": "fulfill", "grey": "gray", "harbour": "harbor",
    "honour": "honor", "honoured": "honored", "humour": "humor",
    "jewellery": "jewelry", "judgement": "judgment", "kerb": "curb",
    "labelled": "labeled", "labelling": "labeling", "labour": "labor",
    "licence": "license", "litre": "liter", "litres": "liters",
    "marvellous": "marvelous", "metre": "meter", "metres": "meters",
    "modelling": "modeling", "mould": "mold", "neighbour": "neighbor",
    "neighbourhood": "neighborhood", "neighbours": "neighbors",
    "offence": "offense", "organise": "organize", "organised": "organized",
    "organising": "organizing", "paralyse": "paralyze", "plough": "plow",
    "practise": "practice", "practised": "practiced", "programme": "program",
    "programmes": "programs", "pyjamas": "pajamas", "realise": "realize",
    "realised": "realized", "realises": "realizes", "realising": "realizing",
    "recognise": "recognize", "recognised": "recognized",
    "recognises": "recognizes", "rumour": "rumor", "rumours": "rumors",
    "savour": "savor", "sceptical": "skeptical", "signalling": "signaling",
    "speciality": "specialty", "spelt": "spelled", "splendour": "splendor",
    "theatre": "theater", "theatres": "theaters", "travelled": "traveled",
    "traveller": "traveler", "travelling": "traveling", "tyre": "tire",
    "tyres": "tires", "vapour": "vapor", "whilst": "while",
}

# Bundled contraction/colloquialism rules, applied to the word sequence in
# order. Patterns and replacements are literal word tuples.
_RuleList = tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

COLLOQUIAL_RULES: _RuleList = tuple(
    (tuple(pattern.split()), tuple(replacement.split()))
    for pattern, replacement in [
        ("hafta", "have to"),
        ("won't", "will not"),
        ("can't", "can not"),
        ("cannot", "can not"),
        ("don't", "do not"),
        ("doesn't", "does not"),
        ("didn't", "did not"),
        ("isn't", "is not"),
        ("aren't", "are not"),
        ("wasn't", "was not"),
        ("weren't", "were not"),
        ("hasn't", "has not"),
        ("haven't", "have not"),
        ("hadn't", "had not"),
        ("wouldn't", "would not"),
        ("couldn't", "could not"),
        ("shouldn't", "should not"),
        ("ain't", "aint"),
        ("i'm", "i am"),
        ("i've", "i have"),
        ("i'll", "i will"),
        ("i'd", "i would"),
        ("it's", "it is"),
        ("let's", "let us"),
        ("that's", "that is"),
        ("there's", "there is"),
        ("you're", "you are"),
        ("they're", "they are"),
        ("we're", "we are"),
        ("gonna", "going to"),
        ("wanna", "want to"),
        ("gotta", "got to"),
        ("kinda", "kind of"),
        ("sorta", "sort of"),
        ("oughta", "ought to"),
        ("lotta", "lot of"),
        ("outta", "out of"),
        ("dunno", "do not know"),
        ("gimme", "give me"),
        ("lemme", "let me"),
        ("ma'am", "madam"),
        ("y'all", "you all"),
    ]
)


@dataclass(frozen=True)
class ScoringNormalizer:
    """Frozen normalization step list plus user rules applied afterwards."""

    custom_rules: _RuleList = ()

    @classmethod
    def from_rules_file(cls, path: Union[str, Path]) -> "ScoringNormalizer":
        """Load custom rules from a TSV file: ``pattern<TAB>replacement``.

        Patterns and replacements are literal word sequences; rules apply
        left to right in file order, after the builtin steps.
        """
        rules = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0].split():
                    raise DataError(
                        f"rule must be 'pattern<TAB>replacement', got {line!r}",
                        line_no=line_no,
                    )
                rules.append((tuple(parts[0].split()), tuple(parts[1].split())))
        return cls(custom_rules=tuple(rules))

    def words(self, text: str) -> list[str]:
        """Apply all steps in order and return the word list."""
        s = unicodedata.normalize("NFKC", text)
        s = s.lower()
        s = s.replace("’", "'").replace("‘", "'")
        s = _NON_WORD.sub(" ", s)
        s = _EDGE_APOSTROPHES.sub(" ", s)
        tokens = [UK_US_SPELLINGS.get(w, w) for w in s.split()]
        tokens = _apply_rules(tokens, COLLOQUIAL_RULES)
        tokens = _apply_rules(tokens, self.custom_rules)
        return tokens


def _apply_rules(words: list[str], rules: _RuleList) -> list[str]:
    for pattern, replacement in rules:
        if not pattern:
            continue
        out: list[str] = []
        i = 0
        n, k = len(words), len(pattern)
        while i < n:
            if words[i] == pattern[0] and tuple(words[i : i + k]) == pattern:
                out.extend(replacement)
                i += k
            else:
                out.append(words[i])
                i += 1
        words = out
    return words


def normalize_for_scoring(text: str, normalizer: Optional[ScoringNormalizer] = None) -> list[str]:
    return (normalizer or ScoringNormalizer()).words(text)


class EditOp(str, Enum):
    HIT = "hit"
    SUB = "sub"
    DEL = "del"
    INS = "ins"


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    deletions: int
    insertions: int
    hits: int
    alignment: tuple[tuple[EditOp, Optional[str], Optional[str]], ...]

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def ref_len(self) -> int:
        return self.hits + self.substitutions + self.deletions


def align(ref: Sequence[str], hyp: Sequence[str]) -> AlignmentResult:
    """Minimal-cost alignment with unit substitution/deletion/insertion costs.

    On cost ties the backtrace prefers substitution over deletion over
    insertion; this shapes the displayed alignment, never the distance.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        for j in range(1, m + 1):
            same = ref[i - 1] == hyp[j - 1]
            row[j] = min(prev[j - 1] + (0 if same else 1), prev[j] + 1, row[j - 1] + 1)

    ops: list[tuple[EditOp, Optional[str], Optional[str]]] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i - 1][j - 1] == here:
            ops.append((EditOp.HIT, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i - 1][j - 1] + 1 == here:
            ops.append((EditOp.SUB, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append((EditOp.DEL, ref[i - 1], None))
            i = i - 1
        else:
            ops.append((EditOp.INS, None, hyp[j - 1]))
            j = j - 1
    ops.reverse()
    counts = {op: 0 for op in EditOp}
    for op, _, _ in ops:
        counts[op] += 1
    return AlignmentResult(
        substitutions=counts[EditOp.SUB],
        deletions=counts[EditOp.DEL],
        insertions=counts[EditOp.INS],
        hits=counts[EditOp.HIT],
        alignment=tuple(ops),
    )


class Scope(str, Enum):
    CORPUS = "corpus"
    SPEAKER = "speaker"
    UTTERANCE = "utterance"


class CerSpaces(str, Enum):
    INCLUDE = "include"
    EXCLUDE = "exclude"


@dataclass(frozen=True)
class ScoreReport:
    scope: Scope
    wer: float
    cer: float
    n_utts: int
    word_substitutions: int
    word_deletions: int
    word_insertions: int
    word_hits: int
    ref_words: int
    char_substitutions: int
    char_deletions: int
    char_insertions: int
    char_hits: int
    ref_chars: int

    def to_dict(self) -> dict:
        return {
            "scope": self.scope.value,
            "wer": self.wer,
            "cer": self.cer,
            "n_utts": self.n_utts,
            "words": {
                "substitutions": self.word_substitutions,
                "deletions": self.word_deletions,
                "insertions": self.word_insertions,
                "hits": self.word_hits,
                "reference": self.ref_words,
            },
            "chars": {
                "substitutions": self.char_substitutions,
                "deletions": self.char_deletions,
                "insertions": self.char_insertions,
                "hits": self.char_hits,
                "reference": self.ref_chars,
            },
        }


def _chars(words: list[str], cer_spaces: CerSpaces) -> list[str]:
    joiner = " " if cer_spaces == CerSpaces.INCLUDE else ""
    return list(joiner.join(words))


def score_corpus(
    pairs: Iterable[tuple[str, str]],
    normalizer: Optional[ScoringNormalizer] = None,
    cer_spaces: CerSpaces = CerSpaces.INCLUDE,
    scope: Scope = Scope.CORPUS,
) -> ScoreReport:
    """Micro-averaged WER/CER over (reference, hypothesis) text pairs.

    Counts are summed over all pairs and divided once; this is not the mean
    of per-utterance rates. Raises when no reference normalizes to any word.
    """
    normalizer = normalizer or ScoringNormalizer()
    totals = {"ws": 0, "wd": 0, "wi": 0, "wh": 0, "wr": 0,
              "cs": 0, "cd": 0, "ci": 0, "ch": 0, "cr": 0}
    n_utts = 0
    for ref_text, hyp_text in pairs:
        n_utts += 1
        ref_words = normalizer.words(ref_text)
        hyp_words = normalizer.words(hyp_text)
        word_result = align(ref_words, hyp_words)
        char_result = align(_chars(ref_words, cer_spaces), _chars(hyp_words, cer_spaces))
        totals["ws"] += word_result.substitutions
        totals["wd"] += word_result.deletions
        totals["wi"] += word_result.insertions
        totals["wh"] += word_result.hits
        totals["wr"] += len(ref_words)
        totals["cs"] += char_result.substitutions
        totals["cd"] += char_result.deletions
        totals["ci"] += char_result.insertions
        totals["ch"] += char_result.hits
        totals["cr"] += char_result.ref_len
    if totals["wr"] == 0:
        raise EmptyReferenceCorpus(
            "no pair has a non-empty normalized reference"
        )
    wer = 100.0 * (totals["ws"] + totals["wd"] + totals["wi"]) / totals["wr"]
    cer = 100.0 * (totals["cs"] + totals["cd"] + totals["ci"]) / totals["cr"]
    return ScoreReport(
        scope=scope,
        wer=wer,
        cer=cer,
        n_utts=n_utts,
        word_substitutions=totals["ws"],
        word_deletions=totals["wd"],
        word_insertions=totals["wi"],
        word_hits=totals["wh"],
        ref_words=totals["wr"],
        char_substitutions=totals["cs"],
        char_deletions=totals["cd"],
        char_insertions=totals["ci"],
        char_hits=totals["ch"],
        ref_chars=totals["cr"],
    )


def score_per_speaker(
    pairs_by_speaker: Mapping[str, Sequence[tuple[str, str]]],
    normalizer: Optional[ScoringNormalizer] = None,
    cer_spaces: CerSpaces = CerSpaces.INCLUDE,
) -> dict[str, ScoreReport]:
    """Micro-average within each speaker's utterances, keyed independently."""
    reports: dict[str, ScoreReport] = {}
    for speaker in sorted(pairs_by_speaker):
        try:
            reports[speaker] = score_corpus(
                pairs_by_speaker[speaker],
                normalizer,
                cer_spaces,
                scope=Scope.SPEAKER,
            )
        except EmptyReferenceCorpus as exc:
            raise SpeakerWithNoReference(
                f"speaker {speaker!r} has no non-empty normalized reference"
            ) from exc
    return reports
