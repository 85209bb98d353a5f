"""Independent reference implementations used only to check the real code.

These deliberately share no code with the package: the edit distance is the
textbook recursive definition with memoization, and the corpus scorer is a
one-line micro-average over oracle distances.
"""

from functools import lru_cache
from typing import Sequence


def oracle_edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    """Levenshtein distance from the recursive definition."""
    ref = tuple(ref)
    hyp = tuple(hyp)

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j - 1) + (0 if ref[i - 1] == hyp[j - 1] else 1),
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
        )

    return d(len(ref), len(hyp))


def oracle_corpus_wer(pairs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> float:
    """Micro-average WER in percent over already-normalized word lists."""
    edits = sum(oracle_edit_distance(r, h) for r, h in pairs)
    ref_words = sum(len(r) for r, _ in pairs)
    return 100.0 * edits / ref_words
