"""Parser for CHAT-format (``.cha``) transcript files.

Covers the subset of CHAT used by conversational clinical corpora:

- header lines (``@Participants``, ``@ID``, ...),
- main speaker tiers (``*PAR:``) with tab-indented continuation lines,
- dependent tiers (``%mor:``, ``%gra:``, ...) attached as metadata,
- utterance-level time bullets ``•start_end•`` (or the NAK ``\\x15`` form),
- the inline marker grammar: ``[/]`` repetition, ``[//]`` retrace,
  ``<...>`` grouping, ``[: intended]`` replacement, ``[* ...]`` error codes,
  ``xxx`` unintelligible speech, ``&=event`` non-speech events and
  ``&+frag`` fragments.

Unknown bracket codes become generic :class:`Annotation` records and unknown
lines become :class:`ParseWarning` records; only structurally fatal input
(header inconsistencies, a main tier left empty at end of file) raises.

Token spans are byte offsets into the owning utterance's ``raw_text`` (the
merged verbatim tier payload), so ``raw_text.encode("utf-8")[start:end]``
always reproduces the surface exactly as written.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import PurePath
from typing import Optional

from .errors import DataError


class MalformedHeader(DataError):
    """Header block is inconsistent with the speaker tiers."""


class UnterminatedTier(DataError):
    """File ends in the middle of a speaker tier (empty payload at EOF)."""


class TokenKind(str, Enum):
    WORD = "word"
    FRAGMENT = "fragment"
    UNINTELLIGIBLE = "unintelligible"
    NONSPEECH = "nonspeech"
    PHONOLOGICAL = "phonological"


class AnnotationKind(str, Enum):
    RETRACE = "retrace"
    REPETITION = "repetition"
    ERROR_CODE = "error_code"
    REPLACEMENT = "replacement"
    OTHER = "other"


class ErrorClass(str, Enum):
    PRONUNCIATION = "pronunciation"
    SEMANTIC = "semantic"
    OTHER = "other"


class WarningSeverity(str, Enum):
    RECOVERABLE = "recoverable"
    DROPPED = "dropped"


@dataclass(frozen=True)
class TimeAlignment:
    """Millisecond start/end of an utterance within its recording."""

    start_ms: int
    end_ms: int

    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class Token:
    """One surface token with its kind, optional intended form and span.

    ``span`` is a (byte_start, byte_end) pair into the utterance's
    ``raw_text`` encoded as UTF-8.
    """

    surface: str
    kind: TokenKind
    replacement: Optional[str] = None
    span: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Annotation:
    """An inline marker, scoped over a half-open token index range.

    ``scope == (a, b)`` covers tokens ``a..b-1``; an empty range ``(k, k)``
    marks an annotation with no token target (e.g. a stray marker).
    ``replacement`` is set only for REPLACEMENT annotations whose scope covers
    more than one token (group replacements); single-token replacements are
    stored on the token itself.
    """

    kind: AnnotationKind
    scope: tuple[int, int]
    raw_marker: str
    error_class: Optional[ErrorClass] = None
    replacement: Optional[str] = None


@dataclass(frozen=True)
class ParseWarning:
    line_no: int
    message: str
    severity: WarningSeverity


@dataclass
class Utterance:
    """One main-tier utterance: tokens, annotations and time alignment.

    ``terminator`` holds the stripped terminal punctuation (``.``, ``?``,
    ``+...`` etc.), ``tiers`` the dependent tiers attached below the main
    tier. Both are metadata and never contribute tokens.
    """

    utt_id: str
    speaker_code: str
    tokens: list[Token]
    annotations: list[Annotation]
    alignment: Optional[TimeAlignment]
    raw_text: str
    terminator: Optional[str] = None
    tiers: dict[str, str] = field(default_factory=dict)


@dataclass
class ChatDocument:
    source_path: str
    participants: list[tuple[str, str]]
    utterances: list[Utterance]
    warnings: list[ParseWarning]
    headers: list[str] = field(default_factory=list)

    def speaker_codes(self) -> set[str]:
        return {code for code, _ in self.participants}


# Utterance terminators recognized by the scanner. The ``+`` forms are the
# CHAT "special terminators" (trailing off, interruption, quotation follows).
TERMINATORS = frozenset(
    {
        ".",
        "?",
        "!",
        "+.",
        "+...",
        "+..?",
        "+!?",
        "+/.",
        "+/?",
        "+//.",
        "+//?",
        '+".',
        '+"/.',
        '+"',
    }
)

# Standalone punctuation with no lexical content; skipped without warning.
_SKIP_CHUNKS = frozenset({",", ";", ":", "‡", "„"})

_BULLET_CHARS = "•\x15"
_BULLET_BODY = re.compile(r"(\d+)_(\d+)")
_MAIN_TIER = re.compile(r"^\*([A-Za-z0-9]+):[ \t]?(.*)$")
_DEP_TIER = re.compile(r"^%([A-Za-z0-9]+):[ \t]?(.*)$")
_PAUSE = re.compile(r"^\(\.{1,3}\)$")
_WORDLIKE = re.compile(r"[^\W_]", re.UNICODE)


@dataclass
class _Draft:
    """Mutable token under construction (frozen into Token at the end)."""

    surface: str
    kind: TokenKind
    char_span: tuple[int, int]
    replacement: Optional[str] = None


def _classify_chunk(chunk: str) -> tuple[Optional[TokenKind], Optional[str]]:
    """Map a whitespace-delimited chunk to a token kind and auto-replacement.

    Returns ``(None, None)`` for chunks that do not yield a token (handled
    by the caller: terminators, skipped punctuation, ``+`` markers).
    """
    if chunk == "xxx" or chunk == "www":
        return TokenKind.UNINTELLIGIBLE, None
    if chunk == "yyy":
        return TokenKind.PHONOLOGICAL, None
    if _PAUSE.match(chunk):
        return TokenKind.NONSPEECH, None
    if chunk.startswith("&="):
        return TokenKind.NONSPEECH, None
    if chunk.startswith("&+"):
        return TokenKind.FRAGMENT, None
    if chunk.startswith("&-"):
        # fillers ("&-um") are audible speech
        return TokenKind.WORD, None
    if chunk.startswith("&"):
        # legacy bare-& phonological fragment
        return TokenKind.FRAGMENT, None
    if "@" in chunk[1:]:
        base, _, form = chunk.partition("@")
        if form in ("u", "wp") and base:
            return TokenKind.PHONOLOGICAL, None
        return TokenKind.WORD, None
    replacement = None
    if "(" in chunk and ")" in chunk:
        # word-internal shortening, e.g. "(be)cause" -> intended "because"
        candidate = chunk.replace("(", "").replace(")", "")
        if candidate and re.fullmatch(r"[\w'’-]+", candidate, re.UNICODE):
            replacement = candidate
    return TokenKind.WORD, replacement


def _scan_tier(
    text: str,
) -> tuple[list[_Draft], list[Annotation], Optional[str], list[tuple[int, int]], list[str]]:
    """Scan a main-tier payload into drafts, annotations and metadata.

    Returns (token drafts, annotations, terminator, raw bullet pairs,
    problem messages). Problems are reported by the caller as recoverable
    warnings; the scan itself never fails.
    """
    drafts: list[_Draft] = []
    annotations: list[Annotation] = []
    problems: list[str] = []
    bullets: list[tuple[int, int]] = []
    terminator: Optional[str] = None
    group_stack: list[int] = []
    last_scope: Optional[tuple[int, int]] = None

    def here() -> tuple[int, int]:
        return (len(drafts), len(drafts))

    def attach_code(inner: str, raw: str) -> None:
        nonlocal last_scope
        if inner == "/":
            kind = AnnotationKind.REPETITION
        elif inner == "//":
            kind = AnnotationKind.RETRACE
        elif inner.startswith(":"):
            repl = inner[1:].strip()
            if not repl:
                problems.append(f"empty replacement marker {raw!r}")
                annotations.append(Annotation(AnnotationKind.OTHER, here(), raw))
                return
            if last_scope is None:
                problems.append(f"replacement marker {raw!r} has no target")
                annotations.append(Annotation(AnnotationKind.OTHER, here(), raw))
                return
            start, end = last_scope
            if end - start == 1:
                drafts[start].replacement = repl
                annotations.append(
                    Annotation(AnnotationKind.REPLACEMENT, last_scope, raw)
                )
            else:
                annotations.append(
                    Annotation(
                        AnnotationKind.REPLACEMENT, last_scope, raw, replacement=repl
                    )
                )
            return
        elif inner.startswith("*"):
            code = inner[1:].strip()
            if code.startswith("p"):
                cls = ErrorClass.PRONUNCIATION
            elif code.startswith("s"):
                cls = ErrorClass.SEMANTIC
            else:
                cls = ErrorClass.OTHER
            annotations.append(
                Annotation(
                    AnnotationKind.ERROR_CODE,
                    last_scope or here(),
                    raw,
                    error_class=cls,
                )
            )
            return
        else:
            annotations.append(
                Annotation(AnnotationKind.OTHER, last_scope or here(), raw)
            )
            return
        if last_scope is None:
            problems.append(f"marker {raw!r} has no target")
            annotations.append(Annotation(kind, here(), raw))
        else:
            annotations.append(Annotation(kind, last_scope, raw))

    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "<":
            group_stack.append(len(drafts))
            i += 1
            continue
        if c == ">":
            if group_stack:
                start = group_stack.pop()
                if len(drafts) > start:
                    last_scope = (start, len(drafts))
            else:
                problems.append("unbalanced '>'")
                annotations.append(Annotation(AnnotationKind.OTHER, here(), ">"))
            i += 1
            continue
        if c == "[":
            j = text.find("]", i + 1)
            if j == -1:
                problems.append("unbalanced '['")
                annotations.append(
                    Annotation(AnnotationKind.OTHER, here(), text[i:])
                )
                break
            attach_code(text[i + 1 : j].strip(), text[i : j + 1])
            i = j + 1
            continue
        if c in _BULLET_CHARS:
            j = i + 1
            while j < n and text[j] not in _BULLET_CHARS:
                j += 1
            if j >= n:
                problems.append("unterminated time bullet")
                break
            body = text[i + 1 : j].strip()
            m = _BULLET_BODY.fullmatch(body)
            if m:
                bullets.append((int(m.group(1)), int(m.group(2))))
            else:
                problems.append(f"malformed time bullet {body!r}")
            i = j + 1
            continue
        # word-like chunk up to the next structural character
        j = i
        while (
            j < n
            and not text[j].isspace()
            and text[j] not in "<>[]"
            and text[j] not in _BULLET_CHARS
        ):
            j += 1
        if j == i:  # text[i] == "]"
            problems.append("unbalanced ']'")
            annotations.append(Annotation(AnnotationKind.OTHER, here(), "]"))
            i += 1
            continue
        chunk = text[i:j]
        if chunk in TERMINATORS:
            terminator = chunk
            i = j
            continue
        if chunk in _SKIP_CHUNKS:
            i = j
            continue
        if chunk.startswith("+"):
            # linking/overlap markers such as "+<"; kept as annotations
            annotations.append(Annotation(AnnotationKind.OTHER, here(), chunk))
            i = j
            continue
        kind, replacement = _classify_chunk(chunk)
        drafts.append(_Draft(chunk, kind, (i, j), replacement))
        last_scope = (len(drafts) - 1, len(drafts))
        i = j

    if group_stack:
        problems.append("unbalanced '<'")
        annotations.append(
            Annotation(AnnotationKind.OTHER, (len(drafts), len(drafts)), "<")
        )
    return drafts, annotations, terminator, bullets, problems


def tokenize_main_tier(tier_text: str) -> tuple[list[Token], list[Annotation]]:
    """Tokenize a speaker-tier payload (without the ``*XXX:`` prefix).

    Terminal punctuation and time bullets are consumed but not returned;
    :func:`parse_document` records them as utterance metadata instead.
    """
    drafts, annotations, _, _, _ = _scan_tier(tier_text)
    return _freeze_tokens(drafts, tier_text), annotations


def _freeze_tokens(drafts: list[_Draft], raw_text: str) -> list[Token]:
    """Convert char spans to UTF-8 byte spans and freeze the drafts."""
    byte_at = [0] * (len(raw_text) + 1)
    pos = 0
    for idx, ch in enumerate(raw_text):
        pos += len(ch.encode("utf-8"))
        byte_at[idx + 1] = pos
    return [
        Token(
            surface=d.surface,
            kind=d.kind,
            replacement=d.replacement,
            span=(byte_at[d.char_span[0]], byte_at[d.char_span[1]]),
        )
        for d in drafts
    ]


def _parse_participants(value: str) -> list[tuple[str, str]]:
    participants = []
    seen = set()
    for entry in value.split(","):
        parts = entry.split()
        if not parts:
            continue
        code = parts[0]
        role = parts[-1] if len(parts) > 1 else ""
        if code not in seen:
            seen.add(code)
            participants.append((code, role))
    return participants


def _id_speaker_code(value: str) -> Optional[str]:
    # @ID: lang|corpus|CODE|age|sex|...
    fields = value.split("|")
    return fields[2].strip() if len(fields) > 2 else None


@dataclass
class _TierBlock:
    kind: str  # "main" | "dep"
    label: str
    parts: list[str]
    line_no: int

    def payload(self) -> str:
        return " ".join(p for p in self.parts if p)


def parse_document(content: str, source_path: str) -> ChatDocument:
    """Parse one CHAT file into a :class:`ChatDocument`.

    One utterance is produced per main tier (continuation lines merged);
    dependent tiers are attached to the preceding utterance as metadata.
    Unknown constructs yield warnings. Raises :class:`MalformedHeader` when a
    speaker tier or ``@ID`` references an undeclared participant (or main
    tiers appear with no ``@Participants`` at all) and
    :class:`UnterminatedTier` when the file ends on an empty speaker tier.
    """
    content = content.lstrip("﻿")
    warnings: list[ParseWarning] = []
    headers: list[str] = []
    participants: list[tuple[str, str]] = []
    have_participants = False
    id_lines: list[tuple[int, str]] = []
    blocks: list[_TierBlock] = []
    open_block: Optional[_TierBlock] = None

    def flush() -> None:
        nonlocal open_block
        if open_block is not None:
            blocks.append(open_block)
            open_block = None

    lines = content.split("\n")
    for line_no, line in enumerate(lines, 1):
        line = line.rstrip("\r")
        if line.startswith("\t"):
            if open_block is None:
                warnings.append(
                    ParseWarning(
                        line_no, "continuation line outside a tier", WarningSeverity.DROPPED
                    )
                )
            else:
                open_block.parts.append(line[1:].rstrip())
            continue
        if not line.strip():
            flush()
            continue
        first = line[0]
        if first == "@":
            flush()
            headers.append(line)
            name, _, value = line.partition(":")
            if name.strip() == "@Participants":
                known = {c for c, _ in participants}
                for code, role in _parse_participants(value):
                    if code not in known:
                        known.add(code)
                        participants.append((code, role))
                have_participants = True
            elif name.strip() == "@ID":
                code = _id_speaker_code(value)
                if code:
                    id_lines.append((line_no, code))
            continue
        if first == "*":
            m = _MAIN_TIER.match(line)
            if not m:
                flush()
                warnings.append(
                    ParseWarning(line_no, f"malformed main tier {line!r}", WarningSeverity.DROPPED)
                )
                continue
            flush()
            open_block = _TierBlock("main", m.group(1), [m.group(2).rstrip()], line_no)
            continue
        if first == "%":
            m = _DEP_TIER.match(line)
            if not m:
                flush()
                warnings.append(
                    ParseWarning(
                        line_no, f"malformed dependent tier {line!r}", WarningSeverity.DROPPED
                    )
                )
                continue
            flush()
            open_block = _TierBlock("dep", m.group(1), [m.group(2).rstrip()], line_no)
            continue
        flush()
        warnings.append(
            ParseWarning(line_no, f"unrecognized line {line!r}", WarningSeverity.DROPPED)
        )
    if open_block is not None and open_block.kind == "main" and not open_block.payload().strip():
        raise UnterminatedTier(
            f"speaker tier *{open_block.label}: has no content at end of file",
            line_no=open_block.line_no,
        )
    flush()

    declared = {code for code, _ in participants}
    main_blocks = [b for b in blocks if b.kind == "main"]
    if main_blocks and not have_participants:
        raise MalformedHeader(
            "speaker tiers present but no @Participants header",
            line_no=main_blocks[0].line_no,
        )
    for block in main_blocks:
        if block.label not in declared:
            raise MalformedHeader(
                f"speaker *{block.label}: not declared in @Participants",
                line_no=block.line_no,
            )
    for line_no_, code in id_lines:
        if code not in declared:
            raise MalformedHeader(
                f"@ID speaker {code!r} not declared in @Participants", line_no=line_no_
            )

    stem = PurePath(source_path).stem or "doc"
    utterances: list[Utterance] = []
    current: Optional[Utterance] = None
    index = 0
    for block in blocks:
        if block.kind == "dep":
            if current is None:
                warnings.append(
                    ParseWarning(
                        block.line_no,
                        f"dependent tier %{block.label}: before any speaker tier",
                        WarningSeverity.DROPPED,
                    )
                )
            else:
                existing = current.tiers.get(block.label)
                merged = block.payload() if existing is None else f"{existing} {block.payload()}"
                current.tiers[block.label] = merged
            continue
        raw_text = block.payload()
        drafts, annotations, terminator, bullets, problems = _scan_tier(raw_text)
        for message in problems:
            warnings.append(ParseWarning(block.line_no, message, WarningSeverity.RECOVERABLE))
        alignment = None
        if bullets:
            start = min(b[0] for b in bullets)
            end = max(b[1] for b in bullets)
            if start <= end:
                alignment = TimeAlignment(start, end)
            else:
                warnings.append(
                    ParseWarning(
                        block.line_no,
                        f"time bullet with start {start} > end {end} ignored",
                        WarningSeverity.RECOVERABLE,
                    )
                )
        if not raw_text.strip():
            warnings.append(
                ParseWarning(block.line_no, "empty speaker tier", WarningSeverity.RECOVERABLE)
            )
        current = Utterance(
            utt_id=f"{stem}_{index:05d}",
            speaker_code=block.label,
            tokens=_freeze_tokens(drafts, raw_text),
            annotations=annotations,
            alignment=alignment,
            raw_text=raw_text,
            terminator=terminator,
        )
        utterances.append(current)
        index += 1

    return ChatDocument(
        source_path=source_path,
        participants=participants,
        utterances=utterances,
        warnings=warnings,
        headers=headers,
    )


def parse_file(path: str) -> ChatDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_document(fh.read(), path)


def document_to_dict(doc: ChatDocument) -> dict:
    """Deterministic dict form of a document, for the JSON-lines debug dump."""
    return {
        "source_path": doc.source_path,
        "participants": [{"code": c, "role": r} for c, r in doc.participants],
        "utterances": [
            {
                "utt_id": u.utt_id,
                "speaker_code": u.speaker_code,
                "raw_text": u.raw_text,
                "terminator": u.terminator,
                "alignment": (
                    {"start_ms": u.alignment.start_ms, "end_ms": u.alignment.end_ms}
                    if u.alignment
                    else None
                ),
                "tokens": [
                    {
                        "surface": t.surface,
                        "kind": t.kind.value,
                        "replacement": t.replacement,
                        "span": list(t.span),
                    }
                    for t in u.tokens
                ],
                "annotations": [
                    {
                        "kind": a.kind.value,
                        "scope": list(a.scope),
                        "raw_marker": a.raw_marker,
                        "error_class": a.error_class.value if a.error_class else None,
                        "replacement": a.replacement,
                    }
                    for a in u.annotations
                ],
                "tiers": dict(sorted(u.tiers.items())),
            }
            for u in doc.utterances
        ],
        "warnings": [
            {"line_no": w.line_no, "message": w.message, "severity": w.severity.value}
            for w in doc.warnings
        ],
    }
