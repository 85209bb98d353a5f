"""Reader for block-labeled word-list corpora.

One JSON object per line: ``{"v": 1, "utt_id": ..., "speaker_id": ...,
"text": ..., "block": 1|2|3, "audio_path": ..., "duration_ms": ...}``.
``audio_path`` and ``duration_ms`` are optional. These corpora arrive with
clean references, so no CHAT parsing or normalization applies beyond
whitespace tidying.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .manifest import DuplicateUttId, MalformedLine, SCHEMA_VERSION
from .splitting import CorpusUtterance


def read_wordlist(path: Union[str, Path]) -> list[CorpusUtterance]:
    utts: list[CorpusUtterance] = []
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
                raise MalformedLine("not a v1 word-list entry", line_no=line_no)
            try:
                utt = CorpusUtterance(
                    utt_id=data["utt_id"],
                    speaker_id=data["speaker_id"],
                    text=" ".join(str(data["text"]).split()),
                    duration_ms=int(data.get("duration_ms", 0)),
                    block=int(data["block"]),
                    audio_path=data.get("audio_path"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(f"bad word-list entry: {exc}", line_no=line_no) from exc
            if utt.utt_id in seen:
                raise DuplicateUttId(f"duplicate utt_id {utt.utt_id!r}", line_no=line_no)
            seen.add(utt.utt_id)
            utts.append(utt)
    return utts
