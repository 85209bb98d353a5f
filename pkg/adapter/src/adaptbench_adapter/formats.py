"""Minimal readers/writers for the toolkit's JSON-lines wire formats.

Implemented from the format documentation, deliberately not imported from
the toolkit: the files on disk are the contract this adapter is held to.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .errors import AdapterError

SCHEMA_VERSION = 1

HYP_KEYS = ("v", "utt_id", "hypothesis", "condition", "speaker_id", "decode_meta")


def read_jsonl(path: Union[str, Path]) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{line_no}: {exc.msg}") from exc
            rows.append(row)
    return rows


def read_manifest(path: Union[str, Path]) -> list[dict]:
    rows = read_jsonl(path)
    for row in rows:
        if row.get("v") != SCHEMA_VERSION:
            raise AdapterError(f"{path}: not a v{SCHEMA_VERSION} manifest")
        for key in ("utt_id", "audio_path", "text", "speaker_id"):
            if key not in row:
                raise AdapterError(f"{path}: manifest entry missing {key!r}")
    return rows


def write_hypotheses(rows: list[dict], path: Union[str, Path]) -> None:
    """Write hypothesis entries in schema order, sorted like the toolkit."""
    ordered = sorted(
        rows, key=lambda r: (r["condition"], r["speaker_id"], r["utt_id"])
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in ordered:
            payload = {key: row.get(key) for key in HYP_KEYS}
            payload["v"] = SCHEMA_VERSION
            fh.write(json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n")


def hypothesis_relpath(condition: str, eval_manifest: str, model_speaker=None) -> str:
    """The run-directory-relative location the toolkit expects decodes at."""
    stem = Path(eval_manifest).stem
    suffix = f"__{model_speaker}" if model_speaker else ""
    return f"hyps/{condition}__{stem}{suffix}.jsonl"
