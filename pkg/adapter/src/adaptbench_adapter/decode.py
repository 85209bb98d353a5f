"""Decoding: one hypothesis per manifest entry, schema-exact.

Missing audio is recorded as an empty hypothesis with a warning rather
than aborting the batch; ``decode_meta`` carries the decoding contract
(temperature 0, beam size 5) plus the backend and, for personalized
models, the target speaker.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from .backends import Backend, get_backend
from .errors import AudioMissing
from .formats import hypothesis_relpath, read_manifest, write_hypotheses
from .plans import AdapterRunSpec, enforce_hints

log = logging.getLogger("adaptbench_adapter")


def transcribe_manifest(
    spec: AdapterRunSpec, backend: Backend, checkpoint: Path, entries: list[dict]
) -> list[dict]:
    rows = []
    meta_base = {
        "temperature": spec.job.train_hints.get("temperature", 0),
        "beam_size": spec.job.train_hints.get("beam_size", 5),
        "backend": backend.backend_id,
    }
    if spec.job.stage == "ssft" and spec.job.speaker_id:
        meta_base["model_speaker"] = spec.job.speaker_id
    for entry in entries:
        try:
            text = backend.transcribe(checkpoint, entry)
        except AudioMissing as exc:
            log.warning("%s; emitting empty hypothesis", exc)
            text = ""
        rows.append(
            {
                "utt_id": entry["utt_id"],
                "hypothesis": text,
                "condition": spec.job.condition_id,
                "speaker_id": entry["speaker_id"],
                "decode_meta": dict(meta_base),
            }
        )
    return rows


def decode(
    spec: AdapterRunSpec,
    checkpoint: Optional[Path],
    eval_manifest: str,
    out_path: Optional[Path] = None,
    backend: Optional[Backend] = None,
) -> Path:
    """Decode one evaluation manifest to its conventional hypothesis file.

    ``checkpoint`` may be None for decode-only jobs on the vanilla model
    (the mock backend then echoes references).
    """
    enforce_hints(spec.job)
    backend = backend or get_backend(spec.backend_id)
    entries = read_manifest(spec.resolve(eval_manifest))
    rows = (
        transcribe_manifest(spec, backend, checkpoint, entries)
        if checkpoint is not None
        else transcribe_manifest(spec, backend, _vanilla_checkpoint(spec), entries)
    )
    if out_path is None:
        model_speaker = spec.job.speaker_id if spec.job.stage == "ssft" else None
        out_path = spec.run_root / hypothesis_relpath(
            spec.job.condition_id, eval_manifest, model_speaker
        )
    write_hypotheses(rows, out_path)
    return out_path


def _vanilla_checkpoint(spec: AdapterRunSpec) -> Path:
    """Materialize a no-op checkpoint for decode-only jobs."""
    import json

    path = spec.workdir / "checkpoints" / "vanilla.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        path.write_text(
            json.dumps({"backend": spec.backend_id, "epoch": -1, "rates": None})
            + "\n",
            encoding="utf-8",
        )
    return path
