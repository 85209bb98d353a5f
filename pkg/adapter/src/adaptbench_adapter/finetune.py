"""Fine-tuning per the training contract: freeze, train, pick by WER.

Speaker-specific jobs freeze the lower half of the encoder (layers
``[0, L//2)``) and warm-start from the population checkpoint when the plan
says so. Every saved checkpoint is decoded on the validation manifest and
scored with the toolkit; the checkpoint with the lowest validation WER
wins (ties go to the earlier epoch).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .backends import Backend, get_backend
from .decode import transcribe_manifest
from .errors import AdapterUsageError, CheckpointMissing
from .formats import read_manifest, write_hypotheses
from .plans import AdapterRunSpec, enforce_hints
from .scorer import score_with_toolkit

log = logging.getLogger("adaptbench_adapter")


@dataclass(frozen=True)
class CheckpointEval:
    checkpoint: Path
    validation_wer: float


def _run_key(spec: AdapterRunSpec) -> str:
    payload = json.dumps(
        {
            "job_id": spec.job.job_id,
            "backend": spec.backend_id,
            "epochs": spec.epochs,
            "init_from": spec.job.init_from,
            "train_manifest": spec.job.train_manifest,
            "valid_manifest": spec.job.valid_manifest,
        },
        sort_keys=True,
    ).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:12]


def resolve_init_checkpoint(spec: AdapterRunSpec) -> Optional[Path]:
    """Find the population (B2) checkpoint for warm-started jobs."""
    if spec.job.init_from != "si_checkpoint":
        return None
    pointer = spec.selected_path("sift-b2")
    if not pointer.exists():
        raise CheckpointMissing(
            f"job {spec.job.job_id} warm-starts from the population checkpoint, "
            f"but {pointer} does not exist; run the sift-b2 job first"
        )
    data = json.loads(pointer.read_text(encoding="utf-8"))
    checkpoint = Path(data["checkpoint"])
    if not checkpoint.is_absolute():
        checkpoint = spec.workdir / checkpoint
    if not checkpoint.exists():
        raise CheckpointMissing(f"selected checkpoint vanished: {checkpoint}")
    return checkpoint


def resolved_config(spec: AdapterRunSpec, backend: Backend) -> dict:
    """The fully resolved training configuration (what dry runs emit)."""
    frozen = (
        list(range(backend.encoder_layers() // 2))
        if spec.job.freeze_lower_half
        else []
    )
    init = None
    if spec.job.init_from == "si_checkpoint":
        pointer = spec.selected_path("sift-b2")
        init = str(pointer) if pointer.exists() else f"<pending: {pointer}>"
    return {
        "job_id": spec.job.job_id,
        "condition": spec.job.condition_id,
        "stage": spec.job.stage,
        "backend": spec.backend_id,
        "device": spec.device,
        "epochs": spec.epochs,
        "init_from": spec.job.init_from,
        "init_checkpoint": init,
        "train_manifest": spec.job.train_manifest,
        "valid_manifest": spec.job.valid_manifest,
        "encoder_layers": backend.encoder_layers(),
        "frozen_encoder_layers": frozen,
        "checkpoint_dir": str(spec.checkpoints_dir() / _run_key(spec)),
        "train_hints": dict(spec.job.train_hints),
    }


def select_checkpoint(
    spec: AdapterRunSpec, backend: Backend, checkpoints: Sequence[Path]
) -> tuple[Path, list[CheckpointEval]]:
    """Decode the validation manifest with every checkpoint and take the
    lowest-WER one (earlier epoch on ties)."""
    if not checkpoints:
        raise AdapterUsageError("no checkpoints to select from")
    if not spec.job.valid_manifest:
        raise AdapterUsageError(f"job {spec.job.job_id} has no validation manifest")
    valid_manifest = spec.resolve(spec.job.valid_manifest)
    entries = read_manifest(valid_manifest)
    evals: list[CheckpointEval] = []
    val_dir = spec.workdir / "validation" / spec.job.job_id
    val_dir.mkdir(parents=True, exist_ok=True)
    for index, checkpoint in enumerate(checkpoints):
        rows = transcribe_manifest(spec, backend, checkpoint, entries)
        hyp_path = val_dir / f"candidate_{index:03d}.jsonl"
        write_hypotheses(rows, hyp_path)
        report = score_with_toolkit(valid_manifest, hyp_path, spec.job.condition_id)
        evals.append(CheckpointEval(checkpoint, float(report["wer"])))
        log.info(
            "job %s checkpoint %s: validation WER %.3f",
            spec.job.job_id,
            checkpoint.name,
            evals[-1].validation_wer,
        )
    best = min(range(len(evals)), key=lambda i: (evals[i].validation_wer, i))
    return evals[best].checkpoint, evals


def finetune(spec: AdapterRunSpec, dry_run: bool = False, backend: Optional[Backend] = None):
    """Train per the job's hints and return the selected checkpoint path.

    With ``dry_run`` the resolved training configuration is returned and
    nothing is trained, decoded or written.
    """
    enforce_hints(spec.job)
    if not spec.job.is_training:
        raise AdapterUsageError(f"job {spec.job.job_id} is not a training job")
    backend = backend or get_backend(spec.backend_id)
    if dry_run:
        return resolved_config(spec, backend)
    spec.require_epochs()
    init_checkpoint = resolve_init_checkpoint(spec)
    run_dir = spec.checkpoints_dir() / _run_key(spec)
    checkpoints = backend.train(spec, init_checkpoint, run_dir)
    best, evals = select_checkpoint(spec, backend, checkpoints)
    pointer = spec.selected_path()
    pointer.parent.mkdir(parents=True, exist_ok=True)

    # store checkpoints relative to the workdir so the pointer survives both
    # relative --workdir invocations and moved work trees
    def rel(path: Path) -> str:
        return os.path.relpath(path, spec.workdir)

    pointer.write_text(
        json.dumps(
            {
                "job_id": spec.job.job_id,
                "checkpoint": rel(best),
                "validation_wer": min(e.validation_wer for e in evals),
                "candidates": [
                    {"checkpoint": rel(e.checkpoint), "validation_wer": e.validation_wer}
                    for e in evals
                ],
            },
            ensure_ascii=False,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return best
