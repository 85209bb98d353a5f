"""Job-plan loading, training-hint enforcement, and run specs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import AdapterError, AdapterUsageError, UnknownTrainHint

PLAN_VERSION = 1

ALLOWED_HINTS = {
    "freeze_lower_encoder_half",
    "checkpoint_selection",
    "temperature",
    "beam_size",
}

REQUIRED_SELECTION = "lowest validation WER"


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    condition_id: str
    stage: str
    init_from: str
    speaker_id: Optional[str]
    train_manifest: Optional[str]
    valid_manifest: Optional[str]
    eval_manifests: tuple[str, ...]
    train_hints: dict = field(hash=False)

    @property
    def is_training(self) -> bool:
        return self.stage in ("sift", "ssft")

    @property
    def freeze_lower_half(self) -> bool:
        return bool(self.train_hints.get("freeze_lower_encoder_half", False))


def enforce_hints(job: JobSpec) -> None:
    """Abort on hints this adapter does not implement or cannot honor."""
    unknown = sorted(set(job.train_hints) - ALLOWED_HINTS)
    if unknown:
        raise UnknownTrainHint(
            f"job {job.job_id}: unimplemented train hint {unknown[0]!r}"
        )
    selection = job.train_hints.get("checkpoint_selection", REQUIRED_SELECTION)
    if selection != REQUIRED_SELECTION:
        raise UnknownTrainHint(
            f"job {job.job_id}: unsupported checkpoint selection {selection!r}"
        )
    if job.train_hints.get("temperature", 0) != 0:
        raise UnknownTrainHint(
            f"job {job.job_id}: only deterministic decoding (temperature 0) is implemented"
        )


def load_plan(path: str | Path) -> dict[str, JobSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("v") != PLAN_VERSION:
        raise AdapterError(f"unsupported plan version {data.get('v')!r}")
    jobs = {}
    for raw in data["jobs"]:
        job = JobSpec(
            job_id=raw["job_id"],
            condition_id=raw["condition"]["id"],
            stage=raw["stage"],
            init_from=raw["init_from"],
            speaker_id=raw.get("speaker_id"),
            train_manifest=raw.get("train_manifest"),
            valid_manifest=raw.get("valid_manifest"),
            eval_manifests=tuple(raw.get("eval_manifests", [])),
            train_hints=dict(raw.get("train_hints", {})),
        )
        jobs[job.job_id] = job
    return jobs


@dataclass(frozen=True)
class AdapterRunSpec:
    """Everything needed to execute one job against one backend.

    ``run_root`` is the toolkit output directory the plan's relative paths
    resolve against; ``workdir`` holds checkpoints and adapter state.
    """

    job: JobSpec
    backend_id: str
    run_root: Path
    workdir: Path
    epochs: Optional[int] = None
    device: str = "cpu"

    def resolve(self, relpath: str) -> Path:
        return self.run_root / relpath

    def checkpoints_dir(self) -> Path:
        return self.workdir / "checkpoints"

    def selected_path(self, job_id: Optional[str] = None) -> Path:
        return self.workdir / "selected" / f"{job_id or self.job.job_id}.json"

    def require_epochs(self) -> int:
        if self.epochs is None or self.epochs < 1:
            raise AdapterUsageError(
                "speaker-specific and population fine-tuning need an explicit "
                "--epochs value (there is no defensible default)"
            )
        return self.epochs
