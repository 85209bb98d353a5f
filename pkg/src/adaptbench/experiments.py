"""The B1-B4 condition matrix: job planning, delta analytics, result tables.

Planning emits one population-level fine-tuning job (B2), one pair of
speaker-specific jobs per target speaker (B3 warm-started from the B2
checkpoint, B4 from the pre-trained model), and decode-only jobs for B1/B2
over every evaluation manifest. A speaker's B3 and B4 jobs reference
byte-identical training data; the initialization source is the only thing
that separates them, which is what the whole comparison hinges on.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import PurePosixPath
from typing import Mapping, Optional, Sequence

from .errors import ConfigError, DataError
from .manifest import Condition
from .scoring import ScoreReport
from .splitting import SpeakerPartition

PLAN_VERSION = 1

# |delta WER| below this rounds to 0.000 at three decimals: a tie
TIE_EPSILON = 0.0005


class MissingSICheckpointRef(ConfigError):
    """A two-stage (B3) job was requested without the B2 stage producing
    the checkpoint it starts from."""


class SpeakerSetMismatch(DataError):
    pass


class Stage(str, Enum):
    SIFT = "sift"
    SSFT = "ssft"
    DECODE_ONLY = "decode_only"


class InitFrom(str, Enum):
    PRETRAINED = "pretrained"
    SI_CHECKPOINT = "si_checkpoint"


def default_train_hints(freeze_lower_encoder_half: bool) -> dict:
    return {
        "freeze_lower_encoder_half": freeze_lower_encoder_half,
        "checkpoint_selection": "lowest validation WER",
        "temperature": 0,
        "beam_size": 5,
    }


@dataclass(frozen=True)
class JobPlan:
    job_id: str
    condition: Condition
    stage: Stage
    init_from: InitFrom
    speaker_id: Optional[str]
    train_manifest: Optional[str]
    valid_manifest: Optional[str]
    eval_manifests: tuple[str, ...]
    train_hints: dict = field(hash=False)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "condition": self.condition.to_dict(),
            "stage": self.stage.value,
            "init_from": self.init_from.value,
            "speaker_id": self.speaker_id,
            "train_manifest": self.train_manifest,
            "valid_manifest": self.valid_manifest,
            "eval_manifests": list(self.eval_manifests),
            "train_hints": dict(self.train_hints),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JobPlan":
        return cls(
            job_id=data["job_id"],
            condition=Condition(data["condition"]["id"]),
            stage=Stage(data["stage"]),
            init_from=InitFrom(data["init_from"]),
            speaker_id=data.get("speaker_id"),
            train_manifest=data.get("train_manifest"),
            valid_manifest=data.get("valid_manifest"),
            eval_manifests=tuple(data.get("eval_manifests", [])),
            train_hints=dict(data.get("train_hints", {})),
        )


@dataclass(frozen=True)
class SpeakerManifests:
    train: str
    valid: str
    test: str


@dataclass(frozen=True)
class ManifestLayout:
    """Relative manifest paths the planner wires into jobs."""

    si_train: Optional[str]
    si_valid: Optional[str]
    ss: Mapping[str, SpeakerManifests]
    ood: Mapping[str, str]

    def ood_paths(self) -> list[str]:
        return [self.ood[name] for name in sorted(self.ood)]


def plan_conditions(
    partition: SpeakerPartition,
    layout: ManifestLayout,
    conditions: Sequence[Condition] = tuple(Condition),
) -> list[JobPlan]:
    """Emit the full job list for the requested conditions.

    Raises :class:`MissingSICheckpointRef` when B3 is requested without B2
    (likewise for B2 decode jobs, which need the B2 checkpoint).
    """
    wanted = set(conditions)
    if Condition.B3 in wanted and Condition.B2 not in wanted:
        raise MissingSICheckpointRef(
            "B3 warm-starts from the B2 checkpoint; add B2 to the condition set"
        )
    ss_speakers = sorted(partition.ss_speakers & set(layout.ss))
    missing = partition.ss_speakers - set(layout.ss)
    if missing:
        raise DataError(
            f"no manifests for target speakers: {sorted(missing)}"
        )
    ood = layout.ood_paths()
    ss_tests = [layout.ss[s].test for s in ss_speakers]
    all_evals = ss_tests + ood

    jobs: list[JobPlan] = []
    if Condition.B2 in wanted:
        if not layout.si_train or not layout.si_valid:
            raise DataError("B2 requested but the SI train/valid manifests are missing")
        jobs.append(
            JobPlan(
                job_id="sift-b2",
                condition=Condition.B2,
                stage=Stage.SIFT,
                init_from=InitFrom.PRETRAINED,
                speaker_id=None,
                train_manifest=layout.si_train,
                valid_manifest=layout.si_valid,
                eval_manifests=(),
                train_hints=default_train_hints(freeze_lower_encoder_half=False),
            )
        )
    for speaker in ss_speakers:
        manifests = layout.ss[speaker]
        evals = tuple([manifests.test] + ood)
        for condition, init_from in (
            (Condition.B3, InitFrom.SI_CHECKPOINT),
            (Condition.B4, InitFrom.PRETRAINED),
        ):
            if condition not in wanted:
                continue
            jobs.append(
                JobPlan(
                    job_id=f"ssft-{condition.value.lower()}-{speaker}",
                    condition=condition,
                    stage=Stage.SSFT,
                    init_from=init_from,
                    speaker_id=speaker,
                    train_manifest=manifests.train,
                    valid_manifest=manifests.valid,
                    eval_manifests=evals,
                    train_hints=default_train_hints(freeze_lower_encoder_half=True),
                )
            )
    for condition, init_from in (
        (Condition.B1, InitFrom.PRETRAINED),
        (Condition.B2, InitFrom.SI_CHECKPOINT),
    ):
        if condition not in wanted or not all_evals:
            continue
        jobs.append(
            JobPlan(
                job_id=f"decode-{condition.value.lower()}",
                condition=condition,
                stage=Stage.DECODE_ONLY,
                init_from=init_from,
                speaker_id=None,
                train_manifest=None,
                valid_manifest=None,
                eval_manifests=tuple(all_evals),
                train_hints=default_train_hints(freeze_lower_encoder_half=False),
            )
        )
    return jobs


def isolation_diff(a: JobPlan, b: JobPlan) -> list[str]:
    """Field names that differ between two jobs, for the B3/B4 isolation check.

    The condition label necessarily tracks the initialization source (it is
    the job's name), so it is excluded from the diff and instead checked for
    consistency with ``init_from``.
    """
    for job in (a, b):
        expected = (
            InitFrom.SI_CHECKPOINT
            if job.condition.init_lineage.value == "si_adapted" and job.stage != Stage.SIFT
            else InitFrom.PRETRAINED
        )
        if job.stage != Stage.SIFT and job.init_from != expected:
            raise DataError(
                f"job {job.job_id}: init_from {job.init_from.value} contradicts "
                f"condition {job.condition.value}"
            )
    differing = []
    if a.init_from != b.init_from:
        differing.append("init_from")
    if a.stage != b.stage:
        differing.append("stage")
    if a.speaker_id != b.speaker_id:
        differing.append("speaker_id")
    if a.train_manifest != b.train_manifest:
        differing.append("train_manifest")
    if a.valid_manifest != b.valid_manifest:
        differing.append("valid_manifest")
    if a.eval_manifests != b.eval_manifests:
        differing.append("eval_manifests")
    if a.train_hints != b.train_hints:
        differing.append("train_hints")
    return differing


def plan_to_json(jobs: Sequence[JobPlan]) -> str:
    payload = {"v": PLAN_VERSION, "jobs": [j.to_dict() for j in jobs]}
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=False) + "\n"


def plan_from_json(text: str) -> list[JobPlan]:
    data = json.loads(text)
    if data.get("v") != PLAN_VERSION:
        raise DataError(f"unsupported plan version {data.get('v')!r}")
    return [JobPlan.from_dict(j) for j in data["jobs"]]


def hypothesis_relpath(
    condition: Condition, eval_manifest: str, model_speaker: Optional[str] = None
) -> str:
    """Where a decode of ``eval_manifest`` under ``condition`` lands.

    ``hyps/<condition>__<manifest stem>[__<model speaker>].jsonl`` relative
    to the run directory; personalized models carry their target speaker.
    """
    stem = PurePosixPath(eval_manifest).stem
    suffix = f"__{model_speaker}" if model_speaker else ""
    return f"hyps/{condition.value}__{stem}{suffix}.jsonl"


class DeltaOutcome(str, Enum):
    WIN = "win"
    LOSS = "loss"
    TIE = "tie"


class MedianBase(str, Enum):
    ALL = "all"
    EXCL_TIES = "excl-ties"


@dataclass(frozen=True)
class SpeakerDelta:
    speaker_id: str
    delta_wer: float
    delta_cer: float
    outcome: DeltaOutcome


@dataclass(frozen=True)
class DeltaReport:
    """Per-speaker B3 minus B4 differences; negative favors two-stage."""

    per_speaker: tuple[SpeakerDelta, ...]
    win_count: int
    loss_count: int
    tie_count: int
    win_rate_excl_ties: Optional[float]
    median_delta_wer: float
    median_delta_cer: float
    median_base: MedianBase

    def to_dict(self) -> dict:
        return {
            "per_speaker": [
                {
                    "speaker_id": d.speaker_id,
                    "delta_wer": d.delta_wer,
                    "delta_cer": d.delta_cer,
                    "outcome": d.outcome.value,
                }
                for d in self.per_speaker
            ],
            "win_count": self.win_count,
            "loss_count": self.loss_count,
            "tie_count": self.tie_count,
            "win_rate_excl_ties": self.win_rate_excl_ties,
            "median_delta_wer": self.median_delta_wer,
            "median_delta_cer": self.median_delta_cer,
            "median_base": self.median_base.value,
        }


def compute_deltas(
    b3: Mapping[str, ScoreReport],
    b4: Mapping[str, ScoreReport],
    median_base: MedianBase = MedianBase.ALL,
) -> DeltaReport:
    """Classify each speaker as win/loss/tie on delta WER and aggregate.

    Win rate excludes ties from its denominator (``n/a`` when every speaker
    ties); the median covers all speakers unless ``median_base`` says
    otherwise. Classification uses full-precision deltas with the 0.0005
    tie threshold.
    """
    if set(b3) != set(b4):
        raise SpeakerSetMismatch(
            f"speaker sets differ: {sorted(set(b3) ^ set(b4))}"
        )
    if not b3:
        raise SpeakerSetMismatch("no speakers to compare")
    deltas = []
    for speaker in sorted(b3):
        delta_wer = b3[speaker].wer - b4[speaker].wer
        delta_cer = b3[speaker].cer - b4[speaker].cer
        if abs(delta_wer) < TIE_EPSILON:
            outcome = DeltaOutcome.TIE
        elif delta_wer < 0:
            outcome = DeltaOutcome.WIN
        else:
            outcome = DeltaOutcome.LOSS
        deltas.append(SpeakerDelta(speaker, delta_wer, delta_cer, outcome))
    wins = sum(1 for d in deltas if d.outcome == DeltaOutcome.WIN)
    losses = sum(1 for d in deltas if d.outcome == DeltaOutcome.LOSS)
    ties = sum(1 for d in deltas if d.outcome == DeltaOutcome.TIE)
    win_rate = 100.0 * wins / (wins + losses) if wins + losses else None
    if median_base == MedianBase.EXCL_TIES:
        pool = [d for d in deltas if d.outcome != DeltaOutcome.TIE]
    else:
        pool = deltas
    if pool:
        median_wer = statistics.median(d.delta_wer for d in pool)
        median_cer = statistics.median(d.delta_cer for d in pool)
    else:
        median_wer = 0.0
        median_cer = 0.0
    return DeltaReport(
        per_speaker=tuple(deltas),
        win_count=wins,
        loss_count=losses,
        tie_count=ties,
        win_rate_excl_ties=win_rate,
        median_delta_wer=median_wer,
        median_delta_cer=median_cer,
        median_base=median_base,
    )


@dataclass(frozen=True)
class CellScore:
    """One (dataset, evalset, condition) cell; the model-mean fields hold the
    across-personalized-models average where it differs from the pooled
    micro-average (B3/B4 on shared evaluation sets)."""

    wer: float
    cer: float
    wer_model_mean: Optional[float] = None
    cer_model_mean: Optional[float] = None


@dataclass(frozen=True)
class ResultsTable:
    text: str
    csv: str


_CONDITION_ORDER = (Condition.B1, Condition.B2, Condition.B3, Condition.B4)


def render_results(
    cells: Mapping[tuple[str, str], Mapping[Condition, CellScore]]
) -> ResultsTable:
    """Render the aligned-text table and CSV.

    Row order follows the mapping's insertion order; the column order is
    always B1..B4 with ``--`` for absent cells.
    """
    header = ["dataset", "evalset"]
    for condition in _CONDITION_ORDER:
        header.append(f"{condition.value} WER")
        header.append(f"{condition.value} CER")
    rows: list[list[str]] = []
    csv_lines = ["dataset,evalset,condition,aggregation,wer,cer"]
    for (dataset, evalset), by_condition in cells.items():
        row = [dataset, evalset]
        for condition in _CONDITION_ORDER:
            cell = by_condition.get(condition)
            if cell is None:
                row.extend(["--", "--"])
                continue
            row.extend([f"{cell.wer:.2f}", f"{cell.cer:.2f}"])
            csv_lines.append(
                f"{dataset},{evalset},{condition.value},micro,"
                f"{cell.wer:.6f},{cell.cer:.6f}"
            )
            if cell.wer_model_mean is not None:
                csv_lines.append(
                    f"{dataset},{evalset},{condition.value},model_mean,"
                    f"{cell.wer_model_mean:.6f},{cell.cer_model_mean:.6f}"
                )
        rows.append(row)
    widths = [
        max(len(header[col]), *(len(r[col]) for r in rows)) if rows else len(header[col])
        for col in range(len(header))
    ]
    lines = []
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append(
            "  ".join(
                value.ljust(widths[i]) if i < 2 else value.rjust(widths[i])
                for i, value in enumerate(row)
            ).rstrip()
        )
    return ResultsTable(
        text="\n".join(lines) + "\n", csv="\n".join(csv_lines) + "\n"
    )


def delta_tsv(report: DeltaReport) -> str:
    """Per-speaker bar-plot data: speakers sorted by delta WER."""
    lines = ["speaker_id\tdelta_wer\tdelta_cer"]
    ordered = sorted(report.per_speaker, key=lambda d: (d.delta_wer, d.speaker_id))
    for d in ordered:
        lines.append(f"{d.speaker_id}\t{d.delta_wer:.3f}\t{d.delta_cer:.3f}")
    return "\n".join(lines) + "\n"
