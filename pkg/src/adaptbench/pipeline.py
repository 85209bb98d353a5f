"""End-to-end pipeline: corpus in, manifests/plan/hypotheses/reports out.

Every artifact lands under one output directory with deterministic bytes:
re-running with the same inputs, seed and config reproduces every file
exactly, regardless of ``--jobs``. All paths stored inside artifacts are
POSIX-style and relative to the output directory.

Layout of a completed run::

    out/
      docs.jsonl            parsed-document debug dump (chat corpora)
      normalized.jsonl      normalization output, empties flagged
      decisions.jsonl       SI-filter decisions (chat corpora)
      partition.json        SS/SI speaker partition
      splits.json           per-speaker split assignments + SI holdout
      manifests/*.jsonl     train/valid/test + re-emitted OOD manifests
      plan.json             B1-B4 job plans
      hyps/*.jsonl          hypotheses (mock decode or external backends)
      report/results.txt    aligned results table
      report/results.csv    machine-readable results
      report/delta_speakers.tsv  per-speaker B3-B4 deltas
      report/deltas.json    delta analytics detail
      files.json            relative path -> sha256 of every artifact
"""

from __future__ import annotations

import glob
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Optional

from . import chat_parser
from .config import DatasetKind, PipelineConfig
from .errors import DataError
from .experiments import (
    CellScore,
    Condition,
    DeltaReport,
    JobPlan,
    ManifestLayout,
    MedianBase,
    SpeakerManifests,
    Stage,
    compute_deltas,
    delta_tsv,
    hypothesis_relpath,
    plan_conditions,
    plan_from_json,
    plan_to_json,
    render_results,
)
from .manifest import (
    HypothesisSet,
    ManifestEntry,
    read_hypotheses,
    read_manifest,
    write_hypotheses,
    write_manifest,
)
from .mock_decode import CorruptionRates, mock_decode
from .normalizer import NormalizedUtterance, normalize_utterance
from .scoring import ScoreReport, ScoringNormalizer, score_corpus
from .si_filter import FilterDecision, filter_si
from .splitting import (
    CorpusUtterance,
    Split,
    SplitAssignment,
    SpeakerPartition,
    apportion,
    build_si_pool,
    rank_speakers,
    select_ss,
    shuffle_key,
    speaker_stats,
    split_blocks,
    split_ratio,
)
from .wordlist import read_wordlist

log = logging.getLogger("adaptbench")

SS_TEST_EVALSET = "ss-test"


def expand_paths(patterns) -> list[str]:
    paths: list[str] = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        if not matches and not any(ch in pattern for ch in "*?["):
            matches = [pattern]
        paths.extend(matches)
    unique = sorted(dict.fromkeys(paths))
    if not unique:
        raise DataError(f"no input files match: {', '.join(patterns)}")
    return unique


@dataclass
class CorpusData:
    """Everything the splitter and manifest builder need, in corpus order."""

    documents: list[chat_parser.ChatDocument]
    normalized: list[NormalizedUtterance]
    utterances: list[CorpusUtterance]
    decisions: Optional[list[FilterDecision]]

    def by_id(self) -> dict[str, CorpusUtterance]:
        return {u.utt_id: u for u in self.utterances}


def _parse_files(paths: list[str], jobs: int) -> list[chat_parser.ChatDocument]:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(chat_parser.parse_file, paths))
    return [chat_parser.parse_file(p) for p in paths]


def load_corpus(config: PipelineConfig, jobs: int = 1) -> CorpusData:
    """Parse/normalize a chat corpus or read a word-list corpus.

    For chat corpora each source file is one speaker session and the file
    stem is the speaker id; the configured speaker tiers (default PAR-only)
    select which tiers contribute utterances.
    """
    paths = expand_paths(config.dataset.paths)
    if config.dataset.kind == DatasetKind.WORDLIST:
        utts = [u for path in paths for u in read_wordlist(path)]
        return CorpusData([], [], utts, None)

    documents = _parse_files(paths, jobs)
    wanted_tiers = set(config.dataset.speakers)
    normalized = []
    utterances = []
    parsed_kept = []
    for doc in documents:
        speaker_id = PurePosixPath(doc.source_path).stem
        audio_path = str(PurePosixPath(config.dataset.audio_dir) / f"{speaker_id}.wav")
        for utt in doc.utterances:
            if wanted_tiers and utt.speaker_code not in wanted_tiers:
                continue
            parsed_kept.append(utt)
            norm = normalize_utterance(utt, config.normalize)
            normalized.append(norm)
            utterances.append(
                CorpusUtterance(
                    utt_id=utt.utt_id,
                    speaker_id=speaker_id,
                    text=norm.text,
                    duration_ms=utt.alignment.duration_ms() if utt.alignment else 0,
                    start_ms=utt.alignment.start_ms if utt.alignment else None,
                    end_ms=utt.alignment.end_ms if utt.alignment else None,
                    audio_path=audio_path,
                )
            )
    decisions = (
        filter_si(parsed_kept, config.normalize)
        if config.filter_mode == "si"
        else None
    )
    return CorpusData(documents, normalized, utterances, decisions)


@dataclass
class PipelinePlan:
    partition: SpeakerPartition
    ss_assignments: dict[str, SplitAssignment]
    si_train_ids: list[str]
    si_valid_ids: list[str]

    def splits_dict(self) -> dict:
        return {
            "v": 1,
            "ss": {
                spk: assignment.to_dict()
                for spk, assignment in sorted(self.ss_assignments.items())
            },
            "si": {
                "train": sorted(self.si_train_ids),
                "valid": sorted(self.si_valid_ids),
            },
        }


def build_plan(config: PipelineConfig, corpus: CorpusData) -> PipelinePlan:
    """Rank, select target speakers, split, and pool SI training data."""
    nonempty = [u for u in corpus.utterances if u.text]
    if not nonempty:
        raise DataError("corpus has no utterances with non-empty normalized text")
    if config.split.selection_base == "filtered":
        assert corpus.decisions is not None
        included_ids = {d.utt_id for d in corpus.decisions if d.included}
        candidates = [u for u in nonempty if u.utt_id in included_ids]
        if not candidates:
            raise DataError(
                "selection_base 'filtered' but the SI filter includes no utterances"
            )
    else:
        candidates = nonempty
    ranked = rank_speakers(speaker_stats(candidates))
    partition = select_ss(ranked, config.split.fraction, config.split.rounding)
    # speakers outside the candidate pool stay SI (disjointness holds trivially)
    all_speakers = {u.speaker_id for u in nonempty}
    partition = SpeakerPartition(
        ss_speakers=partition.ss_speakers,
        si_speakers=frozenset(all_speakers - set(partition.ss_speakers)),
        fraction=partition.fraction,
        rounding=partition.rounding,
    )

    by_speaker: dict[str, list[CorpusUtterance]] = {}
    for u in nonempty:
        by_speaker.setdefault(u.speaker_id, []).append(u)
    ss_assignments = {}
    for speaker in sorted(partition.ss_speakers):
        own = by_speaker.get(speaker, [])
        if config.split.scheme.value == "blocks":
            ss_assignments[speaker] = split_blocks(
                own, config.split.seed, config.split.holdout_fraction
            )
        else:
            ss_assignments[speaker] = split_ratio(own, config.split.seed)

    pool = build_si_pool(partition, nonempty, corpus.decisions)
    ordered = sorted(pool, key=lambda uid: (shuffle_key(config.split.seed, "__si__", uid), uid))
    _, n_valid = apportion(
        len(ordered),
        (1.0 - config.split.si_valid_fraction, config.split.si_valid_fraction),
    )
    si_valid = ordered[:n_valid]
    si_train = ordered[n_valid:]
    return PipelinePlan(
        partition=partition,
        ss_assignments=ss_assignments,
        si_train_ids=si_train,
        si_valid_ids=si_valid,
    )


def _entry(u: CorpusUtterance, split: Split, condition, dataset: str) -> ManifestEntry:
    return ManifestEntry(
        utt_id=u.utt_id,
        audio_path=u.audio_path or f"audio/{u.speaker_id}/{u.utt_id}.wav",
        start_ms=u.start_ms,
        end_ms=u.end_ms,
        text=u.text,
        speaker_id=u.speaker_id,
        split=split,
        condition=condition,
        dataset=dataset,
    )


def write_manifests(
    config: PipelineConfig, out_dir: Path, corpus: CorpusData, plan: PipelinePlan
) -> ManifestLayout:
    """Emit SI train/valid, per-target-speaker splits, and OOD copies."""
    manifest_dir = out_dir / "manifests"
    manifest_dir.mkdir(parents=True, exist_ok=True)
    by_id = corpus.by_id()
    dataset = config.dataset.name

    def emit(name: str, entries) -> str:
        write_manifest(entries, manifest_dir / name)
        return f"manifests/{name}"

    si_train = emit(
        "si_train.jsonl",
        [_entry(by_id[u], Split.TRAIN, Condition.B2, dataset) for u in plan.si_train_ids],
    )
    si_valid = emit(
        "si_valid.jsonl",
        [_entry(by_id[u], Split.VALID, Condition.B2, dataset) for u in plan.si_valid_ids],
    )
    ss: dict[str, SpeakerManifests] = {}
    for speaker, assignment in sorted(plan.ss_assignments.items()):
        paths = {}
        for split in (Split.TRAIN, Split.VALID, Split.TEST):
            ids = assignment.bucket(split)
            paths[split] = emit(
                f"ss_{speaker}_{split.value}.jsonl",
                [_entry(by_id[u], split, None, dataset) for u in ids],
            )
        ss[speaker] = SpeakerManifests(
            train=paths[Split.TRAIN], valid=paths[Split.VALID], test=paths[Split.TEST]
        )
    ood: dict[str, str] = {}
    for name, source in config.evals:
        entries = read_manifest(source)
        ood[name] = emit(f"ood_{name}.jsonl", entries)
    return ManifestLayout(si_train=si_train, si_valid=si_valid, ss=ss, ood=ood)


@dataclass(frozen=True)
class DecodeDuty:
    condition: Condition
    eval_manifest: str  # out_dir-relative
    model_speaker: Optional[str]

    def hyp_relpath(self) -> str:
        return hypothesis_relpath(self.condition, self.eval_manifest, self.model_speaker)


def decode_duties(jobs: list[JobPlan]) -> list[DecodeDuty]:
    duties = []
    for job in jobs:
        speaker = job.speaker_id if job.stage == Stage.SSFT else None
        for manifest in job.eval_manifests:
            duties.append(DecodeDuty(job.condition, manifest, speaker))
    return duties


def run_mock_decode(
    config: PipelineConfig, out_dir: Path, jobs_list: list[JobPlan], jobs: int = 1
) -> list[str]:
    """Generate hypothesis files for every decode duty in the plan."""
    (out_dir / "hyps").mkdir(parents=True, exist_ok=True)
    duties = decode_duties(jobs_list)
    base = CorruptionRates(
        substitution=config.mock.sub_rate,
        deletion=config.mock.del_rate,
        insertion=config.mock.ins_rate,
    )

    def produce(duty: DecodeDuty) -> str:
        entries = read_manifest(out_dir / duty.eval_manifest)
        rates = base.shifted(config.mock.offset_for(duty.condition))
        hyps = mock_decode(
            entries, duty.condition, rates, config.mock.seed, duty.model_speaker
        )
        rel = duty.hyp_relpath()
        write_hypotheses(hyps, out_dir / rel)
        return rel

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(produce, duties))
    return [produce(d) for d in duties]


def _pairs(
    entries: list[ManifestEntry], hyps: HypothesisSet, condition: Condition
) -> list[tuple[str, str]]:
    known = {e.utt_id for e in entries}
    strays = sorted(
        utt_id
        for cond, utt_id in hyps.by_key
        if cond == condition.value and utt_id not in known
    )
    if strays:
        raise DataError(
            f"hypotheses for utterances not in the paired manifest: "
            f"{', '.join(strays[:5])}"
            + (f" (+{len(strays) - 5} more)" if len(strays) > 5 else "")
        )
    pairs = []
    missing = 0
    for entry in sorted(entries, key=lambda e: (e.speaker_id, e.utt_id)):
        text = hyps.get_text(condition, entry.utt_id)
        if text is None:
            missing += 1
            text = ""
        pairs.append((entry.text, text))
    if missing:
        log.warning(
            "%d of %d utterances missing a hypothesis; scored as empty",
            missing,
            len(entries),
        )
    return pairs


@dataclass
class RunReport:
    cells: dict
    deltas: Optional[DeltaReport]
    results_text: str
    results_csv: str
    delta_tsv_text: str


def score_run(config: PipelineConfig, out_dir: Path, jobs_list: list[JobPlan]) -> RunReport:
    """Score every decoded (condition, evalset) and build the deltas."""
    normalizer = (
        ScoringNormalizer.from_rules_file(config.scoring.custom_rules)
        if config.scoring.custom_rules
        else ScoringNormalizer()
    )
    cer_spaces = config.scoring.cer_spaces
    dataset = config.dataset.name

    ss_speaker_of: dict[str, str] = {}
    ood_name_of: dict[str, str] = {}
    for job in jobs_list:
        for manifest in job.eval_manifests:
            stem = PurePosixPath(manifest).stem
            if stem.startswith("ss_") and stem.endswith("_test"):
                ss_speaker_of[manifest] = stem[len("ss_") : -len("_test")]
            elif stem.startswith("ood_"):
                ood_name_of[manifest] = stem[len("ood_") :]

    pooled_pairs: dict[tuple[str, Condition], list[tuple[str, str]]] = {}
    per_model_reports: dict[tuple[str, Condition], dict[str, ScoreReport]] = {}
    ss_speaker_reports: dict[Condition, dict[str, ScoreReport]] = {}

    for duty in decode_duties(jobs_list):
        hyp_path = out_dir / duty.hyp_relpath()
        if not hyp_path.exists():
            continue
        entries = read_manifest(out_dir / duty.eval_manifest)
        if not entries:
            continue
        hyps = read_hypotheses(hyp_path)
        pairs = _pairs(entries, hyps, duty.condition)
        if duty.eval_manifest in ss_speaker_of:
            evalset = SS_TEST_EVALSET
        else:
            evalset = ood_name_of.get(
                duty.eval_manifest, PurePosixPath(duty.eval_manifest).stem
            )
        pooled_pairs.setdefault((evalset, duty.condition), []).extend(pairs)
        report = score_corpus(pairs, normalizer, cer_spaces)
        if duty.model_speaker is not None:
            per_model_reports.setdefault((evalset, duty.condition), {})[
                duty.model_speaker
            ] = report
            if evalset == SS_TEST_EVALSET:
                ss_speaker_reports.setdefault(duty.condition, {})[
                    duty.model_speaker
                ] = report

    evalset_order: list[str] = []
    for key in pooled_pairs:
        if key[0] not in evalset_order:
            evalset_order.append(key[0])
    evalset_order.sort(key=lambda name: (name != SS_TEST_EVALSET, name))

    cells: dict[tuple[str, str], dict[Condition, CellScore]] = {}
    for evalset in evalset_order:
        row: dict[Condition, CellScore] = {}
        for condition in Condition:
            pairs = pooled_pairs.get((evalset, condition))
            if not pairs:
                continue
            pooled = score_corpus(pairs, normalizer, cer_spaces)
            models = per_model_reports.get((evalset, condition))
            if models and len(models) > 1:
                wers = [r.wer for r in models.values()]
                cers = [r.cer for r in models.values()]
                row[condition] = CellScore(
                    pooled.wer,
                    pooled.cer,
                    wer_model_mean=sum(wers) / len(wers),
                    cer_model_mean=sum(cers) / len(cers),
                )
            else:
                row[condition] = CellScore(pooled.wer, pooled.cer)
        if row:
            cells[(dataset, evalset)] = row

    deltas: Optional[DeltaReport] = None
    b3 = ss_speaker_reports.get(Condition.B3, {})
    b4 = ss_speaker_reports.get(Condition.B4, {})
    shared = sorted(set(b3) & set(b4))
    if shared:
        deltas = compute_deltas(
            {s: b3[s] for s in shared},
            {s: b4[s] for s in shared},
            MedianBase(config.median_base),
        )

    table = render_results(cells)
    tsv = delta_tsv(deltas) if deltas else "speaker_id\tdelta_wer\tdelta_cer\n"
    return RunReport(
        cells=cells,
        deltas=deltas,
        results_text=table.text,
        results_csv=table.csv,
        delta_tsv_text=tsv,
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=False) + "\n")


def write_report(out_dir: Path, report: RunReport) -> list[str]:
    _write_text(out_dir / "report" / "results.txt", report.results_text)
    _write_text(out_dir / "report" / "results.csv", report.results_csv)
    _write_text(out_dir / "report" / "delta_speakers.tsv", report.delta_tsv_text)
    payload = report.deltas.to_dict() if report.deltas else {}
    _write_json(out_dir / "report" / "deltas.json", payload)
    return [
        "report/results.txt",
        "report/results.csv",
        "report/delta_speakers.tsv",
        "report/deltas.json",
    ]


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_files_index(out_dir: Path) -> None:
    records = []
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file() or path.name == "files.json":
            continue
        rel = path.relative_to(out_dir).as_posix()
        records.append(
            {"path": rel, "sha256": _sha256(path), "bytes": path.stat().st_size}
        )
    _write_json(out_dir / "files.json", {"v": 1, "files": records})


def run_all(config: PipelineConfig, out_dir: Path, jobs: int = 1) -> Path:
    """Run every stage over the configured corpus; returns the output dir."""
    log.info("config fingerprint: %s", config.fingerprint())
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(config, jobs)
    if corpus.documents:
        _write_text(
            out_dir / "docs.jsonl",
            "".join(
                json.dumps(chat_parser.document_to_dict(d), ensure_ascii=False) + "\n"
                for d in corpus.documents
            ),
        )
    if corpus.normalized:
        _write_text(
            out_dir / "normalized.jsonl",
            "".join(
                json.dumps(n.to_dict(), ensure_ascii=False) + "\n"
                for n in corpus.normalized
            ),
        )
    if corpus.decisions is not None:
        _write_text(
            out_dir / "decisions.jsonl",
            "".join(
                json.dumps(d.to_dict(), ensure_ascii=False) + "\n"
                for d in corpus.decisions
            ),
        )

    plan = build_plan(config, corpus)
    _write_json(out_dir / "partition.json", plan.partition.to_dict())
    _write_json(out_dir / "splits.json", plan.splits_dict())

    layout = write_manifests(config, out_dir, corpus, plan)
    jobs_list = plan_conditions(plan.partition, layout, config.conditions)
    _write_text(out_dir / "plan.json", plan_to_json(jobs_list))

    if config.mock.enabled:
        run_mock_decode(config, out_dir, jobs_list, jobs)
        report = score_run(config, out_dir, jobs_list)
        write_report(out_dir, report)

    write_files_index(out_dir)
    return out_dir


def load_plan(out_dir: Path) -> list[JobPlan]:
    plan_path = out_dir / "plan.json"
    if not plan_path.exists():
        raise DataError(f"no plan.json under {out_dir}; run 'adaptbench plan' first")
    return plan_from_json(plan_path.read_text(encoding="utf-8"))
