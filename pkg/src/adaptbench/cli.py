"""Command line interface: the pipeline as composable subcommands.

Exit codes: 0 success, 2 configuration/usage errors, 3 data errors,
4 I/O errors. Failures print a single machine-parsable line to stderr:
``adaptbench: error: <kind>: <message>``.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import SCHEMA_VERSION, __version__
from .config import (
    DatasetConfig,
    DatasetKind,
    MockConfig,
    PipelineConfig,
    ScoringConfig,
    SplitConfig,
    load_config,
)
from .errors import ConfigError, DataError
from .experiments import PLAN_VERSION
from .manifest import Condition, read_hypotheses, read_manifest, write_hypotheses
from .mock_decode import CorruptionRates, mock_decode
from .normalizer import NormalizationPolicy, normalize_utterance
from .pipeline import (
    build_plan,
    expand_paths,
    load_corpus,
    load_plan,
    run_all,
    score_run,
    write_manifests,
    write_report,
    _pairs,
    _write_json,
    _write_text,
)
from .scoring import CerSpaces, ScoringNormalizer, score_corpus, score_per_speaker
from .si_filter import filter_si
from .splitting import Rounding, SplitScheme
from . import chat_parser
from .experiments import plan_conditions, plan_to_json

log = logging.getLogger("adaptbench")


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"adaptbench: error: config: {exc}", err=True)
            sys.exit(2)
        except DataError as exc:
            click.echo(f"adaptbench: error: data: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"adaptbench: error: io: {exc}", err=True)
            sys.exit(4)

    return wrapper


def print_version(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(
        f"adaptbench {__version__} "
        f"(manifest schema v{SCHEMA_VERSION}, plan schema v{PLAN_VERSION})"
    )
    ctx.exit(0)


@click.group()
@click.option(
    "--version",
    is_flag=True,
    callback=print_version,
    expose_value=False,
    is_eager=True,
    help="Print version and schema versions.",
)
def main():
    """Corpus preparation and evaluation for two-stage ASR adaptation."""
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def policy_options(func):
    for name in reversed(
        [
            "apply-replacements",
            "keep-retraced-words",
            "drop-unintelligible",
            "drop-nonspeech",
            "drop-fragments",
        ]
    ):
        attr = name.replace("-", "_")
        default = getattr(NormalizationPolicy(), attr)
        func = click.option(
            f"--{name}/--no-{name}", attr, default=default, show_default=True
        )(func)
    func = click.option("--lowercase/--no-lowercase", default=False, show_default=True)(func)
    return func


def speaker_options(func):
    func = click.option(
        "--speakers",
        default="PAR",
        show_default=True,
        help="Comma-separated speaker tier codes to keep.",
    )(func)
    func = click.option(
        "--all-speakers", is_flag=True, help="Keep every speaker tier."
    )(func)
    return func


def _tier_filter(speakers: str, all_speakers: bool) -> set[str]:
    return set() if all_speakers else {s.strip() for s in speakers.split(",") if s.strip()}


def _out_stream(out: str):
    return sys.stdout if out == "-" else open(out, "w", encoding="utf-8", newline="\n")


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--out", default="-", show_default=True, help="Output file or - for stdout.")
@handle_errors
def parse(paths, out):
    """Parse CHAT files and dump documents as JSON lines."""
    files = expand_paths(paths)
    stream = _out_stream(out)
    try:
        for path in files:
            doc = chat_parser.parse_file(path)
            stream.write(
                json.dumps(chat_parser.document_to_dict(doc), ensure_ascii=False) + "\n"
            )
    finally:
        if stream is not sys.stdout:
            stream.close()


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--out", default="-", show_default=True)
@policy_options
@speaker_options
@handle_errors
def normalize(paths, out, speakers, all_speakers, **policy_kwargs):
    """Normalize CHAT utterances into clean target text (JSON lines)."""
    policy = NormalizationPolicy(**policy_kwargs)
    tiers = _tier_filter(speakers, all_speakers)
    stream = _out_stream(out)
    try:
        for path in expand_paths(paths):
            doc = chat_parser.parse_file(path)
            for utt in doc.utterances:
                if tiers and utt.speaker_code not in tiers:
                    continue
                stream.write(
                    json.dumps(
                        normalize_utterance(utt, policy).to_dict(), ensure_ascii=False
                    )
                    + "\n"
                )
    finally:
        if stream is not sys.stdout:
            stream.close()


@main.command("filter")
@click.argument("paths", nargs=-1, required=True)
@click.option(
    "--mode",
    type=click.Choice(["si"]),
    required=True,
    help="Filtering rule set; 'si' selects the speaker-independent pool.",
)
@click.option("--out", default="-", show_default=True)
@speaker_options
@handle_errors
def filter_command(paths, mode, out, speakers, all_speakers):
    """Emit SI-pool inclusion decisions with reasons (JSON lines)."""
    tiers = _tier_filter(speakers, all_speakers)
    utts = []
    speaker_of = {}
    for path in expand_paths(paths):
        doc = chat_parser.parse_file(path)
        stem = Path(path).stem
        for utt in doc.utterances:
            if tiers and utt.speaker_code not in tiers:
                continue
            utts.append(utt)
            speaker_of[utt.utt_id] = stem
    decisions = filter_si(utts)
    stream = _out_stream(out)
    try:
        for decision in decisions:
            stream.write(json.dumps(decision.to_dict(), ensure_ascii=False) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    included = [d for d in decisions if d.included]
    speakers_with_hit = {speaker_of[d.utt_id] for d in included}
    click.echo(
        f"included {len(included)} of {len(decisions)} utterances "
        f"({len(speakers_with_hit)} of {len(set(speaker_of.values()))} speakers "
        f"with at least one included utterance)",
        err=True,
    )


def _flag_config(
    paths, kind, scheme, seed, fraction, rounding, selection_base,
    si_valid_fraction, holdout_fraction, tiers,
) -> PipelineConfig:
    if kind == DatasetKind.CHAT and selection_base is None:
        raise ConfigError(
            "missing required config key: split.selection_base "
            "(pass --selection-base all|filtered for chat corpora)"
        )
    return PipelineConfig(
        dataset=DatasetConfig(
            kind=kind,
            name="cli",
            paths=tuple(paths),
            speakers=tuple(sorted(tiers)),
        ),
        normalize=NormalizationPolicy(),
        filter_mode="si" if kind == DatasetKind.CHAT else "none",
        split=SplitConfig(
            scheme=SplitScheme(scheme),
            seed=seed,
            fraction=fraction,
            rounding=Rounding(rounding),
            selection_base=selection_base or "all",
            si_valid_fraction=si_valid_fraction,
            holdout_fraction=holdout_fraction,
        ),
        scoring=ScoringConfig(),
        conditions=tuple(Condition),
        evals=(),
        mock=MockConfig(),
        output_dir=".",
    )


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--kind", type=click.Choice(["chat", "wordlist"]), default="chat", show_default=True)
@click.option("--scheme", type=click.Choice([s.value for s in SplitScheme]), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--fraction", type=float, default=0.10, show_default=True)
@click.option("--rounding", type=click.Choice([r.value for r in Rounding]), default="round", show_default=True)
@click.option("--selection-base", type=click.Choice(["all", "filtered"]), default=None)
@click.option("--si-valid-fraction", type=float, default=0.10, show_default=True)
@click.option("--holdout-fraction", type=float, default=0.10, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@speaker_options
@handle_errors
def split(paths, kind, scheme, seed, fraction, rounding, selection_base,
          si_valid_fraction, holdout_fraction, out_dir, speakers, all_speakers):
    """Build the speaker partition and per-speaker splits."""
    tiers = _tier_filter(speakers, all_speakers)
    config = _flag_config(
        paths, kind, scheme, seed, fraction, rounding, selection_base,
        si_valid_fraction, holdout_fraction, tiers,
    )
    corpus = load_corpus(config)
    plan = build_plan(config, corpus)
    out = Path(out_dir)
    _write_json(out / "partition.json", plan.partition.to_dict())
    _write_json(out / "splits.json", plan.splits_dict())
    click.echo(
        f"partition: {len(plan.partition.ss_speakers)} target speaker(s), "
        f"{len(plan.partition.si_speakers)} SI speaker(s)"
    )


def _config_stage(config_path, out_dir):
    config = load_config(config_path)
    log.info("config fingerprint: %s", config.fingerprint())
    out = Path(out_dir) if out_dir else Path(config.output_dir)
    return config, out


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@click.option(
    "--check-audio",
    is_flag=True,
    help="Verify every manifest audio_path exists (resolved against --audio-root).",
)
@click.option("--audio-root", default=None, type=click.Path(file_okay=False))
@handle_errors
def manifest(config_path, out_dir, check_audio, audio_root):
    """Write partition, splits and all training/eval manifests."""
    config, out = _config_stage(config_path, out_dir)
    corpus = load_corpus(config)
    plan = build_plan(config, corpus)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "partition.json", plan.partition.to_dict())
    _write_json(out / "splits.json", plan.splits_dict())
    layout = write_manifests(config, out, corpus, plan)
    if check_audio:
        root = Path(audio_root) if audio_root else Path(config_path).resolve().parent
        missing = []
        for rel in sorted((out / "manifests").glob("*.jsonl")):
            for entry in read_manifest(rel):
                if not (root / entry.audio_path).exists():
                    missing.append(f"{entry.utt_id}: {entry.audio_path}")
        if missing:
            raise DataError(
                f"{len(missing)} audio file(s) missing, first: {missing[0]}"
            )
    click.echo(f"wrote manifests for {len(layout.ss)} target speaker(s) under {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@handle_errors
def plan(config_path, out_dir):
    """Write manifests plus the B1-B4 job plan."""
    config, out = _config_stage(config_path, out_dir)
    corpus = load_corpus(config)
    pipeline_plan = build_plan(config, corpus)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "partition.json", pipeline_plan.partition.to_dict())
    _write_json(out / "splits.json", pipeline_plan.splits_dict())
    layout = write_manifests(config, out, corpus, pipeline_plan)
    jobs_list = plan_conditions(pipeline_plan.partition, layout, config.conditions)
    _write_text(out / "plan.json", plan_to_json(jobs_list))
    click.echo(f"planned {len(jobs_list)} job(s) -> {out / 'plan.json'}")


@main.command("mock-decode")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--condition", type=click.Choice([c.value for c in Condition]), required=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--sub-rate", type=float, default=0.0, show_default=True)
@click.option("--del-rate", type=float, default=0.0, show_default=True)
@click.option("--ins-rate", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model-speaker", default=None)
@handle_errors
def mock_decode_command(manifest_path, condition, out, sub_rate, del_rate, ins_rate, seed, model_speaker):
    """Generate hypotheses from references with seeded corruption."""
    entries = read_manifest(manifest_path)
    hyps = mock_decode(
        entries,
        Condition(condition),
        CorruptionRates(sub_rate, del_rate, ins_rate),
        seed,
        model_speaker,
    )
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_hypotheses(hyps, out)
    click.echo(f"wrote {len(hyps)} hypotheses -> {out}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--hyps", "hyps_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--condition", type=click.Choice([c.value for c in Condition]), default=None,
              help="Required when the hypothesis file mixes conditions.")
@click.option("--per-speaker", is_flag=True)
@click.option("--custom-rules", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--cer-spaces", type=click.Choice([c.value for c in CerSpaces]), default="include", show_default=True)
@click.option("--json", "json_out", default=None, help="Write the full report as JSON (- for stdout).")
@handle_errors
def score(manifest_path, hyps_path, condition, per_speaker, custom_rules, cer_spaces, json_out):
    """Score a hypothesis file against its manifest (WER/CER)."""
    entries = read_manifest(manifest_path)
    if not entries:
        raise DataError(f"manifest {manifest_path} is empty")
    hyps = read_hypotheses(hyps_path)
    conditions = hyps.conditions()
    if condition:
        cond = Condition(condition)
    elif len(conditions) == 1:
        cond = next(iter(conditions))
    elif not conditions:
        raise DataError(f"hypothesis file {hyps_path} is empty")
    else:
        raise DataError(
            "hypothesis file mixes conditions "
            f"({', '.join(sorted(c.value for c in conditions))}); pass --condition"
        )
    normalizer = (
        ScoringNormalizer.from_rules_file(custom_rules)
        if custom_rules
        else ScoringNormalizer()
    )
    spaces = CerSpaces(cer_spaces)
    pairs = _pairs(entries, hyps, cond)
    report = score_corpus(pairs, normalizer, spaces)
    click.echo(f"WER {report.wer:.2f}")
    click.echo(f"CER {report.cer:.2f}")
    click.echo(
        f"utterances {report.n_utts} ref-words {report.ref_words} "
        f"S {report.word_substitutions} D {report.word_deletions} I {report.word_insertions}"
    )
    payload = report.to_dict()
    payload["condition"] = cond.value
    if per_speaker:
        by_speaker: dict[str, list[tuple[str, str]]] = {}
        for entry in sorted(entries, key=lambda e: (e.speaker_id, e.utt_id)):
            text = hyps.get_text(cond, entry.utt_id) or ""
            by_speaker.setdefault(entry.speaker_id, []).append((entry.text, text))
        speaker_reports = score_per_speaker(by_speaker, normalizer, spaces)
        payload["per_speaker"] = {}
        for speaker, sub in speaker_reports.items():
            click.echo(
                f"speaker {speaker}: WER {sub.wer:.2f} CER {sub.cer:.2f} (n={sub.n_utts})"
            )
            payload["per_speaker"][speaker] = sub.to_dict()
    if json_out:
        text = json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
        if json_out == "-":
            click.echo(text, nl=False)
        else:
            _write_text(Path(json_out), text)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@handle_errors
def report(config_path, out_dir):
    """Score all decoded hypotheses in a run directory and write reports."""
    config, out = _config_stage(config_path, out_dir)
    jobs_list = load_plan(out)
    run_report = score_run(config, out, jobs_list)
    write_report(out, run_report)
    click.echo(run_report.results_text, nl=False)


@main.command("all")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=1, show_default=True)
@handle_errors
def run_all_command(config_path, out_dir, jobs):
    """Run the whole pipeline: parse, split, manifests, plan, decode, report."""
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    config, out = _config_stage(config_path, out_dir)
    run_all(config, out, jobs)
    click.echo(f"run complete -> {out}")


if __name__ == "__main__":
    main()
