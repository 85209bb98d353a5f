"""Acceptance suite: one test per criterion, at its stated tolerance.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line
per criterion; each test additionally prints an ``ACCEPTANCE ... PASS``
line on success. Expected values come from independent oracles in
``tests/oracles.py`` or from hand arithmetic, never from the code under
test.
"""

import random
import re
import time
from collections import Counter
from pathlib import Path

from click.testing import CliRunner

from adaptbench.chat_parser import parse_document, parse_file
from adaptbench.cli import main
from adaptbench.experiments import isolation_diff, plan_conditions
from adaptbench.manifest import Condition
from adaptbench.normalizer import NormalizationPolicy, normalize_utterance
from adaptbench.pipeline import build_plan, load_corpus, write_manifests
from adaptbench.config import load_config
from adaptbench.scoring import align, normalize_for_scoring, score_corpus, ScoringNormalizer
from adaptbench.si_filter import filter_si
from adaptbench.splitting import (
    CorpusUtterance,
    Rounding,
    Split,
    SpeakerStat,
    build_si_pool,
    rank_speakers,
    select_ss,
    split_blocks,
    split_ratio,
)

from .oracles import oracle_edit_distance


def ok(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


WORDS5 = ["alpha", "beta", "gamma", "delta", "epsilon"]


def test_C01_edit_distance_oracle_equivalence():
    """1,000 random pairs, len <= 12, 5-word alphabet; exact, under 5 s."""
    rng = random.Random(20250810)
    started = time.monotonic()
    for _ in range(1000):
        ref = [rng.choice(WORDS5) for _ in range(rng.randint(0, 12))]
        hyp = [rng.choice(WORDS5) for _ in range(rng.randint(0, 12))]
        assert align(ref, hyp).distance == oracle_edit_distance(ref, hyp)
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"oracle sweep took {elapsed:.2f}s"
    ok("edit-distance-oracle-equivalence")


def test_C02_wer_arithmetic_above_100():
    """Reference length 1 vs hypothesis length 3 scores exactly 300%."""
    result = align(["a"], ["x", "y", "z"])
    assert result.distance == 3
    report = score_corpus([("a", "x y z")])
    assert report.wer == 300.0
    ok("wer-arithmetic-above-100")


def test_C03_speaker_disjointness_200_random_corpora():
    """SI pool and SS speakers never intersect; zero tolerance."""
    rng = random.Random(7)
    for trial in range(200):
        n_speakers = rng.randint(1, 24)
        speakers = [f"s{trial}_{i}" for i in range(n_speakers)]
        stats = [
            SpeakerStat(s, rng.randint(0, 50_000), rng.randint(1, 9))
            for s in speakers
        ]
        utts = [
            CorpusUtterance(f"{s.speaker_id}_u{k}", s.speaker_id, f"w{k}")
            for s in stats
            for k in range(s.utterance_count)
        ]
        fraction = rng.choice([0.05, 0.10, 0.25])
        rounding = rng.choice(list(Rounding))
        partition = select_ss(rank_speakers(stats), fraction, rounding)
        pool = build_si_pool(partition, utts)
        pool_speakers = {u.rsplit("_u", 1)[0] for u in pool}
        assert pool_speakers & set(partition.ss_speakers) == set()
        assert partition.ss_speakers | partition.si_speakers == set(speakers)
    ok("speaker-disjointness-200-corpora")


def test_C04_top_fraction_selection_reproduces_counts():
    """16 speakers -> 2 targets; 456 with ROUND -> 46 targets; exact."""
    ranked16 = [f"S{i:02d}" for i in range(16)]
    assert len(select_ss(ranked16, 0.10, Rounding.ROUND).ss_speakers) == 2
    assert len(select_ss(ranked16, 0.10, Rounding.CEIL).ss_speakers) == 2
    ranked456 = [f"S{i:03d}" for i in range(456)]
    assert len(select_ss(ranked456, 0.10, Rounding.ROUND).ss_speakers) == 46
    ok("top-fraction-selection-counts")


def test_C05_split_ratio_and_block_scheme():
    """Ratio buckets within one of quota and exactly summing, 3..500;
    blocks: block 2 tests, a 10% (within one) holdout validates."""
    for count in range(3, 501):
        utts = [
            CorpusUtterance(f"u{i:04d}", "spk", f"w{i}") for i in range(count)
        ]
        assignment = split_ratio(utts, seed=11)
        sizes = Counter(assignment.assignments.values())
        total = sizes[Split.TRAIN] + sizes[Split.VALID] + sizes[Split.TEST]
        assert total == count
        assert min(sizes[s] for s in Split) >= 1
        if count >= 10:
            assert abs(sizes[Split.TRAIN] - 0.8 * count) <= 1.0 + 1e-9
            assert abs(sizes[Split.VALID] - 0.1 * count) <= 1.0 + 1e-9
            assert abs(sizes[Split.TEST] - 0.1 * count) <= 1.0 + 1e-9
        else:
            assert sizes[Split.VALID] == 1 and sizes[Split.TEST] == 1

    def block_fixture(n_pool, n_test):
        pool = [
            CorpusUtterance(f"p{i:04d}", "spk", f"w{i}", block=(1 if i % 2 else 3))
            for i in range(n_pool)
        ]
        test = [
            CorpusUtterance(f"t{i:04d}", "spk", f"w{i}", block=2)
            for i in range(n_test)
        ]
        return pool + test

    assignment = split_blocks(block_fixture(20, 10), seed=3)
    sizes = Counter(assignment.assignments.values())
    assert (sizes[Split.TRAIN], sizes[Split.VALID], sizes[Split.TEST]) == (18, 2, 10)

    assignment = split_blocks(block_fixture(15, 4), seed=3)
    sizes = Counter(assignment.assignments.values())
    assert (sizes[Split.TRAIN], sizes[Split.VALID], sizes[Split.TEST]) == (13, 2, 4)

    for n_pool in range(1, 201):
        assignment = split_blocks(block_fixture(n_pool, 3), seed=9)
        sizes = Counter(assignment.assignments.values())
        assert sizes[Split.TEST] == 3
        assert abs(sizes[Split.VALID] - 0.1 * n_pool) <= 1.0 + 1e-9
        assert sizes[Split.TRAIN] + sizes[Split.VALID] == n_pool
    ok("split-ratio-and-blocks")


def test_C06_delta_analytics_excluding_ties():
    """46 speakers, 34 wins / 10 losses / 2 ties -> 77.3% (within 0.05pp)."""
    from adaptbench.experiments import compute_deltas
    from adaptbench.scoring import Scope, ScoreReport

    def rep(wer):
        return ScoreReport(Scope.SPEAKER, wer, wer, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1)

    b3, b4 = {}, {}
    rng = random.Random(42)
    for i in range(34):
        base = 20.0 + rng.random() * 10
        b3[f"win{i:02d}"], b4[f"win{i:02d}"] = rep(base - 0.5 - rng.random()), rep(base)
    for i in range(10):
        base = 20.0 + rng.random() * 10
        b3[f"los{i:02d}"], b4[f"los{i:02d}"] = rep(base + 0.5 + rng.random()), rep(base)
    for i in range(2):
        b3[f"tie{i:02d}"], b4[f"tie{i:02d}"] = rep(25.0), rep(25.0)
    report = compute_deltas(b3, b4)
    assert len(report.per_speaker) == 46
    assert (report.win_count, report.loss_count, report.tie_count) == (34, 10, 2)
    assert abs(report.win_rate_excl_ties - 77.2727272727) < 0.05
    assert round(report.win_rate_excl_ties, 1) == 77.3
    ok("delta-analytics-excluding-ties")


def test_C07_scoring_normalization_pipeline(synth_dir):
    """'Hafta go!' -> 'have to go'; idempotence over 500 random strings;
    marker-free over the synthetic CHAT corpus."""
    assert normalize_for_scoring("Hafta go!") == ["have", "to", "go"]

    norm = ScoringNormalizer()
    rng = random.Random(99)
    pool = (
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
        " \t'’-_.,!?()[]<>:;\"@#$%&*+=/\\•éüß世界"
    )
    for _ in range(500):
        text = "".join(rng.choice(pool) for _ in range(rng.randint(0, 60)))
        once = norm.words(text)
        assert norm.words(" ".join(once)) == once

    marker = re.compile(r"[\[\]<>•\x00-\x1f\x7f]")
    policy = NormalizationPolicy()
    for path in sorted((synth_dir / "corpus").glob("*.cha")):
        doc = parse_file(str(path))
        for utt in doc.utterances:
            text = normalize_utterance(utt, policy).text
            assert not marker.search(text), f"marker leaked in {utt.utt_id}: {text!r}"
            for word in norm.words(text):
                assert all(c.isalnum() or c == "'" for c in word)
    ok("scoring-normalization-pipeline")


def test_C08_replacement_and_filter_semantics():
    """The replacement normalizes to the intended word and the utterance is
    included; adding a semantic tag flips it to excluded."""
    header = (
        "@Begin\n@Participants:\tPAR Participant\n"
        "@ID:\teng|x|PAR|||||Participant||\n"
    )
    included_doc = parse_document(
        header + "*PAR:\twabbit [: rabbit] [* p:w] .\n@End\n", "a.cha"
    )
    utt = included_doc.utterances[0]
    assert normalize_utterance(utt, NormalizationPolicy()).text == "rabbit"
    (decision,) = filter_si([utt])
    assert decision.included

    excluded_doc = parse_document(
        header + "*PAR:\twabbit [: rabbit] [* p:w] [* s:x] .\n@End\n", "b.cha"
    )
    (decision,) = filter_si([excluded_doc.utterances[0]])
    assert not decision.included
    ok("replacement-and-filter-semantics")


def test_C09_end_to_end_golden_run(tmp_path, synth_dir):
    """Two consecutive runs and a --jobs 8 run are byte-identical; < 30 s."""
    runner = CliRunner()
    config = str(synth_dir / "chat_run.toml")
    started = time.monotonic()
    dirs = []
    for name, jobs in (("one", "1"), ("two", "1"), ("eight", "8")):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["all", "--config", config, "--out-dir", str(out), "--jobs", jobs],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        dirs.append(out)
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"three pipeline runs took {elapsed:.1f}s"

    reference = {
        p.relative_to(dirs[0]).as_posix(): p.read_bytes()
        for p in sorted(dirs[0].rglob("*"))
        if p.is_file()
    }
    assert reference, "first run produced no files"
    expected = {
        "partition.json", "splits.json", "plan.json", "files.json",
        "report/results.txt", "report/results.csv", "report/delta_speakers.tsv",
    }
    assert expected <= set(reference)
    for other in dirs[1:]:
        produced = {
            p.relative_to(other).as_posix(): p.read_bytes()
            for p in sorted(other.rglob("*"))
            if p.is_file()
        }
        assert produced.keys() == reference.keys()
        for rel, blob in reference.items():
            assert produced[rel] == blob, f"{rel} differs between runs"
    ok("end-to-end-golden-run")


def test_C10_b3_b4_isolation(synth_dir):
    """Per speaker, the generated B3/B4 jobs differ only in init_from."""
    config = load_config(synth_dir / "chat_run.toml")
    corpus = load_corpus(config)
    plan = build_plan(config, corpus)
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        layout = write_manifests(config, Path(tmp), corpus, plan)
    jobs = plan_conditions(plan.partition, layout, config.conditions)
    pairs = 0
    for speaker in sorted(plan.partition.ss_speakers):
        b3 = [j for j in jobs if j.speaker_id == speaker and j.condition == Condition.B3]
        b4 = [j for j in jobs if j.speaker_id == speaker and j.condition == Condition.B4]
        assert len(b3) == 1 and len(b4) == 1
        assert isolation_diff(b3[0], b4[0]) == ["init_from"]
        pairs += 1
    assert pairs == len(plan.partition.ss_speakers) >= 1
    ok("b3-b4-isolation")
