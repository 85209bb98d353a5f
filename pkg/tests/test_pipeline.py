"""Pipeline-level tests over the bundled synthetic corpus."""

from collections import Counter

import pytest

from adaptbench.config import load_config
from adaptbench.errors import DataError
from adaptbench.manifest import Condition, read_hypotheses, read_manifest
from adaptbench.mock_decode import CorruptionRates, corrupt_words
from adaptbench.pipeline import (
    build_plan,
    decode_duties,
    load_corpus,
    run_mock_decode,
    score_run,
    write_manifests,
)
from adaptbench.experiments import plan_conditions, plan_to_json
from adaptbench.splitting import Split
from adaptbench.wordlist import read_wordlist


@pytest.fixture(scope="module")
def chat_config(synth_dir):
    return load_config(synth_dir / "chat_run.toml")


@pytest.fixture(scope="module")
def chat_corpus(chat_config):
    return load_corpus(chat_config)


class TestLoadCorpus:
    def test_six_speakers_par_only(self, chat_corpus):
        speakers = {u.speaker_id for u in chat_corpus.utterances}
        assert speakers == {f"spk{i:02d}" for i in range(1, 7)}

    def test_investigator_tiers_excluded(self, chat_corpus):
        # INV turns exist in every file but never reach the corpus records
        texts = [u.text for u in chat_corpus.utterances]
        assert not any("tell me about" in t for t in texts)

    def test_decisions_align_with_utterances(self, chat_corpus):
        assert chat_corpus.decisions is not None
        assert len(chat_corpus.decisions) == len(chat_corpus.utterances)
        assert [d.utt_id for d in chat_corpus.decisions] == [
            u.utt_id for u in chat_corpus.utterances
        ]

    def test_filter_selects_pronunciation_only(self, chat_corpus):
        by_id = {d.utt_id: d for d in chat_corpus.decisions}
        # spk02: semantic-tagged utterance excluded, p-tagged included
        assert by_id["spk02_00002"].included  # twain [: train] [* p:w]
        assert not by_id["spk02_00005"].included  # sauce [* s:ur]

    def test_replacements_applied_in_text(self, chat_corpus):
        by_id = {u.utt_id: u for u in chat_corpus.utterances}
        assert "vendor" in by_id["spk01_00003"].text
        assert "wendor" not in by_id["spk01_00003"].text


class TestBuildPlan:
    def test_partition_and_splits(self, chat_config, chat_corpus):
        plan = build_plan(chat_config, chat_corpus)
        assert set(plan.partition.ss_speakers) == {"spk01"}
        assert len(plan.partition.si_speakers) == 5
        counts = Counter(plan.ss_assignments["spk01"].assignments.values())
        assert counts[Split.TRAIN] == 16
        assert counts[Split.VALID] == 2
        assert counts[Split.TEST] == 2

    def test_si_pool_is_speaker_disjoint(self, chat_config, chat_corpus):
        plan = build_plan(chat_config, chat_corpus)
        pool = set(plan.si_train_ids) | set(plan.si_valid_ids)
        assert all(not u.startswith("spk01") for u in pool)

    def test_filtered_selection_base(self, chat_config, chat_corpus, synth_dir):
        import dataclasses

        filtered_config = dataclasses.replace(
            chat_config,
            split=dataclasses.replace(chat_config.split, selection_base="filtered"),
        )
        plan = build_plan(filtered_config, chat_corpus)
        assert len(plan.partition.ss_speakers) == 1


class TestManifestsAndPlan:
    def test_layout_and_plan(self, chat_config, chat_corpus, tmp_path):
        plan = build_plan(chat_config, chat_corpus)
        layout = write_manifests(chat_config, tmp_path, chat_corpus, plan)
        assert (tmp_path / "manifests" / "si_train.jsonl").exists()
        entries = read_manifest(tmp_path / layout.si_train)
        assert entries
        assert all(e.condition == Condition.B2 for e in entries)
        assert all(e.split == Split.TRAIN for e in entries)
        assert all(not e.utt_id.startswith("spk01") for e in entries)

        jobs = plan_conditions(plan.partition, layout, chat_config.conditions)
        stages = Counter(j.stage.value for j in jobs)
        assert stages == {"sift": 1, "ssft": 2, "decode_only": 2}
        text = plan_to_json(jobs)
        assert '"freeze_lower_encoder_half": true' in text
        assert '"checkpoint_selection": "lowest validation WER"' in text
        assert '"temperature": 0' in text
        assert '"beam_size": 5' in text

    def test_ood_manifests_reemitted(self, chat_config, chat_corpus, tmp_path):
        plan = build_plan(chat_config, chat_corpus)
        layout = write_manifests(chat_config, tmp_path, chat_corpus, plan)
        assert sorted(layout.ood) == ["fleurs-mini", "ted-mini"]
        for rel in layout.ood.values():
            assert read_manifest(tmp_path / rel)


class TestMockDecode:
    def test_zero_rates_echo(self):
        words = ["the", "quick", "fox"]
        assert corrupt_words(words, CorruptionRates(), "key") == words

    def test_deterministic_and_key_sensitive(self):
        words = "one two three four five six seven eight".split()
        rates = CorruptionRates(0.3, 0.2, 0.2)
        a = corrupt_words(words, rates, "k1")
        b = corrupt_words(words, rates, "k1")
        c = corrupt_words(words, rates, "k2")
        assert a == b
        assert a != c

    def test_rates_move_error_mass(self):
        words = ("alpha beta gamma delta epsilon zeta eta theta " * 12).split()
        gentle = corrupt_words(words, CorruptionRates(0.05, 0.02, 0.02), "k")
        harsh = corrupt_words(words, CorruptionRates(0.5, 0.3, 0.3), "k")
        same_gentle = sum(1 for a, b in zip(words, gentle) if a == b)
        same_harsh = sum(1 for a, b in zip(words, harsh) if a == b)
        assert same_harsh < same_gentle

    def test_mock_decode_covers_manifest(self, chat_config, chat_corpus, tmp_path):
        plan = build_plan(chat_config, chat_corpus)
        layout = write_manifests(chat_config, tmp_path, chat_corpus, plan)
        jobs = plan_conditions(plan.partition, layout, chat_config.conditions)
        produced = run_mock_decode(chat_config, tmp_path, jobs)
        duties = decode_duties(jobs)
        assert len(produced) == len(duties)
        for duty in duties:
            hyps = read_hypotheses(tmp_path / duty.hyp_relpath())
            entries = read_manifest(tmp_path / duty.eval_manifest)
            assert {e.utt_id for e in entries} == {h.utt_id for h in hyps.entries}
            assert all(h.decode_meta["temperature"] == 0 for h in hyps.entries)
            assert all(h.decode_meta["beam_size"] == 5 for h in hyps.entries)


class TestScoreRun:
    def test_cells_and_deltas(self, chat_config, chat_corpus, tmp_path):
        plan = build_plan(chat_config, chat_corpus)
        layout = write_manifests(chat_config, tmp_path, chat_corpus, plan)
        jobs = plan_conditions(plan.partition, layout, chat_config.conditions)
        run_mock_decode(chat_config, tmp_path, jobs)
        report = score_run(chat_config, tmp_path, jobs)
        keys = set(report.cells)
        dataset = chat_config.dataset.name
        assert (dataset, "ss-test") in keys
        assert (dataset, "fleurs-mini") in keys
        assert (dataset, "ted-mini") in keys
        for row in report.cells.values():
            assert set(row) == set(Condition)
        assert report.deltas is not None
        assert len(report.deltas.per_speaker) == 1
        # B3's corruption offset is strictly gentler than B4's
        assert report.deltas.per_speaker[0].delta_wer < 0

    def test_missing_hyps_leave_cells_absent(self, chat_config, chat_corpus, tmp_path):
        plan = build_plan(chat_config, chat_corpus)
        layout = write_manifests(chat_config, tmp_path, chat_corpus, plan)
        jobs = plan_conditions(plan.partition, layout, chat_config.conditions)
        report = score_run(chat_config, tmp_path, jobs)
        assert report.cells == {}
        assert report.deltas is None
        assert report.delta_tsv_text.startswith("speaker_id")


class TestWordlist:
    def test_read_wordlist(self, synth_dir):
        utts = read_wordlist(synth_dir / "wordlist" / "words.jsonl")
        assert len(utts) == 84
        speakers = {u.speaker_id for u in utts}
        assert speakers == {"W01", "W02", "W03", "W04"}
        assert all(u.block in (1, 2, 3) for u in utts)

    def test_blocks_pipeline(self, synth_dir):
        config = load_config(synth_dir / "wordlist_run.toml")
        corpus = load_corpus(config)
        assert corpus.decisions is None
        plan = build_plan(config, corpus)
        assert set(plan.partition.ss_speakers) == {"W01"}
        assignment = plan.ss_assignments["W01"]
        counts = Counter(assignment.assignments.values())
        assert counts[Split.TEST] == 7
        assert counts[Split.VALID] == 1
        assert counts[Split.TRAIN] == 13
        # SI pool contains every utterance of the three SI speakers
        assert len(plan.si_train_ids) + len(plan.si_valid_ids) == 63

    def test_malformed_wordlist(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text('{"v":1,"utt_id":"a","speaker_id":"s"}\n')
        with pytest.raises(DataError):
            read_wordlist(path)
