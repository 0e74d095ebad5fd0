from __future__ import annotations

import json
import random

import pytest
from helpers import (
    brute_force_metrics,
    mk_sample,
    random_gold_pred,
    score_pairs as _score_pairs,
)
from hypothesis import given, settings
from hypothesis import strategies as st

from addrkit.metrics import (
    FoldSummary,
    LengthMismatchError,
    MissingPredictionError,
    REPORT_COLUMNS,
    ReportRow,
    aggregate_folds,
    read_predictions,
    read_report_csv,
    render_eval,
    render_report,
    result_to_dict,
    score,
    score_corpora,
    write_predictions,
    write_result,
)
from addrkit.ingest import Corpus
from addrkit.schema import BaseTag, BioLabel, to_bio


class TestScoreExamples:
    def test_perfect_prediction(self, table1):
        result = score([table1], {table1.id: list(table1.labels)})
        assert result.macro_f1 == 1.0
        assert result.micro_f1 == 1.0
        assert result.accuracy == 1.0
        for s in result.per_tag:
            assert s.precision == s.recall == s.f1 == 1.0

    def test_hand_counted_half(self):
        gold = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.COUNTRY)]
        pred = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.PROVINCE)]
        result = _score_pairs([(gold, pred)])
        name = result.score_for(BaseTag.NAME)
        assert name.precision == name.recall == name.f1 == 1.0
        country = result.score_for(BaseTag.COUNTRY)
        assert country.recall == 0.0
        assert result.macro_f1 == pytest.approx(0.5)

    def test_disjoint_label_sets(self):
        gold = [BioLabel.b(BaseTag.NAME)]
        pred = [BioLabel.b(BaseTag.PROVINCE)]
        assert _score_pairs([(gold, pred)]).macro_f1 == 0.0

    def test_pred_only_label_not_in_macro(self):
        gold = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.NAME)]
        pred = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.PROVINCE)]
        result = _score_pairs([(gold, pred)])
        assert BaseTag.PROVINCE not in result.gold_tags
        assert result.score_for(BaseTag.PROVINCE).fp == 1
        name = result.score_for(BaseTag.NAME)
        assert result.macro_f1 == pytest.approx(name.f1)

    def test_none_counts_as_miss_and_unresolved(self):
        gold = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.COUNTRY)]
        pred = [BioLabel.b(BaseTag.NAME), None]
        result = _score_pairs([(gold, pred)])
        country = result.score_for(BaseTag.COUNTRY)
        assert country.fn == 1
        assert country.fp == 0
        assert result.unresolved == 1

    def test_strip_false_keys_are_bio(self):
        gold = [BioLabel.b(BaseTag.NAME), BioLabel.i(BaseTag.NAME)]
        pred = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.NAME)]
        result = _score_pairs([(gold, pred)], strip=False)
        b = result.score_for(BioLabel.b(BaseTag.NAME))
        i = result.score_for(BioLabel.i(BaseTag.NAME))
        assert b.tp == 1 and b.fp == 1
        assert i.fn == 1
        stripped = _score_pairs([(gold, pred)], strip=True)
        assert stripped.macro_f1 == 1.0

    def test_missing_prediction_entry(self, table1):
        with pytest.raises(MissingPredictionError, match=table1.id):
            score([table1], {})

    def test_length_mismatch_names_sample(self, table1):
        with pytest.raises(LengthMismatchError, match=table1.id):
            score([table1], {table1.id: [BioLabel.b(BaseTag.NAME)]})

    def test_score_corpora(self, table1):
        gold = Corpus(samples=(table1,), provenance="g")
        predicted = Corpus(samples=(table1,), provenance="p")
        assert score_corpora(gold, predicted).macro_f1 == 1.0


class TestExclusion:
    def test_gold_excluded_tokens_skipped(self):
        gold = [BioLabel.b(BaseTag.HARD_SEP), BioLabel.b(BaseTag.NAME)]
        pred = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.NAME)]
        result = _score_pairs([(gold, pred)], exclude=[BaseTag.HARD_SEP])
        assert result.token_count == 1
        assert result.macro_f1 == 1.0
        assert result.score_for(BaseTag.HARD_SEP).support == 0

    def test_pred_excluded_becomes_unresolved(self):
        gold = [BioLabel.b(BaseTag.NAME)]
        pred = [BioLabel.b(BaseTag.HARD_SEP)]
        result = _score_pairs([(gold, pred)], exclude=[BaseTag.HARD_SEP])
        name = result.score_for(BaseTag.NAME)
        assert name.fn == 1
        assert result.score_for(BaseTag.HARD_SEP).fp == 0


class TestOracleAgreement:
    @pytest.mark.parametrize("strip", [True, False])
    def test_brute_force_equivalence(self, strip):
        rng = random.Random(20240817 if strip else 20240818)
        for _ in range(200):
            pairs = [random_gold_pred(rng) for _ in range(rng.randint(1, 3))]
            mine = _score_pairs(pairs, strip=strip)
            oracle = brute_force_metrics(pairs, strip=strip)
            assert mine.macro_f1 == pytest.approx(oracle["macro_f1"], abs=1e-12)
            for key, vals in oracle["per_tag"].items():
                got = mine.score_for(key)
                assert got.precision == pytest.approx(vals["precision"], abs=1e-12)
                assert got.recall == pytest.approx(vals["recall"], abs=1e-12)
                assert got.f1 == pytest.approx(vals["f1"], abs=1e-12)
                assert got.support == vals["support"]

    def test_permutation_invariance(self):
        rng = random.Random(7)
        pairs = [random_gold_pred(rng) for _ in range(6)]
        forward = _score_pairs(pairs)
        backward = _score_pairs(list(reversed(pairs)))
        assert forward.macro_f1 == pytest.approx(backward.macro_f1, abs=1e-15)
        for s in forward.per_tag:
            back = backward.score_for(s.tag)
            assert (s.tp, s.fp, s.fn) == (back.tp, back.fp, back.fn)

    def test_correcting_a_token_never_hurts_that_label(self):
        rng = random.Random(11)
        for _ in range(50):
            gold, pred = random_gold_pred(rng)
            wrong = [
                i
                for i, (g, p) in enumerate(zip(gold, pred))
                if p is None or p.base is not g.base
            ]
            if not wrong:
                continue
            i = rng.choice(wrong)
            before = _score_pairs([(gold, pred)]).score_for(gold[i].base).f1
            fixed = list(pred)
            fixed[i] = gold[i]
            after = _score_pairs([(gold, fixed)]).score_for(gold[i].base).f1
            assert after >= before - 1e-12

    def test_strip_equals_prestripped(self):
        rng = random.Random(13)
        for _ in range(50):
            gold, pred = random_gold_pred(rng)
            via_flag = _score_pairs([(gold, pred)], strip=True)
            # stripping beforehand: rewrite every label as B-<base>
            pre_gold = list(to_bio([g.base for g in gold]))
            pre_pred = [None if p is None else BioLabel.b(p.base) for p in pred]
            oracle = brute_force_metrics([(pre_gold, pre_pred)], strip=True)
            assert via_flag.macro_f1 == pytest.approx(oracle["macro_f1"], abs=1e-12)


class TestFoldAggregation:
    def test_two_point_closed_form(self):
        fs = FoldSummary.of([0.8, 0.9])
        assert fs.mean == pytest.approx(0.85)
        assert fs.std == pytest.approx(0.05)
        assert fs.std_scaled == pytest.approx(50.0)

    def test_identical_folds_zero_std(self):
        fs = FoldSummary.of([0.7, 0.7, 0.7])
        assert fs.std == 0.0

    def test_population_not_sample_std(self):
        fs = FoldSummary.of([0.0, 1.0])
        assert fs.std == pytest.approx(0.5)

    def test_aggregate_folds_structure(self):
        gold = [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.COUNTRY)]
        perfect = _score_pairs([(gold, list(gold))])
        half = _score_pairs(
            [(gold, [BioLabel.b(BaseTag.NAME), BioLabel.b(BaseTag.PROVINCE)])]
        )
        report = aggregate_folds([perfect, half])
        assert report.macro.n_folds == 2
        assert report.macro.mean == pytest.approx(0.75)
        assert report.per_tag[BaseTag.NAME].mean == pytest.approx(1.0)
        assert report.per_tag[BaseTag.COUNTRY].mean == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_folds([])


class TestRenderReport:
    @pytest.fixture()
    def rows(self):
        return [
            ReportRow.from_summary("desk", "v2", "test", FoldSummary.of([0.8, 0.9])),
            ReportRow("ext", "v0", "zero-shot", 0.781, 0.0, n_folds=1),
        ]

    def test_text_table_columns_and_std_marker(self, rows):
        text = render_report(rows, format="text-table").decode()
        header = text.splitlines()[0]
        assert list(REPORT_COLUMNS) == [
            "model",
            "data_version",
            "split",
            "mean_macro_f1",
            "std_x1e3",
        ]
        for col in REPORT_COLUMNS:
            assert col in header
        assert "50.0" in text
        assert "(single fold)" in text

    def test_csv_roundtrip(self, rows):
        data = render_report(rows, format="csv")
        back = read_report_csv(data)
        assert len(back) == 2
        for orig, parsed in zip(rows, back):
            assert parsed.model == orig.model
            assert parsed.data_version == orig.data_version
            assert parsed.split == orig.split
            assert parsed.mean == pytest.approx(orig.mean, abs=1e-15)
            assert parsed.std == pytest.approx(orig.std, abs=1e-15)

    def test_jsonl_parses(self, rows):
        lines = render_report(rows, format="jsonl").decode().splitlines()
        recs = [json.loads(line) for line in lines]
        assert recs[0]["mean_macro_f1"] == pytest.approx(0.85)
        assert recs[0]["std_x1e3"] == pytest.approx(50.0)

    def test_unknown_format(self, rows):
        with pytest.raises(ValueError):
            render_report(rows, format="xml")


class TestPredictionIO:
    def test_roundtrip_with_none(self, tmp_path):
        preds = {
            "a": [BioLabel.b(BaseTag.NAME), None, BioLabel.i(BaseTag.NAME)],
            "b": [BioLabel.b(BaseTag.OOA)],
        }
        p = tmp_path / "preds.jsonl"
        write_predictions(preds, p)
        assert read_predictions(p) == {k: list(v) for k, v in preds.items()}

    def test_null_serialized(self, tmp_path):
        p = tmp_path / "preds.jsonl"
        write_predictions({"a": [None]}, p)
        assert json.loads(p.read_text())["tags"] == [None]


class TestResultRendering:
    def test_render_eval_mentions_tags_and_macro(self, table1):
        result = score([table1], {table1.id: list(table1.labels)})
        text = render_eval(result, title="demo")
        assert "demo" in text
        assert "macro" in text.lower()
        assert "Municipality" in text

    def test_write_result_is_json(self, tmp_path, table1):
        result = score([table1], {table1.id: list(table1.labels)})
        p = tmp_path / "result.json"
        write_result(result, p)
        data = json.loads(p.read_text())
        assert data["macro_f1"] == pytest.approx(1.0)
        assert data == result_to_dict(result)
