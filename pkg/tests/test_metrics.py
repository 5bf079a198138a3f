# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.config import TrainConfig
from clicksim.data_processor import RelevanceAnnotation
from clicksim.metrics import MetricReport, Metrics
from clicksim.pgm import ClickModels
from clicksim.utils import Utils


def test_indifferent_predictions():
    preds = np.full((4, 3), 0.5)
    clicks = np.array([[1, 0, 0], [0, 1, 0], [1, 1, 1], [0, 0, 0]])
    assert Metrics.log_likelihood(preds, clicks) == pytest.approx(np.log(0.5))
    ppl_at, ppl = Metrics.perplexity(preds, clicks)
    np.testing.assert_allclose(ppl_at, 2.0)
    assert ppl == pytest.approx(2.0)


def test_perfect_predictions_are_clamped():
    clicks = np.array([[1, 0], [0, 1]])
    _, ppl = Metrics.perplexity(clicks.astype(float), clicks)
    assert ppl == pytest.approx(1.0, abs=1e-5)
    assert np.isfinite(Metrics.log_likelihood(1.0 - clicks, clicks))


def test_perplexity_by_hand():
    preds = np.array([[0.8, 0.25]])
    clicks = np.array([[1, 0]])
    ppl_at, ppl = Metrics.perplexity(preds, clicks)
    np.testing.assert_allclose(ppl_at, [1.25, 4.0 / 3.0])
    assert ppl == pytest.approx((1.25 + 4.0 / 3.0) / 2)


@pytest.mark.parametrize("preds, clicks", [
    (np.full((2, 3), 0.5), np.zeros((2, 2))),
    (np.zeros((0, 3)), np.zeros((0, 3))),
    (np.array([[1.5, 0.5]]), np.array([[1, 0]])),
    (np.array([[np.nan, 0.5]]), np.array([[1, 0]])),
])
def test_invalid_inputs_raise(preds, clicks):
    with pytest.raises(ValueError):
        Metrics.perplexity(preds, clicks)


def test_click_and_skip_perplexity():
    preds = np.array([[0.5, 0.5], [0.25, 0.5]])
    clicks = np.array([[1, 0], [0, 0]])
    on_click, on_skip = Metrics.perplexity_click_skip(preds, clicks)
    assert on_click[0] == pytest.approx(2.0)
    assert np.isnan(on_click[1])
    assert on_skip[0] == pytest.approx(4.0 / 3.0)
    assert on_skip[1] == pytest.approx(2.0)


def test_ndcg_by_hand():
    annotations = RelevanceAnnotation({(2, 10): 2, (2, 11): 0, (2, 12): 1})
    scores = {2: (np.array([10, 11, 12]), np.array([0.1, 0.9, 0.5]))}
    ideal = 3.0 + 1.0 / np.log2(3)
    at3 = Metrics.ndcg_at_k(scores, annotations, 3)
    assert at3.value == pytest.approx((1.0 / np.log2(3) + 3.0 / 2.0) / ideal)
    assert Metrics.ndcg_at_k(scores, annotations, 1).value == 0.0
    perfect = {2: (np.array([10, 11, 12]), np.array([0.9, 0.1, 0.5]))}
    assert Metrics.ndcg_at_k(perfect, annotations, 3).value == pytest.approx(1.0)


def test_ndcg_skips_queries_without_relevant_documents():
    annotations = RelevanceAnnotation({(2, 10): 0, (3, 10): 1})
    scores = {2: (np.array([10]), np.array([0.3])), 3: (np.array([10]), np.array([0.3])),
              4: (np.array([10]), np.array([0.3]))}
    result = Metrics.ndcg_at_k(scores, annotations, 1)
    assert result.skipped == 1
    assert result.evaluated == 1
    assert result.value == pytest.approx(1.0)


def test_evaluate_an_indifferent_generator(tiny_builder, toy_dataset):
    report = Metrics.evaluate(tiny_builder.build_generator(zero=True), toy_dataset.test, toy_dataset.annotations)
    assert report.ppl_overall == pytest.approx(2.0)
    assert report.ll == pytest.approx(np.log(0.5))
    assert sorted(report.ndcg_at) == [1, 3, 5, 10]
    # ties keep the display order: q1 is ideal, q3 shows grades 2, 0, 1
    assert report.ndcg_at[1] == pytest.approx(1.0)
    q3 = 3.5 / (3.0 + 1.0 / np.log2(3))
    assert report.ndcg_at[3] == pytest.approx((1.0 + q3) / 2)
    assert [report.extra[f"ndcg_queries@{k}"] for k in (1, 3, 5, 10)] == [2, 2, 2, 2]
    assert "ndcg_queries" not in report.extra


def test_metric_report_files(tmp_path):
    report = MetricReport(ll=-0.5, ppl_overall=1.5, ppl_at=np.array([1.25, 1.75]), ndcg_at={3: 0.8})
    report.write(tmp_path / "metrics.txt", tmp_path / "metrics.tsv")
    lines = (tmp_path / "metrics.txt").read_text().splitlines()
    assert lines == ["ll = -0.5", "ppl = 1.5", "ppl@1 = 1.25", "ppl@2 = 1.75", "ndcg@3 = 0.8"]
    rows = Utils.read_tsv(tmp_path / "metrics.tsv")
    assert rows == [{"ll": "-0.5", "ppl": "1.5", "ppl@1": "1.25", "ppl@2": "1.75", "ndcg@3": "0.8"}]


def test_synthetic_generation_tiles_and_samples(tiny_generator, toy_dataset):
    synth = Metrics.generate_synthetic(tiny_generator, toy_dataset, 3, np.random.default_rng(0),
                                       permutation_mode="full")
    assert len(synth.train) == 6 and len(synth.valid) == 0 and len(synth.test) == 0
    assert synth.train.session_ids[:4] == ["s6#r0", "s6#r1", "s6#r2", "s7#r0"]
    for i, source in enumerate(toy_dataset.test.records()):
        for k in range(3):
            assert sorted(synth.train.docs[3 * i + k]) == sorted(source.docs)
        # one permutation per record, shared by its repeats
        np.testing.assert_array_equal(synth.train.docs[3 * i], synth.train.docs[3 * i + 2])


def test_synthetic_generation_with_a_pgm(toy_dataset):
    model = ClickModels.fit("sdbn", toy_dataset)
    synth = Metrics.generate_synthetic(model, toy_dataset, 2, np.random.default_rng(0))
    np.testing.assert_array_equal(synth.train.docs[::2], toy_dataset.test.docs)
    with pytest.raises(ValueError):
        Metrics.generate_synthetic(model, toy_dataset, 0, np.random.default_rng(0))


def test_reverse_and_forward_agree_when_data_are_identical(toy_dataset):
    reverse, forward = Metrics.reverse_forward_ppl(toy_dataset.train, toy_dataset.train, "ubm",
                                                   toy_dataset.vocab_sizes, TrainConfig(serp_length=3))
    assert reverse == pytest.approx(forward)
    assert reverse >= 1.0


def test_neural_surrogate_coverage(tiny_generator, tiny_cfg, toy_dataset):
    synth = Metrics.generate_synthetic(tiny_generator, toy_dataset, 2, np.random.default_rng(0))
    reverse, forward = Metrics.reverse_forward_ppl(synth, toy_dataset, "neural", cfg=tiny_cfg)
    assert np.isfinite(reverse) and np.isfinite(forward)
    assert reverse >= 1.0 and forward >= 1.0
    with pytest.raises(ValueError):
        Metrics.reverse_forward_ppl(synth, toy_dataset, "dbn", cfg=tiny_cfg)


def test_paired_sign_test():
    result = Metrics.paired_sign_test([1, 2, 3, 4, 5, 6, 7], [0, 0, 0, 0, 0, 0, 7])
    assert (result["wins"], result["losses"], result["ties"]) == (6, 0, 1)
    assert result["p_value"] == pytest.approx(2 / 64)
    assert Metrics.paired_sign_test([1.0], [1.0])["p_value"] == 1.0
    with pytest.raises(ValueError):
        Metrics.paired_sign_test([1, 2], [1])
