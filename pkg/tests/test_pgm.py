# -*- coding: utf-8 -*-

import numpy as np
import pytest
from scipy.stats import kendalltau

from clicksim.config import TrainConfig
from clicksim.data_processor import ClickLogError, SerpSplit
from clicksim.metrics import Metrics
from clicksim.oracle import Oracle, OracleSpec
from clicksim.pgm import PROB_FLOOR, ClickModels, DcmModel, PbmModel, SdbnModel, UbmModel


def _split(clicks, docs=None, queries=None):
    clicks = np.asarray(clicks)
    n, serp_length = clicks.shape
    docs = np.tile(np.arange(2, 2 + serp_length), (n, 1)) if docs is None else np.asarray(docs)
    queries = np.full(n, 2) if queries is None else np.asarray(queries)
    return SerpSplit([f"s{i}" for i in range(n)], queries, docs, np.full_like(docs, 2), clicks, serp_length)


@pytest.fixture(scope="module")
def pbm_oracle_data():
    spec = OracleSpec.random("pbm", serp_length=3, n_queries=2, n_docs=4, seed=3)
    return spec, Oracle.synth_generate(spec, 20000, np.random.default_rng(0))


def test_create_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ClickModels.create("ccm")
    assert isinstance(ClickModels.create("SDBN", 3), SdbnModel)


@pytest.mark.parametrize("kind", sorted(ClickModels.KINDS))
def test_fit_on_empty_split_raises(kind):
    with pytest.raises(ValueError):
        ClickModels.fit(kind, SerpSplit.empty(3))


@pytest.mark.parametrize("kind", sorted(ClickModels.KINDS))
def test_predictions_are_probabilities(kind, toy_dataset):
    model = ClickModels.fit(kind, toy_dataset)
    probs = model.predict_split(toy_dataset.test)
    assert probs.shape == (2, 3)
    assert np.all(probs >= PROB_FLOOR) and np.all(probs <= 1 - PROB_FLOOR)
    assert model.log_likelihood(toy_dataset.test) < 0


@pytest.mark.parametrize("kind", ["pbm", "ubm"])
def test_em_log_likelihood_never_decreases(kind, toy_dataset):
    cfg = TrainConfig(serp_length=3, pgm_max_iterations=30, pgm_tolerance=1e-9)
    model = ClickModels.fit(kind, toy_dataset, cfg)
    history = np.array(model.ll_history)
    assert history.size >= 2
    assert np.all(np.diff(history) >= -1e-9)
    assert history[-1] > history[0]


def test_dcm_counts_by_hand():
    split = _split([[1, 0, 1], [0, 0, 0]])
    model = DcmModel(3).fit(split)
    np.testing.assert_allclose(model.continuation, [2 / 3, 1 / 2, 1 / 3])
    np.testing.assert_allclose(model.stop_probs(), [1 / 3, 1 / 2, 2 / 3])
    # doc at rank 1 shown twice, clicked once
    assert model.relevance_score(2, 2) == pytest.approx(2 / 4)


def test_sdbn_counts_by_hand():
    split = _split([[1, 0, 1], [0, 0, 0]])
    model = SdbnModel(3).fit(split)
    sat = model.satisfaction(np.array([2, 2]), np.array([[2], [4]]))[:, 0]
    np.testing.assert_allclose(sat, [1 / 3, 2 / 3])


def test_cascade_examination_after_a_click():
    model = DcmModel(3)
    model.set_attractiveness(np.array([(2 << 32) + 2, (2 << 32) + 3, (2 << 32) + 4]), np.array([0.8, 0.5, 0.5]))
    model.continuation = np.array([0.4, 0.4, 0.4])
    probs = model.conditional_probs(np.array([2, 2]), np.array([[2, 3, 4], [2, 3, 4]]),
                                    np.array([[1, 0, 0], [0, 0, 0]]))
    # no click yet: every rank is examined
    np.testing.assert_allclose(probs[1], [0.8, 0.5, 0.5])
    # after a click: cont, then cont * (1 - a) / (cont * (1 - a) + 1 - cont)
    assert probs[0, 1] == pytest.approx(0.4 * 0.5)
    assert probs[0, 2] == pytest.approx(0.2 / (0.2 + 0.6) * 0.5)


def test_ubm_examination_depends_on_distance_to_last_click():
    model = UbmModel(3)
    model.exam = np.arange(9, dtype=float).reshape(3, 3) / 10
    model.set_attractiveness(np.array([(2 << 32) + d for d in (2, 3, 4)]), np.ones(3))
    model.clamp = False
    probs = model.predict_split(_split([[1, 0, 0], [0, 0, 0]]))
    np.testing.assert_allclose(probs[0], [model.exam[0, 0], model.exam[1, 0], model.exam[2, 1]])
    np.testing.assert_allclose(probs[1], [model.exam[0, 0], model.exam[1, 1], model.exam[2, 2]])


@pytest.mark.parametrize("kind", sorted(ClickModels.KINDS))
def test_save_and_load_reproduce_predictions(kind, toy_dataset, tmp_path):
    model = ClickModels.fit(kind, toy_dataset)
    model.save(tmp_path / "model.ckpt")
    loaded = ClickModels.load(tmp_path / "model.ckpt")
    assert type(loaded) is type(model)
    np.testing.assert_allclose(loaded.predict_split(toy_dataset.test), model.predict_split(toy_dataset.test))
    assert loaded.ll_history == pytest.approx(model.ll_history)


@pytest.mark.parametrize("text, where", [
    ("attr\t2\t3\t0.5\n", "kind"),
    ("kind\tpbm\nserp_length\t2\nattr\t2\t3\n", ":3"),
    ("kind\tpbm\nserp_length\t2\nattr\t2\t3\thigh\n", ":3"),
    ("kind\tpbm\nserp_length\ttwo\n", "two"),
    ("kind\tccm\nserp_length\t2\n", "ccm"),
    ("kind\tpbm\nserp_length\t2\nexam\t7\t0.5\n", "model.ckpt"),
    ("kind\tpbm\nserp_length\t2\nsat\t2\t3\t0.5\n", "satisfaction"),
    ("kind\tpbm\nserp_length\t2\nexam\n", ":3"),
])
def test_malformed_model_files_raise_click_log_errors(tmp_path, text, where):
    path = tmp_path / "model.ckpt"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ClickLogError, match=where):
        ClickModels.load(path)


def test_unseen_pairs_back_off_to_the_global_mean():
    model = PbmModel(2)
    model.set_attractiveness(np.array([(2 << 32) + 2, (2 << 32) + 3]), np.array([0.2, 0.6]))
    assert model.relevance_score(9, 9) == pytest.approx(0.4)


def test_sampling_matches_click_rates():
    model = PbmModel(3)
    model.exam = np.array([1.0, 0.5, 0.0])
    model.set_attractiveness(np.array([(2 << 32) + d for d in (2, 3, 4)]), np.array([0.6, 0.6, 0.6]))
    clicks = model.sample_split(_split(np.zeros((5000, 3), dtype=int)), np.random.default_rng(0))
    np.testing.assert_allclose(clicks.mean(axis=0), [0.6, 0.3, 0.0], atol=0.03)


@pytest.mark.slow
def test_pbm_recovers_oracle_parameters(pbm_oracle_data):
    spec, data = pbm_oracle_data
    cfg = TrainConfig(serp_length=3, pgm_max_iterations=300, pgm_tolerance=1e-7)
    model = ClickModels.fit("pbm", data, cfg)
    np.testing.assert_allclose(model.normalized_exam(), spec.exam / spec.exam[0], atol=0.06)

    queries = np.arange(spec.n_queries) + 2
    docs = np.tile(np.arange(spec.n_docs) + 2, (spec.n_queries, 1))
    fitted = model.attractiveness(queries, docs) * model.exam[0]
    np.testing.assert_allclose(fitted, spec.attractiveness * spec.exam[0], atol=0.06)
    tau, _ = kendalltau(fitted.ravel(), spec.attractiveness.ravel())
    assert tau > 0.7


@pytest.mark.slow
def test_fitted_pbm_approaches_oracle_perplexity(pbm_oracle_data):
    spec, data = pbm_oracle_data
    model = ClickModels.fit("pbm", data, TrainConfig(serp_length=3, pgm_max_iterations=200))
    _, fitted_ppl = Metrics.perplexity(model.predict_split(data.test), data.test.clicks)
    _, oracle_ppl = Oracle.oracle_ppl(spec, data)
    assert fitted_ppl >= oracle_ppl - 0.02
    assert fitted_ppl <= oracle_ppl + 0.02
