# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.numkernel import ShapeError, grad_check
from clicksim.policy import CLICK_OFFSET, ClickPolicy, PolicyState, TrajectoryBatch


def test_interactions_shift_previous_clicks(tiny_generator):
    clicks = np.array([[1, 0, 1], [0, 1, 1]])
    np.testing.assert_array_equal(tiny_generator.interactions(clicks),
                                  [[0, CLICK_OFFSET + 1, CLICK_OFFSET], [0, CLICK_OFFSET, CLICK_OFFSET + 1]])


def test_zero_policy_is_indifferent(tiny_builder, toy_dataset):
    policy = tiny_builder.build_generator(zero=True)
    np.testing.assert_allclose(policy.predict_split(toy_dataset.test), 0.5)
    assert policy.relevance_score(2, 2, 2) == pytest.approx(0.5)


def test_step_api_matches_batch_api(tiny_generator, toy_dataset):
    batch = tiny_generator.predict_split(toy_dataset.train)
    for i, record in enumerate(toy_dataset.train.records()):
        np.testing.assert_allclose(tiny_generator.teacher_forced_probs(record), batch[i], rtol=1e-10)


def test_step_past_the_last_rank_raises(tiny_generator):
    state = PolicyState(hidden=np.zeros(5), query=2, rank=3)
    with pytest.raises(ValueError):
        tiny_generator.step(state, 2, 2)


def test_out_of_range_ids_raise(tiny_generator):
    with pytest.raises(ValueError):
        tiny_generator.init_state(99)
    state = tiny_generator.init_state(2)
    with pytest.raises(ValueError):
        tiny_generator.step(state, 99, 2)


def test_store_with_wrong_shapes_is_rejected(tiny_generator):
    with pytest.raises(ShapeError):
        ClickPolicy(tiny_generator.store, (5, 7, 5, 4), embedding_size=3, hidden_size=5, serp_length=3)


def test_sampling_is_reproducible(tiny_generator, toy_dataset):
    a = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(4))
    b = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(4))
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.split.clicks, a.actions)
    assert np.all(a.log_probs <= 0)


def test_single_record_batch_sampling_matches_sequence_sampling(tiny_generator, toy_dataset):
    record = toy_dataset.train.record(2)
    sequence = tiny_generator.sample_sequence(record, np.random.default_rng(9))
    batch = tiny_generator.sample_batch(toy_dataset.train.subset([2]), np.random.default_rng(9))
    np.testing.assert_array_equal(sequence.actions, batch.actions[0])
    np.testing.assert_allclose(sequence.log_probs, batch.log_probs[0], rtol=1e-10)


def test_sampled_log_probs_match_teacher_forced_probs(tiny_generator, toy_dataset):
    batch = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(2))
    p_click = tiny_generator.predict_split(batch.split)
    expected = np.log(np.where(batch.actions == 1, p_click, 1 - p_click))
    np.testing.assert_allclose(batch.log_probs, expected, rtol=1e-10)


def test_trajectories_round_trip_through_a_batch(tiny_generator, toy_dataset):
    batch = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(1))
    again = TrajectoryBatch.from_trajectories([batch.trajectory(i) for i in range(len(batch))])
    np.testing.assert_array_equal(again.actions, batch.actions)
    assert again.rewards is None and again.returns is None
    with pytest.raises(ValueError):
        TrajectoryBatch.from_trajectories([])


def test_score_list_gives_oov_documents_the_mean(tiny_generator):
    scores = tiny_generator.score_list(2, np.array([2, 1, 3]), np.array([2, 2, 2]))
    assert scores[1] == pytest.approx((scores[0] + scores[2]) / 2)


@pytest.mark.parametrize("dropout", [0.0, 0.3])
def test_nll_gradient_matches_finite_differences(tiny_generator, toy_dataset, dropout):
    def loss_fn():
        return tiny_generator.nll_loss(toy_dataset.train, dropout=dropout, rng=np.random.default_rng(5))

    report = grad_check(loss_fn, tiny_generator.store, n_probes=60, rng=np.random.default_rng(0))
    assert report.passed, report.worst()


def test_nll_of_empty_batch_raises(tiny_generator, toy_dataset):
    with pytest.raises(ValueError):
        tiny_generator.nll_loss(toy_dataset.train, index=np.array([], dtype=np.int64))


def test_ppo_gradient_matches_finite_differences(tiny_generator, toy_dataset):
    batch = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(3))
    advantages = np.random.default_rng(8).normal(size=batch.actions.shape)

    def loss_fn():
        return tiny_generator.ppo_loss(batch, advantages, clip=0.2, lambda_entropy=0.05)["loss"]

    report = grad_check(loss_fn, tiny_generator.store, n_probes=60, rng=np.random.default_rng(1))
    assert report.passed, report.worst()


def test_fully_clipped_batch_has_no_surrogate_gradient(tiny_generator, toy_dataset):
    batch = tiny_generator.sample_batch(toy_dataset.train, np.random.default_rng(3))
    # pretend the behaviour policy was much less likely to take these actions: ratio = e
    stale = TrajectoryBatch(batch.split, batch.actions, batch.log_probs - 1.0)
    tiny_generator.store.zero_grad()
    stats = tiny_generator.ppo_loss(stale, np.ones(batch.actions.shape), clip=0.2, lambda_entropy=0.0)
    assert stats["clip_fraction"] == 1.0
    assert stats["surrogate"] == pytest.approx(1.2)
    for name in tiny_generator.store.names():
        assert not np.any(tiny_generator.store.grad(name))


def test_entropy_is_maximal_for_the_indifferent_policy(tiny_builder, toy_dataset):
    policy = tiny_builder.build_generator(zero=True)
    batch = policy.sample_batch(toy_dataset.train, np.random.default_rng(0))
    stats = policy.ppo_loss(batch, np.zeros(batch.actions.shape), clip=0.2, lambda_entropy=1.0, accumulate=False)
    assert stats["entropy"] == pytest.approx(np.log(2))
    assert stats["loss"] == pytest.approx(-np.log(2))
    assert stats["clip_fraction"] == 0.0
