# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.numkernel import grad_check
from clicksim.policy import CLICK_OFFSET


def test_interactions_carry_the_current_click(tiny_discriminator):
    np.testing.assert_array_equal(tiny_discriminator.interactions(np.array([[1, 0, 0]])),
                                  [[CLICK_OFFSET + 1, CLICK_OFFSET, CLICK_OFFSET]])


def test_zero_discriminator_scores_one_half(tiny_builder, toy_dataset):
    disc = tiny_builder.build_discriminator(zero=True)
    np.testing.assert_allclose(disc.score_split(toy_dataset.train), 0.5)
    stats = disc.disc_grads(real=(toy_dataset.train, toy_dataset.train.clicks),
                            fake=(toy_dataset.train, 1 - toy_dataset.train.clicks), accumulate=False)
    assert stats["loss"] == pytest.approx(2 * np.log(2))
    assert stats["d_real"] == pytest.approx(0.5)


def test_scores_depend_on_the_action(tiny_discriminator, toy_dataset):
    split = toy_dataset.train
    clicked = tiny_discriminator.score_split(split, np.ones_like(split.clicks))
    skipped = tiny_discriminator.score_split(split, np.zeros_like(split.clicks))
    assert clicked.shape == (4, 3)
    assert np.all((clicked > 0) & (clicked < 1))
    assert not np.allclose(clicked, skipped)


def test_sequence_and_split_scores_agree(tiny_discriminator, toy_dataset):
    split = toy_dataset.train
    batch = tiny_discriminator.score_split(split)
    for i, record in enumerate(split.records()):
        np.testing.assert_allclose(tiny_discriminator.score_sequence(record, record.clicks), batch[i], rtol=1e-10)


def test_click_shape_mismatch_raises(tiny_discriminator, toy_dataset):
    with pytest.raises(ValueError):
        tiny_discriminator.score_split(toy_dataset.train, np.zeros((4, 2), dtype=int))
    with pytest.raises(ValueError):
        tiny_discriminator.score_sequence(toy_dataset.train.record(0), [1, 0])


def test_empty_batch_raises(tiny_discriminator, toy_dataset):
    empty = toy_dataset.train.subset([])
    with pytest.raises(ValueError):
        tiny_discriminator.disc_grads(real=(empty, empty.clicks), fake=(toy_dataset.train, toy_dataset.train.clicks))


def test_discriminator_gradient_matches_finite_differences(tiny_discriminator, toy_dataset):
    real = (toy_dataset.train, toy_dataset.train.clicks)
    fake = (toy_dataset.train, 1 - toy_dataset.train.clicks)

    def loss_fn():
        return tiny_discriminator.disc_grads(real=real, fake=fake)["loss"]

    report = grad_check(loss_fn, tiny_discriminator.store, n_probes=60, rng=np.random.default_rng(2))
    assert report.passed, report.worst()
