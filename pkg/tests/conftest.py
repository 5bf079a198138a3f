# -*- coding: utf-8 -*-

from pathlib import Path

import numpy as np
import pytest

from clicksim.config import TrainConfig
from clicksim.data_processor import DataProcessor
from clicksim.model_builder import ModelBuilder

TOY_TRAIN = [
    "s1\tq1\td1:web:1 d2:web:0 d3:img:0",
    "s1\tq2\td2:web:0 d4:web:1 d1:web:0",
    "s2\tq1\td1:web:1 d3:img:1 d2:web:0",
    "s3\tq3\td5:news:0 d1:web:0 d2:web:0",
]
TOY_VALID = [
    "s4\tq1\td1:web:0 d2:web:1 d3:img:0",
    "s5\tq2\td4:web:1 d9:web:0 d2:web:0",
]
TOY_TEST = [
    "s6\tq1\td1:web:1 d2:web:0 d3:img:0",
    "s7\tq3\td5:news:0 d2:web:1 d1:web:0",
]
TOY_ANNOTATIONS = [
    "q1\td1\t4",
    "q1\td2\t1",
    "q1\td3\t0",
    "q3\td5\t2",
    "q3\td2\t0",
    "q3\td1\t1",
]
TOY_SERP_LENGTH = 3


def write_lines(path: Path, lines) -> Path:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


@pytest.fixture
def toy_dir(tmp_path) -> Path:
    """A dataset directory with three splits of T = 3 results and graded annotations."""
    data = tmp_path / "toy"
    data.mkdir()
    write_lines(data / "train.tsv", TOY_TRAIN)
    write_lines(data / "valid.tsv", TOY_VALID)
    write_lines(data / "test.tsv", TOY_TEST)
    write_lines(data / "annotations.tsv", TOY_ANNOTATIONS)
    return data


@pytest.fixture
def toy_dataset(toy_dir):
    return DataProcessor.parse_log(toy_dir, serp_length=TOY_SERP_LENGTH)


@pytest.fixture
def tiny_cfg() -> TrainConfig:
    return TrainConfig(serp_length=TOY_SERP_LENGTH, embedding_size=4, hidden_size=5, batch_size=4,
                       pretrain_epochs=2, max_epochs=2, ppo_epochs=2, dropout=0.0, surrogate_epochs=1,
                       l2=0.0, seed=7)


@pytest.fixture
def tiny_builder(toy_dataset) -> ModelBuilder:
    return ModelBuilder(toy_dataset.vocab_sizes, embedding_size=4, hidden_size=5,
                        serp_length=TOY_SERP_LENGTH, init_scale=0.5)


@pytest.fixture
def tiny_generator(tiny_builder):
    return tiny_builder.build_generator(np.random.default_rng(0))


@pytest.fixture
def tiny_discriminator(tiny_builder):
    return tiny_builder.build_discriminator(np.random.default_rng(1))
