# -*- coding: utf-8 -*-

import numpy as np
import pytest

from clicksim.data_processor import ClickLogError, DataProcessor, SerpRecord, SerpSplit, Vocab

from conftest import TOY_SERP_LENGTH, write_lines


def test_parse_line_splits_results():
    sid, query, docs, verticals, clicks = DataProcessor.parse_line("s1\tq1\td1:web:1 d2:img:0", 2)
    assert (sid, query) == ("s1", "q1")
    assert docs == ["d1", "d2"]
    assert verticals == ["web", "img"]
    assert clicks == [1, 0]


def test_parse_line_keeps_colons_inside_document_tokens():
    _, _, docs, verticals, _ = DataProcessor.parse_line("s1\tq1\thttp://a.b:web:0 d2:web:1", 2)
    assert docs == ["http://a.b", "d2"]
    assert verticals == ["web", "web"]


@pytest.mark.parametrize("line", [
    "s1\tq1",
    "s1\tq1\td1:web:1 d2:web:0 d3:web:0",
    "s1\tq1\td1:web:2 d2:web:0",
    "s1\tq1\td1:web d2:web:0",
    "s1\tq1\td1:web:1 d1:img:0",
])
def test_parse_line_rejects_malformed_input(line):
    with pytest.raises(ClickLogError):
        DataProcessor.parse_line(line, 2, "log.tsv:3")


def test_error_message_carries_file_and_line(tmp_path):
    path = write_lines(tmp_path / "train.tsv", ["s1\tq1\td1:web:1 d2:web:0", "s2\tq1\td1:web:1"])
    with pytest.raises(ClickLogError, match="train.tsv:2"):
        DataProcessor.read_raw(path, 2)


def test_parse_log_builds_vocabularies_from_train(toy_dataset):
    d = toy_dataset
    assert d.vocab_sizes == (5, 7, 5, 4)
    assert d.query_vocab.lookup("q1") == 2
    assert d.doc_vocab.lookup("d5") == 6
    assert len(d.train) == 4 and len(d.valid) == 2 and len(d.test) == 2
    # d9 only appears in valid
    assert d.valid.docs[1, 1] == Vocab.OOV_ID
    np.testing.assert_array_equal(d.train.clicks[2], [1, 1, 0])


def test_parse_log_reads_annotations(toy_dataset):
    annotations = toy_dataset.annotations
    q1, d1 = toy_dataset.query_vocab.lookup("q1"), toy_dataset.doc_vocab.lookup("d1")
    assert len(annotations) == 6
    assert annotations.grade(q1, d1) == 4
    assert set(annotations.by_query()) == {q1, toy_dataset.query_vocab.lookup("q3")}


def test_annotation_grade_over_maximum_is_rejected(toy_dir):
    write_lines(toy_dir / "annotations.tsv", ["q1\td1\t7"])
    with pytest.raises(ClickLogError):
        DataProcessor.parse_log(toy_dir, serp_length=TOY_SERP_LENGTH)


def test_serp_length_mismatch_is_rejected(toy_dir):
    with pytest.raises(ClickLogError):
        DataProcessor.parse_log(toy_dir, serp_length=4)


def test_missing_directory_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        DataProcessor.parse_log(tmp_path / "nowhere", serp_length=3)


def test_single_file_is_read_as_train(toy_dir):
    d = DataProcessor.parse_log(toy_dir / "test.tsv", serp_length=TOY_SERP_LENGTH)
    assert len(d.train) == 2 and len(d.valid) == 0 and len(d.test) == 0


def test_dataset_stats_hand_counts(toy_dataset):
    stats = DataProcessor.dataset_stats(toy_dataset)
    assert stats.sessions == {"train": 3, "valid": 2, "test": 2}
    assert stats.records == {"train": 4, "valid": 2, "test": 2}
    assert stats.unique_queries == {"train": 3, "valid": 2, "test": 2}
    assert stats.avg_session_length["train"] == pytest.approx(4 / 3)
    np.testing.assert_allclose(stats.ctr_by_rank["train"], [0.5, 0.5, 0.0])
    np.testing.assert_allclose(stats.ctr_by_rank["test"], [0.5, 0.5, 0.0])


def test_dataset_stats_of_empty_split_are_zero(toy_dataset):
    empty = toy_dataset.replace_splits(valid=SerpSplit.empty(TOY_SERP_LENGTH))
    stats = DataProcessor.dataset_stats(empty)
    assert stats.sessions["valid"] == 0
    assert stats.avg_session_length["valid"] == 0.0
    np.testing.assert_array_equal(stats.ctr_by_rank["valid"], np.zeros(TOY_SERP_LENGTH))


def test_written_dataset_parses_back_identically(toy_dataset, tmp_path):
    DataProcessor.write_dataset(tmp_path / "copy", toy_dataset)
    again = DataProcessor.parse_log(tmp_path / "copy", TOY_SERP_LENGTH, vocabs=toy_dataset.vocabs)
    for name in ("train", "valid", "test"):
        a, b = toy_dataset.split(name), again.split(name)
        assert list(a.records()) == list(b.records())
    assert again.annotations.grades == toy_dataset.annotations.grades


@pytest.mark.parametrize("mode", ["half", "full"])
def test_permutation_keeps_the_document_multiset(mode):
    rng = np.random.default_rng(0)
    r = SerpRecord("s", 2, np.arange(2, 12), np.arange(12, 22), np.ones(10, dtype=np.int64))
    for _ in range(20):
        p = DataProcessor.permute_serp(r, mode, rng)
        assert sorted(p.docs) == sorted(r.docs)
        assert np.all(p.clicks == 0)
        # verticals travel with their documents
        np.testing.assert_array_equal(p.verticals - p.docs, np.full(10, 10))
        if mode == "half":
            assert set(p.docs[:5]) == set(r.docs[:5])


def test_permutation_none_is_identity():
    r = SerpRecord("s", 2, [2, 3, 4], [2, 2, 2], [1, 0, 0])
    assert DataProcessor.permute_serp(r, "none", np.random.default_rng(0)) == r


def test_half_permutation_of_two_results_is_identity():
    r = SerpRecord("s", 2, [2, 3], [2, 2], [0, 0])
    rng = np.random.default_rng(1)
    for _ in range(5):
        np.testing.assert_array_equal(DataProcessor.permute_serp(r, "half", rng).docs, [2, 3])


def test_unknown_permutation_mode_raises():
    r = SerpRecord("s", 2, [2, 3], [2, 2], [0, 0])
    with pytest.raises(ValueError):
        DataProcessor.permute_serp(r, "reverse", np.random.default_rng(0))


def test_frozen_vocab_maps_new_tokens_to_oov():
    vocab = Vocab("doc", ["a", "b"]).freeze()
    assert vocab.add("c") == Vocab.OOV_ID
    assert vocab.lookup("a") == 2
    assert vocab.token(Vocab.PAD_ID) == "<pad>"
    assert Vocab.from_tokens("doc", vocab.tokens()).lookup("b") == 3


def test_minibatches_cover_every_record_once(toy_dataset):
    seen = np.concatenate(list(toy_dataset.train.minibatches(3, np.random.default_rng(0))))
    assert sorted(seen) == [0, 1, 2, 3]
