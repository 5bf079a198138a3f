# -*- coding: utf-8 -*-

"""
clicksim Data Processor Module
This module provides the click-log data model and its input/output: SERP records, vocabularies,
train/valid/test splits, relevance annotations and list permutation.

Log line format (UTF-8, tab separated, one SERP per line):
    session_id<TAB>query_token<TAB>doc_1:vert_1:click_1<SPACE>...<SPACE>doc_T:vert_T:click_T
"""

import logging
logging.basicConfig(level=logging.INFO)

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = ["ClickLogError", "SerpRecord", "SerpSplit", "Vocab", "Dataset", "DatasetStats",
           "RelevanceAnnotation", "DataProcessor", "SPLIT_NAMES", "PERMUTATION_MODES"]

SPLIT_NAMES = ("train", "valid", "test")
PERMUTATION_MODES = ("none", "half", "full")


class ClickLogError(ValueError):
    """Malformed log or annotation content."""


@dataclass(eq=False)
class SerpRecord:
    """One query impression: the ranked documents, their verticals and the observed clicks."""
    session_id: str
    query: int
    docs: np.ndarray
    verticals: np.ndarray
    clicks: np.ndarray

    def __post_init__(self) -> None:
        self.docs = np.asarray(self.docs, dtype=np.int64)
        self.verticals = np.asarray(self.verticals, dtype=np.int64)
        self.clicks = np.asarray(self.clicks, dtype=np.int64)
        if not (self.docs.shape == self.verticals.shape == self.clicks.shape) or self.docs.ndim != 1:
            raise ClickLogError(f"record {self.session_id}: docs, verticals and clicks must have the same length")
        if np.any((self.clicks != 0) & (self.clicks != 1)):
            raise ClickLogError(f"record {self.session_id}: clicks must be 0 or 1")

    @property
    def length(self) -> int:
        return int(self.docs.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SerpRecord):
            return NotImplemented
        return (self.session_id == other.session_id and self.query == other.query
                and np.array_equal(self.docs, other.docs) and np.array_equal(self.verticals, other.verticals)
                and np.array_equal(self.clicks, other.clicks))

    def truncated(self, k: int) -> "SerpRecord":
        return SerpRecord(self.session_id, self.query, self.docs[:k], self.verticals[:k], self.clicks[:k])

    def with_clicks(self, clicks: Sequence[int]) -> "SerpRecord":
        return SerpRecord(self.session_id, self.query, self.docs.copy(), self.verticals.copy(), np.asarray(clicks))


@dataclass(eq=False)
class SerpSplit:
    """
    A partition of records stored column-wise: queries (N,), docs / verticals / clicks (N, T).
    """
    session_ids: List[str]
    queries: np.ndarray
    docs: np.ndarray
    verticals: np.ndarray
    clicks: np.ndarray
    serp_length: int = 10

    def __post_init__(self) -> None:
        n = len(self.session_ids)
        self.queries = np.asarray(self.queries, dtype=np.int64).reshape(n)
        self.docs = np.asarray(self.docs, dtype=np.int64).reshape(n, self.serp_length)
        self.verticals = np.asarray(self.verticals, dtype=np.int64).reshape(n, self.serp_length)
        self.clicks = np.asarray(self.clicks, dtype=np.int64).reshape(n, self.serp_length)

    @classmethod
    def empty(cls, serp_length: int = 10) -> "SerpSplit":
        return cls([], np.zeros(0), np.zeros((0, serp_length)), np.zeros((0, serp_length)),
                   np.zeros((0, serp_length)), serp_length)

    @classmethod
    def from_records(cls, records: Sequence[SerpRecord], serp_length: int = None) -> "SerpSplit":
        if not records:
            return cls.empty(serp_length or 10)
        serp_length = serp_length or records[0].length
        return cls([r.session_id for r in records], np.array([r.query for r in records]),
                   np.stack([r.docs for r in records]), np.stack([r.verticals for r in records]),
                   np.stack([r.clicks for r in records]), serp_length)

    def __len__(self) -> int:
        return len(self.session_ids)

    def record(self, i: int) -> SerpRecord:
        return SerpRecord(self.session_ids[i], int(self.queries[i]), self.docs[i].copy(),
                          self.verticals[i].copy(), self.clicks[i].copy())

    def records(self) -> Iterator[SerpRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def subset(self, index: Sequence[int]) -> "SerpSplit":
        index = np.asarray(index, dtype=np.int64)
        return SerpSplit([self.session_ids[i] for i in index], self.queries[index], self.docs[index],
                         self.verticals[index], self.clicks[index], self.serp_length)

    def with_clicks(self, clicks: np.ndarray) -> "SerpSplit":
        return SerpSplit(list(self.session_ids), self.queries.copy(), self.docs.copy(), self.verticals.copy(),
                         np.asarray(clicks, dtype=np.int64), self.serp_length)

    def minibatches(self, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
        """Yield index arrays covering the split once; shuffled when `rng` is given."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            yield order[start:start + batch_size]

    @staticmethod
    def concat(splits: Sequence["SerpSplit"]) -> "SerpSplit":
        splits = [s for s in splits if len(s)]
        if not splits:
            return SerpSplit.empty()
        return SerpSplit(sum((list(s.session_ids) for s in splits), []),
                         np.concatenate([s.queries for s in splits]), np.concatenate([s.docs for s in splits]),
                         np.concatenate([s.verticals for s in splits]), np.concatenate([s.clicks for s in splits]),
                         splits[0].serp_length)


class Vocab:
    """
    Token to dense id map. Id 0 is the padding slot and id 1 the out-of-vocabulary slot; real tokens
    start at 2.
    """
    PAD_ID = 0
    OOV_ID = 1
    PAD_TOKEN = "<pad>"
    OOV_TOKEN = "<unk>"

    def __init__(self, name: str, tokens: Sequence[str] = ()) -> None:
        self.name = name
        self._tokens: List[str] = [Vocab.PAD_TOKEN, Vocab.OOV_TOKEN]
        self._index: Dict[str, int] = {}
        self.frozen = False
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        if token in (Vocab.PAD_TOKEN, Vocab.OOV_TOKEN):
            return self.lookup(token)
        if token not in self._index:
            if self.frozen:
                return Vocab.OOV_ID
            self._index[token] = len(self._tokens)
            self._tokens.append(token)
        return self._index[token]

    def lookup(self, token: str) -> int:
        if token == Vocab.PAD_TOKEN:
            return Vocab.PAD_ID
        return self._index.get(token, Vocab.OOV_ID)

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self._tokens):
            raise IndexError(f"{self.name} id {idx} out of range (size {len(self)})")
        return self._tokens[idx]

    def tokens(self) -> List[str]:
        return list(self._tokens)

    def freeze(self) -> "Vocab":
        self.frozen = True
        return self

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @classmethod
    def from_tokens(cls, name: str, tokens: Sequence[str]) -> "Vocab":
        """Rebuild from `tokens()` output (reserved slots included)."""
        tokens = list(tokens)
        if tokens[:2] != [Vocab.PAD_TOKEN, Vocab.OOV_TOKEN]:
            raise ClickLogError(f"vocabulary {name}: reserved slots missing")
        return cls(name, tokens[2:]).freeze()

    @classmethod
    def clicks(cls) -> "Vocab":
        """The interaction vocabulary: id 2 = skip, id 3 = click."""
        return cls("click", ["0", "1"]).freeze()


@dataclass
class RelevanceAnnotation:
    """(query id, doc id) -> integer relevance grade in 0..max_grade."""
    grades: Dict[Tuple[int, int], int] = field(default_factory=dict)
    max_grade: int = 4

    def grade(self, query: int, doc: int) -> Optional[int]:
        return self.grades.get((query, doc))

    def by_query(self) -> Dict[int, Dict[int, int]]:
        grouped: Dict[int, Dict[int, int]] = {}
        for (q, d), g in self.grades.items():
            grouped.setdefault(q, {})[d] = g
        return grouped

    def __len__(self) -> int:
        return len(self.grades)


@dataclass
class Dataset:
    train: SerpSplit
    valid: SerpSplit
    test: SerpSplit
    query_vocab: Vocab
    doc_vocab: Vocab
    vertical_vocab: Vocab
    click_vocab: Vocab = field(default_factory=Vocab.clicks)
    annotations: Optional[RelevanceAnnotation] = None
    serp_length: int = 10

    @property
    def vocab_sizes(self) -> Tuple[int, int, int, int]:
        """(N_q, N_d, N_v, N_c)"""
        return len(self.query_vocab), len(self.doc_vocab), len(self.vertical_vocab), len(self.click_vocab)

    @property
    def vocabs(self) -> Tuple[Vocab, Vocab, Vocab]:
        return self.query_vocab, self.doc_vocab, self.vertical_vocab

    def split(self, name: str) -> SerpSplit:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def replace_splits(self, **splits: SerpSplit) -> "Dataset":
        values = {name: splits.get(name, getattr(self, name)) for name in SPLIT_NAMES}
        return Dataset(values["train"], values["valid"], values["test"], self.query_vocab, self.doc_vocab,
                       self.vertical_vocab, self.click_vocab, self.annotations, self.serp_length)


@dataclass
class DatasetStats:
    """Per-split counts; every field is zero for an empty split."""
    sessions: Dict[str, int]
    records: Dict[str, int]
    unique_queries: Dict[str, int]
    avg_session_length: Dict[str, float]
    ctr_by_rank: Dict[str, np.ndarray]

    def rows(self) -> List[List]:
        rows = []
        for name in SPLIT_NAMES:
            rows.append([name, self.sessions[name], self.records[name], self.unique_queries[name],
                         self.avg_session_length[name]] + [float(v) for v in self.ctr_by_rank[name]])
        return rows


class DataProcessor:
    """
    clicksim Data processor Class

    This class provides functions for click-log input/output and preprocessing.
    """

    @staticmethod
    def parse_line(line: str, serp_length: int, where: str = "") -> Tuple[str, str, List[str], List[str], List[int]]:
        """
        Split one log line into raw tokens.

        Parameters:
        line (str): The line without its newline.
        serp_length (int): Expected number of ranks T.
        where (str): `file:line` prefix for error messages.

        Returns:
        tuple: (session_id, query_token, doc_tokens, vertical_tokens, clicks)
        """
        parts = line.split("\t")
        if len(parts) != 3:
            raise ClickLogError(f"{where}: expected 3 tab-separated fields, got {len(parts)}")
        session_id, query_token, serp = parts
        if not session_id or not query_token:
            raise ClickLogError(f"{where}: empty session id or query token")
        items = serp.split(" ")
        if len(items) != serp_length:
            raise ClickLogError(f"{where}: expected {serp_length} results, got {len(items)}")
        docs, verticals, clicks = [], [], []
        for item in items:
            pieces = item.rsplit(":", 2)
            if len(pieces) != 3 or not pieces[0] or not pieces[1]:
                raise ClickLogError(f"{where}: malformed result {item!r}, expected doc:vertical:click")
            if pieces[2] not in ("0", "1"):
                raise ClickLogError(f"{where}: click must be 0 or 1, got {pieces[2]!r}")
            docs.append(pieces[0])
            verticals.append(pieces[1])
            clicks.append(int(pieces[2]))
        known = [d for d in docs if d != Vocab.OOV_TOKEN]
        if len(set(known)) != len(known):
            raise ClickLogError(f"{where}: duplicate document in one result list")
        return session_id, query_token, docs, verticals, clicks

    @staticmethod
    def read_raw(path: Union[str, Path], serp_length: int) -> List[Tuple[str, str, List[str], List[str], List[int]]]:
        raw = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                raw.append(DataProcessor.parse_line(line, serp_length, f"{path}:{lineno}"))
        return raw

    @staticmethod
    def encode_split(raw, query_vocab: Vocab, doc_vocab: Vocab, vertical_vocab: Vocab, serp_length: int,
                     grow: bool = False) -> SerpSplit:
        encode = (lambda vocab, token: vocab.add(token)) if grow else (lambda vocab, token: vocab.lookup(token))
        if not raw:
            return SerpSplit.empty(serp_length)
        session_ids, queries, docs, verticals, clicks = [], [], [], [], []
        for session_id, query_token, doc_tokens, vertical_tokens, click_values in raw:
            session_ids.append(session_id)
            queries.append(encode(query_vocab, query_token))
            docs.append([encode(doc_vocab, t) for t in doc_tokens])
            verticals.append([encode(vertical_vocab, t) for t in vertical_tokens])
            clicks.append(click_values)
        return SerpSplit(session_ids, np.array(queries), np.array(docs), np.array(verticals), np.array(clicks),
                         serp_length)

    @staticmethod
    def parse_log(path: Union[str, Path], serp_length: int = 10,
                  vocabs: Optional[Tuple[Vocab, Vocab, Vocab]] = None, max_grade: int = 4) -> Dataset:
        """
        Read a dataset directory (train.tsv, valid.tsv, test.tsv, optional annotations.tsv) or a
        single log file (read as the train split).

        Vocabularies are built from the train split only, unless `vocabs` (query, doc, vertical) is
        given, in which case every split is encoded against them. Tokens absent from the
        vocabularies map to the out-of-vocabulary id.

        Parameters:
        path (str | Path): Dataset directory or log file.
        serp_length (int): Number of ranks T.
        vocabs (tuple, optional): Fixed vocabularies to reuse.
        max_grade (int): Maximum relevance grade in annotations.tsv.

        Returns:
        Dataset: The encoded splits.
        """
        path = Path(path)
        if path.is_dir():
            files = {name: path / f"{name}.tsv" for name in SPLIT_NAMES}
            if not files["train"].exists() and vocabs is None:
                raise FileNotFoundError(f"{files['train']} not found")
        elif path.is_file():
            files = {"train": path, "valid": None, "test": None}
        else:
            raise FileNotFoundError(f"{path} not found")

        raw = {}
        for name, file in files.items():
            raw[name] = DataProcessor.read_raw(file, serp_length) if file is not None and file.exists() else []

        if vocabs is None:
            query_vocab, doc_vocab, vertical_vocab = Vocab("query"), Vocab("doc"), Vocab("vertical")
            train = DataProcessor.encode_split(raw["train"], query_vocab, doc_vocab, vertical_vocab, serp_length, grow=True)
            for vocab in (query_vocab, doc_vocab, vertical_vocab):
                vocab.freeze()
        else:
            query_vocab, doc_vocab, vertical_vocab = vocabs
            train = DataProcessor.encode_split(raw["train"], query_vocab, doc_vocab, vertical_vocab, serp_length)
        valid = DataProcessor.encode_split(raw["valid"], query_vocab, doc_vocab, vertical_vocab, serp_length)
        test = DataProcessor.encode_split(raw["test"], query_vocab, doc_vocab, vertical_vocab, serp_length)

        dataset = Dataset(train, valid, test, query_vocab, doc_vocab, vertical_vocab, serp_length=serp_length)
        if path.is_dir() and (path / "annotations.tsv").exists():
            dataset.annotations = DataProcessor.load_annotations(path / "annotations.tsv", dataset, max_grade)
        logging.info(f" > Loaded {path}: train {len(train)}, valid {len(valid)}, test {len(test)} records; "
                     f"vocab sizes {dataset.vocab_sizes}")
        return dataset

    @staticmethod
    def load_annotations(path: Union[str, Path], dataset: Dataset, max_grade: int = 4) -> RelevanceAnnotation:
        """
        Read `query_token<TAB>doc_token<TAB>grade` lines. Pairs with an out-of-vocabulary query or
        document cannot be scored and are skipped.
        """
        annotations = RelevanceAnnotation(max_grade=max_grade)
        skipped = 0
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ClickLogError(f"{path}:{lineno}: expected query<TAB>doc<TAB>grade")
                try:
                    grade = int(parts[2])
                except ValueError as err:
                    raise ClickLogError(f"{path}:{lineno}: grade must be an integer, got {parts[2]!r}") from err
                if not 0 <= grade <= max_grade:
                    raise ClickLogError(f"{path}:{lineno}: grade {grade} outside 0..{max_grade}")
                q, d = dataset.query_vocab.lookup(parts[0]), dataset.doc_vocab.lookup(parts[1])
                if Vocab.OOV_ID in (q, d):
                    skipped += 1
                    continue
                annotations.grades[(q, d)] = grade
        if skipped:
            logging.info(f" > Skipped {skipped} annotations with unknown query or document")
        return annotations

    @staticmethod
    def serialize_record(record: SerpRecord, vocabs: Tuple[Vocab, Vocab, Vocab]) -> str:
        query_vocab, doc_vocab, vertical_vocab = vocabs
        items = " ".join(f"{doc_vocab.token(int(d))}:{vertical_vocab.token(int(v))}:{int(c)}"
                         for d, v, c in zip(record.docs, record.verticals, record.clicks))
        return f"{record.session_id}\t{query_vocab.token(record.query)}\t{items}"

    @staticmethod
    def write_split(path: Union[str, Path], split: SerpSplit, vocabs: Tuple[Vocab, Vocab, Vocab]) -> None:
        """Write a split in the log line format; out-of-vocabulary ids are written as `<unk>`."""
        with open(path, "w", encoding="utf-8") as f:
            for record in split.records():
                f.write(DataProcessor.serialize_record(record, vocabs) + "\n")

    @staticmethod
    def write_dataset(directory: Union[str, Path], dataset: Dataset) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name in SPLIT_NAMES:
            DataProcessor.write_split(directory / f"{name}.tsv", dataset.split(name), dataset.vocabs)
        if dataset.annotations is not None and len(dataset.annotations):
            with open(directory / "annotations.tsv", "w", encoding="utf-8") as f:
                for (q, d), grade in sorted(dataset.annotations.grades.items()):
                    f.write(f"{dataset.query_vocab.token(q)}\t{dataset.doc_vocab.token(d)}\t{grade}\n")

    @staticmethod
    def permute_serp(r: SerpRecord, mode: str, rng: np.random.Generator) -> SerpRecord:
        """
        Permute a result list. `half` shuffles ranks 1..T//2 and T//2+1..T separately, `full`
        shuffles all ranks. Verticals move with their documents and clicks are reset to 0.

        Parameters:
        r (SerpRecord): The record.
        mode (str): none, half or full.
        rng (np.random.Generator): The shuffle stream.

        Returns:
        SerpRecord: The permuted record (the input itself is never modified).
        """
        if mode == "none":
            return SerpRecord(r.session_id, r.query, r.docs.copy(), r.verticals.copy(), r.clicks.copy())
        if mode == "half":
            half = r.length // 2
            order = np.concatenate([rng.permutation(half), half + rng.permutation(r.length - half)])
        elif mode == "full":
            order = rng.permutation(r.length)
        else:
            raise ValueError(f"unknown permutation mode {mode!r}; choose from {PERMUTATION_MODES}")
        return SerpRecord(r.session_id, r.query, r.docs[order], r.verticals[order], np.zeros(r.length, dtype=np.int64))

    @staticmethod
    def permute_split(split: SerpSplit, mode: str, rng: np.random.Generator) -> SerpSplit:
        if mode == "none":
            return split.with_clicks(split.clicks.copy())
        return SerpSplit.from_records([DataProcessor.permute_serp(r, mode, rng) for r in split.records()],
                                      split.serp_length)

    @staticmethod
    def split_stats(split: SerpSplit) -> Tuple[int, int, int, float, np.ndarray]:
        n = len(split)
        if n == 0:
            return 0, 0, 0, 0.0, np.zeros(split.serp_length)
        sessions = len(set(split.session_ids))
        return (sessions, n, int(np.unique(split.queries).size), n / sessions,
                split.clicks.mean(axis=0).astype(np.float64))

    @staticmethod
    def dataset_stats(d: Dataset) -> DatasetStats:
        """
        Session counts (distinct session ids), record counts, distinct queries, average session
        length (records per session) and click-through rate by rank, per split.
        """
        stats = DatasetStats({}, {}, {}, {}, {})
        for name in SPLIT_NAMES:
            sessions, records, queries, avg_len, ctr = DataProcessor.split_stats(d.split(name))
            stats.sessions[name] = sessions
            stats.records[name] = records
            stats.unique_queries[name] = queries
            stats.avg_session_length[name] = avg_len
            stats.ctr_by_rank[name] = ctr
            logging.info(f" > {name}: {sessions} sessions, {records} records, {queries} queries, "
                         f"avg session length {avg_len:.4f}")
        return stats
