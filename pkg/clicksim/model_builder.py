# -*- coding: utf-8 -*-

"""
model_builder.py: Model Builder Class for Creating, Saving and Loading the Neural Click Models

This module provides a `ModelBuilder` class that is responsible for creating the generator policy and
the discriminator with seeded parameters, for writing and reading checkpoints and for exporting
embeddings and hidden states for external projection.
"""

import logging
logging.basicConfig(level=logging.INFO)

import json
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from clicksim.critic import ClickDiscriminator
from clicksim.data_processor import SerpSplit, Vocab
from clicksim.numkernel import ParamStore, uniform_init
from clicksim.policy import ClickPolicy, RecurrentClickNet

__all__ = ["ModelBuilder"]

CHECKPOINT_FORMAT = 1


class ModelBuilder:
    """
    ModelBuilder Class for Creating the Neural Click Models

    Attributes:
        vocab_sizes (tuple): (N_q, N_d, N_v, N_c).
        embedding_size (int): Size of every embedding table row.
        hidden_size (int): GRU hidden size.
        serp_length (int): Number of ranks T.
        init_scale (float): Parameters are drawn uniformly from [-init_scale, init_scale].

    Methods:
        build_model(model_type, rng, zero): Builds a "generator" or a "discriminator".
        save_checkpoint / load_checkpoint: npz archive plus a JSON manifest.
        export_embeddings / export_hidden: TSV vectors for external projection.
    """
    MODELS = {"generator": ClickPolicy, "discriminator": ClickDiscriminator}

    def __init__(self, vocab_sizes: Tuple[int, int, int, int], embedding_size: int = 64, hidden_size: int = 64,
                 serp_length: int = 10, init_scale: float = 0.1):
        self.vocab_sizes = tuple(int(n) for n in vocab_sizes)
        self.embedding_size = embedding_size
        self.hidden_size = hidden_size
        self.serp_length = serp_length
        self.init_scale = init_scale

    @classmethod
    def from_config(cls, vocab_sizes, cfg) -> "ModelBuilder":
        return cls(vocab_sizes, cfg.embedding_size, cfg.hidden_size, cfg.serp_length)

    def build_model(self, model_type: str, rng: Optional[np.random.Generator] = None,
                    zero: bool = False) -> RecurrentClickNet:
        """
        Builds a network with fresh parameters.

        Args:
            model_type (str): "generator" or "discriminator".
            rng (np.random.Generator): Initialization stream; required unless `zero`.
            zero (bool): All-zero weights (the closed-form reference model).

        Returns:
            RecurrentClickNet: The network.

        Raises:
            ValueError: If an invalid model type is provided.
        """
        if model_type not in self.MODELS:
            raise ValueError(f"Invalid model type: {model_type}; choose from {', '.join(self.MODELS)}")
        cls = self.MODELS[model_type]
        if not zero and rng is None:
            raise ValueError("rng is required for random initialization")
        store = ParamStore()
        for name, (shape, pinned) in cls.param_shapes(self.vocab_sizes, self.embedding_size, self.hidden_size).items():
            value = np.zeros(shape) if zero else uniform_init(shape, rng, self.init_scale)
            store.add(name, value, pinned_rows=pinned)
        logging.info(f" > Built {model_type} with {store.num_parameters()} parameters")
        return cls(store, self.vocab_sizes, self.embedding_size, self.hidden_size, self.serp_length)

    def build_generator(self, rng=None, zero: bool = False) -> ClickPolicy:
        return self.build_model("generator", rng, zero)

    def build_discriminator(self, rng=None, zero: bool = False) -> ClickDiscriminator:
        return self.build_model("discriminator", rng, zero)

    # ---------------------------------------------------------- checkpoints
    def manifest(self, vocabs: Optional[Tuple[Vocab, Vocab, Vocab]] = None,
                 nets: Dict[str, RecurrentClickNet] = None) -> Dict:
        manifest = {
            "format": CHECKPOINT_FORMAT,
            "vocab_sizes": list(self.vocab_sizes),
            "embedding_size": self.embedding_size,
            "hidden_size": self.hidden_size,
            "serp_length": self.serp_length,
            "models": {},
        }
        for prefix, net in (nets or {}).items():
            manifest["models"][prefix] = {name: list(net.store.value(name).shape) for name in net.store.names()}
        if vocabs is not None:
            manifest["vocabs"] = {vocab.name: vocab.tokens() for vocab in vocabs}
        return manifest

    def save_checkpoint(self, path: Union[str, Path], generator: ClickPolicy,
                        discriminator: Optional[ClickDiscriminator] = None,
                        vocabs: Optional[Tuple[Vocab, Vocab, Vocab]] = None) -> None:
        """
        Write named tensors to `path` (npz archive) and the manifest of kind, sizes and shapes to
        `<path>.json`.
        """
        nets = {"generator": generator}
        if discriminator is not None:
            nets["discriminator"] = discriminator
        arrays = {f"{prefix}/{name}": net.store.value(name) for prefix, net in nets.items()
                  for name in net.store.names()}
        with open(path, "wb") as f:
            np.savez(f, **arrays)
        with open(f"{path}.json", "w", encoding="utf-8") as f:
            json.dump(self.manifest(vocabs, nets), f, indent=2)
        logging.info(f" > Saved checkpoint {path}")

    @staticmethod
    def load_checkpoint(path: Union[str, Path]):
        """
        Read a checkpoint written by `save_checkpoint`.

        Returns:
            tuple: (generator, discriminator or None, vocabs or None, builder)
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"{path} not found")
        with open(f"{path}.json", "r", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {manifest.get('format')}")
        builder = ModelBuilder(tuple(manifest["vocab_sizes"]), manifest["embedding_size"],
                               manifest["hidden_size"], manifest["serp_length"])
        nets = {}
        with np.load(path) as archive:
            for prefix in manifest["models"]:
                net = builder.build_model(prefix, zero=True)
                net.store.load_state_dict({name: archive[f"{prefix}/{name}"] for name in net.store.names()})
                nets[prefix] = net
        vocabs = None
        if "vocabs" in manifest:
            tokens = manifest["vocabs"]
            vocabs = tuple(Vocab.from_tokens(name, tokens[name]) for name in ("query", "doc", "vertical"))
        return nets["generator"], nets.get("discriminator"), vocabs, builder

    # -------------------------------------------------------------- export
    @staticmethod
    def export_embeddings(out_dir: Union[str, Path], net: RecurrentClickNet,
                          vocabs: Tuple[Vocab, Vocab, Vocab]) -> Dict[str, Path]:
        """
        Write one TSV per embedding table, `token<TAB>v1...vL` per row (reserved rows included).
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tables = {"query": ("emb_q", vocabs[0]), "doc": ("emb_d", vocabs[1]),
                  "vertical": ("emb_v", vocabs[2]), "click": ("emb_c", Vocab.clicks())}
        written = {}
        for label, (name, vocab) in tables.items():
            path = out_dir / f"{label}_embeddings.tsv"
            matrix = net.store.value(name)
            with open(path, "w", encoding="utf-8") as f:
                for idx, row in enumerate(matrix):
                    f.write(vocab.token(idx) + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
            written[label] = path
        logging.info(f" > Exported embeddings to {out_dir}")
        return written

    @staticmethod
    def export_hidden(path: Union[str, Path], policy: ClickPolicy, split: SerpSplit,
                      vocabs: Tuple[Vocab, Vocab, Vocab]) -> None:
        """
        Write teacher-forced hidden states h_1..h_T, one row per (record, rank), with the token
        `session_id:rank:query:doc:click`.
        """
        hidden = policy.hidden_states(split)
        with open(path, "w", encoding="utf-8") as f:
            for i in range(len(split)):
                query = vocabs[0].token(int(split.queries[i]))
                for t in range(split.serp_length):
                    token = f"{split.session_ids[i]}:{t + 1}:{query}:{vocabs[1].token(int(split.docs[i, t]))}:{int(split.clicks[i, t])}"
                    f.write(token + "\t" + "\t".join(repr(float(v)) for v in hidden[i, t]) + "\n")
        logging.info(f" > Exported hidden states to {path}")
