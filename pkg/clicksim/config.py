# -*- coding: utf-8 -*-

"""
clicksim Configuration Module
This module provides the configuration settings for the clicksim project: environment-driven paths
and run defaults (Config) and the hyperparameter record of the training loop (TrainConfig).
"""

from pathlib import Path
import os
import logging
logging.basicConfig(level=logging.INFO)

from dataclasses import dataclass, fields, replace, asdict
from typing import Tuple, Union

from dotenv import load_dotenv
load_dotenv(".env")

__all__ = ["Config", "TrainConfig", "ConfigError", "STRATEGIES"]


class ConfigError(ValueError):
    """Raised when a config file, override or invariant check fails."""


class Config:
    """
    clicksim Configuration Class

    This class contains the environment-driven settings for clicksim runs. Every value can be set
    in a `.env` file (see `.env.example`) or in the process environment.

    Attributes:
        BASEDIR (Path): The base directory for data I/O.
        DATADIR (Path): The dataset directory holding train.tsv / valid.tsv / test.tsv.
        OUTPUT_DIR (Path): The directory under which run directories are created.
        MODEL_DIR_NAME (str): Fixed run directory name; empty means auto-named.
        AUTO_MODEL_DIR_NAME (bool): Create `trial_<command>_<date>_v<N>` directories.
        SEED (int): The global seed.
        SERP_LENGTH (int): Number of ranks T per SERP.
        MAX_GRADE (int): Maximum relevance grade accepted in annotations.
        MANIFEST_NAME, REPORT_NAME, CHECKPOINT_NAME, METRICS_NAME (str): Fixed output file names.
    """
    BASEDIR = Path(os.getenv("CLICKSIM_BASEDIR", "."))
    DATADIR = BASEDIR / os.getenv("CLICKSIM_DATA_DIR", "data")
    OUTPUT_DIR = BASEDIR / os.getenv("CLICKSIM_OUTPUT_DIR", "output")

    MODEL_DIR_NAME = os.getenv("CLICKSIM_MODEL_DIR_NAME", "")
    AUTO_MODEL_DIR_NAME = os.getenv("CLICKSIM_AUTO_MODEL_DIR_NAME", "True") == "True"

    SEED = int(os.getenv("CLICKSIM_SEED", "42"))

    SERP_LENGTH = int(os.getenv("CLICKSIM_SERP_LENGTH", "10"))
    MAX_GRADE = int(os.getenv("CLICKSIM_MAX_GRADE", "4"))

    MANIFEST_NAME = "manifest.txt"
    REPORT_NAME = "report.tsv"
    CHECKPOINT_NAME = "model.ckpt"
    METRICS_NAME = "metrics.txt"

    def __init__(self) -> None:
        # re-read so values exported after import (tests, wrappers) are honoured
        self.BASEDIR = Path(os.getenv("CLICKSIM_BASEDIR", str(Config.BASEDIR)))
        self.DATADIR = self.BASEDIR / os.getenv("CLICKSIM_DATA_DIR", "data")
        self.OUTPUT_DIR = self.BASEDIR / os.getenv("CLICKSIM_OUTPUT_DIR", "output")

        self.MODEL_DIR_NAME = os.getenv("CLICKSIM_MODEL_DIR_NAME", Config.MODEL_DIR_NAME)
        self.AUTO_MODEL_DIR_NAME = os.getenv("CLICKSIM_AUTO_MODEL_DIR_NAME", str(Config.AUTO_MODEL_DIR_NAME)) == "True"

        self.SEED = int(os.getenv("CLICKSIM_SEED", str(Config.SEED)))

        self.SERP_LENGTH = int(os.getenv("CLICKSIM_SERP_LENGTH", str(Config.SERP_LENGTH)))
        self.MAX_GRADE = int(os.getenv("CLICKSIM_MAX_GRADE", str(Config.MAX_GRADE)))

        self.MANIFEST_NAME = Config.MANIFEST_NAME
        self.REPORT_NAME = Config.REPORT_NAME
        self.CHECKPOINT_NAME = Config.CHECKPOINT_NAME
        self.METRICS_NAME = Config.METRICS_NAME

    @staticmethod
    def env_seed() -> Union[int, None]:
        """Return CLICKSIM_SEED from the live environment, or None when unset."""
        value = os.environ.get("CLICKSIM_SEED")
        if value is None or value.strip() == "":
            return None
        try:
            return int(value)
        except ValueError as err:
            raise ConfigError(f"CLICKSIM_SEED must be an integer, got {value!r}") from err


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of pretraining, the adversarial loop and the evaluation surrogates.

    The defaults reproduce the published setup where it is stated (batch 128, Adam, learning rates
    5e-4 / 1e-3 / 1e-3, decay 0.5, L2 1e-5, dropout 0.5, sizes 64, gamma 0.1).
    """
    batch_size: int = 128
    lr_gen: float = 5e-4
    lr_disc: float = 1e-3
    lr_decay: float = 0.5
    lr_pretrain: float = 1e-3
    l2: float = 1e-5
    dropout: float = 0.5
    gamma: float = 0.1
    lambda_entropy: float = 1e-2
    ppo_clip: float = 0.2
    ppo_epochs: int = 4
    g_step: int = 1
    d_step: Tuple[int, int] = (1, 1)
    pretrain_epochs: int = 5
    max_epochs: int = 20
    seed: int = 42
    patience: int = 2
    max_lr_decays: int = 3
    serp_length: int = 10
    embedding_size: int = 64
    hidden_size: int = 64
    reward_sign: str = "gail"
    surrogate_epochs: int = 3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    pgm_max_iterations: int = 50
    pgm_tolerance: float = 1e-4

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Check the invariants of every field; raise ConfigError on the first violation."""
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.ppo_clip < 1.0:
            raise ConfigError(f"ppo_clip must lie in (0, 1), got {self.ppo_clip}")
        for name in ("lr_gen", "lr_disc", "lr_pretrain"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lambda_entropy < 0 or self.l2 < 0:
            raise ConfigError("lambda_entropy and l2 must be >= 0")
        if self.reward_sign not in ("gail", "literal"):
            raise ConfigError(f"reward_sign must be 'gail' or 'literal', got {self.reward_sign!r}")
        if len(self.d_step) != 2 or min(self.d_step) < 0:
            raise ConfigError(f"d_step must be two non-negative integers, got {self.d_step}")
        for name in ("g_step", "pretrain_epochs", "max_epochs", "patience", "max_lr_decays",
                     "ppo_epochs", "surrogate_epochs", "pgm_max_iterations"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("batch_size", "serp_length", "embedding_size", "hidden_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @classmethod
    def from_file(cls, path: Union[str, Path], base: "TrainConfig" = None) -> "TrainConfig":
        """
        Load a `key = value` config file on top of `base` (or the defaults).

        Parameters:
        path (str | Path): The config file.
        base (TrainConfig, optional): Values the file overrides.

        Returns:
        TrainConfig: The merged config.
        """
        overrides = {}
        known = {f.name for f in fields(cls)}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in known:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                overrides[key] = value
        return (base or cls()).with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "TrainConfig":
        """Return a copy with the given fields replaced; string values are parsed by field type."""
        types = {f.name: f.type for f in fields(self)}
        parsed = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = TrainConfig._parse_value(key, value, getattr(self, key))
        return replace(self, **parsed)

    @staticmethod
    def _parse_value(key: str, value, current):
        if not isinstance(value, str):
            return tuple(value) if isinstance(current, tuple) else type(current)(value)
        try:
            if isinstance(current, tuple):
                return TrainConfig.parse_d_step(value)
            if isinstance(current, bool):
                return value.lower() in ("1", "true", "yes")
            return type(current)(value)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"cannot parse {key} = {value!r}: {err}") from err

    @staticmethod
    def parse_d_step(value: str) -> Tuple[int, int]:
        """Parse `m x n` (also `m,n` or `m*n`) into a (m, n) pair."""
        for sep in ("x", "X", "*", ","):
            if sep in value:
                m, n = value.split(sep, 1)
                return int(m.strip()), int(n.strip())
        raise ValueError(f"expected 'm x n', got {value!r}")

    def with_strategy(self, name: str) -> "TrainConfig":
        """Apply one of the named g_step/d_step schedules."""
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
        g_step, d_step = STRATEGIES[name]
        return replace(self, g_step=g_step, d_step=d_step)

    def to_lines(self) -> list:
        """Render as `key = value` lines that `from_file` reads back."""
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, (tuple, list)):
                value = f"{value[0]}x{value[1]}"
            lines.append(f"{key} = {value}")
        return lines


# g_step, (m, n)
STRATEGIES = {
    "strategy1": (1, (1, 1)),
    "strategy2": (50, (1, 1)),
    "strategy3": (1, (1, 50)),
    "strategy4": (1, (5, 10)),
}
