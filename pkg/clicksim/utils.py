# -*- coding: utf-8 -*-

import logging
logging.basicConfig(level=logging.INFO)

import os
import datetime
import hashlib
import json
import random
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["Utils"]


class Utils:
    """
    Utils: Utility Functions for clicksim

    This class provides utility functions for seeding, plotting, hashing and writing run outputs.
    """
    @staticmethod
    def seed_everything(seed: int) -> np.random.Generator:
        """
        Seed the global random streams and return a fresh numpy Generator.

        Parameters:
        seed (int): The seed.

        Returns:
        np.random.Generator: A generator seeded with `seed`.
        """
        logging.info(f" > Using seed: {seed}")
        np.random.seed(seed)
        random.seed(seed)
        return np.random.default_rng(seed)

    @staticmethod
    def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
        """Independent child generators derived from one seed (one per record, worker or phase)."""
        children = np.random.SeedSequence(seed).spawn(count)
        return [np.random.default_rng(child) for child in children]

    @staticmethod
    def prepare_output_dir(output_dir: Union[str, Path], command: str, model_dir_name: str = "",
                           auto_name: bool = True) -> Path:
        """
        Prepare the output directory for saving models and results.

        With `auto_name` a directory `trial_<command>_<date>_v<N>` is created under `output_dir`,
        incrementing N until the name is free; otherwise `output_dir / model_dir_name` is used.
        """
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        if not auto_name:
            save_dir = output_dir / model_dir_name if model_dir_name else output_dir
            save_dir.mkdir(parents=True, exist_ok=True)
            logging.info(f" > Saving models and results at {save_dir}...")
            return save_dir

        today = datetime.date.today().strftime("%Y_%m_%d")
        iterator = 1
        while True:
            save_dir = output_dir / f"trial_{command.replace('-', '_')}_{today}_v{iterator}"
            try:
                os.mkdir(save_dir)
            except FileExistsError:
                logging.info(f" > {save_dir} exists, creating another version...")
                iterator += 1
                continue
            logging.info(f" > Saving models and results at {save_dir}...")
            return save_dir

    @staticmethod
    def content_hash(paths: Iterable[Union[str, Path]], extra: Sequence[str] = ()) -> str:
        """
        sha256 over the bytes of every existing file (directories are walked in sorted order) and
        the `extra` strings.
        """
        digest = hashlib.sha256()
        files = []
        for path in paths:
            if path is None:
                continue
            path = Path(path)
            if path.is_dir():
                files.extend(sorted(p for p in path.rglob("*") if p.is_file()))
            elif path.is_file():
                files.append(path)
        for path in files:
            digest.update(path.name.encode("utf-8"))
            digest.update(path.read_bytes())
        for item in extra:
            digest.update(str(item).encode("utf-8"))
        return digest.hexdigest()

    @staticmethod
    def write_tsv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> None:
        """Write a TSV file with a header row; floats are rendered with repr-level precision."""
        with open(path, "w", encoding="utf-8") as f:
            f.write("\t".join(header) + "\n")
            for row in rows:
                f.write("\t".join(Utils.format_value(value) for value in row) + "\n")

    @staticmethod
    def read_tsv(path: Union[str, Path]) -> List[Dict[str, str]]:
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().rstrip("\n").split("\t")
            return [dict(zip(header, line.rstrip("\n").split("\t"))) for line in f if line.strip()]

    @staticmethod
    def write_key_values(path: Union[str, Path], values: Dict) -> None:
        """Write `key = value` lines in insertion order."""
        with open(path, "w", encoding="utf-8") as f:
            for key, value in values.items():
                f.write(f"{key} = {Utils.format_value(value)}\n")

    @staticmethod
    def format_value(value) -> str:
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        if isinstance(value, (np.integer,)):
            return str(int(value))
        if isinstance(value, (list, tuple, np.ndarray)):
            return ",".join(Utils.format_value(v) for v in value)
        return str(value)

    @staticmethod
    def save_history_object(history: Dict[str, list], model_save_dir: Union[str, Path]) -> None:
        """
        Save the history object as JSON.
        """
        with open(f"{model_save_dir}/history.json", "w", encoding="utf-8") as f:
            json.dump(history, f, indent=2)

    @staticmethod
    def plot_metrics(metrics, history, epoch, model_save_dir):
        """
        Plot the training and validation metrics over epochs.

        Args:
            metrics: List of metrics to plot.
            history: Training history; `metric` is drawn solid and `val_<metric>` dotted when present.
            epoch: Number of epochs.
            model_save_dir: Directory to save the plot.

        Returns:
            None.
        """
        if not metrics or epoch == 0:
            logging.info(" > Nothing to plot.")
            return
        fig, ax = plt.subplots(nrows=len(metrics), sharex=True, figsize=(10, len(metrics) * 3), squeeze=False)
        colors = ["#1f77b4", "#ff7f0e", "red", "green", "purple", "orange", "brown", "pink", "gray", "olive", "cyan"]
        for i, metric in enumerate(metrics):
            axis = ax[i][0]
            try:
                if metric in history:
                    axis.plot(range(1, len(history[metric]) + 1), history[metric],
                              color=colors[i % len(colors)], label=f"Training {metric.upper()}")
                if f"val_{metric}" in history:
                    axis.plot(range(1, len(history[f"val_{metric}"]) + 1), history[f"val_{metric}"], linestyle=":",
                              marker="o", markersize=3, color=colors[i % len(colors)], label=f"Validation {metric.upper()}")
                axis.set_ylabel(metric.upper())
                axis.legend()
            except Exception as e:
                logging.info(f"Exception: {e}")
                logging.info(f"Skipping {metric}.")
                continue

        step = max(1, epoch // 10)
        ax[-1][0].set_xticks(range(1, epoch + 1, step))
        ax[-1][0].set_xlabel("Epoch")
        fig.savefig(f"{model_save_dir}/training.png", dpi=100)
        plt.close(fig)
