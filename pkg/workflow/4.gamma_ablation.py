# -*- coding: utf-8 -*-

"""
Discount ablation: adversarial training with gamma in {0, 0.1, 0.5, 0.9, 0.99}, every run starting
from the same pretrained checkpoint.

    python workflow/4.gamma_ablation.py data/ --pretrain-epochs 5
"""

import logging
logging.basicConfig(level=logging.INFO)

try:
    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.utils import Utils
except ModuleNotFoundError:
    print("ModuleNotFoundError: Attempting to import from parent directory.")
    import os, sys
    sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.utils import Utils

import argparse
from pathlib import Path


config = Config()

GAMMAS = [0.0, 0.1, 0.5, 0.9, 0.99]
COLUMNS = ["ll", "ppl", "ndcg@1", "ndcg@3", "ndcg@5", "ndcg@10"]


def read_metrics(path):
    pairs = (line.split(" = ", 1) for line in Path(path).read_text(encoding="utf-8").splitlines())
    return {key: value for key, value in pairs}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Discount factor ablation")
    parser.add_argument("data", nargs="?", default=str(config.DATADIR))
    parser.add_argument("--config", help="key = value TrainConfig file shared by every run")
    parser.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int, default=5)
    parser.add_argument("--gammas", nargs="+", type=float, default=GAMMAS)
    parser.add_argument("--seed", type=int, default=config.SEED)
    parser.add_argument("--out", default=str(config.OUTPUT_DIR / "gamma_ablation"))
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shared = ["--seed", str(args.seed)] + (["--config", args.config] if args.config else [])

    pretrained = out_dir / "pretrained"
    status = main(["pretrain", args.data, "--pretrain-epochs", str(args.pretrain_epochs),
                   "--out", str(pretrained)] + shared)
    if status != EXIT_OK:
        raise SystemExit(status)

    rows = []
    for gamma in args.gammas:
        logging.info(f" > adversarial training with gamma = {gamma}")
        run_dir = out_dir / f"gamma_{gamma}"
        status = main(["train-gail", args.data, "--init", str(pretrained / config.CHECKPOINT_NAME),
                       "--gamma", str(gamma), "--out", str(run_dir)] + shared)
        if status != EXIT_OK:
            logging.warning(f" > gamma = {gamma} exited with {status}")
            continue
        metrics = read_metrics(run_dir / config.METRICS_NAME)
        rows.append([gamma] + [metrics.get(column, "") for column in COLUMNS])

    Utils.write_tsv(out_dir / "summary.tsv", ["gamma"] + COLUMNS, rows)
    print(f"summary written to {out_dir / 'summary.tsv'}")
