# -*- coding: utf-8 -*-

"""
Pretraining-length ablation: trains the adversarial model after 0, 1, 5, 10 and 20 epochs of MLE
pretraining and tabulates the test LL, PPL and NDCG of each run.

    python workflow/2.pretrain_ablation.py data/ --max-epochs 20
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

PRETRAIN_EPOCHS = [0, 1, 5, 10, 20]
COLUMNS = ["ll", "ppl", "ndcg@1", "ndcg@3", "ndcg@5", "ndcg@10"]


def read_metrics(path):
    pairs = (line.split(" = ", 1) for line in Path(path).read_text(encoding="utf-8").splitlines())
    return {key: value for key, value in pairs}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Pretraining-length ablation")
    parser.add_argument("data", nargs="?", default=str(config.DATADIR))
    parser.add_argument("--config", help="key = value TrainConfig file shared by every run")
    parser.add_argument("--max-epochs", dest="max_epochs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=config.SEED)
    parser.add_argument("--out", default=str(config.OUTPUT_DIR / "pretrain_ablation"))
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shared = ["--max-epochs", str(args.max_epochs), "--seed", str(args.seed)]
    if args.config:
        shared += ["--config", args.config]

    rows, curves = [], []
    for epochs in PRETRAIN_EPOCHS:
        run_dir = out_dir / f"pretrain_{epochs}"
        logging.info(f" > pretraining for {epochs} epochs before adversarial training")
        flags = ["--cold-start"] if epochs == 0 else ["--pretrain-epochs", str(epochs)]
        status = main(["train-gail", args.data, "--out", str(run_dir)] + flags + shared)
        if status != EXIT_OK:
            logging.warning(f" > run with {epochs} pretraining epochs exited with {status}")
            continue
        metrics = read_metrics(run_dir / config.METRICS_NAME)
        rows.append([epochs] + [metrics.get(column, "") for column in COLUMNS])
        for row in Utils.read_tsv(run_dir / config.REPORT_NAME):
            if row["phase"] in ("pretrain_gen", "pretrain_disc"):
                curves.append([epochs, row["phase"], row["epoch"], row["gen_loss"], row["disc_loss"], row["val_ppl"]])

    Utils.write_tsv(out_dir / "summary.tsv", ["pretrain_epochs"] + COLUMNS, rows)
    Utils.write_tsv(out_dir / "curves.tsv", ["pretrain_epochs", "phase", "epoch", "gen_loss", "disc_loss", "val_ppl"],
                    curves)
    print(f"summary written to {out_dir / 'summary.tsv'}")
