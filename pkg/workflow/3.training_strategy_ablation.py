# -*- coding: utf-8 -*-

"""
Training-schedule ablation: runs adversarial training under each g_step / d_step preset and
tabulates the test metrics together with the validation curve of every run.

    python workflow/3.training_strategy_ablation.py data/
"""

import logging
logging.basicConfig(level=logging.INFO)

try:
    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config, STRATEGIES
    from clicksim.utils import Utils
except ModuleNotFoundError:
    print("ModuleNotFoundError: Attempting to import from parent directory.")
    import os, sys
    sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config, STRATEGIES
    from clicksim.utils import Utils

import argparse
from pathlib import Path


config = Config()

COLUMNS = ["ll", "ppl", "ndcg@1", "ndcg@3", "ndcg@5", "ndcg@10"]


def read_metrics(path):
    pairs = (line.split(" = ", 1) for line in Path(path).read_text(encoding="utf-8").splitlines())
    return {key: value for key, value in pairs}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="g_step / d_step schedule ablation")
    parser.add_argument("data", nargs="?", default=str(config.DATADIR))
    parser.add_argument("--config", help="key = value TrainConfig file shared by every run")
    parser.add_argument("--strategies", nargs="+", default=sorted(STRATEGIES), choices=sorted(STRATEGIES))
    parser.add_argument("--seed", type=int, default=config.SEED)
    parser.add_argument("--out", default=str(config.OUTPUT_DIR / "strategy_ablation"))
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shared = ["--seed", str(args.seed)] + (["--config", args.config] if args.config else [])

    rows, curves = [], []
    for name in args.strategies:
        g_step, (m, n) = STRATEGIES[name]
        logging.info(f" > {name}: g_step = {g_step}, d_step = {m}x{n}")
        run_dir = out_dir / name
        status = main(["train-gail", args.data, "--strategy", name, "--out", str(run_dir)] + shared)
        if status != EXIT_OK:
            logging.warning(f" > {name} exited with {status}")
            continue
        metrics = read_metrics(run_dir / config.METRICS_NAME)
        rows.append([name, g_step, f"{m}x{n}"] + [metrics.get(column, "") for column in COLUMNS])
        for row in Utils.read_tsv(run_dir / config.REPORT_NAME):
            if row["phase"] == "gail":
                curves.append([name, row["epoch"], row["val_ll"], row["val_ppl"]])

    Utils.write_tsv(out_dir / "summary.tsv", ["strategy", "g_step", "d_step"] + COLUMNS, rows)
    Utils.write_tsv(out_dir / "curves.tsv", ["strategy", "epoch", "val_ll", "val_ppl"], curves)
    print(f"summary written to {out_dir / 'summary.tsv'}")
