# -*- coding: utf-8 -*-

"""
Coverage table: samples synthetic click logs from each given model on the original, half-permuted
and fully permuted test lists, then scores each log by reverse and forward perplexity. A row for
the real data (surrogate self-fit) is added on top.

    python workflow/5.permutation_coverage.py data/ --models runs/gail/model.ckpt runs/ubm/model.ckpt
"""

import logging
logging.basicConfig(level=logging.INFO)

try:
    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.data_processor import PERMUTATION_MODES
    from clicksim.utils import Utils
except ModuleNotFoundError:
    print("ModuleNotFoundError: Attempting to import from parent directory.")
    import os, sys
    sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.data_processor import PERMUTATION_MODES
    from clicksim.utils import Utils

import argparse
from pathlib import Path


config = Config()

REPEATS = 7


def coverage_row(out_dir, label, flags):
    status = main(["coverage", "--label", label, "--out", str(out_dir)] + flags)
    if status != EXIT_OK:
        logging.warning(f" > coverage of {label} exited with {status}")
        return None
    return Utils.read_tsv(out_dir / config.REPORT_NAME)[0]


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Reverse / forward PPL under list permutations")
    parser.add_argument("data", nargs="?", default=str(config.DATADIR))
    parser.add_argument("--models", nargs="+", required=True, help="model.ckpt files (neural or PGM)")
    parser.add_argument("--surrogate", default="ubm", choices=("ubm", "neural"))
    parser.add_argument("--repeats", type=int, default=REPEATS)
    parser.add_argument("--seed", type=int, default=config.SEED)
    parser.add_argument("--out", default=str(config.OUTPUT_DIR / "permutation_coverage"))
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shared = ["--seed", str(args.seed)]
    scoring = ["--real", args.data, "--surrogate", args.surrogate] + shared

    rows = []
    real = coverage_row(out_dir / "real", "real", ["--real-only"] + scoring)
    if real is not None:
        rows.append(["real", "", "none", real["reverse_ppl"], real["forward_ppl"]])

    for model in args.models:
        name = Path(model).parent.name or Path(model).stem
        for mode in PERMUTATION_MODES:
            label = f"{name}_{mode}"
            synthetic = out_dir / label
            status = main(["generate", args.data, "--model", model, "--repeats", str(args.repeats),
                           "--permute", mode, "--out", str(synthetic)] + shared)
            if status != EXIT_OK:
                logging.warning(f" > generating {label} exited with {status}")
                continue
            row = coverage_row(out_dir / f"{label}_coverage", label, ["--synthetic", str(synthetic)] + scoring)
            if row is not None:
                rows.append([label, model, mode, row["reverse_ppl"], row["forward_ppl"]])

    Utils.write_tsv(out_dir / "summary.tsv", ["label", "model", "permutation", "reverse_ppl", "forward_ppl"], rows)
    print(f"summary written to {out_dir / 'summary.tsv'}")
