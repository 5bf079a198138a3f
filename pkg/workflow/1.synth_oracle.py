# -*- coding: utf-8 -*-

"""
Draws an oracle click log, fits every PGM baseline on it and compares their test perplexity
with the oracle's own perplexity floor.

    python workflow/1.synth_oracle.py --family sdbn --sessions 5000
"""

import logging
logging.basicConfig(level=logging.INFO)

try:
    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.pgm import ClickModels
    from clicksim.utils import Utils
except ModuleNotFoundError:
    print("ModuleNotFoundError: Attempting to import from parent directory.")
    import os, sys
    sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

    from clicksim.cli import EXIT_OK, main
    from clicksim.config import Config
    from clicksim.pgm import ClickModels
    from clicksim.utils import Utils

import argparse
from pathlib import Path


config = Config()


def read_metrics(path):
    pairs = (line.split(" = ", 1) for line in Path(path).read_text(encoding="utf-8").splitlines())
    return {key: value for key, value in pairs}


def run(family, sessions, queries, docs, serp_length, seed, out_dir):
    common = ["--serp-length", str(serp_length), "--seed", str(seed)]
    oracle_dir = out_dir / "oracle"
    status = main(["synth-oracle", "--family", family, "--sessions", str(sessions), "--queries", str(queries),
                   "--docs", str(docs), "--out", str(oracle_dir)] + common)
    if status != EXIT_OK:
        raise SystemExit(status)

    rows = [["oracle", read_metrics(oracle_dir / config.METRICS_NAME)["ppl"]]]
    for kind in sorted(ClickModels.KINDS):
        fit_dir = out_dir / kind
        status = main(["fit-pgm", str(oracle_dir), "--model", kind, "--out", str(fit_dir)] + common)
        if status != EXIT_OK:
            logging.warning(f" > fit-pgm {kind} exited with {status}; skipping")
            continue
        rows.append([kind, read_metrics(fit_dir / config.METRICS_NAME)["ppl"]])
        logging.info(f" > {kind}: test ppl {rows[-1][1]} against the oracle's {rows[0][1]}")

    Utils.write_tsv(out_dir / "summary.tsv", ["model", "ppl"], rows)
    return rows


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Oracle recovery check for the PGM baselines")
    parser.add_argument("--family", default="pbm", choices=("pbm", "sdbn"))
    parser.add_argument("--sessions", type=int, default=5000)
    parser.add_argument("--queries", type=int, default=20)
    parser.add_argument("--docs", type=int, default=20)
    parser.add_argument("--serp-length", dest="serp_length", type=int, default=config.SERP_LENGTH)
    parser.add_argument("--seed", type=int, default=config.SEED)
    parser.add_argument("--out", default=str(config.OUTPUT_DIR / "synth_oracle"))
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    run(args.family, args.sessions, args.queries, args.docs, args.serp_length, args.seed, out_dir)
    print(f"summary written to {out_dir / 'summary.tsv'}")
