# -*- coding: utf-8 -*-

"""
cli.py: Command-line driver for clicksim

Every subcommand writes `manifest.txt` into its output directory before any work starts, then its
results under the fixed names `report.tsv`, `model.ckpt` and `metrics.txt`. Exit codes: 0 success,
2 usage or configuration error, 3 data error, 4 audit failure.

    clicksim stats data/
    clicksim fit-pgm data/ --model ubm --out runs/ubm
    clicksim train-gail data/ --strategy strategy4 --gamma 0.1 --out runs/gail
    clicksim eval data/ --model runs/gail/model.ckpt --out runs/eval
    clicksim theory-audit --instances 1000 --horizon 3 --out runs/audit
"""

import logging
logging.basicConfig(level=logging.INFO)

import argparse
import json
import shutil
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from clicksim.config import Config, ConfigError, STRATEGIES, TrainConfig
from clicksim.data_processor import PERMUTATION_MODES, ClickLogError, DataProcessor, Dataset, Vocab
from clicksim.metrics import MetricReport, Metrics
from clicksim.model_builder import ModelBuilder
from clicksim.model_trainer import ModelTrainer
from clicksim.oracle import Oracle, OracleSpec, TheoryAudit
from clicksim.pgm import ClickModels
from clicksim.utils import Utils

__all__ = ["main", "build_parser", "RunManifest"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_AUDIT = 0, 2, 3, 4
VOCAB_SUFFIX = ".vocab.json"


@dataclass
class RunManifest:
    command: str
    config_path: str
    data_dir: str
    seed: int
    output_dir: str
    content_hash: str

    def write(self, path) -> None:
        Utils.write_key_values(path, {f.name: getattr(self, f.name) for f in fields(self)})

    @classmethod
    def build(cls, args: argparse.Namespace, cfg: TrainConfig, save_dir: Path) -> "RunManifest":
        inputs = [getattr(args, name, None) for name in ("config", "data", "model", "synthetic", "real")]
        options = sorted(f"{key}={value}" for key, value in vars(args).items() if key not in ("out", "handler"))
        digest = Utils.content_hash([p for p in inputs if p], options + cfg.to_lines())
        return cls(args.command, str(args.config or ""), str(getattr(args, "data", "") or ""), cfg.seed,
                   str(save_dir), digest)


# --------------------------------------------------------------- helpers
def resolve_config(args: argparse.Namespace, config: Config) -> TrainConfig:
    """defaults < config file < CLICKSIM_SEED < flags"""
    cfg = TrainConfig(serp_length=config.SERP_LENGTH)
    if args.config:
        cfg = TrainConfig.from_file(args.config, base=cfg)
    env_seed = Config.env_seed()
    if env_seed is not None:
        cfg = cfg.with_overrides(seed=env_seed)
    if getattr(args, "strategy", None):
        cfg = cfg.with_strategy(args.strategy)
    flags = {f.name: getattr(args, f.name, None) for f in fields(TrainConfig)}
    return cfg.with_overrides(**flags)


def save_vocabs(path: Path, vocabs) -> None:
    with open(f"{path}{VOCAB_SUFFIX}", "w", encoding="utf-8") as f:
        json.dump({vocab.name: vocab.tokens() for vocab in vocabs}, f, indent=2)


def load_model(path):
    """(model, vocabs or None) from a neural checkpoint or a PGM text file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path} not found")
    if Path(f"{path}.json").exists():
        generator, _, vocabs, _ = ModelBuilder.load_checkpoint(path)
        return generator, vocabs
    model = ClickModels.load(path)
    vocabs = None
    if Path(f"{path}{VOCAB_SUFFIX}").exists():
        with open(f"{path}{VOCAB_SUFFIX}", "r", encoding="utf-8") as f:
            tokens = json.load(f)
        vocabs = tuple(Vocab.from_tokens(name, tokens[name]) for name in ("query", "doc", "vertical"))
    return model, vocabs


def load_data(path, cfg: TrainConfig, config: Config, vocabs=None) -> Dataset:
    return DataProcessor.parse_log(path, cfg.serp_length, vocabs=vocabs, max_grade=config.MAX_GRADE)


def eval_split(data: Dataset):
    for name in ("test", "valid", "train"):
        if len(data.split(name)):
            return data.split(name)
    raise ValueError("dataset has no records to evaluate")


# ------------------------------------------------------------ subcommands
def cmd_stats(args, cfg, config, save_dir) -> int:
    data = load_data(args.data, cfg, config)
    stats = DataProcessor.dataset_stats(data)
    header = ["split", "sessions", "records", "unique_queries", "avg_session_length"]
    header += [f"ctr@{t + 1}" for t in range(cfg.serp_length)]
    Utils.write_tsv(save_dir / config.REPORT_NAME, header, stats.rows())
    return EXIT_OK


def cmd_fit_pgm(args, cfg, config, save_dir) -> int:
    data = load_data(args.data, cfg, config)
    model = ClickModels.fit(args.model, data, cfg)
    model.save(save_dir / config.CHECKPOINT_NAME)
    save_vocabs(save_dir / config.CHECKPOINT_NAME, data.vocabs)
    Utils.write_tsv(save_dir / config.REPORT_NAME, ["iteration", "ll"], list(enumerate(model.ll_history, start=1)))
    Metrics.evaluate(model, eval_split(data), data.annotations).write(save_dir / config.METRICS_NAME)
    return EXIT_OK


def _trainer(args, cfg, config) -> ModelTrainer:
    if args.init:
        generator, discriminator, vocabs, _ = ModelBuilder.load_checkpoint(args.init)
        trainer = ModelTrainer(cfg, load_data(args.data, cfg, config, vocabs), config)
        trainer.generator = generator
        trainer.discriminator = discriminator or trainer.model_builder.build_discriminator(trainer.init_rng)
        return trainer
    return ModelTrainer(cfg, load_data(args.data, cfg, config), config)


def cmd_pretrain(args, cfg, config, save_dir) -> int:
    _trainer(args, cfg, config).train_model(save_dir, pretrain=True, adversarial=False)
    return EXIT_OK


def cmd_train_gail(args, cfg, config, save_dir) -> int:
    pretrain = not args.init and not args.cold_start
    _trainer(args, cfg, config).train_model(save_dir, pretrain=pretrain, adversarial=True)
    return EXIT_OK


def cmd_eval(args, cfg, config, save_dir) -> int:
    model, vocabs = load_model(args.model)
    data = load_data(args.data, cfg, config, vocabs)
    split = data.split(args.split) if len(data.split(args.split)) else eval_split(data)
    report = Metrics.evaluate(model, split, data.annotations)
    report.write(save_dir / config.METRICS_NAME, save_dir / config.REPORT_NAME)
    return EXIT_OK


def cmd_generate(args, cfg, config, save_dir) -> int:
    model, vocabs = load_model(args.model)
    data = load_data(args.data, cfg, config, vocabs)
    rng = Utils.seed_everything(cfg.seed)
    synthetic = Metrics.generate_synthetic(model, data, args.repeats, rng, args.permute, args.split)
    DataProcessor.write_dataset(save_dir, synthetic)
    stats = DataProcessor.dataset_stats(synthetic)
    header = ["split", "sessions", "records", "unique_queries", "avg_session_length"]
    header += [f"ctr@{t + 1}" for t in range(cfg.serp_length)]
    Utils.write_tsv(save_dir / config.REPORT_NAME, header, stats.rows())
    return EXIT_OK


def cmd_coverage(args, cfg, config, save_dir) -> int:
    real = load_data(args.real, cfg, config)
    heldout = eval_split(real)
    if args.real_only:
        synthetic = heldout
    else:
        if not args.synthetic:
            raise ConfigError("coverage needs --synthetic unless --real-only is given")
        synthetic = load_data(args.synthetic, cfg, config, real.vocabs).train
    Utils.seed_everything(cfg.seed)
    reverse, forward = Metrics.reverse_forward_ppl(synthetic, heldout, args.surrogate, real.vocab_sizes, cfg)
    MetricReport(reverse_ppl=reverse, forward_ppl=forward).write(save_dir / config.METRICS_NAME)
    Utils.write_tsv(save_dir / config.REPORT_NAME, ["label", "surrogate", "reverse_ppl", "forward_ppl"],
                    [[args.label or ("real" if args.real_only else "synthetic"), args.surrogate, reverse, forward]])
    return EXIT_OK


def cmd_synth_oracle(args, cfg, config, save_dir) -> int:
    exam = [float(v) for v in args.exam.split(",")] if args.exam else None
    if exam is not None and len(exam) != cfg.serp_length:
        raise ConfigError(f"--exam has {len(exam)} values for a SERP length of {cfg.serp_length}")
    spec = OracleSpec.random(args.family, cfg.serp_length, args.queries, args.docs, cfg.seed, exam=exam,
                             n_verticals=args.verticals)
    rng = Utils.seed_everything(cfg.seed)
    data = Oracle.synth_generate(spec, args.sessions, rng)
    DataProcessor.write_dataset(save_dir, data)
    spec.to_model().save(save_dir / config.CHECKPOINT_NAME)
    save_vocabs(save_dir / config.CHECKPOINT_NAME, data.vocabs)
    ppl_at, ppl = Oracle.oracle_ppl(spec, data, "test" if len(data.test) else "train")
    MetricReport(ppl_overall=ppl, ppl_at=ppl_at).write(save_dir / config.METRICS_NAME)
    Utils.write_tsv(save_dir / config.REPORT_NAME, ["rank", "oracle_ppl"],
                    [[t + 1, value] for t, value in enumerate(ppl_at)])
    return EXIT_OK


def cmd_theory_audit(args, cfg, config, save_dir) -> int:
    rows = TheoryAudit.run(args.instances, args.horizon, cfg.seed)
    TheoryAudit.write(save_dir / config.REPORT_NAME, rows)
    held = sum(row[-1] for row in rows)
    summary = {"instances": args.instances, "horizon": args.horizon, "held": held,
               "max_bc_gap": max((row[2] for row in rows), default=0.0)}
    if args.scaling:
        scaling = TheoryAudit.bc_scaling_audit()
        TheoryAudit.write(save_dir / "scaling.tsv", scaling, TheoryAudit.SCALING_COLUMNS)
        summary["bc_gap_superlinear"] = int(TheoryAudit.grows_superlinearly([row[3] for row in scaling]))
        summary["mixture_gap_at_most_linear"] = int(TheoryAudit.grows_at_most_linearly([row[9] for row in scaling]))
    Utils.write_key_values(save_dir / config.METRICS_NAME, summary)
    if held != args.instances:
        logging.error(f" > {args.instances - held} of {args.instances} instances violate a bound")
        return EXIT_AUDIT
    return EXIT_OK


def cmd_export_embeddings(args, cfg, config, save_dir) -> int:
    generator, discriminator, vocabs, _ = ModelBuilder.load_checkpoint(args.model)
    if vocabs is None:
        raise ClickLogError(f"{args.model} carries no vocabularies")
    net = generator if args.which == "generator" else discriminator
    if net is None:
        raise ValueError(f"{args.model} holds no {args.which}")
    ModelBuilder.export_embeddings(save_dir, net, vocabs)
    if args.hidden:
        data = load_data(args.hidden, cfg, config, vocabs)
        ModelBuilder.export_hidden(save_dir / "hidden.tsv", generator, eval_split(data), vocabs)
    return EXIT_OK


# ---------------------------------------------------------------- parser
def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr-gen", dest="lr_gen", type=float)
    parser.add_argument("--lr-disc", dest="lr_disc", type=float)
    parser.add_argument("--lr-pretrain", dest="lr_pretrain", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--gamma", type=float, help="discount of the returns")
    parser.add_argument("--lambda-entropy", dest="lambda_entropy", type=float)
    parser.add_argument("--ppo-clip", dest="ppo_clip", type=float)
    parser.add_argument("--ppo-epochs", dest="ppo_epochs", type=int)
    parser.add_argument("--g-step", dest="g_step", type=int, help="generator updates per epoch")
    parser.add_argument("--d-step", dest="d_step", type=str, help="m x n: m sampled batches, n critic updates each")
    parser.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    parser.add_argument("--max-epochs", dest="max_epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--reward-sign", dest="reward_sign", choices=("gail", "literal"))
    parser.add_argument("--embedding-size", dest="embedding_size", type=int)
    parser.add_argument("--hidden-size", dest="hidden_size", type=int)
    parser.add_argument("--surrogate-epochs", dest="surrogate_epochs", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value TrainConfig file")
    common.add_argument("--seed", type=int)
    common.add_argument("--serp-length", dest="serp_length", type=int)
    common.add_argument("--out", help="output directory (default: an auto-named trial directory)")

    parser = argparse.ArgumentParser(prog="clicksim", description="Click model workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics")
    p.add_argument("data", nargs="?")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("fit-pgm", parents=[common], help="fit a PGM click model")
    p.add_argument("data", nargs="?")
    p.add_argument("--model", required=True, choices=sorted(ClickModels.KINDS))
    p.set_defaults(handler=cmd_fit_pgm)

    p = sub.add_parser("pretrain", parents=[common], help="MLE pretraining of generator and discriminator")
    p.add_argument("data", nargs="?")
    p.add_argument("--init", help="checkpoint to start from")
    _add_train_flags(p)
    p.set_defaults(handler=cmd_pretrain)

    p = sub.add_parser("train-gail", parents=[common], help="adversarial training")
    p.add_argument("data", nargs="?")
    p.add_argument("--init", help="pretrained checkpoint; skips pretraining")
    p.add_argument("--cold-start", dest="cold_start", action="store_true", help="no pretraining")
    p.add_argument("--strategy", choices=sorted(STRATEGIES))
    _add_train_flags(p)
    p.set_defaults(handler=cmd_train_gail)

    p = sub.add_parser("eval", parents=[common], help="LL / PPL / NDCG of a model")
    p.add_argument("data", nargs="?")
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("generate", parents=[common], help="sample a synthetic click log")
    p.add_argument("data", nargs="?")
    p.add_argument("--model", required=True)
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--permute", default="none", choices=PERMUTATION_MODES)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("coverage", parents=[common], help="reverse / forward PPL of a synthetic log")
    p.add_argument("--synthetic", help="dataset directory written by generate")
    p.add_argument("--real", required=True, help="real dataset directory (test split is held out)")
    p.add_argument("--surrogate", default="ubm", choices=("ubm", "neural"))
    p.add_argument("--real-only", dest="real_only", action="store_true")
    p.add_argument("--label", help="row label in report.tsv")
    _add_train_flags(p)
    p.set_defaults(handler=cmd_coverage)

    p = sub.add_parser("synth-oracle", parents=[common], help="oracle dataset and its PPL floor")
    p.add_argument("--family", default="pbm", choices=("pbm", "sdbn"))
    p.add_argument("--sessions", type=int, default=1000)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--docs", type=int, default=20)
    p.add_argument("--verticals", type=int, default=1)
    p.add_argument("--exam", help="comma-separated PBM examination per rank")
    p.set_defaults(handler=cmd_synth_oracle)

    p = sub.add_parser("theory-audit", parents=[common], help="imitation bound audit on tiny MDPs")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=3, choices=(1, 2, 3, 4))
    p.add_argument("--scaling", action="store_true", help="also run the compounding-error instance")
    p.set_defaults(handler=cmd_theory_audit)

    p = sub.add_parser("export-embeddings", parents=[common], help="embedding tables as TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--which", default="generator", choices=("generator", "discriminator"))
    p.add_argument("--hidden", help="dataset directory whose hidden states are exported")
    p.set_defaults(handler=cmd_export_embeddings)
    return parser


def _output_dir(args, config: Config) -> Path:
    if args.out:
        save_dir = Path(args.out)
        save_dir.mkdir(parents=True, exist_ok=True)
        return save_dir
    return Utils.prepare_output_dir(config.OUTPUT_DIR, args.command, config.MODEL_DIR_NAME,
                                    config.AUTO_MODEL_DIR_NAME)


def _remove_partial(save_dir: Optional[Path], existed: bool, before: set) -> None:
    if save_dir is None or not save_dir.exists():
        return
    if not existed:
        shutil.rmtree(save_dir, ignore_errors=True)
        return
    for path in sorted(save_dir.rglob("*"), reverse=True):
        if path in before:
            continue
        if path.is_dir():
            shutil.rmtree(path, ignore_errors=True)
        else:
            path.unlink()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)

    config = Config()
    if getattr(args, "data", "missing") is None:
        args.data = str(config.DATADIR)

    save_dir, existed, before = None, False, set()
    try:
        cfg = resolve_config(args, config)
        if args.out:
            existed = Path(args.out).exists()
            before = set(Path(args.out).rglob("*")) if existed else set()
        save_dir = _output_dir(args, config)
        RunManifest.build(args, cfg, save_dir).write(save_dir / config.MANIFEST_NAME)
        logging.info(f" > clicksim {args.command}: writing to {save_dir}")
        status = args.handler(args, cfg, config, save_dir)
    except ConfigError as err:
        logging.error(f" > configuration error: {err}")
        _remove_partial(save_dir, existed, before)
        return EXIT_USAGE
    except (ClickLogError, FileNotFoundError) as err:
        logging.error(f" > data error: {err}")
        _remove_partial(save_dir, existed, before)
        return EXIT_DATA
    except ValueError as err:
        logging.error(f" > {err}")
        _remove_partial(save_dir, existed, before)
        return EXIT_USAGE
    logging.info(f" > clicksim {args.command} finished with status {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
