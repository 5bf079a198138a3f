# -*- coding: utf-8 -*-

import logging
logging.basicConfig(level=logging.INFO)

import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from clicksim.config import Config, TrainConfig
from clicksim.critic import ClickDiscriminator
from clicksim.data_processor import Dataset, SerpSplit
from clicksim.metrics import Metrics
from clicksim.model_builder import ModelBuilder
from clicksim.numkernel import AdamState, adam_step
from clicksim.policy import ClickPolicy, Trajectory, TrajectoryBatch
from clicksim.utils import Utils

__all__ = ["ModelTrainer", "TrainReport", "EpochRecord"]

REWARD_CLAMP = 1e-6


@dataclass
class EpochRecord:
    phase: str
    epoch: int
    gen_loss: float = float("nan")
    disc_loss: float = float("nan")
    val_ll: float = float("nan")
    val_ppl: float = float("nan")
    lr_gen: float = float("nan")
    lr_disc: float = float("nan")
    wall_clock: float = 0.0


@dataclass
class TrainReport:
    """
    Per-epoch losses, validation LL / PPL, discriminator loss and learning rates of one or more phases.
    """
    rows: List[EpochRecord] = field(default_factory=list)
    best_val_ppl: float = float("inf")
    best_epoch: int = 0
    best_phase: str = ""

    COLUMNS = ("phase", "epoch", "gen_loss", "disc_loss", "val_ll", "val_ppl", "lr_gen", "lr_disc")

    def add(self, row: EpochRecord) -> None:
        previous = [r.epoch for r in self.rows if r.phase == row.phase]
        if previous and row.epoch <= previous[-1]:
            raise ValueError(f"epoch {row.epoch} of phase {row.phase} is not after {previous[-1]}")
        self.rows.append(row)

    def extend(self, other: "TrainReport") -> "TrainReport":
        for row in other.rows:
            self.add(row)
        if other.best_val_ppl < self.best_val_ppl:
            self.best_val_ppl, self.best_epoch, self.best_phase = other.best_val_ppl, other.best_epoch, other.best_phase
        return self

    def phase(self, name: str) -> List[EpochRecord]:
        return [row for row in self.rows if row.phase == name]

    def history(self) -> Dict[str, List[float]]:
        """Curves for `Utils.plot_metrics`: training losses and validation PPL / LL."""
        return {
            "gen_loss": [r.gen_loss for r in self.rows],
            "disc_loss": [r.disc_loss for r in self.rows],
            "val_ppl": [r.val_ppl for r in self.rows],
            "val_ll": [r.val_ll for r in self.rows],
        }

    def write_tsv(self, path: Union[str, Path]) -> None:
        """Wall-clock times are left out so equal seeds give byte-identical files."""
        Utils.write_tsv(path, self.COLUMNS, [[getattr(r, c) for c in self.COLUMNS] for r in self.rows])

    def to_dict(self) -> Dict:
        rows = [{k: v for k, v in asdict(r).items() if k != "wall_clock"} for r in self.rows]
        return {"rows": rows, "best_val_ppl": self.best_val_ppl,
                "best_epoch": self.best_epoch, "best_phase": self.best_phase}


class ModelTrainer:
    """
    A class for training the neural click models.

    Attributes:
        cfg: The hyperparameters (TrainConfig).
        dataset: The encoded click log.
        config: Environment-driven run settings (Config).
        model_builder: Builds seeded generator / discriminator networks.
    """
    def __init__(self, cfg: TrainConfig, dataset: Dataset, config: Optional[Config] = None):
        self.cfg = cfg
        self.dataset = dataset
        self.config = config or Config()
        self.model_builder = ModelBuilder.from_config(dataset.vocab_sizes, cfg)
        Utils.seed_everything(cfg.seed)
        self.init_rng, self.pretrain_rng, self.gail_rng = Utils.spawn_rngs(cfg.seed, 3)
        self.generator: Optional[ClickPolicy] = None
        self.discriminator: Optional[ClickDiscriminator] = None
        self.report = TrainReport()

    def build_models(self, zero: bool = False) -> Tuple[ClickPolicy, ClickDiscriminator]:
        self.generator = self.model_builder.build_generator(self.init_rng, zero=zero)
        self.discriminator = self.model_builder.build_discriminator(self.init_rng, zero=zero)
        return self.generator, self.discriminator

    def train_model(self, save_dir: Union[str, Path], pretrain: bool = True, adversarial: bool = True) -> TrainReport:
        """
        Train the models using the configured settings.

        This method performs the following steps:
        1. Builds (or reuses) the generator and discriminator.
        2. Pretrains both with maximum likelihood.
        3. Runs the adversarial loop.
        4. Evaluates the selected generator on the test split.
        5. Saves parameters, report, history, plots and the checkpoint.
        """
        save_dir = Path(save_dir)
        if self.generator is None:
            logging.info("****************************************************************************")
            logging.info("************************ building models... ********************************")
            self.build_models()
        if pretrain:
            logging.info("****************************************************************************")
            logging.info("****************************** pretraining... ******************************")
            self.report.extend(ModelTrainer.pretrain_mle(self.generator, self.discriminator, self.dataset, self.cfg,
                                                         self.pretrain_rng))
        if adversarial:
            logging.info("****************************************************************************")
            logging.info("************************ adversarial training... ***************************")
            self.report.extend(ModelTrainer.gail_loop(self.generator, self.discriminator, self.dataset, self.cfg,
                                                      self.gail_rng))
        logging.info("****************************************************************************")
        logging.info("****************************** evaluating model... *************************")
        self.evaluate_and_save(save_dir)
        logging.info("****************************************************************************")
        logging.info("****************************** saving parameters... ************************")
        ModelTrainer.save_parameters(self.cfg, save_dir)
        logging.info("****************************************************************************")
        logging.info("****************************** saving report and plots... ******************")
        self.report.write_tsv(save_dir / self.config.REPORT_NAME)
        Utils.save_history_object(self.report.to_dict(), save_dir)
        self.save_plots(save_dir)
        logging.info("****************************************************************************")
        logging.info("****************************** saving models... ****************************")
        self.model_builder.save_checkpoint(save_dir / self.config.CHECKPOINT_NAME, self.generator,
                                           self.discriminator, self.dataset.vocabs)
        logging.info("****************************************************************************")
        return self.report

    def evaluate_and_save(self, save_dir: Path) -> None:
        split = self.dataset.test if len(self.dataset.test) else ModelTrainer.validation_split(self.dataset)
        report = Metrics.evaluate(self.generator, split, self.dataset.annotations)
        report.write(save_dir / self.config.METRICS_NAME)

    @staticmethod
    def save_parameters(cfg: TrainConfig, save_dir: Union[str, Path]) -> None:
        """
        Save the resolved training parameters as `key = value` lines (readable by TrainConfig.from_file).
        """
        with open(Path(save_dir) / "parameters.txt", "w", encoding="utf-8") as f:
            f.write("\n".join(cfg.to_lines()) + "\n")

    def save_plots(self, save_dir: Path) -> None:
        history = self.report.history()
        logging.info(f" > Saving plots at {save_dir}...")
        Utils.plot_metrics(["gen_loss", "disc_loss", "val_ppl"], history, len(self.report.rows), save_dir)

    # ------------------------------------------------------------- helpers
    @staticmethod
    def validation_split(data: Dataset) -> SerpSplit:
        if len(data.valid):
            return data.valid
        logging.warning(" > No validation records; validating on the train split")
        return data.train

    @staticmethod
    def validate(gen: ClickPolicy, split: SerpSplit) -> Tuple[float, float]:
        """Teacher-forced (LL, averaged PPL) without dropout."""
        preds = gen.predict_split(split)
        _, ppl = Metrics.perplexity(preds, split.clicks)
        return Metrics.log_likelihood(preds, split.clicks), ppl

    @staticmethod
    def _random_batch(split: SerpSplit, batch_size: int, rng: np.random.Generator) -> SerpSplit:
        size = min(batch_size, len(split))
        return split.subset(np.sort(rng.choice(len(split), size=size, replace=False)))

    # -------------------------------------------------------- pretraining
    @staticmethod
    def mle_epoch(gen: ClickPolicy, split: SerpSplit, optimizer: AdamState, lr: float, cfg: TrainConfig,
                  rng: np.random.Generator, dropout: float) -> float:
        losses, weights = [], []
        for index in split.minibatches(cfg.batch_size, rng):
            gen.store.zero_grad()
            losses.append(gen.nll_loss(split, index, dropout=dropout, rng=rng))
            weights.append(len(index))
            adam_step(optimizer, gen.store, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.l2)
        return float(np.average(losses, weights=weights))

    @staticmethod
    def pretrain_mle(gen: ClickPolicy, disc: ClickDiscriminator, data: Dataset, cfg: TrainConfig,
                     rng: Optional[np.random.Generator] = None) -> TrainReport:
        """
        Behaviour cloning: minimize the teacher-forced click cross-entropy of the generator, keep the
        epoch with the lowest validation PPL, then pretrain the discriminator on logged clicks against
        clicks sampled from that generator. Zero `pretrain_epochs` leaves both untouched.
        """
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        report = TrainReport()
        if cfg.pretrain_epochs == 0:
            logging.info(" > pretrain_epochs = 0, skipping pretraining")
            return report
        if len(data.train) == 0:
            raise ValueError("cannot pretrain on an empty train split")
        valid = ModelTrainer.validation_split(data)

        optimizer = AdamState.for_store(gen.store)
        best_state = gen.store.state_dict()
        best_ll, best_ppl = ModelTrainer.validate(gen, valid)
        for epoch in range(1, cfg.pretrain_epochs + 1):
            start = time.perf_counter()
            loss = ModelTrainer.mle_epoch(gen, data.train, optimizer, cfg.lr_pretrain, cfg, rng, cfg.dropout)
            val_ll, val_ppl = ModelTrainer.validate(gen, valid)
            if val_ppl < best_ppl:
                best_ppl, best_state = val_ppl, gen.store.state_dict()
                report.best_val_ppl, report.best_epoch, report.best_phase = val_ppl, epoch, "pretrain_gen"
            report.add(EpochRecord("pretrain_gen", epoch, gen_loss=loss, val_ll=val_ll, val_ppl=val_ppl,
                                   lr_gen=cfg.lr_pretrain, wall_clock=time.perf_counter() - start))
            logging.info(f" > pretrain generator epoch {epoch}: NLL {loss:.6f}, val LL {val_ll:.6f}, val PPL {val_ppl:.6f}")
        gen.store.load_state_dict(best_state)

        optimizer = AdamState.for_store(disc.store)
        for epoch in range(1, cfg.pretrain_epochs + 1):
            start = time.perf_counter()
            losses = []
            for index in data.train.minibatches(cfg.batch_size, rng):
                real = data.train.subset(index)
                fake = gen.sample_batch(real, rng)
                disc.store.zero_grad()
                losses.append(disc.disc_grads((real, real.clicks), (real, fake.actions))["loss"])
                adam_step(optimizer, disc.store, cfg.lr_pretrain, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.l2)
            fake_valid = gen.sample_batch(valid, rng)
            val_loss = disc.disc_grads((valid, valid.clicks), (valid, fake_valid.actions), accumulate=False)["loss"]
            report.add(EpochRecord("pretrain_disc", epoch, disc_loss=float(np.mean(losses)), val_ll=-val_loss,
                                   lr_disc=cfg.lr_pretrain, wall_clock=time.perf_counter() - start))
            logging.info(f" > pretrain discriminator epoch {epoch}: loss {np.mean(losses):.6f}, val loss {val_loss:.6f}")
        return report

    @staticmethod
    def fit_surrogate(split: SerpSplit, vocab_sizes, cfg: TrainConfig) -> ClickPolicy:
        """A freshly seeded generator trained by MLE for exactly `surrogate_epochs` epochs."""
        cfg = cfg or TrainConfig()
        init_rng, train_rng = Utils.spawn_rngs(cfg.seed, 2)
        gen = ModelBuilder.from_config(vocab_sizes, cfg).build_generator(init_rng)
        optimizer = AdamState.for_store(gen.store)
        for epoch in range(1, cfg.surrogate_epochs + 1):
            loss = ModelTrainer.mle_epoch(gen, split, optimizer, cfg.lr_pretrain, cfg, train_rng, cfg.dropout)
            logging.info(f" > surrogate epoch {epoch}: NLL {loss:.6f}")
        return gen

    # ------------------------------------------------------ policy gradient
    @staticmethod
    def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
        """Q_t = sum_{k >= t} gamma^(k - t) r_k along the last axis."""
        rewards = np.asarray(rewards, dtype=np.float64)
        returns = np.zeros_like(rewards)
        running = np.zeros(rewards.shape[:-1])
        for t in range(rewards.shape[-1] - 1, -1, -1):
            running = rewards[..., t] + gamma * running
            returns[..., t] = running
        return returns

    @staticmethod
    def compute_returns(traj: Union[Trajectory, TrajectoryBatch], disc: ClickDiscriminator, gamma: float,
                        reward_sign: str = "gail") -> Union[Trajectory, TrajectoryBatch]:
        """
        Rewards from the discriminator on the sampled clicks: r_t = -log D (reward_sign "gail") or
        r_t = log D ("literal"), with D clamped to [1e-6, 1 - 1e-6]; returns are Monte-Carlo
        discounted sums.
        """
        if isinstance(traj, Trajectory):
            d = disc.score_sequence(traj.record, traj.actions)
        else:
            d = disc.score_split(traj.split, traj.actions)
        d = np.clip(d, REWARD_CLAMP, 1.0 - REWARD_CLAMP)
        rewards = -np.log(d) if reward_sign == "gail" else np.log(d)
        traj.rewards = rewards
        traj.returns = ModelTrainer.discounted_returns(rewards, gamma)
        return traj

    @staticmethod
    def advantages(returns: np.ndarray) -> np.ndarray:
        """Returns standardized over every position of the batch."""
        return (returns - returns.mean()) / (returns.std() + 1e-8)

    @staticmethod
    def ppo_update(gen: ClickPolicy, trajectories: Union[TrajectoryBatch, List[Trajectory]], cfg: TrainConfig,
                   optimizer: Optional[AdamState] = None, lr: Optional[float] = None) -> Dict[str, float]:
        """
        `ppo_epochs` passes over the batch, one Adam step per pass, each maximizing the clipped
        surrogate plus the entropy bonus. Ratios are taken against the sampling-time log-probabilities.
        """
        batch = trajectories if isinstance(trajectories, TrajectoryBatch) else TrajectoryBatch.from_trajectories(trajectories)
        if len(batch) == 0:
            raise ValueError("empty batch")
        if batch.returns is None or np.isnan(batch.returns).any():
            raise ValueError("compute_returns must run before ppo_update")
        optimizer = optimizer if optimizer is not None else AdamState.for_store(gen.store)
        lr = cfg.lr_gen if lr is None else lr
        advantages = ModelTrainer.advantages(batch.returns)
        stats = {}
        for _ in range(cfg.ppo_epochs):
            gen.store.zero_grad()
            stats = gen.ppo_loss(batch, advantages, cfg.ppo_clip, cfg.lambda_entropy)
            adam_step(optimizer, gen.store, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.l2)
        return stats

    # --------------------------------------------------------- adversarial
    @staticmethod
    def gail_loop(gen: ClickPolicy, disc: ClickDiscriminator, data: Dataset, cfg: TrainConfig,
                  rng: Optional[np.random.Generator] = None) -> TrainReport:
        """
        Alternate generator and discriminator updates. Each epoch runs `g_step` PPO updates on freshly
        sampled batches, then `m` sampled batches each training the discriminator `n` times
        (d_step = (m, n)). Learning rates decay by `lr_decay` after `patience` epochs without a better
        validation PPL; training stops at the next plateau once `max_lr_decays` decays happened.
        The generator ends on the snapshot with the lowest validation PPL (the starting one included).
        """
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        report = TrainReport()
        if len(data.train) == 0:
            raise ValueError("cannot train on an empty train split")
        valid = ModelTrainer.validation_split(data)
        train = data.train
        gen_opt, disc_opt = AdamState.for_store(gen.store), AdamState.for_store(disc.store)
        lr_gen, lr_disc = cfg.lr_gen, cfg.lr_disc

        _, best_ppl = ModelTrainer.validate(gen, valid)
        best_state = gen.store.state_dict()
        probe = ModelTrainer._random_batch(train, cfg.batch_size, rng)
        disc_loss = disc.disc_grads((probe, probe.clicks), (probe, gen.sample_batch(probe, rng).actions),
                                    accumulate=False)["loss"]
        stall, decays = 0, 0
        m, n = cfg.d_step

        for epoch in range(1, cfg.max_epochs + 1):
            start = time.perf_counter()
            gen_losses = []
            for _ in range(cfg.g_step):
                batch = gen.sample_batch(ModelTrainer._random_batch(train, cfg.batch_size, rng), rng)
                ModelTrainer.compute_returns(batch, disc, cfg.gamma, cfg.reward_sign)
                gen_losses.append(ModelTrainer.ppo_update(gen, batch, cfg, gen_opt, lr_gen)["loss"])

            disc_losses = []
            for _ in range(m):
                real = ModelTrainer._random_batch(train, cfg.batch_size, rng)
                fake = gen.sample_batch(real, rng)
                for _ in range(n):
                    disc.store.zero_grad()
                    disc_losses.append(disc.disc_grads((real, real.clicks), (real, fake.actions))["loss"])
                    adam_step(disc_opt, disc.store, lr_disc, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.l2)
            if disc_losses:
                disc_loss = float(np.mean(disc_losses))

            val_ll, val_ppl = ModelTrainer.validate(gen, valid)
            report.add(EpochRecord("gail", epoch, gen_loss=float(np.mean(gen_losses)) if gen_losses else float("nan"),
                                   disc_loss=disc_loss, val_ll=val_ll, val_ppl=val_ppl, lr_gen=lr_gen,
                                   lr_disc=lr_disc, wall_clock=time.perf_counter() - start))
            logging.info(f" > gail epoch {epoch}: gen loss {report.rows[-1].gen_loss:.6f}, disc loss {disc_loss:.6f}, "
                         f"val LL {val_ll:.6f}, val PPL {val_ppl:.6f}, lr {lr_gen:.2e}/{lr_disc:.2e}")

            if val_ppl < best_ppl:
                best_ppl, best_state, stall = val_ppl, gen.store.state_dict(), 0
                report.best_val_ppl, report.best_epoch, report.best_phase = val_ppl, epoch, "gail"
            else:
                stall += 1
            if cfg.patience and stall >= cfg.patience:
                if decays >= cfg.max_lr_decays:
                    logging.info(f" > validation PPL stalled after {decays} decays, stopping at epoch {epoch}")
                    break
                lr_gen *= cfg.lr_decay
                lr_disc *= cfg.lr_decay
                decays += 1
                stall = 0
                logging.info(f" > validation PPL stalled, learning rates decayed to {lr_gen:.2e}/{lr_disc:.2e}")

        gen.store.load_state_dict(best_state)
        if not report.best_phase:
            report.best_val_ppl, report.best_epoch, report.best_phase = best_ppl, 0, "gail"
        return report
