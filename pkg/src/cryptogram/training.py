"""Training loop: masked cross-entropy, AdamW, cipher pools, checkpoints.

Every source of randomness (record sampling, cipher draws, Gumbel noise,
validation ciphers) is derived from (seed, purpose, step) through counter
style seeding, so training is reproducible and resuming from a checkpoint
continues the metric stream bit-for-bit within one build.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict, replace
from typing import Optional, Sequence

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .ciphers import CipherMapping, rng_for, sample_cipher, symbol_error_rate
from .corpus import Batch, TextRecord, make_batch
from .model.backbone import ModelConfig
from .model.heads import BijectiveHead, CipherModel, build_model

METRICS_HEADER = ("step", "loss", "lr", "wall_ms", "val_acc")


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes not-a-number."""


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    steps: int = 1000
    batch_size: int = 96
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.95
    adam_eps: float = 1e-5
    weight_decay: float = 0.1
    seed: int = 0
    cipher_pool_size: Optional[int] = None  # None = fresh cipher every row
    head: str = "standard"
    precision: str = "fp32"                 # fp32 | bf16 (mixed, CPU autocast)
    batching: str = "uniform"               # uniform | bucketed (by length)
    val_every: int = 500
    val_size: int = 512
    checkpoint_every: int = 1000
    metrics_flush_every: int = 50
    keep_checkpoints: Optional[int] = None  # None = keep all

    def __post_init__(self):
        if self.steps <= 0 or self.batch_size <= 0 or self.lr < 0:
            raise ValueError("steps/batch_size must be positive, lr nonnegative")
        if self.head not in ("standard", "bijective"):
            raise ValueError(f"unknown head {self.head!r}")
        if self.precision not in ("fp32", "bf16"):
            raise ValueError(f"unknown precision {self.precision!r}")
        if self.cipher_pool_size is not None and self.cipher_pool_size < 1:
            raise ValueError("cipher pool size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = ModelConfig.from_dict(d["model"])
        return cls(**d)


def loss(position_logits: torch.Tensor, targets: torch.Tensor,
         pad_mask: Optional[torch.Tensor]) -> torch.Tensor:
    """Mean cross-entropy over non-pad positions; spaces and punctuation count.

    Accepts raw logits or already log-normalized rows (cross-entropy applies
    log_softmax, which leaves normalized rows unchanged).
    """
    logits = position_logits.float()
    if pad_mask is not None:
        keep = ~pad_mask.reshape(-1)
        logits = logits.reshape(-1, logits.size(-1))[keep]
        labels = targets.reshape(-1)[keep]
    else:
        logits = logits.reshape(-1, logits.size(-1))
        labels = targets.reshape(-1)
    if labels.numel() == 0:
        raise ValueError("loss over an all-pad batch")
    return torch.nn.functional.cross_entropy(logits, labels)


class CipherPool:
    """A fixed set of K distinct ciphers sampled once from the seed."""

    def __init__(self, size: int, seed: int):
        self.size = size
        self.seed = seed
        rng = rng_for(seed, "pool")
        seen = set()
        ciphers = []
        while len(ciphers) < size:
            f = sample_cipher(rng)
            key = f.to_string()
            if key not in seen:   # collisions are ~impossible but stay exact
                seen.add(key)
                ciphers.append(f)
        self.ciphers = ciphers
        self._keys = seen

    def draw(self, rng: np.random.Generator, n: int) -> list:
        idx = rng.integers(0, self.size, size=n)
        return [self.ciphers[int(i)] for i in idx]

    def __contains__(self, f: CipherMapping) -> bool:
        return f.to_string() in self._keys

    def __len__(self) -> int:
        return self.size


def fresh_ciphers(rng: np.random.Generator, n: int,
                  exclude: Optional[CipherPool] = None) -> list:
    """n ciphers drawn fresh; never colliding with ``exclude`` if given."""
    out = []
    while len(out) < n:
        f = sample_cipher(rng)
        if exclude is not None and f in exclude:
            continue
        out.append(f)
    return out


def bootstrap_ser(per_sequence_sers: Sequence[float], n_samples: int = 50,
                  rng: Optional[np.random.Generator] = None) -> tuple:
    """Bayesian bootstrap of the mean symbol error rate.

    Each sample reweights the sequences by a flat Dirichlet draw; returns
    (mean, std) of the weighted means (population std).
    """
    sers = np.asarray(list(per_sequence_sers), dtype=np.float64)
    if sers.size == 0:
        raise ValueError("bootstrap over an empty list")
    if rng is None:
        rng = np.random.default_rng(0)
    weights = rng.dirichlet(np.ones(sers.size), size=n_samples)
    means = weights @ sers
    return float(means.mean()), float(means.std())


def adamw_param_groups(model: torch.nn.Module, weight_decay: float) -> list:
    """Decay matrices and embeddings; leave gains and biases undecayed."""
    decay, no_decay = [], []
    for p in model.parameters():
        if not p.requires_grad:
            continue
        (decay if p.ndim >= 2 else no_decay).append(p)
    return [{"params": decay, "weight_decay": weight_decay},
            {"params": no_decay, "weight_decay": 0.0}]


def build_optimizer(model: torch.nn.Module, cfg: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(adamw_param_groups(model, cfg.weight_decay),
                             lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2),
                             eps=cfg.adam_eps)


class Trainer:
    """Owns the weights; one instance per run directory."""

    def __init__(self, cfg: TrainConfig, train_records: Sequence[TextRecord],
                 val_records: Optional[Sequence[TextRecord]] = None,
                 out_dir: str = "run"):
        if not train_records:
            raise ValueError("no training records")
        self.cfg = cfg
        self.records = list(train_records)
        self.val_records = list(val_records) if val_records else []
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.json"), "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=1)

        self.model = build_model(cfg.model, head=cfg.head)
        self.optimizer = build_optimizer(self.model, cfg)
        self.pool = (CipherPool(cfg.cipher_pool_size, cfg.seed)
                     if cfg.cipher_pool_size else None)
        self.step = 0
        self._metric_rows: list = []
        self._buckets = self._build_buckets() if cfg.batching == "bucketed" else None

    # -- data ------------------------------------------------------------

    def _build_buckets(self) -> list:
        """Group record indices by length so one batch pads minimally.

        A bucket is chosen per step with probability proportional to its
        size, keeping each record's marginal sampling probability uniform.
        """
        edges = (64, 128, 192, 256, 10**9)
        buckets = [[] for _ in edges]
        for i, rec in enumerate(self.records):
            for j, hi in enumerate(edges):
                if rec.length <= hi:
                    buckets[j].append(i)
                    break
        return [np.asarray(b, dtype=np.int64) for b in buckets if len(b)]

    def sample_batch(self, step: int) -> Batch:
        rng = rng_for(self.cfg.seed, "data", step)
        B = self.cfg.batch_size
        if self._buckets is not None:
            sizes = np.array([len(b) for b in self._buckets], dtype=np.float64)
            bucket = self._buckets[int(rng.choice(len(self._buckets),
                                                  p=sizes / sizes.sum()))]
            idx = bucket[rng.integers(0, len(bucket), size=B)]
        else:
            idx = rng.integers(0, len(self.records), size=B)
        recs = [self.records[int(i)] for i in idx]
        if self.pool is not None:
            stream = self.pool.draw(rng_for(self.cfg.seed, "pool-draw", step), B)
        else:
            stream = rng_for(self.cfg.seed, "cipher", step)
        return make_batch(recs, stream, batch_size=B,
                          max_len=self.cfg.model.context_len)

    # -- steps -----------------------------------------------------------

    def train_step(self, step: int) -> float:
        batch = self.sample_batch(step)
        tokens = torch.from_numpy(batch.tokens)
        targets = torch.from_numpy(batch.targets)
        pad = torch.from_numpy(batch.pad_mask)
        gumbel_rng = (rng_for(self.cfg.seed, "gumbel", step)
                      if isinstance(self.model.head, BijectiveHead) else None)

        self.model.train()
        autocast = torch.autocast("cpu", dtype=torch.bfloat16,
                                  enabled=self.cfg.precision == "bf16")
        with autocast:
            logits = self.model(tokens, pad, rng=gumbel_rng)
        step_loss = loss(logits, targets, pad)
        self.optimizer.zero_grad(set_to_none=True)
        step_loss.backward()
        self.optimizer.step()
        value = float(step_loss.detach())
        if not math.isfinite(value):
            self._flush_metrics()
            raise TrainingDiverged(f"loss became {value} at step {step}")
        return value

    @torch.no_grad()
    def validate(self, step: int) -> float:
        """1 - mean SER over held-out sequences under fresh ciphers."""
        if not self.val_records:
            return float("nan")
        recs = self.val_records[:self.cfg.val_size]
        rng = rng_for(self.cfg.seed, "val-cipher", step)
        self.model.eval()
        sers = []
        B = self.cfg.batch_size
        for lo in range(0, len(recs), B):
            chunk = recs[lo:lo + B]
            ciphers = fresh_ciphers(rng, len(chunk), exclude=self.pool)
            batch = make_batch(chunk, ciphers, batch_size=len(chunk),
                               max_len=self.cfg.model.context_len)
            decoded = self.model.decode(torch.from_numpy(batch.tokens),
                                        torch.from_numpy(batch.pad_mask))
            for i, rec in enumerate(chunk):
                n = rec.length
                sers.append(symbol_error_rate(decoded[i, :n].numpy(),
                                              batch.targets[i, :n]))
        return 1.0 - float(np.mean(sers))

    # -- bookkeeping -------------------------------------------------------

    def _metrics_path(self) -> str:
        return os.path.join(self.out_dir, "metrics.csv")

    def _flush_metrics(self):
        if not self._metric_rows:
            return
        path = self._metrics_path()
        new_file = not os.path.exists(path)
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new_file:
                w.writerow(METRICS_HEADER)
            w.writerows(self._metric_rows)
        self._metric_rows.clear()

    def checkpoint_path(self, step: int) -> str:
        return os.path.join(self.out_dir, f"ckpt_{step:06d}.ckpt")

    def _save(self, step: int):
        save_checkpoint(self.checkpoint_path(step), self.model, self.optimizer,
                        step=step, train_config=self.cfg.to_dict())
        if self.cfg.keep_checkpoints is not None:
            kept = sorted(p for p in os.listdir(self.out_dir)
                          if p.startswith("ckpt_") and p.endswith(".ckpt"))
            for name in kept[:-self.cfg.keep_checkpoints]:
                os.remove(os.path.join(self.out_dir, name))

    def resume(self, path: str):
        meta = load_checkpoint(path, self.model, self.optimizer)
        self.step = int(meta["step"])
        return meta

    def latest_checkpoint(self) -> Optional[str]:
        names = sorted(p for p in os.listdir(self.out_dir)
                       if p.startswith("ckpt_") and p.endswith(".ckpt"))
        return os.path.join(self.out_dir, names[-1]) if names else None

    # -- loop --------------------------------------------------------------

    def train(self, log_every: int = 0) -> str:
        """Run to cfg.steps from the current step; returns final ckpt path."""
        cfg = self.cfg
        for step in range(self.step + 1, cfg.steps + 1):
            t0 = time.perf_counter()
            value = self.train_step(step)
            wall_ms = (time.perf_counter() - t0) * 1e3
            val_acc = ""
            if self.val_records and (step % cfg.val_every == 0 or step == cfg.steps):
                acc = self.validate(step)
                val_acc = f"{acc:.6f}"
            self._metric_rows.append(
                (step, f"{value:.6f}", f"{cfg.lr:.8g}", f"{wall_ms:.1f}", val_acc))
            if step % cfg.metrics_flush_every == 0 or step == cfg.steps:
                self._flush_metrics()
            if step % cfg.checkpoint_every == 0 or step == cfg.steps:
                self._save(step)
            if log_every and step % log_every == 0:
                print(f"step {step} loss {value:.4f} ({wall_ms:.0f} ms)"
                      + (f" val_acc {val_acc}" if val_acc else ""), flush=True)
            self.step = step
        self._flush_metrics()
        return self.checkpoint_path(self.step)


def train(cfg: TrainConfig, train_records, val_records=None,
          out_dir: str = "run", resume: bool = False,
          log_every: int = 0) -> str:
    """One-call training entry; optionally resumes from the newest checkpoint."""
    trainer = Trainer(cfg, train_records, val_records, out_dir)
    if resume:
        latest = trainer.latest_checkpoint()
        if latest:
            trainer.resume(latest)
    return trainer.train(log_every=log_every)


PAPER_POOL_SIZES = (10, 100, 250, 500, 750, 1000, 1500, 2500, 5000, 10000)


def run_generalization_suite(pool_sizes, cfg: TrainConfig, train_records,
                             val_records, out_dir: str) -> list:
    """Train one model per cipher-pool size with identical budgets.

    ``None`` (or 0) in pool_sizes means unlimited fresh ciphers. Each run
    writes its own metrics.csv; a summary CSV collects final loss and final
    validation accuracy against fresh ciphers per size.
    """
    os.makedirs(out_dir, exist_ok=True)
    summary = []
    for size in pool_sizes:
        size = None if not size else int(size)
        tag = "unlimited" if size is None else str(size)
        run_cfg = replace(cfg, cipher_pool_size=size)
        run_dir = os.path.join(out_dir, f"pool_{tag}")
        trainer = Trainer(run_cfg, train_records, val_records, run_dir)
        latest = trainer.latest_checkpoint()
        if latest:
            trainer.resume(latest)
        trainer.train()
        final_acc = trainer.validate(trainer.step)
        losses = read_metric_column(trainer._metrics_path(), "loss")
        summary.append({"pool_size": tag, "final_val_acc": final_acc,
                        "final_loss": losses[-1] if losses else float("nan"),
                        "run_dir": run_dir})
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["pool_size", "final_val_acc",
                                           "final_loss", "run_dir"])
        w.writeheader()
        w.writerows(summary)
    return summary


def read_metric_column(path: str, column: str) -> list:
    """Numeric column from a metrics CSV, skipping blank cells."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cell = row.get(column, "")
            if cell:
                out.append(float(cell))
    return out
