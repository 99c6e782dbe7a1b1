"""Train the checkpoints the acceptance suite evaluates.

Three groups, all on the committed fixture corpus with split seed 0:

  --big     3.4M standard head, 20K steps, batch 96 (the desk-scale
            learning run; roughly overnight on one CPU core)
  --small   0.5M bijective head (3K steps) for the structural criteria,
            plus the 0.5M generalization trio over cipher pools
            {1, 10, unlimited} at a fixed 4K steps each
  --all     both

Runs land in runs/ (gitignored); every run resumes from its newest
checkpoint, so interrupting and relaunching is safe.
"""

import argparse
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from cryptogram.corpus import ingest, split_records            # noqa: E402
from cryptogram.model.backbone import PRESETS                  # noqa: E402
from cryptogram.training import (                              # noqa: E402
    TrainConfig, Trainer, run_generalization_suite)

RUNS = os.path.join(ROOT, "runs")
SPLIT_SEED = 0


def load_splits():
    records, _ = ingest(os.path.join(ROOT, "data", "quotes_fixture.txt"))
    return split_records(records, seed=SPLIT_SEED)


def train_resumable(cfg, train_recs, val_recs, out_dir):
    trainer = Trainer(cfg, train_recs, val_recs, out_dir)
    latest = trainer.latest_checkpoint()
    if latest:
        trainer.resume(latest)
        print(f"resuming {out_dir} from step {trainer.step}", flush=True)
    trainer.train(log_every=200)
    return trainer


def run_big(train_recs, val_recs):
    cfg = TrainConfig(model=PRESETS["3.4M"], steps=20_000, batch_size=96,
                      seed=0, head="standard", precision="bf16",
                      batching="bucketed", val_every=500, val_size=512,
                      checkpoint_every=1000)
    train_resumable(cfg, train_recs, val_recs,
                    os.path.join(RUNS, "c6_standard_34m"))


def run_small(train_recs, val_recs):
    bij = TrainConfig(model=PRESETS["0.5M"], steps=3_000, batch_size=96,
                      seed=0, head="bijective", precision="bf16",
                      batching="bucketed", val_every=500, val_size=256,
                      checkpoint_every=1000)
    train_resumable(bij, train_recs, val_recs,
                    os.path.join(RUNS, "bijective_05m"))

    gen_cfg = TrainConfig(model=PRESETS["0.5M"], steps=4_000, batch_size=96,
                          seed=0, head="standard", precision="bf16",
                          batching="bucketed", val_every=1000, val_size=256,
                          checkpoint_every=2000)
    run_generalization_suite([1, 10, None], gen_cfg, train_recs, val_recs,
                             os.path.join(RUNS, "generalization"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--big", action="store_true")
    ap.add_argument("--small", action="store_true")
    ap.add_argument("--all", action="store_true")
    args = ap.parse_args()
    os.makedirs(RUNS, exist_ok=True)
    train_recs, val_recs = load_splits()
    print(f"{len(train_recs)} train / {len(val_recs)} held-out records", flush=True)
    if args.all or args.big:
        run_big(train_recs, val_recs)
    if args.all or args.small:
        run_small(train_recs, val_recs)


if __name__ == "__main__":
    main()
