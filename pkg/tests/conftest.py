"""Shared fixtures: fixture corpus, tiny models, and throwaway checkpoints."""

import os

import pytest
import torch

from cryptogram.corpus import ingest, split_records
from cryptogram.model.backbone import ModelConfig
from cryptogram.model.heads import build_model
from cryptogram.checkpoint import save_checkpoint

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
FIXTURE_CORPUS = os.path.join(REPO_ROOT, "data", "quotes_fixture.txt")

# run directories produced by scripts/run_experiments.py; the acceptance
# tests that need real training read these instead of retraining in-process
RUNS_DIR = os.path.join(REPO_ROOT, "runs")


def tiny_config(**kw) -> ModelConfig:
    base = dict(d_model=32, n_layers=2, n_heads=2, ffn_dim=64)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def fixture_records():
    records, _ = ingest(FIXTURE_CORPUS, mode="quotes")
    return records


@pytest.fixture(scope="session")
def fixture_splits(fixture_records):
    return split_records(fixture_records, seed=0)


@pytest.fixture(scope="session")
def tiny_standard():
    torch.manual_seed(11)
    model = build_model(tiny_config(), head="standard")
    model.eval()
    return model


@pytest.fixture(scope="session")
def tiny_bijective():
    torch.manual_seed(13)
    model = build_model(tiny_config(), head="bijective")
    model.eval()
    return model


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, tiny_standard):
    path = tmp_path_factory.mktemp("ckpt") / "tiny_standard.ckpt"
    save_checkpoint(str(path), tiny_standard, step=0)
    return str(path)


@pytest.fixture(scope="session")
def tiny_bijective_checkpoint(tmp_path_factory, tiny_bijective):
    path = tmp_path_factory.mktemp("ckpt_bij") / "tiny_bijective.ckpt"
    save_checkpoint(str(path), tiny_bijective, step=0)
    return str(path)


def require_run(subpath: str) -> str:
    """Path of a training-run artifact, failing with reproduction steps."""
    path = os.path.join(RUNS_DIR, subpath)
    if not os.path.exists(path):
        pytest.fail(
            f"missing training artifact {path}; produce it with "
            "'python3 scripts/run_experiments.py --all' (several hours on CPU)"
        )
    return path
