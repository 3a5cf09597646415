"""Session-scoped training artifacts shared by the acceptance suite.

Everything derives from one fixed desk dataset (4,000 rows, seed 7) and one
training seed so the whole suite is reproducible end to end.
"""

import dataclasses
import time
from dataclasses import dataclass

import numpy as np
import pytest

from rangegen.domain import Dataset, generate_dataset
from rangegen.models import Discriminator, Estimator, Generator
from rangegen.trainer import TrainConfig, train_estimator, train_rangegan

DESK_DATASET_SEED = 7
DESK_TRAIN_SEED = 3


@dataclass
class TrainedRun:
    config: TrainConfig
    estimator: Estimator
    estimator_report: dict
    generator: Generator
    discriminator: Discriminator
    log_rows: list
    wall_seconds: float


def _run(ds: Dataset, cfg: TrainConfig, est=None, est_report=None) -> TrainedRun:
    t0 = time.perf_counter()
    if est is None:
        est, est_report = train_estimator(ds, cfg)
    gen, disc, log_rows = train_rangegan(ds, est, cfg)
    return TrainedRun(cfg, est, est_report or {}, gen, disc, log_rows,
                      time.perf_counter() - t0)


@pytest.fixture(scope="session")
def desk_dataset() -> Dataset:
    return generate_dataset(4000, seed=DESK_DATASET_SEED)


@pytest.fixture(scope="session")
def aspect_run(desk_dataset) -> TrainedRun:
    cfg = TrainConfig(labels=("aspect",), seed=DESK_TRAIN_SEED)
    return _run(desk_dataset, cfg)


@pytest.fixture(scope="session")
def area_run(desk_dataset) -> TrainedRun:
    cfg = TrainConfig(labels=("area",), seed=DESK_TRAIN_SEED)
    return _run(desk_dataset, cfg)


@pytest.fixture(scope="session")
def both_run(desk_dataset) -> TrainedRun:
    cfg = TrainConfig(labels=("aspect", "area"), seed=DESK_TRAIN_SEED)
    return _run(desk_dataset, cfg)


@pytest.fixture(scope="session")
def aspect_nounif_run(desk_dataset, aspect_run) -> TrainedRun:
    # identical seed and estimator; only the uniformity weight differs
    cfg = dataclasses.replace(aspect_run.config, lambda_unif=0.0)
    return _run(desk_dataset, cfg, est=aspect_run.estimator,
                est_report=aspect_run.estimator_report)
