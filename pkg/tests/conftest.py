import numpy as np
import pytest

from fedcohort.client import LocalBudget
from fedcohort.config import DataConfig, ExperimentConfig
from fedcohort.data import SyntheticDataSpec
from fedcohort.loop import ClipConfig, CohortSchedule
from fedcohort.server import LrScalingConfig, ServerOptConfig
from fedcohort.straggler import StragglerConfig


def make_config(**overrides) -> ExperimentConfig:
    """Small regression experiment with every knob overridable."""
    defaults = dict(
        seed=1,
        rounds=4,
        algorithm=ServerOptConfig(kind="sgd", lr=0.5),
        client_lr=0.05,
        budget=LocalBudget("epochs", 1, 8),
        cohort=CohortSchedule(kind="fixed", size=3),
        data=DataConfig(source="synthetic", synthetic=SyntheticDataSpec(
            task_kind="regression", num_train_clients=6, num_test_clients=2,
            input_dim=4, examples_per_client=8, heterogeneity=0.3, label_noise=0.05)),
        clip=ClipConfig(),
        lr_scaling=LrScalingConfig(),
        straggler=StragglerConfig(),
        model=None,
        eval_period=1,
        workers=1,
        halt_on_failure=False,
        cosine_cap=None,
        thresholds=(0.3, 0.5, 0.7),
        output=None,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


@pytest.fixture
def small_config():
    return make_config()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
