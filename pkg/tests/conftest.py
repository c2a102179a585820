import numpy as np
import pytest
import torch

from gridcraft.reward_model import RewardModelConfig, new_reward_model
from gridcraft.tasks import starter_tasks
from gridcraft.text import vocabulary_for_tasks
from gridcraft.world import WorldConfig

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def tasks():
    return starter_tasks()


@pytest.fixture(scope="session")
def registry(tasks):
    return {t.id: t for t in tasks}


@pytest.fixture(scope="session")
def vocab(tasks):
    return vocabulary_for_tasks(tasks)


@pytest.fixture(scope="session")
def small_world():
    return WorldConfig(seed=0, size=16)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_model(vocab):
    cfg = RewardModelConfig(vocab_size=len(vocab), aggregator="attn")
    return new_reward_model(cfg, np.random.default_rng(0))


@pytest.fixture(scope="session")
def tiny_model_avg(vocab):
    cfg = RewardModelConfig(vocab_size=len(vocab), aggregator="avg")
    return new_reward_model(cfg, np.random.default_rng(0))
