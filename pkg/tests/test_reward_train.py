import math

import numpy as np
import pytest
import torch

from gridcraft.corpus import build_corpus
from gridcraft.reward_model import RewardModelConfig, new_reward_model
from gridcraft.reward_train import (
    RewardTrainConfig, crop_augment, lr_at, train_reward_model,
)
from gridcraft.world import WorldConfig


@pytest.fixture(scope="module")
def mini_corpus(tasks):
    sub = [t for t in tasks if t.id in
           {"harvest_milk", "creative_find_water", "combat_zombie",
            "survive_plain"}]
    return build_corpus(sub, WorldConfig(seed=0, size=16), 4, seed=21)


def test_zero_steps_returns_initialization(mini_corpus):
    pairs, vocab = mini_corpus
    cfg = RewardModelConfig(vocab_size=len(vocab))
    init = new_reward_model(cfg, np.random.default_rng(2))
    before = {k: v.clone() for k, v in init.state_dict().items()}
    model, metrics = train_reward_model(pairs, vocab, cfg,
                                        RewardTrainConfig(steps=0), seed=2,
                                        model=init)
    assert metrics == []
    for k, v in model.state_dict().items():
        assert torch.equal(v, before[k])


def test_initial_loss_near_ln_batch(mini_corpus):
    pairs, vocab = mini_corpus
    cfg = RewardModelConfig(vocab_size=len(vocab))
    _, metrics = train_reward_model(
        pairs, vocab, cfg, RewardTrainConfig(steps=1, batch_size=32), seed=3)
    assert abs(metrics[0]["loss"] - math.log(32)) <= 0.5


def test_loss_decreases(mini_corpus):
    pairs, vocab = mini_corpus
    cfg = RewardModelConfig(vocab_size=len(vocab))
    _, metrics = train_reward_model(
        pairs, vocab, cfg, RewardTrainConfig(steps=150, warmup_steps=20),
        seed=4)
    first = np.mean([m["loss"] for m in metrics[:10]])
    last = np.mean([m["loss"] for m in metrics[-10:]])
    assert last < first


def test_training_deterministic(mini_corpus):
    pairs, vocab = mini_corpus
    cfg = RewardModelConfig(vocab_size=len(vocab))
    tc = RewardTrainConfig(steps=30, warmup_steps=5)
    m1, met1 = train_reward_model(pairs, vocab, cfg, tc, seed=5)
    m2, met2 = train_reward_model(pairs, vocab, cfg, tc, seed=5)
    assert met1 == met2
    for k in m1.state_dict():
        assert torch.equal(m1.state_dict()[k], m2.state_dict()[k])


def test_lr_schedule_shape():
    cfg = RewardTrainConfig(steps=1000, warmup_steps=100, peak_lr=1e-3,
                            final_lr=1e-5)
    assert lr_at(0, cfg) == pytest.approx(1e-3 / 100)
    assert lr_at(99, cfg) == pytest.approx(1e-3)
    assert lr_at(999, cfg) == pytest.approx(1e-5, rel=1e-2)
    mid = lr_at(550, cfg)
    assert 1e-5 < mid < 1e-3


def test_crop_augment_temporally_consistent(rng):
    # distinct frames, but the same crop for all 16: a constant-in-time pixel
    # stays constant in time after augmentation
    snip = np.broadcast_to(rng.random((1, 1, 3, 9, 9)).astype(np.float32),
                           (1, 16, 3, 9, 9)).copy()
    out = crop_augment(torch.from_numpy(snip), np.random.default_rng(0))
    first = out[0, 0]
    for t in range(16):
        assert torch.equal(out[0, t], first)


def test_divergence_abort(mini_corpus):
    pairs, vocab = mini_corpus
    cfg = RewardModelConfig(vocab_size=len(vocab))
    tc = RewardTrainConfig(steps=300, warmup_steps=1, peak_lr=50.0,
                           final_lr=50.0, divergence_patience=20)
    with pytest.raises(RuntimeError, match="diverged"):
        train_reward_model(pairs, vocab, cfg, tc, seed=6)
