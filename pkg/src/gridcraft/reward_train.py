"""Reward-model training: warmup + cosine schedule, temporally-consistent
crop augmentation, divergence guard, checkpoint serialization."""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from gridcraft.checkpoint import load_checkpoint, save_checkpoint
from gridcraft.constants import FRAME_SIZE
from gridcraft.reward_model import (
    RewardModel, RewardModelConfig, infonce_loss, new_reward_model,
)
from gridcraft.rng import substream
from gridcraft.text import Vocabulary, pad_batch


@dataclass(frozen=True)
class RewardTrainConfig:
    steps: int = 1500
    batch_size: int = 64
    warmup_steps: int = 200
    peak_lr: float = 1.5e-4
    final_lr: float = 1e-5
    weight_decay: float = 0.2
    layerwise_lr_decay: float = 1.0  # < 1 enables per-depth LR decay
    augment: bool = True
    divergence_patience: int = 100

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def lr_at(step: int, cfg: RewardTrainConfig) -> float:
    """Linear warmup to the peak, then cosine decay to the final LR."""
    if cfg.steps <= 0:
        return cfg.peak_lr
    if step < cfg.warmup_steps:
        return cfg.peak_lr * (step + 1) / cfg.warmup_steps
    span = max(cfg.steps - cfg.warmup_steps, 1)
    t = min((step - cfg.warmup_steps) / span, 1.0)
    return cfg.final_lr + 0.5 * (cfg.peak_lr - cfg.final_lr) * (1 + math.cos(math.pi * t))


def crop_augment(snippets: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
    """Temporally-consistent augmentation: the same random resized crop,
    flip, and quarter-rotation are applied to all 16 frames of a snippet."""
    b, t, c, h, w = snippets.shape
    results = []
    for i in range(b):
        x = snippets[i]
        s = int(rng.integers(FRAME_SIZE - 1, FRAME_SIZE + 1))
        if s < FRAME_SIZE:
            oy = int(rng.integers(0, h - s + 1))
            ox = int(rng.integers(0, w - s + 1))
            x = F.interpolate(x[:, :, oy:oy + s, ox:ox + s], size=(h, w),
                              mode="bilinear", align_corners=False)
        if rng.random() < 0.5:
            x = torch.flip(x, dims=(3,))
        k = int(rng.integers(4))
        if k:
            x = torch.rot90(x, k, dims=(2, 3))
        results.append(x)
    return torch.stack(results)


def _param_groups(model: RewardModel, cfg: RewardTrainConfig):
    if cfg.layerwise_lr_decay >= 1.0:
        return [{"params": list(model.parameters()), "lr_mult": 1.0}]
    depth_of = {"frame_mlp": 0, "token_embed": 0, "text_pos": 0,
                "text_block": 1, "frame_pos": 1, "agg_blocks": 1,
                "adapters": 2, "logit_scale": 2}
    groups: dict = {}
    for name, p in model.named_parameters():
        depth = depth_of.get(name.split(".")[0], 2)
        groups.setdefault(depth, []).append(p)
    max_depth = max(groups)
    return [{"params": ps, "lr_mult": cfg.layerwise_lr_decay ** (max_depth - d)}
            for d, ps in sorted(groups.items())]


def train_reward_model(pairs, vocab: Vocabulary, model_cfg: RewardModelConfig,
                       train_cfg: RewardTrainConfig, seed: int,
                       model: RewardModel | None = None):
    """Returns (model, metrics rows). ``steps = 0`` leaves the model at init."""
    if not pairs:
        raise ValueError("empty corpus")
    rng = substream(seed, "reward_train")
    if model is None:
        model = new_reward_model(model_cfg, substream(seed, "reward_init"))
    groups = _param_groups(model, train_cfg)
    opt = torch.optim.AdamW(
        [{"params": g["params"], "lr": train_cfg.peak_lr * g["lr_mult"]}
         for g in groups],
        lr=train_cfg.peak_lr, weight_decay=train_cfg.weight_decay)

    snippets = torch.from_numpy(np.stack([p.snippet for p in pairs]))
    captions = [list(p.caption_ids) for p in pairs]
    n = len(pairs)
    batch = min(train_cfg.batch_size, n)

    metrics = []
    diverged_for = 0
    model.train()
    for step in range(train_cfg.steps):
        idx = rng.choice(n, size=batch, replace=False)
        vids = snippets[idx]
        if train_cfg.augment:
            vids = crop_augment(vids, rng)
        ids, mask = pad_batch([captions[i] for i in idx])

        lr = lr_at(step, train_cfg)
        for g, spec in zip(opt.param_groups, groups):
            g["lr"] = lr * spec["lr_mult"]

        text_emb = model.encode_text(torch.from_numpy(ids), torch.from_numpy(mask))
        video_emb = model.encode_video(vids)
        loss = infonce_loss(model, text_emb, video_emb)
        opt.zero_grad()
        loss.backward()
        opt.step()
        model.clamp_logit_scale_()

        loss_val = float(loss.detach())
        metrics.append({"step": step, "loss": loss_val, "lr": lr})
        if not math.isfinite(loss_val):
            raise RuntimeError(
                f"reward training diverged: non-finite loss at step {step} "
                f"(lr {lr:.2e})")
        if loss_val > 10 * math.log(batch):
            diverged_for += 1
            if diverged_for >= train_cfg.divergence_patience:
                raise RuntimeError(
                    f"reward training diverged: loss {loss_val:.3f} stayed above "
                    f"{10 * math.log(batch):.3f} for {diverged_for} steps "
                    f"(step {step}, lr {lr:.2e})")
        else:
            diverged_for = 0
    model.eval()
    return model, metrics


def save_reward_checkpoint(path, model: RewardModel, vocab: Vocabulary,
                           extra: dict | None = None) -> None:
    config = {"model": model.cfg.to_dict(), "vocab": vocab.words[1:]}
    save_checkpoint(path, "reward_model", config, model.state_dict(),
                    extra=extra)


def load_reward_model(path):
    """Returns (model, vocab) from a reward checkpoint directory."""
    kind, config, state, _ = load_checkpoint(path)
    if kind != "reward_model":
        raise ValueError(f"{path} holds a {kind!r} checkpoint, not a reward model")
    model = RewardModel(RewardModelConfig(**config["model"]))
    model.load_state_dict(state)
    model.eval()
    return model, Vocabulary(config["vocab"])
