"""PPO losses: clipped surrogate, value regression, entropy bonus, and the
action-smoothing penalty over sliding windows of consecutive action
distributions."""

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class PPOConfig:
    """Training hyperparameters; defaults follow the full-scale recipe and
    are rescaled by ``scale_factor`` where marked."""
    lr: float = 1e-4
    lr_final: float = 5e-6
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    vf_loss_weight: float = 0.5
    entropy_weight_stage1: float = 5e-3
    entropy_weight_stage2: float = 1e-2
    grad_clip: float = 10.0
    ppo_buffer_size: int = 100_000   # scaled
    si_frequency: int = 100_000      # scaled
    si_epochs: int = 10
    si_lr: float = 1e-4
    si_lr_final: float = 1e-6
    si_threshold_sigma: float = 2.0
    si_buffer_capacity: int = 1000
    smooth_weight: float = 1e-7
    smooth_window: int = 3
    frame_stack: int = 1
    scale_factor: float = 0.01
    ppo_epochs: int = 3
    minibatch_size: int = 256
    advantage_norm: bool = True
    num_envs: int = 4
    success_bonus: float = 200.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def buffer_size_scaled(self) -> int:
        return max(self.num_envs, int(self.ppo_buffer_size * self.scale_factor))

    @property
    def si_frequency_scaled(self) -> int:
        return max(1, int(self.si_frequency * self.scale_factor))


def smoothing_loss(dists: torch.Tensor) -> torch.Tensor:
    """(1/W) * sum_{i=1}^{W-1} KL(pi_t || pi_{t-W+i}) over a window of W
    action distributions (rows ordered oldest to newest, last row = pi_t).

    A zero probability in a past distribution where pi_t is positive makes
    the divergence infinite; that is reported as an error.
    """
    w = dists.shape[0]
    if w < 2:
        raise ValueError("smoothing window needs at least 2 distributions")
    cur = dists[-1]
    past = dists[:-1]
    support = cur > 0
    if bool((past[:, support] == 0).any()):
        raise FloatingPointError(
            "past distribution has zero mass where the current policy is "
            "positive; KL divergence is infinite")
    kl = (cur * (torch.log(cur) - torch.log(past))).sum(dim=-1)
    return kl.sum() / w


def smoothing_loss_from_logits(logits: torch.Tensor, episode_ids,
                               window: int) -> torch.Tensor:
    """Mean smoothing loss over all full same-episode windows in a
    consecutive-step block of logits; 0 when no window fits."""
    t = logits.shape[0]
    if t < window:
        return logits.new_zeros(())
    log_probs = F.log_softmax(logits, dim=-1)
    probs = log_probs.exp()
    terms = []
    for end in range(window - 1, t):
        start = end - window + 1
        if episode_ids[start] != episode_ids[end]:
            continue
        cur_p, cur_lp = probs[end], log_probs[end]
        kl = (cur_p * (cur_lp - log_probs[start:end])).sum(dim=-1)
        terms.append(kl.sum() / window)
    if not terms:
        return logits.new_zeros(())
    return torch.stack(terms).mean()


@dataclass
class PPODiagnostics:
    surrogate: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    smoothing: float = 0.0
    clip_fraction: float = 0.0
    total: float = 0.0
    extra: dict = field(default_factory=dict)


def ppo_loss(logits: torch.Tensor, values: torch.Tensor, actions: torch.Tensor,
             old_log_probs: torch.Tensor, advantages: torch.Tensor,
             returns: torch.Tensor, cfg: PPOConfig, entropy_weight: float,
             smooth_term: torch.Tensor | None = None):
    """Clipped-surrogate PPO objective on one minibatch.

    loss = -surrogate + vf_weight * MSE(value, return)
           - entropy_weight * entropy + smooth_weight * smoothing.
    """
    log_probs = F.log_softmax(logits, dim=-1)
    logp = log_probs.gather(1, actions.unsqueeze(1)).squeeze(1)
    ratio = torch.exp(logp - old_log_probs)
    clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surrogate = torch.min(ratio * advantages, clipped * advantages).mean()
    value_loss = F.mse_loss(values, returns)
    entropy = -(log_probs.exp() * log_probs).sum(dim=-1).mean()
    smooth = smooth_term if smooth_term is not None else logits.new_zeros(())

    loss = (-surrogate + cfg.vf_loss_weight * value_loss
            - entropy_weight * entropy + cfg.smooth_weight * smooth)
    if not torch.isfinite(loss):
        raise RuntimeError(
            f"non-finite PPO loss: surrogate={float(surrogate)}, "
            f"value={float(value_loss)}, entropy={float(entropy)}, "
            f"smooth={float(smooth)}")
    with torch.no_grad():
        diag = PPODiagnostics(
            surrogate=float(surrogate), value_loss=float(value_loss),
            entropy=float(entropy), smoothing=float(smooth),
            clip_fraction=float((ratio - clipped).abs().gt(1e-12).float().mean()),
            total=float(loss))
    return loss, diag
