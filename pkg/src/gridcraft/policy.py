"""Language-conditioned policy network.

Frozen frame features (reused from the reward model's frame encoder) and a
frozen prompt embedding join sin/cos compass features, normalized GPS,
embedded voxel ids, and the embedded previous action; a one-layer fusion
feeds separate policy and value heads.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from gridcraft.actions import N_ACTIONS
from gridcraft.constants import BOUNDARY

PREV_ACTION_NONE = N_ACTIONS  # embedding index for "no previous action"


@dataclass(frozen=True)
class PolicyConfig:
    frame_feat_dim: int = 64
    prompt_dim: int = 64
    state_hidden: int = 128
    state_out: int = 128
    state_depth: int = 2
    embed_dim: int = 8
    fusion_out: int = 512
    head_hidden: int = 256
    head_depth: int = 3
    n_actions: int = N_ACTIONS

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _mlp(inp: int, hidden: int, out: int, depth: int) -> nn.Sequential:
    layers = []
    d = inp
    for _ in range(depth):
        layers += [nn.Linear(d, hidden), nn.ReLU()]
        d = hidden
    layers.append(nn.Linear(d, out))
    return nn.Sequential(*layers)


class PolicyNet(nn.Module):
    def __init__(self, cfg: PolicyConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg
        self.compass_mlp = _mlp(4, c.state_hidden, c.state_out, c.state_depth)
        self.gps_mlp = _mlp(2, c.state_hidden, c.state_out, c.state_depth)
        self.voxel_embed = nn.Embedding(BOUNDARY + 1, c.embed_dim)
        self.voxel_mlp = _mlp(9 * c.embed_dim, c.state_hidden, c.state_out,
                              c.state_depth)
        self.prev_action_embed = nn.Embedding(c.n_actions + 1, c.embed_dim)
        self.prev_action_mlp = _mlp(c.embed_dim, c.state_hidden, c.state_out,
                                    c.state_depth)
        fused = (c.frame_feat_dim + c.prompt_dim + 4 * c.state_out)
        self.fusion = nn.Sequential(nn.Linear(fused, c.fusion_out), nn.ReLU())
        self.policy_head = _mlp(c.fusion_out, c.head_hidden, c.n_actions,
                                c.head_depth)
        self.value_head = _mlp(c.fusion_out, c.head_hidden, 1, c.head_depth)

    def forward(self, frame_feat, prompt_emb, compass, gps, voxel, prev_action):
        """Returns (logits (B, A), value (B,)); inputs are batched tensors."""
        yaw = compass[:, 0].to(frame_feat.dtype) * (math.pi / 4.0)
        pitch = compass[:, 1].to(frame_feat.dtype)
        angles = torch.stack([torch.sin(yaw), torch.cos(yaw),
                              torch.sin(pitch), torch.cos(pitch)], dim=1)
        parts = [
            frame_feat,
            prompt_emb,
            self.compass_mlp(angles),
            self.gps_mlp(gps * 2.0 - 1.0),
            self.voxel_mlp(self.voxel_embed(voxel).flatten(1)),
            self.prev_action_mlp(self.prev_action_embed(prev_action)),
        ]
        h = self.fusion(torch.cat(parts, dim=1))
        return self.policy_head(h), self.value_head(h).squeeze(-1)


def init_policy(model: PolicyNet, rng: np.random.Generator) -> PolicyNet:
    """Deterministic init from a numpy stream (sorted parameter order)."""
    with torch.no_grad():
        for name, p in sorted(model.named_parameters()):
            if "embed" in name:
                p.copy_(torch.from_numpy(
                    rng.normal(0.0, 0.02, size=tuple(p.shape))).to(p.dtype))
            elif p.ndim >= 2:
                bound = 1.0 / math.sqrt(p.shape[1])
                p.copy_(torch.from_numpy(
                    rng.uniform(-bound, bound, size=tuple(p.shape))).to(p.dtype))
            else:
                bound = 1.0 / math.sqrt(p.shape[0])
                p.copy_(torch.from_numpy(
                    rng.uniform(-bound, bound, size=tuple(p.shape))).to(p.dtype))
    return model


def reset_policy_head(model: PolicyNet, rng: np.random.Generator) -> None:
    """Reinitialize only the policy head (used at stage transitions)."""
    with torch.no_grad():
        for name, p in sorted(model.policy_head.named_parameters()):
            if p.ndim >= 2:
                bound = 1.0 / math.sqrt(p.shape[1])
            else:
                bound = 1.0 / math.sqrt(p.shape[0])
            p.copy_(torch.from_numpy(
                rng.uniform(-bound, bound, size=tuple(p.shape))).to(p.dtype))


def obs_to_policy_inputs(obs_list, frame_feats, prompt_embs, prev_actions,
                         dtype=torch.float32):
    """Stack a list of Observations into batched policy-input tensors."""
    compass = torch.from_numpy(np.stack([o.compass for o in obs_list])).long()
    gps = torch.from_numpy(np.stack([o.gps for o in obs_list])).to(dtype)
    voxel = torch.from_numpy(
        np.stack([o.voxel for o in obs_list]).reshape(len(obs_list), 9)).long()
    prev = torch.as_tensor(prev_actions, dtype=torch.long)
    return frame_feats, prompt_embs, compass, gps, voxel, prev
