"""Contrastive snippet-caption reward model.

A frame encoder maps each 3x9x9 frame to a d=64 feature; a temporal
aggregator (average pooling or a 2-layer self-attention encoder) summarizes
the 16-frame window into one video embedding, refined by two residual
adapter layers whose gates start near zero (near-identity at init); a text
encoder (token embedding + one self-attention layer + masked mean pooling)
embeds the caption. Scores are scaled cosine similarities and training
minimizes the symmetric InfoNCE objective over a batch's similarity matrix.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from gridcraft.constants import FRAME_SHAPE
from gridcraft.text import MAX_CAPTION_LEN

N_FRAMES = 16
LOGIT_SCALE_MIN = math.log(1 / 100)
LOGIT_SCALE_MAX = math.log(100)


@dataclass(frozen=True)
class RewardModelConfig:
    vocab_size: int
    embed_dim: int = 64
    frame_hidden: int = 128
    n_heads: int = 4
    ffn_hidden: int = 128
    aggregator: str = "attn"  # "avg" or "attn"
    adapter_hidden: int = 64
    adapter_gate_init: float = 1e-4
    logit_scale_init: float = field(default=math.log(1 / 0.07))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class SelfAttention(nn.Module):
    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        assert dim % n_heads == 0
        self.n_heads = n_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)

    def forward(self, x, mask=None):
        b, t, d = x.shape
        h = self.n_heads
        q, k, v = self.qkv(x).reshape(b, t, 3, h, d // h).permute(2, 0, 3, 1, 4)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(d // h)
        if mask is not None:  # mask: (b, t) True where valid
            att = att.masked_fill(~mask[:, None, None, :], float("-inf"))
        att = torch.softmax(att, dim=-1)
        y = (att @ v).transpose(1, 2).reshape(b, t, d)
        return self.out(y)


class TransformerBlock(nn.Module):
    def __init__(self, dim: int, n_heads: int, ffn_hidden: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, n_heads)
        self.ln2 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_hidden), nn.GELU(),
                                 nn.Linear(ffn_hidden, dim))

    def forward(self, x, mask=None):
        x = x + self.attn(self.ln1(x), mask)
        return x + self.ffn(self.ln2(x))


class ResidualAdapter(nn.Module):
    """Gated residual refinement; gate starts near zero so the map is
    near-identity at initialization."""

    def __init__(self, dim: int, hidden: int, gate_init: float):
        super().__init__()
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(),
                                 nn.Linear(hidden, dim))
        self.gate = nn.Parameter(torch.tensor(float(gate_init)))

    def forward(self, x):
        return x + self.gate * self.mlp(x)


def _masked_mean(x, mask):
    w = mask.to(x.dtype).unsqueeze(-1)
    return (x * w).sum(dim=1) / w.sum(dim=1)


def normalize_embedding(x, eps: float = 1e-30):
    norm = x.norm(dim=-1, keepdim=True)
    if bool((norm < eps).any()):
        raise FloatingPointError("zero-norm embedding cannot be normalized")
    return x / norm


class RewardModel(nn.Module):
    def __init__(self, cfg: RewardModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        frame_in = int(np.prod(FRAME_SHAPE))
        self.frame_mlp = nn.Sequential(nn.Linear(frame_in, cfg.frame_hidden),
                                       nn.ReLU(),
                                       nn.Linear(cfg.frame_hidden, d))
        self.token_embed = nn.Embedding(cfg.vocab_size, d)
        self.text_pos = nn.Parameter(torch.zeros(MAX_CAPTION_LEN, d))
        self.text_block = TransformerBlock(d, cfg.n_heads, cfg.ffn_hidden)
        if cfg.aggregator == "attn":
            self.frame_pos = nn.Parameter(torch.zeros(N_FRAMES, d))
            self.agg_blocks = nn.ModuleList(
                TransformerBlock(d, cfg.n_heads, cfg.ffn_hidden) for _ in range(2))
        elif cfg.aggregator != "avg":
            raise ValueError(f"unknown aggregator {cfg.aggregator!r}")
        self.adapters = nn.ModuleList(
            ResidualAdapter(d, cfg.adapter_hidden, cfg.adapter_gate_init)
            for _ in range(2))
        self.logit_scale = nn.Parameter(torch.tensor(float(cfg.logit_scale_init)))
        # diagnostic counter: frames pushed through the frame encoder
        self.frame_encode_count = 0

    # -- encoders -----------------------------------------------------------

    def encode_frames(self, frames: torch.Tensor) -> torch.Tensor:
        """(..., T, 3, 9, 9) -> (..., T, d) frame features."""
        flat = frames.reshape(*frames.shape[:-3], -1)
        self.frame_encode_count += int(np.prod(frames.shape[:-3]))
        return self.frame_mlp(flat)

    def aggregate(self, feats: torch.Tensor) -> torch.Tensor:
        """(B, 16, d) frame features -> (B, d) unit-norm video embeddings."""
        if feats.shape[-2] != N_FRAMES:
            raise ValueError(f"expected {N_FRAMES} frame features")
        if self.cfg.aggregator == "attn":
            x = feats + self.frame_pos.to(feats.dtype)
            for block in self.agg_blocks:
                x = block(x)
            v = x.mean(dim=-2)
        else:
            v = feats.mean(dim=-2)
        for adapter in self.adapters:
            v = adapter(v)
        return normalize_embedding(v)

    def encode_video(self, frames: torch.Tensor) -> torch.Tensor:
        return self.aggregate(self.encode_frames(frames))

    def encode_text(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """(B, T) padded token ids + validity mask -> (B, d) unit-norm."""
        if ids.ndim != 2 or ids.shape[1] == 0 or not bool(mask.any(dim=1).all()):
            raise ValueError("captions must be nonempty")
        x = self.token_embed(ids) + self.text_pos[: ids.shape[1]].to(self.token_embed.weight.dtype)
        x = self.text_block(x, mask)
        return normalize_embedding(_masked_mean(x, mask))

    # -- scoring ------------------------------------------------------------

    def scale(self) -> torch.Tensor:
        return self.logit_scale.clamp(LOGIT_SCALE_MIN, LOGIT_SCALE_MAX).exp()

    def score(self, text_emb: torch.Tensor, video_emb: torch.Tensor) -> torch.Tensor:
        """Scaled cosine similarity; both inputs already unit-norm."""
        return self.scale() * (text_emb * video_emb).sum(dim=-1)

    def score_caption_snippet(self, ids, mask, frames) -> torch.Tensor:
        t = self.encode_text(ids, mask)
        v = self.encode_video(frames)
        return self.score(t, v)

    def clamp_logit_scale_(self):
        with torch.no_grad():
            self.logit_scale.clamp_(LOGIT_SCALE_MIN, LOGIT_SCALE_MAX)


def infonce_loss(model: RewardModel, text_emb: torch.Tensor,
                 video_emb: torch.Tensor) -> torch.Tensor:
    """Symmetric cross-entropy over the N x N scaled similarity matrix."""
    n = text_emb.shape[0]
    if n < 2:
        raise ValueError("InfoNCE needs at least 2 pairs")
    logits = model.scale() * text_emb @ video_emb.T
    labels = torch.arange(n, device=logits.device)
    return 0.5 * (F.cross_entropy(logits, labels)
                  + F.cross_entropy(logits.T, labels))


# -- deterministic initialization -------------------------------------------

def init_parameters(model: RewardModel, rng: np.random.Generator):
    """Fill all parameters from the given numpy stream, in sorted name order.

    Linear weights/biases use the fan-in uniform rule, embeddings and
    positional tables use small normals, norm layers and gates keep their
    construction values, so two models built from the same stream are
    identical.
    """
    with torch.no_grad():
        for name, p in sorted(model.named_parameters()):
            if name == "logit_scale" or name.endswith(".gate"):
                continue  # value fixed by construction
            if "token_embed" in name:
                p.copy_(torch.from_numpy(
                    rng.normal(0.0, 0.02, size=tuple(p.shape))).to(p.dtype))
            elif name.endswith("_pos") or ".ln" in name or "norm" in name.lower():
                if p.ndim == 2 or name.endswith("_pos"):
                    p.copy_(torch.from_numpy(
                        rng.normal(0.0, 0.01, size=tuple(p.shape))).to(p.dtype))
                # LayerNorm weights/biases keep ones/zeros
            elif p.ndim >= 2:  # linear weight
                bound = 1.0 / math.sqrt(p.shape[1])
                p.copy_(torch.from_numpy(
                    rng.uniform(-bound, bound, size=tuple(p.shape))).to(p.dtype))
            else:  # linear bias
                bound = 1.0 / math.sqrt(p.shape[0])
                p.copy_(torch.from_numpy(
                    rng.uniform(-bound, bound, size=tuple(p.shape))).to(p.dtype))
    return model


def new_reward_model(cfg: RewardModelConfig, rng: np.random.Generator) -> RewardModel:
    model = RewardModel(cfg)
    init_parameters(model, rng)
    model.eval()
    return model
