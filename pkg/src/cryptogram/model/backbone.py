"""Encoder-only transformer backbone.

Pre-norm residual blocks (RMSNorm, full bidirectional multi-head attention
with rotary positions, SwiGLU feed-forward), a final RMSNorm, and access to
every intermediate hidden state for layer-wise analysis. No causal mask and
no autoregression: the whole sequence is read in a single forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

VOCAB_SIZE = 37          # 26 letters + 10 passthrough symbols + pad
CONTEXT_LEN = 304        # longest record is 300 symbols, plus margin
NORM_EPS = 1e-5
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_layers: int
    n_heads: int
    ffn_dim: int
    rope_theta: float = 10_000.0
    vocab_size: int = VOCAB_SIZE
    context_len: int = CONTEXT_LEN
    norm_eps: float = NORM_EPS
    init_std: float = INIT_STD
    size_tag: str = ""

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must divide evenly into heads")
        if (self.d_model // self.n_heads) % 2 != 0:
            raise ValueError("head dimension must be even for rotary positions")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def pad_id(self) -> int:
        return self.vocab_size - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @classmethod
    def preset(cls, tag: str) -> "ModelConfig":
        if tag not in PRESETS:
            raise KeyError(f"unknown model size {tag!r}; choose from {sorted(PRESETS)}")
        return PRESETS[tag]


# parameter-count ladder used in the scaling experiments
PRESETS = {
    "0.5M": ModelConfig(d_model=128, n_layers=2, n_heads=4, ffn_dim=512,
                        size_tag="0.5M"),
    "3.4M": ModelConfig(d_model=256, n_layers=4, n_heads=4, ffn_dim=768,
                        size_tag="3.4M"),
    "10.7M": ModelConfig(d_model=384, n_layers=6, n_heads=6, ffn_dim=1024,
                         size_tag="10.7M"),
    "27.3M": ModelConfig(d_model=512, n_layers=8, n_heads=8, ffn_dim=1536,
                         size_tag="27.3M"),
    "85M": ModelConfig(d_model=768, n_layers=12, n_heads=12, ffn_dim=2048,
                       size_tag="85M"),
    "308M": ModelConfig(d_model=1024, n_layers=24, n_heads=16, ffn_dim=2816,
                        size_tag="308M"),
}


@dataclass
class HiddenStates:
    """Per-layer activations: index 0 is post-embedding, index i is after block i.

    ``final`` is the last block's output passed through the closing RMSNorm;
    heads consume ``final``, analyses may consume any ``layers[i]``.
    """

    layers: list
    final: torch.Tensor
    attentions: Optional[list] = field(default=None, repr=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers) - 1

    def __getitem__(self, i: int) -> torch.Tensor:
        return self.layers[i]


class RMSNorm(nn.Module):
    """Root-mean-square normalization with a learnable gain, no recentering."""

    def __init__(self, dim: int, eps: float = NORM_EPS):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # normalize in fp32 so low-precision autocast cannot destabilize it
        dtype = x.dtype
        xf = x.float()
        normed = xf * torch.rsqrt(xf.pow(2).mean(dim=-1, keepdim=True) + self.eps)
        return (normed * self.weight.float()).to(dtype)


def rope_angles(positions: torch.Tensor, d_head: int, theta: float,
                dtype: torch.dtype, device) -> tuple:
    """cos/sin tables for rotary application, shape [len(positions), d_head]."""
    if d_head % 2 != 0:
        raise ValueError("rotary positions need an even head dimension")
    idx = torch.arange(0, d_head, 2, dtype=torch.float64, device=device)
    inv_freq = theta ** (-idx / d_head)                      # [d_head/2]
    ang = positions.to(torch.float64)[:, None] * inv_freq[None, :]
    ang = torch.cat([ang, ang], dim=-1)                      # [T, d_head]
    return ang.cos().to(dtype), ang.sin().to(dtype)


def apply_rope(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    """Rotate per-position feature pairs (i, i + d_head/2) of q or k.

    x: [..., T, d_head]; cos/sin: [T, d_head]. Position 0 is the identity.
    """
    x1, x2 = x.chunk(2, dim=-1)
    rotated = torch.cat([-x2, x1], dim=-1)
    return x * cos + rotated * sin


class SelfAttention(nn.Module):
    """Full non-causal multi-head attention with rotary positions.

    Only a key-padding mask is applied: pad positions receive zero attention
    weight from every query, while pad queries still attend so no softmax row
    is ever fully masked.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        self.wq = nn.Linear(d, d, bias=False)
        self.wk = nn.Linear(d, d, bias=False)
        self.wv = nn.Linear(d, d, bias=False)
        self.wo = nn.Linear(d, d, bias=False)

    def forward(self, x: torch.Tensor, keep: Optional[torch.Tensor],
                capture: bool = False):
        B, T, _ = x.shape
        H, dh = self.cfg.n_heads, self.cfg.d_head
        q = self.wq(x).view(B, T, H, dh).transpose(1, 2)     # [B, H, T, dh]
        k = self.wk(x).view(B, T, H, dh).transpose(1, 2)
        v = self.wv(x).view(B, T, H, dh).transpose(1, 2)

        pos = torch.arange(T, device=x.device)
        cos, sin = rope_angles(pos, dh, self.cfg.rope_theta, q.dtype, x.device)
        q = apply_rope(q, cos, sin)
        k = apply_rope(k, cos, sin)

        mask = None if keep is None else keep[:, None, None, :]  # [B,1,1,T]
        if capture:
            scores = q @ k.transpose(-2, -1) / math.sqrt(dh)
            if mask is not None:
                scores = scores.masked_fill(~mask, torch.finfo(scores.dtype).min)
            weights = scores.softmax(dim=-1)
            out = weights @ v
        else:
            weights = None
            out = F.scaled_dot_product_attention(q, k, v, attn_mask=mask)
        out = out.transpose(1, 2).reshape(B, T, H * dh)
        return self.wo(out), weights


class SwiGLU(nn.Module):
    """Gated feed-forward: down(silu(gate(x)) * up(x))."""

    def __init__(self, d_model: int, ffn_dim: int):
        super().__init__()
        self.gate = nn.Linear(d_model, ffn_dim, bias=False)
        self.up = nn.Linear(d_model, ffn_dim, bias=False)
        self.down = nn.Linear(ffn_dim, d_model, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(F.silu(self.gate(x)) * self.up(x))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn_norm = RMSNorm(cfg.d_model, cfg.norm_eps)
        self.attn = SelfAttention(cfg)
        self.ffn_norm = RMSNorm(cfg.d_model, cfg.norm_eps)
        self.ffn = SwiGLU(cfg.d_model, cfg.ffn_dim)

    def forward(self, x: torch.Tensor, keep: Optional[torch.Tensor],
                capture: bool = False):
        attn_out, weights = self.attn(self.attn_norm(x), keep, capture)
        x = x + attn_out
        x = x + self.ffn(self.ffn_norm(x))
        return x, weights


class Encoder(nn.Module):
    """Token embeddings, stacked pre-norm blocks, closing RMSNorm."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.norm = RMSNorm(cfg.d_model, cfg.norm_eps)
        self.apply(self._init_weights)
        for layer in self.layers:
            # zero-init residual branches so depth starts out benign
            nn.init.zeros_(layer.attn.wo.weight)
            nn.init.zeros_(layer.ffn.down.weight)

    def _init_weights(self, module):
        std = self.cfg.init_std
        if isinstance(module, nn.Linear):
            nn.init.trunc_normal_(module.weight, std=std, a=-2 * std, b=2 * std)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Embedding):
            nn.init.trunc_normal_(module.weight, std=std, a=-2 * std, b=2 * std)

    def forward(self, tokens: torch.Tensor, pad_mask: Optional[torch.Tensor] = None,
                capture_attention: bool = False) -> HiddenStates:
        """tokens: [B, T] int64; pad_mask: [B, T] bool, True at pad positions."""
        if tokens.dim() != 2:
            raise ValueError("tokens must be [batch, seq_len]")
        if tokens.size(1) > self.cfg.context_len:
            raise ValueError(
                f"sequence length {tokens.size(1)} exceeds context {self.cfg.context_len}")
        if tokens.min() < 0 or tokens.max() >= self.cfg.vocab_size:
            raise ValueError("token id out of range")
        if pad_mask is None:
            pad_mask = tokens == self.cfg.pad_id
        keep = ~pad_mask

        x = self.embed(tokens)
        states = [x]
        attentions = [] if capture_attention else None
        for layer in self.layers:
            x, w = layer(x, keep, capture=capture_attention)
            states.append(x)
            if capture_attention:
                attentions.append(w)
        return HiddenStates(layers=states, final=self.norm(x), attentions=attentions)

    def exit_states(self, hs: HiddenStates, layer: int) -> torch.Tensor:
        """Normalized activations for an early exit after ``layer`` blocks.

        Exit at n_layers reuses the exact closing-norm computation, so it is
        bit-identical to the standard decoding path.
        """
        if not 0 <= layer <= hs.n_layers:
            raise ValueError(f"exit layer {layer} outside 0..{hs.n_layers}")
        return self.norm(hs.layers[layer])

    def n_params(self, trainable_only: bool = True) -> int:
        return sum(p.numel() for p in self.parameters()
                   if p.requires_grad or not trainable_only)
