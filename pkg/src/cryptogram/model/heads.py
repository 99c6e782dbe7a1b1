"""Decoding heads: symbol pooling, the linear head, and the bijective head.

Both heads first pool token activations symbol-wise, so repeated occurrences
of one ciphertext symbol always receive the same prediction. The linear head
maps each pooled embedding to vocabulary logits independently. The bijective
head reduces the pooled summary to a 26x26 letter-to-letter score matrix via
cross-attention with a learnable query, then constrains decodings to live on
a permutation: soft (Gumbel-Sinkhorn) during training, exact (Hungarian)
at inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from scipy.optimize import linear_sum_assignment

from ..ciphers import N_LETTERS, CipherMapping

SINKHORN_TAU = 4.75
SINKHORN_ITERS = 6
GUMBEL_CLAMP = 1e-10
NEG = -1e4  # log-space "impossible"; finite so autodiff and bf16 stay clean


@dataclass
class PooledSymbols:
    """Mean activation per vocabulary symbol, batched over examples.

    embeddings[b, s] is the average of states over every unpadded position
    of symbol s in example b (zeros where absent); present marks which rows
    are real. scatter_index maps each input position back to its pooled row
    (it is simply the token id matrix).
    """

    embeddings: torch.Tensor   # [B, V, D]
    present: torch.Tensor      # [B, V] bool
    counts: torch.Tensor       # [B, V]
    scatter_index: torch.Tensor  # [B, T] int64

    def unique_ids(self, b: int) -> torch.Tensor:
        """Symbol ids present in example b, ascending."""
        return torch.nonzero(self.present[b], as_tuple=False).flatten()


def symbol_pool(states: torch.Tensor, tokens: torch.Tensor,
                pad_mask: Optional[torch.Tensor], vocab_size: int) -> PooledSymbols:
    """Average the activations of every occurrence of each unique symbol.

    states: [B, T, D]; tokens: [B, T]; pad_mask True at pad (those positions
    contribute to no pooled row).
    """
    B, T, D = states.shape
    weight = torch.ones(B, T, dtype=states.dtype, device=states.device)
    if pad_mask is not None:
        weight = weight * (~pad_mask).to(states.dtype)
    sums = states.new_zeros(B, vocab_size, D)
    sums.scatter_add_(1, tokens.unsqueeze(-1).expand(B, T, D),
                      states * weight.unsqueeze(-1))
    counts = states.new_zeros(B, vocab_size)
    counts.scatter_add_(1, tokens, weight)
    pooled = sums / counts.clamp(min=1.0).unsqueeze(-1)
    return PooledSymbols(embeddings=pooled, present=counts > 0, counts=counts,
                         scatter_index=tokens)


def scatter_to_positions(per_symbol: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Broadcast per-symbol rows [B, V, C] back to positions -> [B, T, C]."""
    B, T = tokens.shape
    C = per_symbol.size(-1)
    return per_symbol.gather(1, tokens.unsqueeze(-1).expand(B, T, C))


class LinearHead(nn.Module):
    """Pooled symbol embedding -> vocabulary logits, one affine map."""

    def __init__(self, d_model: int, vocab_size: int, init_std: float = 0.02):
        super().__init__()
        self.vocab_size = vocab_size
        self.proj = nn.Linear(d_model, vocab_size)
        nn.init.trunc_normal_(self.proj.weight, std=init_std,
                              a=-2 * init_std, b=2 * init_std)
        nn.init.zeros_(self.proj.bias)

    def forward(self, final_states: torch.Tensor, tokens: torch.Tensor,
                pad_mask: Optional[torch.Tensor]) -> torch.Tensor:
        """Position-wise logits [B, T, V]; repeated symbols share their row."""
        pooled = symbol_pool(final_states, tokens, pad_mask, self.vocab_size)
        sym_logits = self.proj(pooled.embeddings)            # [B, V, V]
        return scatter_to_positions(sym_logits, tokens)

    @torch.no_grad()
    def decode(self, final_states: torch.Tensor, tokens: torch.Tensor,
               pad_mask: Optional[torch.Tensor]) -> torch.Tensor:
        """Greedy per-symbol argmax decode; pad positions stay pad."""
        pooled = symbol_pool(final_states, tokens, pad_mask, self.vocab_size)
        pred = self.proj(pooled.embeddings).argmax(dim=-1)   # [B, V]
        out = pred.gather(1, tokens)
        if pad_mask is not None:
            out = torch.where(pad_mask, tokens, out)
        return out


def log_sinkhorn(X: torch.Tensor, iters: int) -> torch.Tensor:
    """Sinkhorn normalization in log space.

    Starting from log S = X (so S = exp(X) > 0), each iteration row-normalizes
    then column-normalizes. Returns log of a nearly doubly stochastic matrix;
    works on [n, n] or batched [..., n, n].
    """
    for _ in range(iters):
        X = X - torch.logsumexp(X, dim=-1, keepdim=True)
        X = X - torch.logsumexp(X, dim=-2, keepdim=True)
    return X


def sinkhorn(X, iters: int = 50):
    """Doubly stochastic projection of exp(X); accepts torch or numpy."""
    if isinstance(X, np.ndarray):
        return log_sinkhorn(torch.from_numpy(X).double(), iters).exp().numpy()
    return log_sinkhorn(X, iters).exp()


def sample_gumbel(shape, rng: np.random.Generator,
                  clamp: float = GUMBEL_CLAMP) -> np.ndarray:
    """Standard Gumbel noise, -log(-log(u)), u uniform clamped away from {0,1}."""
    u = rng.random(shape)
    u = np.clip(u, clamp, 1.0 - clamp)
    return -np.log(-np.log(u))


def gumbel_sinkhorn(X: torch.Tensor, tau: float = SINKHORN_TAU,
                    iters: int = SINKHORN_ITERS,
                    rng: Optional[np.random.Generator] = None,
                    noise: bool = True, log: bool = False) -> torch.Tensor:
    """Differentiable soft permutation: sinkhorn((X + gumbel) / tau).

    Noise is drawn elementwise from the provided numpy generator, so batched
    inputs get independent noise per example. Pass log=True for log-space
    output (what the training loss consumes).
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if noise:
        if rng is None:
            raise ValueError("gumbel noise requires an rng")
        g = torch.from_numpy(sample_gumbel(tuple(X.shape), rng)).to(
            device=X.device, dtype=X.dtype)
        X = X + g
    out = log_sinkhorn(X / tau, iters)
    return out if log else out.exp()


def hard_assignment(X) -> np.ndarray:
    """Exact linear-assignment maximizer of sum_ij X_ij P_ij over permutations.

    Returns a 0/1 matrix with one 1 per row and column. Ties resolve to the
    lowest row-then-column indices (a constant matrix yields the identity).
    """
    if isinstance(X, torch.Tensor):
        X = X.detach().cpu().double().numpy()
    X = np.asarray(X, dtype=np.float64)
    rows, cols = linear_sum_assignment(X, maximize=True)
    P = np.zeros(X.shape, dtype=np.int64)
    P[rows, cols] = 1
    return P


def assignment_permutation(X) -> np.ndarray:
    """perm[i] = j column selected in row i by the exact assignment."""
    return hard_assignment(X).argmax(axis=1)


class BijectiveHead(nn.Module):
    """Cross-attention from a learnable 26-row query to the pooled symbols.

    Produces a score matrix X of shape [26, 26] per example: row = ciphertext
    letter, column = plaintext letter. Training passes X through
    Gumbel-Sinkhorn for a differentiable soft permutation; inference solves
    the assignment exactly, which makes two cipher letters decoding to the
    same plaintext letter impossible.
    """

    def __init__(self, d_model: int, n_heads: int, vocab_size: int,
                 init_std: float = 0.02, tau: float = SINKHORN_TAU,
                 sinkhorn_iters: int = SINKHORN_ITERS):
        super().__init__()
        self.vocab_size = vocab_size
        self.tau = tau
        self.sinkhorn_iters = sinkhorn_iters
        self.query = nn.Parameter(torch.empty(N_LETTERS, d_model))
        nn.init.trunc_normal_(self.query, std=init_std, a=-2 * init_std, b=2 * init_std)
        self.cross_attn = nn.MultiheadAttention(d_model, n_heads, batch_first=True)
        self.proj = nn.Linear(d_model, N_LETTERS)
        nn.init.trunc_normal_(self.proj.weight, std=init_std,
                              a=-2 * init_std, b=2 * init_std)
        nn.init.zeros_(self.proj.bias)

    def score_matrix(self, final_states: torch.Tensor, tokens: torch.Tensor,
                     pad_mask: Optional[torch.Tensor]) -> torch.Tensor:
        """Letter-to-letter scores X: [B, 26, 26]."""
        pooled = symbol_pool(final_states, tokens, pad_mask, self.vocab_size)
        B = final_states.size(0)
        q = self.query.unsqueeze(0).expand(B, -1, -1)
        attn_out, _ = self.cross_attn(q, pooled.embeddings, pooled.embeddings,
                                      key_padding_mask=~pooled.present,
                                      need_weights=False)
        return self.proj(attn_out)

    def forward(self, final_states: torch.Tensor, tokens: torch.Tensor,
                pad_mask: Optional[torch.Tensor],
                rng: Optional[np.random.Generator] = None,
                noise: bool = True) -> torch.Tensor:
        """Training-mode position logits [B, T, V].

        Letter rows of the per-example lookup table carry the log soft
        permutation; passthrough symbols carry a one-hot log row (they bypass
        the cipher). The result behaves like ordinary logits under
        cross-entropy because each row is already log-normalized.
        """
        X = self.score_matrix(final_states, tokens, pad_mask)
        log_P = gumbel_sinkhorn(X, self.tau, self.sinkhorn_iters, rng,
                                noise=noise, log=True)
        B = X.size(0)
        V = self.vocab_size
        table = X.new_full((B, V, V), NEG)
        table[:, :N_LETTERS, :N_LETTERS] = log_P
        idx = torch.arange(N_LETTERS, V, device=X.device)
        table[:, idx, idx] = 0.0
        return scatter_to_positions(table, tokens)

    @torch.no_grad()
    def decode(self, final_states: torch.Tensor, tokens: torch.Tensor,
               pad_mask: Optional[torch.Tensor],
               return_permutations: bool = False):
        """Hard decode: exact assignment per example, passthrough copied."""
        X = self.score_matrix(final_states, tokens, pad_mask)
        B, T = tokens.shape
        out = tokens.clone()
        perms = []
        for b in range(B):
            perm = assignment_permutation(X[b])   # cipher letter -> plain letter
            perms.append(perm)
            lut = torch.arange(self.vocab_size, device=tokens.device)
            lut[:N_LETTERS] = torch.from_numpy(perm).to(tokens.device)
            out[b] = lut[tokens[b]]
        if pad_mask is not None:
            out = torch.where(pad_mask, tokens, out)
        if return_permutations:
            return out, np.stack(perms)
        return out

    @staticmethod
    def key_from_permutation(perm: np.ndarray) -> CipherMapping:
        """Decryption mapping (cipher letter -> plaintext letter) as a key."""
        return CipherMapping(np.asarray(perm, dtype=np.int64))


class CipherModel(nn.Module):
    """Backbone plus one decoding head; the trainable unit."""

    def __init__(self, encoder, head):
        super().__init__()
        self.encoder = encoder
        self.head = head

    @property
    def cfg(self):
        return self.encoder.cfg

    def n_params(self, trainable_only: bool = True) -> int:
        return sum(p.numel() for p in self.parameters()
                   if p.requires_grad or not trainable_only)

    def forward(self, tokens: torch.Tensor, pad_mask: Optional[torch.Tensor] = None,
                rng: Optional[np.random.Generator] = None,
                noise: bool = True) -> torch.Tensor:
        """Training-mode position logits [B, T, V]."""
        hs = self.encoder(tokens, pad_mask)
        if isinstance(self.head, BijectiveHead):
            return self.head(hs.final, tokens, pad_mask, rng=rng, noise=noise)
        return self.head(hs.final, tokens, pad_mask)

    @torch.no_grad()
    def decode(self, tokens: torch.Tensor, pad_mask: Optional[torch.Tensor] = None,
               **kw) -> torch.Tensor:
        hs = self.encoder(tokens, pad_mask)
        return self.head.decode(hs.final, tokens, pad_mask, **kw)

    @torch.no_grad()
    def decode_at_layer(self, tokens: torch.Tensor,
                        pad_mask: Optional[torch.Tensor], layer: int,
                        **kw) -> torch.Tensor:
        """Early-exit decode: read hidden state ``layer``, then norm and head."""
        hs = self.encoder(tokens, pad_mask)
        states = self.encoder.exit_states(hs, layer)
        return self.head.decode(states, tokens, pad_mask, **kw)


def build_model(cfg, head: str = "standard") -> CipherModel:
    """Assemble an encoder with the requested decoding head."""
    from .backbone import Encoder
    enc = Encoder(cfg)
    if head == "standard":
        h = LinearHead(cfg.d_model, cfg.vocab_size, cfg.init_std)
    elif head == "bijective":
        h = BijectiveHead(cfg.d_model, cfg.n_heads, cfg.vocab_size, cfg.init_std)
    else:
        raise ValueError(f"unknown head {head!r}; expected standard or bijective")
    return CipherModel(enc, h)
