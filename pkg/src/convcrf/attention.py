"""Identity-masked multi-head attention over utterance sequences.

Attention scores for same-speaker history flow through a self subspace and
scores for other-speaker history through a separate other subspace; positions
outside the causal triangle are excluded entirely (weight exactly 0). Position
information enters through untied position query/key projections added to the
content scores, never through the value path.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn

from .conversation import Conversation


class SequenceTooLong(ValueError):
    pass


def build_identity_masks(conv: Conversation) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (M_s, M_o) masks, each T x T.

    M_s[t, tau]: tau <= t and same speaker (diagonal included so no row is
    fully masked). M_o[t, tau]: tau < t and different speaker. The two are
    disjoint and their union is the causal triangle.
    """
    spk = conv.speakers
    T = len(spk)
    same = np.array([[spk[tau] == spk[t] for tau in range(T)] for t in range(T)])
    causal = np.tril(np.ones((T, T), dtype=bool))
    m_s = causal & same
    m_o = causal & ~same & ~np.eye(T, dtype=bool)
    return m_s, m_o


class IdentityMaskedAttention(nn.Module):
    """One multi-head attention block with per-identity query subspaces."""

    def __init__(self, d_model: int, num_heads: int, dropout: float = 0.0):
        super().__init__()
        if d_model % num_heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by {num_heads} heads")
        self.d_model = d_model
        self.num_heads = num_heads
        self.d_head = d_model // num_heads
        self.q_self_u = nn.Linear(d_model, d_model, bias=False)
        self.q_other_u = nn.Linear(d_model, d_model, bias=False)
        self.q_self_p = nn.Linear(d_model, d_model, bias=False)
        self.q_other_p = nn.Linear(d_model, d_model, bias=False)
        self.k_u = nn.Linear(d_model, d_model, bias=False)
        self.k_p = nn.Linear(d_model, d_model, bias=False)
        self.v = nn.Linear(d_model, d_model, bias=False)
        self.out = nn.Linear(d_model, d_model, bias=False)
        self.attn_dropout = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        T = x.shape[0]
        return x.view(T, self.num_heads, self.d_head).transpose(0, 1)  # (H, T, d_head)

    def scores(
        self, x: torch.Tensor, pos: torch.Tensor, m_s: torch.Tensor, m_o: torch.Tensor
    ) -> torch.Tensor:
        """Combined pre-softmax scores (H, T, T); excluded positions are -inf."""
        scale = 1.0 / math.sqrt(self.d_head)
        k_u = self._split(self.k_u(x))
        k_p = self._split(self.k_p(pos))
        s_self = torch.matmul(self._split(self.q_self_u(x)), k_u.transpose(1, 2))
        s_self = s_self + torch.matmul(self._split(self.q_self_p(pos)), k_p.transpose(1, 2))
        s_other = torch.matmul(self._split(self.q_other_u(x)), k_u.transpose(1, 2))
        s_other = s_other + torch.matmul(self._split(self.q_other_p(pos)), k_p.transpose(1, 2))
        combined = torch.where(m_s, s_self * scale, torch.full_like(s_self, -math.inf))
        combined = torch.where(m_o, s_other * scale, combined)
        return combined

    def attention(
        self, x: torch.Tensor, pos: torch.Tensor, m_s: torch.Tensor, m_o: torch.Tensor
    ) -> torch.Tensor:
        """Row-stochastic attention weights (H, T, T)."""
        return torch.softmax(self.scores(x, pos, m_s, m_o), dim=-1)

    def forward(self, x, pos, m_s, m_o):
        attn = self.attn_dropout(self.attention(x, pos, m_s, m_o))
        ctx = torch.matmul(attn, self._split(self.v(x)))  # (H, T, d_head)
        ctx = ctx.transpose(0, 1).reshape(x.shape[0], self.d_model)
        return self.out(ctx)


class ImmhaLayer(nn.Module):
    def __init__(self, d_model: int, num_heads: int, d_ff: int, dropout: float = 0.0):
        super().__init__()
        self.attn = IdentityMaskedAttention(d_model, num_heads, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(
            nn.Linear(d_model, d_ff), nn.ReLU(), nn.Dropout(dropout), nn.Linear(d_ff, d_model)
        )

    def forward(self, x, pos, m_s, m_o):
        x = self.norm1(x + self.attn(x, pos, m_s, m_o))
        x = self.norm2(x + self.ff(x))
        return x


class ImmhaEncoder(nn.Module):
    """Stack of identity-masked attention layers with a shared position table."""

    def __init__(
        self,
        d_model: int,
        num_heads: int,
        depth: int,
        d_ff: int | None = None,
        max_len: int = 512,
        dropout: float = 0.0,
    ):
        super().__init__()
        d_ff = d_ff if d_ff is not None else 4 * d_model
        self.max_len = max_len
        self.pos_table = nn.Parameter(torch.zeros(max_len, d_model))
        nn.init.normal_(self.pos_table, std=0.02)
        self.layers = nn.ModuleList(
            ImmhaLayer(d_model, num_heads, d_ff, dropout) for _ in range(depth)
        )

    def forward(self, x: torch.Tensor, conv: Conversation) -> torch.Tensor:
        T = x.shape[0]
        if T > self.max_len:
            raise SequenceTooLong(f"T={T} exceeds position table length {self.max_len}")
        m_s_np, m_o_np = build_identity_masks(conv)
        m_s = torch.from_numpy(m_s_np)
        m_o = torch.from_numpy(m_o_np)
        pos = self.pos_table[:T]
        for layer in self.layers:
            x = layer(x, pos, m_s, m_o)
        return x
