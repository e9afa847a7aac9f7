"""Dialogue-aware gated recurrent cell with self/other predecessor links.

Each utterance's cell reads the hidden state of the same speaker's previous
utterance and of the interlocutor's most recent utterance, each scaled by an
exponential decay in the utterance-index gap. An absent predecessor
contributes a zero vector (decay 0), so the branch vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn

from .conversation import Conversation, moment_other, moment_self


class InvalidGap(ValueError):
    pass


@dataclass(frozen=True)
class DecayConfig:
    mu_self: float = 3.0
    mu_other: float = 0.0
    gamma_self: float = 1.0
    gamma_other: float = 2.0

    def __post_init__(self):
        if self.gamma_self <= 0 or self.gamma_other <= 0:
            raise ValueError("shape constants must be positive")


def decay_factor(t: int, tau: Optional[int], mu: float, gamma: float) -> float:
    """1 / (1 + exp((t - tau - mu) / gamma)); 0 when tau is absent."""
    if tau is None:
        return 0.0
    if tau >= t:
        raise InvalidGap(f"tau={tau} must precede t={t}")
    return 1.0 / (1.0 + math.exp((t - tau - mu) / gamma))


class DiaGruCell(nn.Module):
    """Single cell: self/other reset gates, joint update gate, candidate state.

    s = sigmoid(W_s [x ; h_self])
    o = sigmoid(W_r [x ; h_other])
    z = sigmoid(W_z [x ; h_self ; h_other])
    h~ = tanh(W_h [x ; s*h_self ; o*h_other])
    h = (1 - z) * h_self + z * h~
    """

    def __init__(self, d_in: int, d_h: int):
        super().__init__()
        self.d_in = d_in
        self.d_h = d_h
        self.w_s = nn.Linear(d_in + d_h, d_h)
        self.w_r = nn.Linear(d_in + d_h, d_h)
        self.w_z = nn.Linear(d_in + 2 * d_h, d_h)
        self.w_h = nn.Linear(d_in + 2 * d_h, d_h)

    def forward(self, x: torch.Tensor, h_self: torch.Tensor, h_other: torch.Tensor):
        s = torch.sigmoid(self.w_s(torch.cat([x, h_self])))
        o = torch.sigmoid(self.w_r(torch.cat([x, h_other])))
        z = torch.sigmoid(self.w_z(torch.cat([x, h_self, h_other])))
        h_cand = torch.tanh(self.w_h(torch.cat([x, s * h_self, o * h_other])))
        return (1.0 - z) * h_self + z * h_cand


class DiaGruEncoder(nn.Module):
    """Stacked dialogue GRU layers; layer l+1 consumes layer l's hidden states."""

    def __init__(self, d_in: int, d_h: int, depth: int = 1, decay: DecayConfig | None = None):
        super().__init__()
        self.decay = decay if decay is not None else DecayConfig()
        dims = [d_in] + [d_h] * depth
        self.cells = nn.ModuleList(DiaGruCell(dims[i], d_h) for i in range(depth))

    def forward(self, x: torch.Tensor, conv: Conversation) -> torch.Tensor:
        T = x.shape[0]
        selfs = [moment_self(conv, t) for t in range(T)]
        others = [moment_other(conv, t) for t in range(T)]
        beta_s = [decay_factor(t, selfs[t], self.decay.mu_self, self.decay.gamma_self) for t in range(T)]
        beta_o = [decay_factor(t, others[t], self.decay.mu_other, self.decay.gamma_other) for t in range(T)]
        out = x
        for cell in self.cells:
            hs: list[torch.Tensor] = []
            zero = out.new_zeros(cell.d_h)
            for t in range(T):
                h_self = beta_s[t] * hs[selfs[t]] if selfs[t] is not None else zero
                h_other = beta_o[t] * hs[others[t]] if others[t] is not None else zero
                hs.append(cell(out[t], h_self, h_other))
            out = torch.stack(hs)
        return out
