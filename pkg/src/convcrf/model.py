"""End-to-end conversation labeling model.

Raw utterance features go through an input projection into the attention
encoder (global context) and directly into the dialogue GRU (local context);
the attention output, GRU output, and raw features are concatenated and
projected to per-label emission scores. Decoding/loss is handled by one of
three heads: the skip-chain CRF, a linear-chain CRF, or an independent
softmax over utterances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from . import crf
from .attention import ImmhaEncoder
from .conversation import Conversation, dyadic_segments
from .crf import CrfPotentials
from .recurrent import DecayConfig, DiaGruEncoder

DECODERS = ("skipcrf", "linear", "softmax")


@dataclass
class ModelConfig:
    d_in: int
    num_labels: int
    d_model: int = 64
    d_h: int = 32
    num_heads: int = 2
    depth_immha: int = 1
    depth_diagru: int = 1
    d_ff: int | None = None
    max_len: int = 512
    dropout: float = 0.0
    decoder: str = "skipcrf"
    decay: DecayConfig = field(default_factory=DecayConfig)

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")


class ConversationModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        K = cfg.num_labels
        self.input_proj = nn.Linear(cfg.d_in, cfg.d_model)
        self.immha = ImmhaEncoder(
            cfg.d_model, cfg.num_heads, cfg.depth_immha, cfg.d_ff, cfg.max_len, cfg.dropout
        )
        self.diagru = DiaGruEncoder(cfg.d_in, cfg.d_h, cfg.depth_diagru, cfg.decay)
        self.feature_dropout = nn.Dropout(cfg.dropout)
        self.emission_proj = nn.Linear(cfg.d_model + cfg.d_h + cfg.d_in, K)
        self.self_trans = nn.Parameter(torch.zeros(K, K))
        self.other_trans = nn.Parameter(torch.zeros(K, K))
        self.chain_trans = nn.Parameter(torch.zeros(K, K))
        self.double()
        self._glorot_init()

    def _glorot_init(self):
        for m in self.modules():
            if isinstance(m, nn.Linear):
                nn.init.xavier_uniform_(m.weight)
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
        # transitions stay zero: the initial CRF is emission-only

    def extraction_parameters(self):
        """Encoder weights (feature-extraction group)."""
        mods = [self.input_proj, self.immha, self.diagru]
        for m in mods:
            yield from m.parameters()

    def classification_parameters(self):
        """Emission projection plus transition matrices."""
        yield from self.emission_proj.parameters()
        yield self.self_trans
        yield self.other_trans
        yield self.chain_trans

    def emissions(self, conv: Conversation, features: torch.Tensor) -> torch.Tensor:
        """Per-utterance label scores, shape (T, K)."""
        x = torch.as_tensor(features, dtype=torch.float64)
        global_ctx = self.immha(self.input_proj(x), conv)
        local_ctx = self.diagru(x, conv)
        fused = torch.cat([global_ctx, local_ctx, x], dim=1)
        return self.emission_proj(self.feature_dropout(fused))

    def potentials(self, conv: Conversation, features: torch.Tensor) -> CrfPotentials:
        return CrfPotentials(
            self.emissions(conv, features), self.self_trans, self.other_trans
        )

    def conversation_loss(self, conv: Conversation) -> torch.Tensor:
        """NLL of the gold labels under the configured decoder."""
        features = torch.from_numpy(conv.feature_matrix())
        em = self.emissions(conv, features)
        gold = conv.gold_labels()
        if self.cfg.decoder == "skipcrf":
            pots = CrfPotentials(em, self.self_trans, self.other_trans)
            return crf.nll_loss(conv, gold, pots)
        if self.cfg.decoder == "linear":
            return crf.linear_chain_nll(em, self.chain_trans, gold)
        for t, y in enumerate(gold):
            if y is None:
                raise crf.MissingGoldLabel(t)
        targets = torch.tensor(gold, dtype=torch.long)
        return nn.functional.cross_entropy(em, targets, reduction="sum")

    def predict(self, conv: Conversation) -> list[int]:
        self.eval()
        with torch.no_grad():
            features = torch.from_numpy(conv.feature_matrix())
            em = self.emissions(conv, features)
            if self.cfg.decoder == "skipcrf":
                pots = CrfPotentials(em, self.self_trans, self.other_trans)
                return crf.viterbi_decode(conv, pots, dyadic_segments(conv))
            if self.cfg.decoder == "linear":
                return crf.linear_chain_viterbi(em, self.chain_trans)
            return em.argmax(dim=1).tolist()
