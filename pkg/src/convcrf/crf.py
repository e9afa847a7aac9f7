"""Speaker-aware skip-chain CRF over dyadic conversation segments.

Per segment with participants P and Q, the forward state after utterance t is
the pair (latest label of P, latest label of Q); each axis has size K+1, with
the extra index meaning "has not spoken yet". Processing utterance t spoken
by P with candidate label y adds

    emissions[t, y] + self_trans[prev P label, y] + other_trans[latest Q label, y]

omitting any term whose argument is the not-spoken index, then replaces P's
coordinate with y. All recursions run in the log domain. Unreachable states
carry a large negative finite constant instead of -inf so the computation
stays differentiable; exp(NEG - anything_reasonable) is exactly 0 in float64,
so these states contribute neither value nor gradient.

Predecessor (self/other) lookups are confined to the utterance's segment,
which is what removes the skip-chain edges spanning beyond a dyad.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch

from .conversation import Conversation, DyadicSegment, dyadic_segments

NEG = -1.0e30  # log-domain stand-in for -inf that keeps autograd NaN-free


class LabelOutOfRange(ValueError):
    pass


class MissingGoldLabel(ValueError):
    def __init__(self, t: int):
        self.t = t
        super().__init__(f"utterance {t} has no gold label")


@dataclass
class CrfPotentials:
    """Emission scores plus the two learnable transition score matrices."""

    emissions: torch.Tensor  # (T, K)
    self_trans: torch.Tensor  # (K, K), [previous own label, current label]
    other_trans: torch.Tensor  # (K, K), [interlocutor's latest label, current label]

    def __post_init__(self):
        self.emissions = torch.as_tensor(self.emissions, dtype=torch.float64)
        self.self_trans = torch.as_tensor(self.self_trans, dtype=torch.float64)
        self.other_trans = torch.as_tensor(self.other_trans, dtype=torch.float64)

    @property
    def num_labels(self) -> int:
        return self.emissions.shape[1]


@dataclass
class SegmentTensors:
    segment: DyadicSegment
    forward: list  # A_t, one (K+1, K+1) log tensor per utterance in the segment
    backward: list  # B_t, aligned with forward
    log_z: torch.Tensor


@dataclass
class DpTensors:
    segments: list
    log_z: torch.Tensor


def segment_moments(
    conv: Conversation, seg: DyadicSegment
) -> tuple[list[Optional[int]], list[Optional[int]]]:
    """Within-segment self/other predecessor indices for each t in the segment."""
    selfs: list[Optional[int]] = []
    others: list[Optional[int]] = []
    for t in range(seg.start, seg.end + 1):
        spk = conv.utterances[t].speaker
        s = o = None
        for tau in range(t - 1, seg.start - 1, -1):
            other_spk = conv.utterances[tau].speaker
            if other_spk == spk and s is None:
                s = tau
            elif other_spk != spk and o is None:
                o = tau
            if s is not None and o is not None:
                break
        selfs.append(s)
        others.append(o)
    return selfs, others


def _extended(trans: torch.Tensor) -> torch.Tensor:
    """Append a zero row for the not-spoken predecessor index."""
    K = trans.shape[1]
    return torch.cat([trans, trans.new_zeros(1, K)], dim=0)  # (K+1, K)


def _step_tensor(
    pots: CrfPotentials, t: int, speaker_axis: int
) -> torch.Tensor:
    """Log-score M_t[c0, c1, y] for moving from state (c0, c1) via label y.

    speaker_axis is 0 or 1: which state coordinate belongs to the speaker of t.
    """
    em = pots.emissions[t]  # (K,)
    self_e = _extended(pots.self_trans)  # (K+1, K)
    other_e = _extended(pots.other_trans)
    if speaker_axis == 0:
        return em.view(1, 1, -1) + self_e.unsqueeze(1) + other_e.unsqueeze(0)
    return em.view(1, 1, -1) + self_e.unsqueeze(0) + other_e.unsqueeze(1)


def _speaker_axes(conv: Conversation, seg: DyadicSegment) -> list[int]:
    order: list[str] = []
    axes = []
    for t in range(seg.start, seg.end + 1):
        spk = conv.utterances[t].speaker
        if spk not in order:
            order.append(spk)
        axes.append(order.index(spk))
    return axes


def _forward_segment(
    conv: Conversation, pots: CrfPotentials, seg: DyadicSegment
) -> SegmentTensors:
    K = pots.num_labels
    axes = _speaker_axes(conv, seg)
    a = pots.emissions.new_full((K + 1, K + 1), NEG)
    a[K, K] = 0.0
    forward = []
    steps = []
    for i, t in enumerate(range(seg.start, seg.end + 1)):
        m = _step_tensor(pots, t, axes[i])  # (K+1, K+1, K)
        steps.append(m)
        total = a.unsqueeze(2) + m
        if axes[i] == 0:
            new_sub = torch.logsumexp(total, dim=0).transpose(0, 1)  # (K, K+1)
            a = torch.cat([new_sub, a.new_full((1, K + 1), NEG)], dim=0)
        else:
            new_sub = torch.logsumexp(total, dim=1)  # (K+1, K)
            a = torch.cat([new_sub, a.new_full((K + 1, 1), NEG)], dim=1)
        forward.append(a)
    backward = [None] * len(forward)
    b = pots.emissions.new_zeros(K + 1, K + 1)
    backward[-1] = b
    for i in range(len(forward) - 1, 0, -1):
        m = steps[i]
        if axes[i] == 0:
            nxt = b[:K, :].transpose(0, 1)  # (K+1, K) indexed [c1, y]
            term = m + nxt.unsqueeze(0)
        else:
            nxt = b[:, :K]  # (K+1, K) indexed [c0, y]
            term = m + nxt.unsqueeze(1)
        b = torch.logsumexp(term, dim=2)
        backward[i - 1] = b
    log_z = torch.logsumexp(forward[-1].reshape(-1), dim=0)
    return SegmentTensors(seg, forward, backward, log_z)


def log_partition(
    conv: Conversation,
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> tuple[torch.Tensor, DpTensors]:
    """Exact log Z plus the per-segment forward/backward tensors.

    log Z of the conversation is the sum of the independent segment values.
    Differentiable with respect to all potentials.
    """
    if segments is None:
        segments = dyadic_segments(conv)
    seg_tensors = [_forward_segment(conv, pots, seg) for seg in segments]
    log_z = sum(st.log_z for st in seg_tensors)
    return log_z, DpTensors(seg_tensors, log_z)


def score_sequence(
    conv: Conversation,
    labels: Sequence[int],
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> torch.Tensor:
    """Unnormalized log-score of one label assignment."""
    if segments is None:
        segments = dyadic_segments(conv)
    K = pots.num_labels
    for t, y in enumerate(labels):
        if not (0 <= y < K):
            raise LabelOutOfRange(f"label {y} at position {t} outside [0, {K})")
    total = pots.emissions.new_zeros(())
    for seg in segments:
        selfs, others = segment_moments(conv, seg)
        for i, t in enumerate(range(seg.start, seg.end + 1)):
            total = total + pots.emissions[t, labels[t]]
            if selfs[i] is not None:
                total = total + pots.self_trans[labels[selfs[i]], labels[t]]
            if others[i] is not None:
                total = total + pots.other_trans[labels[others[i]], labels[t]]
    return total


def nll_loss(
    conv: Conversation,
    gold: Sequence[Optional[int]],
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> torch.Tensor:
    """-log P(gold | x) = log Z - score(gold); always >= 0."""
    labels = []
    for t, y in enumerate(gold):
        if y is None:
            raise MissingGoldLabel(t)
        labels.append(y)
    log_z, _ = log_partition(conv, pots, segments)
    return log_z - score_sequence(conv, labels, pots, segments)


def marginals(
    conv: Conversation,
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> torch.Tensor:
    """Per-utterance label marginals P(y_t = k | x), shape (T, K)."""
    if segments is None:
        segments = dyadic_segments(conv)
    _, dp = log_partition(conv, pots, segments)
    K = pots.num_labels
    out = pots.emissions.new_zeros(len(conv), K)
    for st in dp.segments:
        axes = _speaker_axes(conv, st.segment)
        for i, t in enumerate(range(st.segment.start, st.segment.end + 1)):
            joint = torch.exp(st.forward[i] + st.backward[i] - st.log_z)
            out[t] = joint.sum(dim=1 - axes[i])[: K]
    return out


def crf_gradients(
    conv: Conversation,
    gold: Sequence[Optional[int]],
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Closed-form NLL gradients: expected feature counts minus gold counts.

    Returns (d_emissions, d_self_trans, d_other_trans). Computed from the
    forward/backward tensors directly, independently of autograd.
    """
    labels = []
    for t, y in enumerate(gold):
        if y is None:
            raise MissingGoldLabel(t)
        labels.append(y)
    if segments is None:
        segments = dyadic_segments(conv)
    K = pots.num_labels
    with torch.no_grad():
        _, dp = log_partition(conv, pots, segments)
        g_em = pots.emissions.new_zeros(len(conv), K)
        g_self = pots.emissions.new_zeros(K, K)
        g_other = pots.emissions.new_zeros(K, K)
        for st in dp.segments:
            seg = st.segment
            axes = _speaker_axes(conv, seg)
            selfs, others = segment_moments(conv, seg)
            prev_a = pots.emissions.new_full((K + 1, K + 1), NEG)
            prev_a[K, K] = 0.0
            for i, t in enumerate(range(seg.start, seg.end + 1)):
                m = _step_tensor(pots, t, axes[i])
                b = st.backward[i]
                if axes[i] == 0:
                    b_new = b[:K, :].transpose(0, 1).unsqueeze(0)  # [*, c1, y]
                else:
                    b_new = b[:, :K].unsqueeze(1)  # [c0, *, y]
                q = torch.exp(prev_a.unsqueeze(2) + m + b_new - st.log_z)
                # q[c0, c1, y]: joint prob of state (c0, c1) before t and label y
                g_em[t] += q.sum(dim=(0, 1))
                self_ax, other_ax = axes[i], 1 - axes[i]
                g_self += q.sum(dim=other_ax)[:K, :]
                g_other += q.sum(dim=self_ax)[:K, :]
                prev_a = st.forward[i]
            for i, t in enumerate(range(seg.start, seg.end + 1)):
                g_em[t, labels[t]] -= 1.0
                if selfs[i] is not None:
                    g_self[labels[selfs[i]], labels[t]] -= 1.0
                if others[i] is not None:
                    g_other[labels[others[i]], labels[t]] -= 1.0
    return g_em, g_self, g_other


def viterbi_decode(
    conv: Conversation,
    pots: CrfPotentials,
    segments: Optional[Sequence[DyadicSegment]] = None,
) -> list[int]:
    """Exact argmax labeling; ties go to the smallest label, earliest position.

    Per segment, a backward max table gives the best achievable completion
    from every state, and a forward greedy pass then picks the smallest label
    attaining the optimum at each position.
    """
    if segments is None:
        segments = dyadic_segments(conv)
    K = pots.num_labels
    labels: list[int] = [0] * len(conv)
    with torch.no_grad():
        for seg in segments:
            axes = _speaker_axes(conv, seg)
            length = seg.end - seg.start + 1
            steps = [
                _step_tensor(pots, seg.start + i, axes[i]) for i in range(length)
            ]
            # best[i][c0, c1]: max score of utterances i..end given state before i
            best = [None] * (length + 1)
            best[length] = pots.emissions.new_zeros(K + 1, K + 1)
            for i in range(length - 1, -1, -1):
                nxt = best[i + 1]
                if axes[i] == 0:
                    cont = nxt[:K, :].transpose(0, 1).unsqueeze(0)
                else:
                    cont = nxt[:, :K].unsqueeze(1)
                best[i] = (steps[i] + cont).max(dim=2).values
            state = (K, K)
            for i in range(length):
                nxt = best[i + 1]
                if axes[i] == 0:
                    cand = steps[i][state[0], state[1], :] + nxt[:K, state[1]]
                else:
                    cand = steps[i][state[0], state[1], :] + nxt[state[0], :K]
                y = int(torch.argmax(cand))  # first max = smallest label
                labels[seg.start + i] = y
                state = (y, state[1]) if axes[i] == 0 else (state[0], y)
    return labels


# ---------------------------------------------------------------------------
# Linear-chain baseline: one speaker-blind transition matrix over adjacent
# utterances, no segmentation.
# ---------------------------------------------------------------------------


def linear_chain_log_partition(
    emissions: torch.Tensor, trans: torch.Tensor
) -> torch.Tensor:
    emissions = torch.as_tensor(emissions, dtype=torch.float64)
    trans = torch.as_tensor(trans, dtype=torch.float64)
    alpha = emissions[0]
    for t in range(1, emissions.shape[0]):
        alpha = emissions[t] + torch.logsumexp(alpha.unsqueeze(1) + trans, dim=0)
    return torch.logsumexp(alpha, dim=0)


def linear_chain_score(
    emissions: torch.Tensor, trans: torch.Tensor, labels: Sequence[int]
) -> torch.Tensor:
    emissions = torch.as_tensor(emissions, dtype=torch.float64)
    trans = torch.as_tensor(trans, dtype=torch.float64)
    total = emissions[0, labels[0]]
    for t in range(1, emissions.shape[0]):
        total = total + emissions[t, labels[t]] + trans[labels[t - 1], labels[t]]
    return total


def linear_chain_nll(
    emissions: torch.Tensor, trans: torch.Tensor, gold: Sequence[Optional[int]]
) -> torch.Tensor:
    labels = []
    for t, y in enumerate(gold):
        if y is None:
            raise MissingGoldLabel(t)
        labels.append(y)
    return linear_chain_log_partition(emissions, trans) - linear_chain_score(
        emissions, trans, labels
    )


def linear_chain_viterbi(emissions: torch.Tensor, trans: torch.Tensor) -> list[int]:
    """Exact argmax with the same smallest-label, earliest-position tie rule."""
    emissions = torch.as_tensor(emissions, dtype=torch.float64)
    trans = torch.as_tensor(trans, dtype=torch.float64)
    T, K = emissions.shape
    with torch.no_grad():
        best = [None] * (T + 1)
        best[T] = emissions.new_zeros(K)
        for t in range(T - 1, 0, -1):
            best[t] = (trans + (emissions[t] + best[t + 1]).unsqueeze(0)).max(dim=1).values
        labels = [int(torch.argmax(emissions[0] + best[1]))]
        for t in range(1, T):
            cand = trans[labels[-1]] + emissions[t] + best[t + 1]
            labels.append(int(torch.argmax(cand)))
    return labels
