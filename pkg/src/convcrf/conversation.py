"""Conversation data model: utterances, speaker blocks, moment lookups, dyadic segments.

All indices are 0-based. Everything here is a pure function over immutable
inputs, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ConversationError(ValueError):
    """Base class for conversation validation failures."""


class EmptyConversation(ConversationError):
    def __init__(self, conv_id: str = ""):
        super().__init__(f"conversation {conv_id!r} has no utterances")


class FeatureDimMismatch(ConversationError):
    def __init__(self, index: int, expected: int, got: int):
        self.index = index
        super().__init__(
            f"utterance {index}: feature dim {got} != expected {expected}"
        )


class LabelOutOfRange(ConversationError):
    def __init__(self, index: int, label: int, num_labels: int):
        self.index = index
        super().__init__(
            f"utterance {index}: label {label} outside [0, {num_labels})"
        )


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: str
    features: np.ndarray
    gold_label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]
    num_labels: int

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def speakers(self) -> list[str]:
        return [u.speaker for u in self.utterances]

    @property
    def feature_dim(self) -> int:
        return int(self.utterances[0].features.shape[0])

    def feature_matrix(self) -> np.ndarray:
        return np.stack([u.features for u in self.utterances])

    def gold_labels(self) -> list[Optional[int]]:
        return [u.gold_label for u in self.utterances]


@dataclass(frozen=True)
class SpeakerBlock:
    speaker: str
    start: int
    end: int  # inclusive


@dataclass(frozen=True)
class DyadicSegment:
    start: int
    end: int  # inclusive
    participants: tuple[str, ...]

    def __contains__(self, t: int) -> bool:
        return self.start <= t <= self.end


def validate_conversation(conv: Conversation) -> None:
    """Check all structural invariants, raising on the first violation."""
    if len(conv.utterances) == 0:
        raise EmptyConversation(conv.id)
    d = conv.utterances[0].features.shape[0]
    for t, u in enumerate(conv.utterances):
        if u.index != t:
            raise ConversationError(f"utterance {t}: index field is {u.index}")
        if not u.speaker:
            raise ConversationError(f"utterance {t}: empty speaker identity")
        if u.features.ndim != 1 or u.features.shape[0] != d:
            raise FeatureDimMismatch(t, d, int(np.atleast_1d(u.features).shape[-1]))
        if u.gold_label is not None and not (0 <= u.gold_label < conv.num_labels):
            raise LabelOutOfRange(t, u.gold_label, conv.num_labels)


def moment_self(conv: Conversation, t: int) -> Optional[int]:
    """Largest tau < t with the same speaker as utterance t, or None."""
    if not (0 <= t < len(conv)):
        raise IndexOutOfRange(t)
    spk = conv.utterances[t].speaker
    for tau in range(t - 1, -1, -1):
        if conv.utterances[tau].speaker == spk:
            return tau
    return None


def moment_other(conv: Conversation, t: int) -> Optional[int]:
    """Largest tau < t with a different speaker than utterance t, or None."""
    if not (0 <= t < len(conv)):
        raise IndexOutOfRange(t)
    spk = conv.utterances[t].speaker
    for tau in range(t - 1, -1, -1):
        if conv.utterances[tau].speaker != spk:
            return tau
    return None


def speaker_blocks(conv: Conversation) -> list[SpeakerBlock]:
    """Maximal runs of consecutive same-speaker utterances, in order."""
    blocks: list[SpeakerBlock] = []
    start = 0
    spks = conv.speakers
    for t in range(1, len(conv)):
        if spks[t] != spks[start]:
            blocks.append(SpeakerBlock(spks[start], start, t - 1))
            start = t
    blocks.append(SpeakerBlock(spks[start], start, len(conv) - 1))
    return blocks


# A boundary utterance belongs to exactly one segment (no overlap), so every
# score term is counted once. Flip only with a corresponding NLL rework.
SEGMENT_BOUNDARIES_OVERLAP = False


def dyadic_segments(conv: Conversation) -> list[DyadicSegment]:
    """Greedy left-to-right partition into maximal stretches of <= 2 speakers.

    When admitting utterance t would introduce a third distinct speaker, the
    current segment closes at t-1 and a new one starts at t.
    """
    segments: list[DyadicSegment] = []
    spks = conv.speakers
    start = 0
    active: list[str] = [spks[0]]
    for t in range(1, len(conv)):
        s = spks[t]
        if s not in active:
            if len(active) == 2:
                segments.append(DyadicSegment(start, t - 1, tuple(active)))
                start = t
                active = [s]
            else:
                active.append(s)
        # same speaker set: keep extending
    segments.append(DyadicSegment(start, len(conv) - 1, tuple(active)))
    return segments


def segment_of(segments: Sequence[DyadicSegment], t: int) -> DyadicSegment:
    for seg in segments:
        if t in seg:
            return seg
    raise IndexOutOfRange(t)
