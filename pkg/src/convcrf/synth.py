"""Synthetic conversation generator with controllable inertia/contagion dynamics.

Each utterance's label is drawn by one categorical choice: copy the same
speaker's previous label (inertia), copy the interlocutor's latest label
(contagion), or draw uniformly at random; an absent source falls back to
uniform. Features are a fixed class-mean vector plus Gaussian noise, so
dataset difficulty is governed by the separation/noise ratio alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conversation import Conversation, Utterance

_CLASS_MEAN_SEED = 24601  # class means are fixed, independent of the data seed


class InvalidConfig(ValueError):
    pass


@dataclass
class SynthConfig:
    num_labels: int = 4
    num_speakers: int = 2
    min_len: int = 6
    max_len: int = 12
    p_inertia: float = 0.6
    p_contagion: float = 0.25
    p_random: float = 0.15
    turn_switch: float = 0.7
    sep: float = 1.0
    noise: float = 1.0
    d_in: int = 16
    seed: int = 0

    def __post_init__(self):
        probs = (self.p_inertia, self.p_contagion, self.p_random)
        if any(p < 0 or p > 1 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidConfig(f"probabilities {probs} must be in [0,1] and sum to 1")
        if self.noise <= 0:
            raise InvalidConfig("noise must be positive")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise InvalidConfig("bad length range")
        if self.num_labels > self.d_in:
            raise InvalidConfig("d_in must be >= num_labels for orthogonal class means")


def class_means(cfg: SynthConfig) -> np.ndarray:
    """Deterministic orthonormal class-mean vectors scaled by cfg.sep, (K, d_in)."""
    rng = np.random.default_rng(_CLASS_MEAN_SEED)
    g = rng.standard_normal((cfg.d_in, cfg.num_labels))
    q, _ = np.linalg.qr(g)
    return cfg.sep * q.T[: cfg.num_labels]


def generate_conversation(
    cfg: SynthConfig, rng: np.random.Generator, conv_id: str = "synth"
) -> Conversation:
    means = class_means(cfg)
    T = int(rng.integers(cfg.min_len, cfg.max_len + 1))
    speakers: list[int] = [int(rng.integers(cfg.num_speakers))]
    for _ in range(1, T):
        prev = speakers[-1]
        if cfg.num_speakers > 1 and rng.random() < cfg.turn_switch:
            choices = [s for s in range(cfg.num_speakers) if s != prev]
            speakers.append(int(choices[rng.integers(len(choices))]))
        else:
            speakers.append(prev)
    labels: list[int] = []
    last_by_speaker: dict[int, int] = {}
    last_any: list[tuple[int, int]] = []  # (speaker, label) history
    for t in range(T):
        spk = speakers[t]
        mode = rng.choice(3, p=[cfg.p_inertia, cfg.p_contagion, cfg.p_random])
        label = None
        if mode == 0 and spk in last_by_speaker:
            label = last_by_speaker[spk]
        elif mode == 1:
            for s_prev, y_prev in reversed(last_any):
                if s_prev != spk:
                    label = y_prev
                    break
        if label is None:
            label = int(rng.integers(cfg.num_labels))
        labels.append(label)
        last_by_speaker[spk] = label
        last_any.append((spk, label))
    utterances = []
    for t in range(T):
        feats = means[labels[t]] + cfg.noise * rng.standard_normal(cfg.d_in)
        utterances.append(
            Utterance(t, f"S{speakers[t]}", feats, labels[t])
        )
    return Conversation(conv_id, tuple(utterances), cfg.num_labels)


def generate_dataset(cfg: SynthConfig, count: int, prefix: str = "synth") -> list[Conversation]:
    rng = np.random.default_rng(cfg.seed)
    return [generate_conversation(cfg, rng, f"{prefix}-{i}") for i in range(count)]
