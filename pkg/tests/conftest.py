"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import torch

from convcrf.conversation import Conversation, Utterance


def make_conv(speakers, labels=None, d_in=4, num_labels=4, seed=0, features=None):
    rng = np.random.default_rng(seed)
    if features is None:
        features = rng.normal(size=(len(speakers), d_in))
    utts = tuple(
        Utterance(t, s, features[t], None if labels is None else labels[t])
        for t, s in enumerate(speakers)
    )
    return Conversation("test", utts, num_labels)


def random_speakers(rng, length, max_speakers=3):
    n = int(rng.integers(1, max_speakers + 1))
    return [f"P{rng.integers(n)}" for _ in range(length)]


# --- independent brute-force oracle -----------------------------------------
# Scores a label assignment straight from the definitions: within each
# segment, scan backwards for the nearest same/other-speaker predecessor.


def oracle_score(conv, labels, emissions, self_trans, other_trans, segments):
    total = 0.0
    for seg in segments:
        for t in range(seg.start, seg.end + 1):
            total += emissions[t][labels[t]]
            spk = conv.utterances[t].speaker
            s = o = None
            for tau in range(t - 1, seg.start - 1, -1):
                if conv.utterances[tau].speaker == spk:
                    if s is None:
                        s = tau
                elif o is None:
                    o = tau
            if s is not None:
                total += self_trans[labels[s]][labels[t]]
            if o is not None:
                total += other_trans[labels[o]][labels[t]]
    return total


def enumerate_scores(conv, emissions, self_trans, other_trans, segments):
    """Score of every label assignment, in lexicographic label order."""
    K = len(emissions[0])
    T = len(conv)
    return [
        oracle_score(conv, y, emissions, self_trans, other_trans, segments)
        for y in itertools.product(range(K), repeat=T)
    ]


def logsumexp_list(values):
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
