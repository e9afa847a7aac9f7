import numpy as np
import pytest

from convcrf.conversation import moment_other, moment_self, validate_conversation
from convcrf.synth import InvalidConfig, SynthConfig, class_means, generate_dataset


class TestConfig:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(InvalidConfig):
            SynthConfig(p_inertia=0.5, p_contagion=0.5, p_random=0.5)

    def test_noise_positive(self):
        with pytest.raises(InvalidConfig):
            SynthConfig(noise=0.0)


class TestGeneration:
    def test_reproducible(self):
        cfg = SynthConfig(seed=5)
        a = generate_dataset(cfg, 5)
        b = generate_dataset(cfg, 5)
        for ca, cb in zip(a, b):
            assert ca.speakers == cb.speakers
            assert ca.gold_labels() == cb.gold_labels()
            np.testing.assert_array_equal(ca.feature_matrix(), cb.feature_matrix())

    def test_valid_conversations(self):
        for conv in generate_dataset(SynthConfig(num_speakers=3, seed=2), 20):
            validate_conversation(conv)

    def test_pure_inertia_single_speaker(self):
        cfg = SynthConfig(
            p_inertia=1.0, p_contagion=0.0, p_random=0.0,
            num_speakers=1, turn_switch=0.0, seed=1,
        )
        for conv in generate_dataset(cfg, 10):
            labels = conv.gold_labels()
            assert all(y == labels[0] for y in labels)

    def test_pure_random_is_uniform(self):
        cfg = SynthConfig(
            p_inertia=0.0, p_contagion=0.0, p_random=1.0,
            min_len=10, max_len=10, seed=3,
        )
        labels = [y for c in generate_dataset(cfg, 1000) for y in c.gold_labels()]
        n, K = len(labels), cfg.num_labels
        assert n == 10000
        sigma = np.sqrt((1 / K) * (1 - 1 / K) / n)
        for k in range(K):
            freq = labels.count(k) / n
            assert abs(freq - 1 / K) < 3 * sigma

    def test_inertia_rate_matches_expectation(self):
        # with contagion off, P(y_t = y_{s(t)}) = p_inertia + (1-p_inertia)/K
        p = 0.6
        cfg = SynthConfig(
            p_inertia=p, p_contagion=0.0, p_random=0.4,
            min_len=10, max_len=10, seed=4,
        )
        hits = total = 0
        for conv in generate_dataset(cfg, 1000):
            labels = conv.gold_labels()
            for t in range(len(conv)):
                s = moment_self(conv, t)
                if s is not None:
                    total += 1
                    hits += int(labels[t] == labels[s])
        expected = p + (1 - p) / cfg.num_labels
        sigma = np.sqrt(expected * (1 - expected) / total)
        assert total >= 5000
        assert abs(hits / total - expected) < 3 * sigma

    def test_contagion_rate_matches_expectation(self):
        p = 0.5
        cfg = SynthConfig(
            p_inertia=0.0, p_contagion=p, p_random=0.5,
            min_len=10, max_len=10, seed=5,
        )
        hits = total = 0
        for conv in generate_dataset(cfg, 1000):
            labels = conv.gold_labels()
            for t in range(len(conv)):
                o = moment_other(conv, t)
                if o is not None:
                    total += 1
                    hits += int(labels[t] == labels[o])
        expected = p + (1 - p) / cfg.num_labels
        sigma = np.sqrt(expected * (1 - expected) / total)
        assert total >= 5000
        assert abs(hits / total - expected) < 3 * sigma

    def test_class_means_orthonormal_scaled(self):
        cfg = SynthConfig(sep=2.0)
        m = class_means(cfg)
        gram = m @ m.T
        np.testing.assert_allclose(gram, 4.0 * np.eye(cfg.num_labels), atol=1e-10)
