import numpy as np
import pytest
from hypothesis import given, strategies as st

from convcrf.conversation import (
    Conversation,
    EmptyConversation,
    FeatureDimMismatch,
    IndexOutOfRange,
    LabelOutOfRange,
    Utterance,
    dyadic_segments,
    moment_other,
    moment_self,
    speaker_blocks,
    validate_conversation,
)

from conftest import make_conv

speaker_lists = st.lists(st.sampled_from(["A", "B", "C", "D"]), min_size=1, max_size=25)


class TestValidate:
    def test_well_formed(self):
        conv = make_conv(["A", "B", "A"], labels=[0, 3, 2], d_in=8)
        validate_conversation(conv)

    def test_feature_dim_mismatch(self):
        utts = (
            Utterance(0, "A", np.zeros(8)),
            Utterance(1, "B", np.zeros(7)),
            Utterance(2, "A", np.zeros(8)),
        )
        with pytest.raises(FeatureDimMismatch) as e:
            validate_conversation(Conversation("c", utts, 4))
        assert e.value.index == 1

    def test_empty(self):
        with pytest.raises(EmptyConversation):
            validate_conversation(Conversation("c", (), 4))

    def test_label_out_of_range(self):
        conv = make_conv(["A"], labels=[4], num_labels=4)
        with pytest.raises(LabelOutOfRange):
            validate_conversation(conv)


class TestMoments:
    def test_self_paper_example(self):
        conv = make_conv(["A", "B", "A"])
        assert moment_self(conv, 2) == 0

    def test_self_no_predecessor(self):
        assert moment_self(make_conv(["A", "B", "A"]), 0) is None

    def test_self_scan(self):
        assert moment_self(make_conv(["A", "A", "B", "A"]), 3) == 1

    def test_other_paper_example(self):
        assert moment_other(make_conv(["A", "B", "A"]), 2) == 1

    def test_other_single_speaker_prefix(self):
        assert moment_other(make_conv(["A", "A"]), 1) is None

    def test_other_nearest_non_matching(self):
        assert moment_other(make_conv(["A", "B", "C", "A"]), 3) == 2

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            moment_self(make_conv(["A"]), 1)

    @given(speaker_lists)
    def test_moment_properties(self, speakers):
        conv = make_conv(speakers, seed=1)
        for t in range(len(speakers)):
            s = moment_self(conv, t)
            o = moment_other(conv, t)
            if s is not None:
                assert s < t and speakers[s] == speakers[t]
            if o is not None:
                assert o < t and speakers[o] != speakers[t]
            if s is not None and o is not None:
                assert s != o and speakers[s] != speakers[o]


class TestSpeakerBlocks:
    @pytest.mark.parametrize(
        "speakers,expected",
        [
            (["A", "A", "B"], [("A", 0, 1), ("B", 2, 2)]),
            (["A"], [("A", 0, 0)]),
            (["A", "B", "B", "A"], [("A", 0, 0), ("B", 1, 2), ("A", 3, 3)]),
        ],
    )
    def test_examples(self, speakers, expected):
        blocks = speaker_blocks(make_conv(speakers))
        assert [(b.speaker, b.start, b.end) for b in blocks] == expected

    @given(speaker_lists)
    def test_block_count(self, speakers):
        blocks = speaker_blocks(make_conv(speakers, seed=1))
        assert len(blocks) <= len(speakers)
        alternating = all(speakers[i] != speakers[i - 1] for i in range(1, len(speakers)))
        assert (len(blocks) == len(speakers)) == alternating
        spans = [(b.start, b.end) for b in blocks]
        covered = [t for s, e in spans for t in range(s, e + 1)]
        assert covered == list(range(len(speakers)))


class TestDyadicSegments:
    @pytest.mark.parametrize(
        "speakers,expected",
        [
            (["A", "B", "A", "B"], [(0, 3)]),
            (["A", "B", "C", "B", "C"], [(0, 1), (2, 4)]),
            (["A", "A", "A"], [(0, 2)]),
        ],
    )
    def test_examples(self, speakers, expected):
        segs = dyadic_segments(make_conv(speakers))
        assert [(s.start, s.end) for s in segs] == expected

    @given(speaker_lists)
    def test_partition_properties(self, speakers):
        conv = make_conv(speakers, seed=1)
        segs = dyadic_segments(conv)
        covered = [t for s in segs for t in range(s.start, s.end + 1)]
        assert covered == list(range(len(speakers)))
        for s in segs:
            distinct = set(speakers[s.start : s.end + 1])
            assert len(distinct) <= 2
            assert distinct == set(s.participants)

    def test_two_speaker_conversation_is_one_segment(self):
        conv = make_conv(["A", "B", "B", "A", "B"])
        assert len(dyadic_segments(conv)) == 1
