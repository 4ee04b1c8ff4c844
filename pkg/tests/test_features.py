"""Binary feature extraction and the flat coefficient indexer."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chatlinks import (
    Message,
    NUM_FEATURES,
    ParamIndexer,
    Speaker,
    active_indices,
    bundled_lexicons,
    candidate_set,
    message_features,
)

LEX = bundled_lexicons()


class TestMessageFeatures:
    def test_agent_url_message(self):
        msg = Message(0, Speaker.AGENT, tokens=("<URL>",))
        assert message_features(msg, LEX) == (0, 0, 0, 1, 0, 0)

    def test_customer_question_mark(self):
        msg = Message(0, Speaker.CUSTOMER, tokens=("价格", "?"))
        flags = message_features(msg, LEX)
        assert flags[0] == 1 and flags[1] == 1

    def test_answer_lexicon_word(self):
        msg = Message(0, Speaker.CUSTOMER, tokens=("好的",))
        assert message_features(msg, LEX)[2] == 1

    def test_fullwidth_question_mark(self):
        msg = Message(0, Speaker.AGENT, tokens=("多少钱？",))
        assert message_features(msg, LEX)[1] == 1

    def test_image_and_emoticon(self):
        msg = Message(0, Speaker.AGENT, tokens=("<IMG>", "<EMO>"))
        assert message_features(msg, LEX) == (0, 0, 0, 0, 1, 1)


class TestCandidateSet:
    def test_first_message_self_only(self):
        assert candidate_set(0, 5) == [0]

    def test_before_window_fills(self):
        assert candidate_set(3, 5) == [0, 1, 2, 3]

    def test_window_limits(self):
        assert candidate_set(9, 5) == [4, 5, 6, 7, 8, 9]

    def test_bad_args(self):
        with pytest.raises(ValueError):
            candidate_set(-1, 5)
        with pytest.raises(ValueError):
            candidate_set(0, 0)


class TestParamIndexer:
    def test_dimensions(self):
        idx = ParamIndexer(n_features=6, window=5)
        assert idx.dim == 4 * 36 + 5 + 12
        assert ParamIndexer(n_features=6, window=5, with_cross=True).dim == idx.dim + 1

    def test_blocks_disjoint_and_cover(self):
        idx = ParamIndexer(n_features=3, window=4, with_cross=True)
        seen = set()
        for k in range(3):
            for l in range(3):
                for a in (0, 1):
                    for b in (0, 1):
                        seen.add(idx.pair_index(k, l, a, b))
        for m in range(1, 5):
            seen.add(idx.distance_index(m))
        for k in range(3):
            for a in (0, 1):
                seen.add(idx.self_index(k, a))
        seen.add(idx.cross_index)
        assert seen == set(range(idx.dim))

    @given(
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=1, max_value=7),
        st.booleans(),
        st.data(),
    )
    def test_decode_round_trip(self, k_feats, window, with_cross, data):
        idx = ParamIndexer(n_features=k_feats, window=window, with_cross=with_cross)
        flat = data.draw(st.integers(min_value=0, max_value=idx.dim - 1))
        block, coords = idx.decode(flat)
        encode = {
            "pair": lambda c: idx.pair_index(*c),
            "distance": lambda c: idx.distance_index(*c),
            "self": lambda c: idx.self_index(*c),
            "cross": lambda c: idx.cross_index,
        }[block]
        assert encode(coords) == flat

    def test_out_of_range_rejected(self):
        idx = ParamIndexer(n_features=2, window=3)
        with pytest.raises(ValueError):
            idx.distance_index(0)
        with pytest.raises(ValueError):
            idx.distance_index(4)
        with pytest.raises(ValueError):
            idx.pair_index(0, 0, 2, 0)
        with pytest.raises(ValueError):
            idx.cross_index


class TestActiveIndices:
    def test_self_link_hits_self_block_only(self):
        idx = ParamIndexer(n_features=6, window=5)
        indices, values = active_indices(4, 4, (1, 0, 1, 0, 0, 0), (1, 0, 1, 0, 0, 0), idx)
        assert len(indices) == 6
        slices = idx.block_slices()
        assert all(slices["self"].start <= i < slices["self"].stop for i in indices)
        assert np.all(values == 1.0)

    def test_cross_link_count(self):
        idx = ParamIndexer(n_features=6, window=5)
        indices, _ = active_indices(5, 3, (1,) * 6, (0,) * 6, idx)
        assert len(indices) == 36 + 1

    def test_two_feature_worked_example(self):
        # fi = [1, 0], fj = [0, 1]: firing pair cells are
        # (k=0,l=0,a=1,b=0), (0,1,1,1), (1,0,0,0), (1,1,0,1), plus distance 1
        idx = ParamIndexer(n_features=2, window=5)
        indices, _ = active_indices(5, 4, (1, 0), (0, 1), idx)
        expected = {
            idx.pair_index(0, 0, 1, 0),
            idx.pair_index(0, 1, 1, 1),
            idx.pair_index(1, 0, 0, 0),
            idx.pair_index(1, 1, 0, 1),
            idx.distance_index(1),
        }
        assert set(indices) == expected

    def test_candidate_outside_window_rejected(self):
        idx = ParamIndexer(n_features=2, window=2)
        with pytest.raises(ValueError, match="outside the window"):
            active_indices(5, 2, (0, 0), (0, 0), idx)

    def test_cross_value_appended(self):
        idx = ParamIndexer(n_features=2, window=5, with_cross=True)
        indices, values = active_indices(3, 2, (0, 0), (1, 1), idx, cross=-0.75)
        assert indices[-1] == idx.cross_index
        assert values[-1] == -0.75
        assert np.all(values[:-1] == 1.0)

    @given(
        st.integers(min_value=0, max_value=20),
        st.integers(min_value=0, max_value=5),
        st.lists(st.integers(0, 1), min_size=4, max_size=4),
        st.lists(st.integers(0, 1), min_size=4, max_size=4),
    )
    def test_always_k_squared_pair_cells(self, i, back, fi, fj):
        """Exactly one (value, value) cell fires per feature pair."""
        idx = ParamIndexer(n_features=4, window=5)
        j = max(0, i - back)
        indices, _ = active_indices(i, j, tuple(fi), tuple(fj), idx)
        slices = idx.block_slices()
        pair_hits = [x for x in indices if x < slices["pair"].stop]
        if i == j:
            assert len(pair_hits) == 0
            assert len(indices) == 4
        else:
            assert len(pair_hits) == 16
            assert len(indices) == 17
        assert len(set(map(int, indices))) == len(indices)
        assert all(0 <= x < idx.dim for x in indices)
