"""Link scores, distributions, the training objective, and persistence.

The likelihood oracle below recomputes everything with explicit loops,
plain ``math.exp``, and its own offset arithmetic, so it shares nothing
with the vectorized evaluation path it checks.
"""

import math

import numpy as np
import pytest

from chatlinks import (
    AnnotationSet,
    LinkLabel,
    Mode,
    ParamIndexer,
    Parameters,
    TrainConfig,
    grad_check,
    link_distribution,
    link_score,
    load_model,
    nll_and_gradient,
    predict_links,
    save_model,
)
from chatlinks.corpus import labels_from_distances

from conftest import build_chat


# ---------------------------------------------------------------------------
# independent oracle


def brute_cross(phi_i, phi_j):
    return sum(p * math.log(q) for p, q in zip(phi_i, phi_j))


def brute_scores(theta, flags, i, n_feats, window, phi=None):
    """Candidate scores for message i, by the written definition."""

    def pair_off(k, l, a, b):
        return ((k * n_feats + l) * 2 + a) * 2 + b

    def dist_off(m):
        return 4 * n_feats * n_feats + m - 1

    def self_off(k, a):
        return 4 * n_feats * n_feats + window + 2 * k + a

    cross_off = 4 * n_feats * n_feats + window + 2 * n_feats
    candidates = list(range(max(0, i - window), i + 1))
    scores = []
    for j in candidates:
        s = 0.0
        if i == j:
            for k in range(n_feats):
                s += theta[self_off(k, flags[i][k])]
        else:
            for k in range(n_feats):
                for l in range(n_feats):
                    s += theta[pair_off(k, l, flags[i][k], flags[j][l])]
            s += theta[dist_off(i - j)]
        if phi is not None:
            s += theta[cross_off] * brute_cross(phi[i], phi[j])
        scores.append(s)
    return candidates, scores


def brute_nll(theta, chats_flags, gold, n_feats, window, l2, phis=None):
    total = 0.0
    for c, flags in enumerate(chats_flags):
        phi = phis[c] if phis is not None else None
        for i in range(len(flags)):
            candidates, scores = brute_scores(theta, flags, i, n_feats, window, phi)
            weights = [math.exp(s) for s in scores]
            gold_j = i - gold[c][i]
            prob = weights[candidates.index(gold_j)] / sum(weights)
            total -= math.log(prob)
    total += l2 * sum(t * t for t in theta)
    return total


def random_instance(rng, n_chats=3, max_len=6, n_feats=6, window=5, with_phi=False):
    """Random flagged chats, gold links, and optionally topic distributions."""
    chats, gold, phis = [], [], []
    for c in range(n_chats):
        length = int(rng.integers(1, max_len + 1))
        flags = [tuple(int(x) for x in rng.integers(0, 2, n_feats)) for _ in range(length)]
        speakers = "".join("C" if f[0] else "A" for f in flags)
        chats.append(build_chat(f"chat{c}", speakers, flags=flags))
        gold.append([int(rng.integers(0, min(window, i) + 1)) for i in range(length)])
        raw = rng.random((length, 4)) + 0.05
        phis.append([row / row.sum() for row in raw])
    phi_map = {c.chat_id: p for c, p in zip(chats, phis)} if with_phi else None
    return chats, gold, phis if with_phi else None, phi_map


def params_for(rng, window=5, n_feats=6, with_cross=False, scale=0.8):
    indexer = ParamIndexer(n_features=n_feats, window=window, with_cross=with_cross)
    return Parameters(theta=rng.normal(scale=scale, size=indexer.dim), indexer=indexer)


# ---------------------------------------------------------------------------


class TestLinkScore:
    def test_zero_theta_scores_zero(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CACACA", flags=[(1, 0, 0, 0, 0, 0)] * 6)
        for i in range(6):
            for j in range(max(0, i - 5), i + 1):
                assert link_score(i, j, chat, params) == 0.0

    def test_single_distance_coefficient(self):
        indexer = ParamIndexer()
        params = Parameters.zeros(indexer)
        params.theta[indexer.distance_index(1)] = 2.0
        chat = build_chat("c", "CACACA", flags=[(0, 0, 0, 0, 0, 0)] * 6)
        assert link_score(5, 4, chat, params) == 2.0

    def test_two_feature_worked_example(self):
        # pair cells (0,0,1,0)=0.5, (0,1,1,1)=-0.25, (1,0,0,0)=1.0,
        # (1,1,0,1)=0.0 plus distance-1 of 0.1 sum to 1.35
        indexer = ParamIndexer(n_features=2, window=5)
        params = Parameters.zeros(indexer)
        params.theta[indexer.pair_index(0, 0, 1, 0)] = 0.5
        params.theta[indexer.pair_index(0, 1, 1, 1)] = -0.25
        params.theta[indexer.pair_index(1, 0, 0, 0)] = 1.0
        params.theta[indexer.pair_index(1, 1, 0, 1)] = 0.0
        params.theta[indexer.distance_index(1)] = 0.1
        flags = [(0, 1)] * 5 + [(1, 0)]  # message 5 carries (1, 0), message 4 (0, 1)
        chat = build_chat("c", "CAACCA", flags=flags)
        assert link_score(5, 4, chat, params) == pytest.approx(1.35, abs=1e-12)

    def test_missing_phi_in_lda_mode_rejected(self):
        params = Parameters.zeros(ParamIndexer(with_cross=True))
        chat = build_chat("c", "CA", flags=[(1, 0, 0, 0, 0, 0)] * 2)
        with pytest.raises(ValueError, match="topic distributions"):
            link_score(1, 0, chat, params)

    def test_phi_with_base_mode_rejected(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CA", flags=[(1, 0, 0, 0, 0, 0)] * 2)
        phi = [np.full(4, 0.25)] * 2
        with pytest.raises(ValueError, match="mode mismatch"):
            link_score(1, 0, chat, params, phi)


class TestLinkDistribution:
    def test_uniform_under_zero_theta(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CACA", flags=[(0, 0, 0, 0, 0, 0)] * 4)
        np.testing.assert_allclose(link_distribution(3, chat, params), [0.25] * 4)

    def test_single_distance_softmax(self):
        # weights {1, 3, 1} over candidates 0, 1, 2
        indexer = ParamIndexer()
        params = Parameters.zeros(indexer)
        params.theta[indexer.distance_index(1)] = math.log(3.0)
        chat = build_chat("c", "CAC", flags=[(0, 0, 0, 0, 0, 0)] * 3)
        np.testing.assert_allclose(
            link_distribution(2, chat, params), [0.2, 0.6, 0.2], atol=1e-12
        )

    def test_sums_to_one(self):
        rng = np.random.default_rng(11)
        chats, _, _, _ = random_instance(rng)
        params = params_for(rng, scale=3.0)
        for chat in chats:
            for i in range(len(chat)):
                dist = link_distribution(i, chat, params)
                assert abs(dist.sum() - 1.0) <= 1e-12
                assert np.all(dist >= 0.0)

    def test_invariant_to_uniform_score_shift(self):
        # adding c to every score of every candidate set leaves the
        # distribution unchanged; realized by shifting whole blocks
        rng = np.random.default_rng(5)
        params = params_for(rng)
        indexer = params.indexer
        shift = 0.83
        shifted = Parameters(params.theta.copy(), indexer)
        slices = indexer.block_slices()
        shifted.theta[slices["pair"]] += shift / indexer.n_features**2
        shifted.theta[slices["self"]] += shift / indexer.n_features
        chats, _, _, _ = random_instance(rng)
        for chat in chats:
            for i in range(len(chat)):
                np.testing.assert_allclose(
                    link_distribution(i, chat, params),
                    link_distribution(i, chat, shifted),
                    atol=1e-12,
                )

    def test_huge_scores_stay_finite(self):
        indexer = ParamIndexer()
        params = Parameters.zeros(indexer)
        params.theta[indexer.distance_index(1)] = 5000.0
        chat = build_chat("c", "CAC", flags=[(0, 0, 0, 0, 0, 0)] * 3)
        dist = link_distribution(2, chat, params)
        assert np.all(np.isfinite(dist))
        assert dist[1] == pytest.approx(1.0)


class TestNllAndGradient:
    def test_zero_theta_three_message_chat(self):
        # candidate sets of size 1, 2, 3 give uniform gold likelihoods
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CAC", flags=[(1, 0, 0, 0, 0, 0)] * 3)
        value, grad = nll_and_gradient(
            params, [chat], [[0, 0, 0]], TrainConfig(l2=0.0)
        )
        assert value == pytest.approx(math.log(1) + math.log(2) + math.log(3), abs=1e-12)
        assert grad.shape == (params.indexer.dim,)

    @pytest.mark.parametrize("with_phi", [False, True])
    def test_matches_brute_force_oracle(self, with_phi):
        rng = np.random.default_rng(42)
        for trial in range(8):
            chats, gold, phis, phi_map = random_instance(rng, with_phi=with_phi)
            params = params_for(rng, with_cross=with_phi)
            l2 = float(rng.random())
            value, _ = nll_and_gradient(
                params, chats, gold, TrainConfig(l2=l2), phi_map
            )
            flags = [[m.flags for m in c.messages] for c in chats]
            expected = brute_nll(params.theta, flags, gold, 6, 5, l2, phis)
            assert value == pytest.approx(expected, abs=1e-10), f"trial {trial}"

    @pytest.mark.parametrize("with_phi", [False, True])
    def test_gradient_matches_finite_differences(self, with_phi):
        rng = np.random.default_rng(7)
        chats, gold, _, phi_map = random_instance(rng, with_phi=with_phi)
        params = params_for(rng, with_cross=with_phi)
        config = TrainConfig(l2=0.3)

        def objective(theta):
            return nll_and_gradient(
                Parameters(theta, params.indexer), chats, gold, config, phi_map
            )

        assert grad_check(objective, params.theta) < 1e-6

    def test_convexity_midpoint(self):
        rng = np.random.default_rng(19)
        chats, gold, _, _ = random_instance(rng)
        config = TrainConfig(l2=0.5)
        indexer = ParamIndexer()

        def value_at(theta):
            return nll_and_gradient(
                Parameters(theta, indexer), chats, gold, config
            )[0]

        for _ in range(10):
            theta1 = rng.normal(scale=2.0, size=indexer.dim)
            theta2 = rng.normal(scale=2.0, size=indexer.dim)
            mid = value_at((theta1 + theta2) / 2.0)
            assert mid <= (value_at(theta1) + value_at(theta2)) / 2.0 + 1e-9

    def test_label_out_of_candidate_set_rejected(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CAC", flags=[(1, 0, 0, 0, 0, 0)] * 3)
        with pytest.raises(ValueError, match="label out of candidate set"):
            nll_and_gradient(params, [chat], [[0, 2, 0]], TrainConfig())

    def test_all_annotations_policy_weights_instances(self):
        params_rng = np.random.default_rng(23)
        params = params_for(params_rng)
        chat = build_chat("c", "CACA", flags=[(1, 0, 0, 0, 0, 0)] * 4)
        unanimous = AnnotationSet(
            chat_id="c",
            entries={
                a: labels_from_distances([0, 1, 1, 0]) for a in ("x", "y", "z")
            },
        )
        v_all, g_all = nll_and_gradient(
            params, [chat], [unanimous], TrainConfig(l2=0.2, label_policy="all")
        )
        v_single, g_single = nll_and_gradient(
            params, [chat], [[0, 1, 1, 0]], TrainConfig(l2=0.2)
        )
        assert v_all == pytest.approx(v_single, abs=1e-10)
        np.testing.assert_allclose(g_all, g_single, atol=1e-10)

    def test_majority_policy_resolves_annotations(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CA", flags=[(1, 0, 0, 0, 0, 0)] * 2)
        annots = AnnotationSet(
            chat_id="c",
            entries={
                "x": labels_from_distances([0, 1]),
                "y": labels_from_distances([0, 1]),
                "z": labels_from_distances([0, 0]),
            },
        )
        v_majority, _ = nll_and_gradient(params, [chat], [annots], TrainConfig())
        v_expected, _ = nll_and_gradient(params, [chat], [[0, 1]], TrainConfig())
        assert v_majority == v_expected


class TestPredict:
    def test_zero_theta_all_self_links(self):
        params = Parameters.zeros(ParamIndexer())
        chat = build_chat("c", "CACACA", flags=[(1, 0, 0, 0, 0, 0)] * 6)
        labels = predict_links(chat, params)
        assert [l.distance for l in labels] == [0] * 6

    def test_dominant_distance_one(self):
        indexer = ParamIndexer()
        params = Parameters.zeros(indexer)
        params.theta[indexer.distance_index(1)] = 50.0
        chat = build_chat("c", "CACACA", flags=[(1, 0, 0, 0, 0, 0)] * 6)
        labels = predict_links(chat, params)
        assert [l.distance for l in labels] == [0, 1, 1, 1, 1, 1]

    def test_matches_brute_force_argmax(self):
        rng = np.random.default_rng(31)
        chats, _, _, _ = random_instance(rng, n_chats=4)
        params = params_for(rng, scale=1.5)
        for chat in chats:
            flags = [m.flags for m in chat.messages]
            predicted = predict_links(chat, params)
            for i, label in enumerate(predicted):
                candidates, scores = brute_scores(params.theta, flags, i, 6, 5)
                # ties go to the smallest distance, i.e. the largest candidate
                best = max(
                    zip(candidates, scores),
                    key=lambda pair: (pair[1], pair[0]),
                )[0]
                assert i - label.distance == best


class TestPersistence:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        params = params_for(rng, with_cross=True)
        path = tmp_path / "model.json"
        save_model(path, params, metadata={"vocab_hash": "abc", "note": "test"})
        loaded, header = load_model(path)
        assert np.array_equal(loaded.theta, params.theta)
        assert loaded.indexer == params.indexer
        assert loaded.mode is Mode.WITH_LDA
        assert header["vocab_hash"] == "abc"
        assert header["metadata"]["note"] == "test"

    def test_wrong_dimension_rejected(self, tmp_path):
        import json

        rng = np.random.default_rng(3)
        params = params_for(rng)
        path = tmp_path / "model.json"
        save_model(path, params)
        payload = json.loads(path.read_text())
        payload["theta_blocks"]["tau"].append(0.0)
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="block sizes"):
            load_model(path)

    def test_mode_mismatch_on_use(self, tmp_path):
        rng = np.random.default_rng(3)
        params = params_for(rng, with_cross=False)
        path = tmp_path / "model.json"
        save_model(path, params)
        loaded, _ = load_model(path)
        chat = build_chat("c", "CA", flags=[(1, 0, 0, 0, 0, 0)] * 2)
        phi = [np.full(4, 0.25)] * 2
        with pytest.raises(ValueError, match="mode mismatch"):
            predict_links(chat, loaded, phi)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"version": 99}')
        with pytest.raises(ValueError, match="version"):
            load_model(path)
