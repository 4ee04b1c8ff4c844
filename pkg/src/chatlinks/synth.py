"""Synthetic chat corpora sampled from a known coefficient vector.

The generator mirrors the link model's own family: speakers follow a
two-state Markov chain, binary features are Bernoulli draws per speaker
profile, tokens come from per-topic unigram tables (plus marker tokens
that realize the sampled flags), and each message's gold link is drawn
from the model's link distribution under a generating ``theta_star``.
Decoding the corpus with ``theta_star`` itself gives the accuracy ceiling
trained models are measured against.

Generation is deterministic per seed, with sub-seeds derived per chat so
chats can be produced independently in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import (
    AnnotationSet,
    Chat,
    DEFAULT_WINDOW,
    EMO_TOKEN,
    IMG_TOKEN,
    LinkLabel,
    Message,
    Speaker,
    URL_TOKEN,
)
from .features import NUM_FEATURES, ParamIndexer, candidate_set
from .model import Parameters, link_distribution, predict_links


def disjoint_topic_tables(
    n_topics: int = 3, words_per_topic: int = 12
) -> tuple[tuple[str, ...], ...]:
    """Unigram tables with no shared words, ideal for recovery tests."""
    return tuple(
        tuple(f"t{t}w{n}" for n in range(words_per_topic)) for t in range(n_topics)
    )


@dataclass
class SynthConfig:
    n_chats: int = 100
    min_len: int = 10
    max_len: int = 35
    alternation: float = 0.5
    #: Bernoulli rate per feature and speaker; entry 0 is ignored because
    #: the speaker-identity feature is determined by the speaker itself.
    customer_rates: tuple[float, ...] = (1.0, 0.5, 0.15, 0.05, 0.05, 0.2)
    agent_rates: tuple[float, ...] = (0.0, 0.1, 0.5, 0.2, 0.1, 0.25)
    tokens_per_message: tuple[int, int] = (3, 8)
    topic_tables: tuple[tuple[str, ...], ...] = field(
        default_factory=disjoint_topic_tables
    )
    #: probability of flipping each observed non-speaker feature after the
    #: gold link was sampled, to create misspecified corpora
    feature_noise: float = 0.0
    question_token: str = "?"
    answer_token: str = "ok"
    theta_star: Parameters | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_chats < 1:
            raise ValueError("n_chats must be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        rates = (self.alternation, self.feature_noise, *self.customer_rates,
                 *self.agent_rates)
        if any(not 0.0 <= p <= 1.0 for p in rates):
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.customer_rates) != NUM_FEATURES or len(self.agent_rates) != NUM_FEATURES:
            raise ValueError(f"feature rates must have length {NUM_FEATURES}")
        if self.theta_star is not None and self.theta_star.indexer.with_cross:
            raise ValueError("the generator samples from base-mode coefficients only")


def _marker_tokens(flags: Sequence[int], config: SynthConfig) -> list[str]:
    markers = []
    if flags[1]:
        markers.append(config.question_token)
    if flags[2]:
        markers.append(config.answer_token)
    if flags[3]:
        markers.append(URL_TOKEN)
    if flags[4]:
        markers.append(IMG_TOKEN)
    if flags[5]:
        markers.append(EMO_TOKEN)
    return markers


def _sample_chat(
    config: SynthConfig, params: Parameters, chat_index: int
) -> tuple[Chat, list[LinkLabel]]:
    rng = np.random.default_rng((config.seed, chat_index))
    length = int(rng.integers(config.min_len, config.max_len + 1))
    tok_lo, tok_hi = config.tokens_per_message

    speakers: list[Speaker] = []
    for i in range(length):
        if i == 0:
            speaker = Speaker.CUSTOMER if rng.random() < 0.5 else Speaker.AGENT
        else:
            flip = rng.random() < config.alternation
            previous = speakers[-1]
            if flip:
                speaker = (
                    Speaker.AGENT if previous is Speaker.CUSTOMER else Speaker.CUSTOMER
                )
            else:
                speaker = previous
        speakers.append(speaker)

    flag_rows: list[list[int]] = []
    for speaker in speakers:
        rates = (
            config.customer_rates
            if speaker is Speaker.CUSTOMER
            else config.agent_rates
        )
        flags = [int(speaker is Speaker.CUSTOMER)]
        flags.extend(int(rng.random() < rates[k]) for k in range(1, NUM_FEATURES))
        flag_rows.append(flags)

    # gold links are sampled from the model distribution under theta_star,
    # using the pre-noise flags
    true_messages = tuple(
        Message(index=i, speaker=speakers[i], flags=tuple(flag_rows[i]))
        for i in range(length)
    )
    true_chat = Chat(chat_id=f"synth-{chat_index:05d}", messages=true_messages)
    gold: list[LinkLabel] = []
    for i in range(length):
        probs = link_distribution(i, true_chat, params)
        candidates = candidate_set(i, params.indexer.window)
        pick = int(rng.choice(len(candidates), p=probs))
        gold.append(LinkLabel(i, i - candidates[pick]))

    if config.feature_noise > 0.0:
        for flags in flag_rows:
            for k in range(1, NUM_FEATURES):
                if rng.random() < config.feature_noise:
                    flags[k] = 1 - flags[k]

    messages = []
    for i in range(length):
        flags = tuple(flag_rows[i])
        table = config.topic_tables[int(rng.integers(len(config.topic_tables)))]
        n_tokens = int(rng.integers(tok_lo, tok_hi + 1))
        body = [table[int(t)] for t in rng.integers(0, len(table), size=n_tokens)]
        tokens = tuple(body + _marker_tokens(flags, config))
        messages.append(
            Message(
                index=i,
                speaker=speakers[i],
                raw_text=" ".join(tokens),
                tokens=tokens,
                flags=flags,
            )
        )
    chat = Chat(chat_id=true_chat.chat_id, messages=tuple(messages))
    return chat, gold


def sample_corpus(config: SynthConfig) -> tuple[list[Chat], list[list[LinkLabel]]]:
    """Draw ``n_chats`` chats plus their gold links. Deterministic per seed."""
    if config.theta_star is None:
        raise ValueError("sample_corpus requires theta_star")
    chats = []
    gold = []
    for chat_index in range(config.n_chats):
        chat, labels = _sample_chat(config, config.theta_star, chat_index)
        chats.append(chat)
        gold.append(labels)
    return chats, gold


def make_annotations(
    chats: Sequence[Chat],
    gold: Sequence[Sequence[LinkLabel]],
    n_annotators: int = 3,
    disagreement: float = 0.0,
    seed: int = 0,
    window: int | None = None,
):
    """Annotator views of the gold links.

    With ``disagreement`` zero all annotators repeat the gold labels; a
    positive rate replaces each label independently per annotator with a
    uniform draw over the message's candidate distances.
    """
    window = DEFAULT_WINDOW if window is None else window
    out = []
    for chat_index, (chat, labels) in enumerate(zip(chats, gold)):
        entries = {}
        for a in range(n_annotators):
            rng = np.random.default_rng((seed, 7, chat_index, a))
            marked = []
            for label in labels:
                if disagreement > 0.0 and rng.random() < disagreement:
                    limit = min(window, label.message_index)
                    marked.append(
                        LinkLabel(label.message_index, int(rng.integers(0, limit + 1)))
                    )
                else:
                    marked.append(label)
            entries[f"ann{a}"] = tuple(marked)
        out.append(AnnotationSet(chat_id=chat.chat_id, entries=entries))
    return out


def oracle_accuracy(
    theta_star: Parameters,
    chats: Sequence[Chat],
    gold: Sequence[Sequence[LinkLabel]],
) -> float:
    """Accuracy of argmax decoding under the generating coefficients.

    This is the ceiling against which trained models are measured: the
    decoder is optimal for the sampling distribution, so a learned model
    can only match it up to estimation noise.
    """
    hits = 0
    total = 0
    for chat, labels in zip(chats, gold):
        predictions = predict_links(chat, theta_star)
        hits += sum(
            1 for p, g in zip(predictions, labels) if p.distance == g.distance
        )
        total += len(labels)
    return hits / total


# ---------------------------------------------------------------------------
# generator presets used by the CLI and the recovery tests


def preset_theta(name: str, indexer: ParamIndexer | None = None) -> Parameters:
    """Named generating coefficient vectors.

    ``uniform`` is all zeros; ``recency`` prefers short distances only;
    ``pairwise`` couples the question/answer and speaker features across
    messages, so feature-blind baselines decode it poorly.
    """
    indexer = indexer or ParamIndexer()
    params = Parameters.zeros(indexer)
    theta = params.theta
    if name == "uniform":
        return params
    if name == "recency":
        for m in range(1, indexer.window + 1):
            theta[indexer.distance_index(m)] = 2.0 - 0.8 * (m - 1)
        return params
    if name == "pairwise":
        # answers attach to questions; questions avoid questions
        theta[indexer.pair_index(2, 1, 1, 1)] = 2.5
        theta[indexer.pair_index(1, 1, 1, 1)] = -2.0
        # agent messages respond to customer messages, not to other agents
        theta[indexer.pair_index(0, 0, 0, 1)] = 1.0
        theta[indexer.pair_index(0, 0, 0, 0)] = -1.0
        # mild recency decay
        for m, value in zip(range(1, indexer.window + 1), (1.0, 0.4, 0.0, -0.4, -0.8)):
            theta[indexer.distance_index(m)] = value
        # customer questions open new threads
        theta[indexer.self_index(1, 1)] = 1.2
        theta[indexer.self_index(0, 1)] = 0.3
        return params
    raise ValueError(f"unknown generator preset {name!r}")
