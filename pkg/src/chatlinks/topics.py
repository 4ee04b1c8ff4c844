"""Message-level topic model trained by collapsed Gibbs sampling.

Every message is one document.  After burn-in, token-topic assignment
counts are averaged over retained samples; per-message topic distributions
are the smoothed, averaged document-topic counts.  The cross-entropy
between two messages' topic distributions is the semantic-similarity
feature consumed by the link model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import Chat

LDA_FILE_VERSION = 1


@dataclass
class LdaConfig:
    n_topics: int = 20
    alpha: float = 0.1
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 500
    sample_lag: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_topics < 2:
            raise ValueError("n_topics must be >= 2")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.sample_lag < 1:
            raise ValueError("sample_lag must be >= 1")
        if self.iterations <= self.burn_in:
            raise ValueError("iterations must exceed burn_in")


@dataclass
class LdaModel:
    """Averaged count state of a trained sampler.

    ``doc_topic_counts`` is (documents x topics), ``topic_word_counts``
    (topics x vocabulary), both averaged over the retained post-burn-in
    samples.  ``doc_keys`` optionally names each document, e.g. by
    ``(chat_id, message_index)``.
    """

    config: LdaConfig
    words: tuple[str, ...]
    doc_topic_counts: np.ndarray
    topic_word_counts: np.ndarray
    n_samples: int
    doc_keys: tuple[tuple[str, int], ...] | None = None

    @property
    def n_docs(self) -> int:
        return self.doc_topic_counts.shape[0]

    @property
    def n_topics(self) -> int:
        return self.config.n_topics

    def vocab_fingerprint(self) -> str:
        return sha256("\n".join(self.words).encode("utf-8")).hexdigest()


def _encode_documents(
    documents: Sequence[Sequence[str]],
) -> tuple[tuple[str, ...], list[np.ndarray]]:
    vocab: dict[str, int] = {}
    encoded = []
    for doc in documents:
        ids = [vocab.setdefault(tok, len(vocab)) for tok in doc]
        encoded.append(np.asarray(ids, dtype=np.int64))
    if not vocab:
        raise ValueError("cannot train a topic model on an empty vocabulary")
    return tuple(vocab), encoded


def gibbs_train(documents: Sequence[Sequence[str]], config: LdaConfig) -> LdaModel:
    """Run one collapsed Gibbs chain over token-topic assignments.

    The per-token conditional is proportional to
    ``(n_dt + alpha) * (n_tw + beta) / (n_t + V*beta)`` with the token's own
    assignment removed.  Empty documents are skipped during sampling and
    end up with uniform smoothed distributions.  Deterministic per seed.
    """
    words, encoded = _encode_documents(documents)
    n_topics = config.n_topics
    n_words = len(words)
    n_docs = len(encoded)
    rng = np.random.default_rng(config.seed)

    doc_topic = np.zeros((n_docs, n_topics), dtype=np.int64)
    topic_word = np.zeros((n_topics, n_words), dtype=np.int64)
    topic_total = np.zeros(n_topics, dtype=np.int64)
    assignments: list[np.ndarray] = []
    for d, doc in enumerate(encoded):
        z = rng.integers(0, n_topics, size=len(doc))
        assignments.append(z)
        for w, t in zip(doc, z):
            doc_topic[d, t] += 1
            topic_word[t, w] += 1
            topic_total[t] += 1

    doc_topic_sum = np.zeros((n_docs, n_topics), dtype=np.float64)
    topic_word_sum = np.zeros((n_topics, n_words), dtype=np.float64)
    n_samples = 0
    beta_total = n_words * config.beta

    for sweep in range(1, config.iterations + 1):
        for d, doc in enumerate(encoded):
            z = assignments[d]
            row = doc_topic[d]
            for pos in range(len(doc)):
                w = doc[pos]
                t_old = z[pos]
                row[t_old] -= 1
                topic_word[t_old, w] -= 1
                topic_total[t_old] -= 1
                weights = (row + config.alpha) * (
                    (topic_word[:, w] + config.beta) / (topic_total + beta_total)
                )
                cumulative = np.cumsum(weights)
                t_new = int(
                    np.searchsorted(cumulative, rng.random() * cumulative[-1])
                )
                z[pos] = t_new
                row[t_new] += 1
                topic_word[t_new, w] += 1
                topic_total[t_new] += 1
        if sweep > config.burn_in and (sweep - config.burn_in) % config.sample_lag == 0:
            doc_topic_sum += doc_topic
            topic_word_sum += topic_word
            n_samples += 1

    if n_samples == 0:
        raise ValueError(
            "no samples retained; increase iterations or reduce burn_in/sample_lag"
        )
    return LdaModel(
        config=config,
        words=words,
        doc_topic_counts=doc_topic_sum / n_samples,
        topic_word_counts=topic_word_sum / n_samples,
        n_samples=n_samples,
    )


def message_topic_dist(model: LdaModel, doc_index: int) -> np.ndarray:
    """Smoothed topic distribution of one document; strictly positive."""
    if not 0 <= doc_index < model.n_docs:
        raise IndexError(f"document index {doc_index} outside 0..{model.n_docs - 1}")
    counts = model.doc_topic_counts[doc_index]
    alpha = model.config.alpha
    return (counts + alpha) / (counts.sum() + model.n_topics * alpha)


def doc_topic_matrix(model: LdaModel) -> np.ndarray:
    """All smoothed document-topic distributions, one row per document."""
    counts = model.doc_topic_counts
    alpha = model.config.alpha
    totals = counts.sum(axis=1, keepdims=True)
    return (counts + alpha) / (totals + model.n_topics * alpha)


def topic_word_dist(model: LdaModel, topic: int) -> np.ndarray:
    """Smoothed word distribution of one topic."""
    counts = model.topic_word_counts[topic]
    beta = model.config.beta
    return (counts + beta) / (counts.sum() + len(model.words) * beta)


def cross_feature(phi_i: np.ndarray, phi_j: np.ndarray) -> float:
    """Cross entropy ``sum_t phi_i[t] * ln(phi_j[t])``; always <= 0.

    Requires a strictly positive second argument, which holds for every
    distribution this module produces (Dirichlet smoothing).
    """
    phi_i = np.asarray(phi_i, dtype=np.float64)
    phi_j = np.asarray(phi_j, dtype=np.float64)
    if phi_i.shape != phi_j.shape:
        raise ValueError("topic distributions have mismatched lengths")
    if np.any(phi_j <= 0.0):
        raise ValueError("second distribution has a zero component")
    return float(phi_i @ np.log(phi_j))


# ---------------------------------------------------------------------------
# chat-corpus plumbing


def chats_to_documents(
    chats: Iterable[Chat],
) -> tuple[list[tuple[str, ...]], list[tuple[str, int]]]:
    """Flatten chats into per-message documents plus (chat_id, index) keys."""
    docs: list[tuple[str, ...]] = []
    keys: list[tuple[str, int]] = []
    for chat in chats:
        for message in chat.messages:
            docs.append(message.tokens)
            keys.append((chat.chat_id, message.index))
    return docs, keys


def train_message_lda(chats: Sequence[Chat], config: LdaConfig) -> LdaModel:
    """Train the sampler with one document per message, keyed by chat."""
    docs, keys = chats_to_documents(chats)
    model = gibbs_train(docs, config)
    model.doc_keys = tuple(keys)
    return model


def topic_dist_map(model: LdaModel) -> dict[str, list[np.ndarray]]:
    """Per-chat lists of message topic distributions, keyed by chat id."""
    if model.doc_keys is None:
        raise ValueError("model has no document keys; train via train_message_lda")
    phi = doc_topic_matrix(model)
    out: dict[str, list[np.ndarray]] = {}
    for (chat_id, index), row in zip(model.doc_keys, phi):
        bucket = out.setdefault(chat_id, [])
        if index != len(bucket):
            raise ValueError(f"document keys of chat {chat_id!r} are not contiguous")
        bucket.append(row)
    return out


def save_lda(path: str | Path, model: LdaModel) -> None:
    payload = {
        "version": LDA_FILE_VERSION,
        "T": model.config.n_topics,
        "alpha": model.config.alpha,
        "beta": model.config.beta,
        "iterations": model.config.iterations,
        "burn_in": model.config.burn_in,
        "sample_lag": model.config.sample_lag,
        "seed": model.config.seed,
        "n_samples": model.n_samples,
        "vocab_hash": model.vocab_fingerprint(),
        "words": list(model.words),
        "doc_keys": [list(k) for k in model.doc_keys] if model.doc_keys else None,
        "doc_topic_counts": model.doc_topic_counts.tolist(),
        "topic_word_counts": model.topic_word_counts.tolist(),
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=None), encoding="utf-8"
    )


def load_lda(path: str | Path) -> LdaModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != LDA_FILE_VERSION:
        raise ValueError(f"unsupported topic-model file version {payload.get('version')!r}")
    config = LdaConfig(
        n_topics=payload["T"],
        alpha=payload["alpha"],
        beta=payload["beta"],
        iterations=payload["iterations"],
        burn_in=payload["burn_in"],
        sample_lag=payload["sample_lag"],
        seed=payload["seed"],
    )
    words = tuple(payload["words"])
    model = LdaModel(
        config=config,
        words=words,
        doc_topic_counts=np.asarray(payload["doc_topic_counts"], dtype=np.float64),
        topic_word_counts=np.asarray(payload["topic_word_counts"], dtype=np.float64),
        n_samples=payload["n_samples"],
        doc_keys=tuple((k[0], k[1]) for k in payload["doc_keys"])
        if payload.get("doc_keys")
        else None,
    )
    if payload["vocab_hash"] != model.vocab_fingerprint():
        raise ValueError("topic-model file vocabulary hash mismatch")
    return model


class MessageLda(BaseEstimator):
    """Estimator wrapper around the collapsed Gibbs sampler.

    ``fit`` trains on a sequence of token sequences (or chats); ``transform``
    returns the smoothed topic distributions of the training documents.  The
    sampler is transductive: it does not infer distributions for unseen
    documents.
    """

    def __init__(
        self,
        n_topics: int = 20,
        alpha: float = 0.1,
        beta: float = 0.01,
        iterations: int = 1000,
        burn_in: int = 500,
        sample_lag: int = 10,
        seed: int = 0,
    ):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.iterations = iterations
        self.burn_in = burn_in
        self.sample_lag = sample_lag
        self.seed = seed

    def _config(self) -> LdaConfig:
        return LdaConfig(
            n_topics=self.n_topics,
            alpha=self.alpha,
            beta=self.beta,
            iterations=self.iterations,
            burn_in=self.burn_in,
            sample_lag=self.sample_lag,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        if X and isinstance(X[0], Chat):
            self.model_ = train_message_lda(list(X), self._config())
            self._n_fit_docs = self.model_.n_docs
        else:
            self.model_ = gibbs_train(list(X), self._config())
            self._n_fit_docs = self.model_.n_docs
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("MessageLda is not fitted")
        n = sum(len(c) for c in X) if (X and isinstance(X[0], Chat)) else len(X)
        if n != self._n_fit_docs:
            raise ValueError(
                "transform input must be the fitted corpus "
                f"({self._n_fit_docs} documents, got {n})"
            )
        return doc_topic_matrix(self.model_)

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)
