"""Binary message features and the flat coefficient indexing scheme.

Each message carries six binary features (speaker identity, question,
answer, URL, image, emoticon).  The link model scores a candidate pair
``(i, j)`` through three coefficient families laid out in one flat vector:

* ``pair``      one coefficient per (feature of i, feature of j, value,
                value) cell, active only for cross-message links;
* ``distance``  one coefficient per backward distance 1..W;
* ``self``      one coefficient per (feature, value) cell, active only for
                self-links;
* ``cross``     optional single weight on the topic cross-entropy feature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .corpus import (
    DEFAULT_WINDOW,
    EMO_TOKEN,
    IMG_TOKEN,
    QUESTION_MARKS,
    URL_TOKEN,
    Chat,
    Message,
    Speaker,
)
from .lexicons import LexiconSet, bundled_lexicons

#: fixed feature order; versioned into saved model files
FEATURE_NAMES = (
    "speaker_is_customer",
    "has_question",
    "has_answer",
    "has_url",
    "has_image",
    "has_emoticon",
)

NUM_FEATURES = len(FEATURE_NAMES)

PAIR_BLOCK = "pair"
DISTANCE_BLOCK = "distance"
SELF_BLOCK = "self"
CROSS_BLOCK = "cross"


def message_features(message: Message, lexicons: LexiconSet) -> tuple[int, ...]:
    """Extract the six binary features from a normalized message."""
    tokens = set(message.tokens)
    is_question = bool(tokens & lexicons.question_words) or bool(
        tokens & QUESTION_MARKS
    )
    if not is_question:
        # question marks may be glued to a word in unsegmented text
        is_question = any(
            mark in token for token in tokens for mark in QUESTION_MARKS
        )
    return (
        int(message.speaker is Speaker.CUSTOMER),
        int(is_question),
        int(bool(tokens & lexicons.answer_words)),
        int(URL_TOKEN in tokens),
        int(IMG_TOKEN in tokens),
        int(EMO_TOKEN in tokens),
    )


def annotate_features(
    chats: Iterable[Chat], lexicons: LexiconSet | None = None
) -> list[Chat]:
    """Return copies of ``chats`` with every message's ``flags`` filled."""
    lexicons = lexicons or bundled_lexicons()
    out = []
    for chat in chats:
        messages = tuple(
            replace(m, flags=message_features(m, lexicons)) for m in chat.messages
        )
        out.append(Chat(chat_id=chat.chat_id, messages=messages))
    return out


def candidate_set(i: int, window: int = DEFAULT_WINDOW) -> list[int]:
    """Messages that ``i`` may link to: itself and the previous ``window``."""
    if i < 0:
        raise ValueError("message index must be >= 0")
    if window < 1:
        raise ValueError("window must be >= 1")
    return list(range(max(0, i - window), i + 1))


@dataclass(frozen=True)
class ParamIndexer:
    """Maps coefficient coordinates to positions in one flat vector.

    Layout: the pair block (``K*K*2*2`` entries), then the distance block
    (``W`` entries for distances 1..W), then the self block (``K*2``), then
    the optional cross weight.  Blocks are contiguous and disjoint.
    """

    n_features: int = NUM_FEATURES
    window: int = DEFAULT_WINDOW
    with_cross: bool = False

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def pair_size(self) -> int:
        return 4 * self.n_features * self.n_features

    @property
    def dim(self) -> int:
        base = self.pair_size + self.window + 2 * self.n_features
        return base + 1 if self.with_cross else base

    def pair_index(self, k: int, l: int, a: int, b: int) -> int:
        k_feats = self.n_features
        if not (0 <= k < k_feats and 0 <= l < k_feats):
            raise ValueError(f"feature index out of range: ({k}, {l})")
        if a not in (0, 1) or b not in (0, 1):
            raise ValueError(f"feature values must be binary, got ({a}, {b})")
        return ((k * k_feats + l) * 2 + a) * 2 + b

    def distance_index(self, m: int) -> int:
        if not 1 <= m <= self.window:
            raise ValueError(f"distance {m} outside 1..{self.window}")
        return self.pair_size + (m - 1)

    def self_index(self, k: int, a: int) -> int:
        if not 0 <= k < self.n_features:
            raise ValueError(f"feature index out of range: {k}")
        if a not in (0, 1):
            raise ValueError(f"feature value must be binary, got {a}")
        return self.pair_size + self.window + 2 * k + a

    @property
    def cross_index(self) -> int:
        if not self.with_cross:
            raise ValueError("indexer has no cross block")
        return self.pair_size + self.window + 2 * self.n_features

    def decode(self, flat: int) -> tuple[str, tuple[int, ...]]:
        """Inverse of the ``*_index`` encoders: flat position -> block, coords."""
        if not 0 <= flat < self.dim:
            raise ValueError(f"flat index {flat} outside 0..{self.dim - 1}")
        if flat < self.pair_size:
            rest, b = divmod(flat, 2)
            rest, a = divmod(rest, 2)
            k, l = divmod(rest, self.n_features)
            return PAIR_BLOCK, (k, l, a, b)
        flat -= self.pair_size
        if flat < self.window:
            return DISTANCE_BLOCK, (flat + 1,)
        flat -= self.window
        if flat < 2 * self.n_features:
            k, a = divmod(flat, 2)
            return SELF_BLOCK, (k, a)
        return CROSS_BLOCK, ()

    def block_slices(self) -> dict[str, slice]:
        out = {
            PAIR_BLOCK: slice(0, self.pair_size),
            DISTANCE_BLOCK: slice(self.pair_size, self.pair_size + self.window),
            SELF_BLOCK: slice(
                self.pair_size + self.window,
                self.pair_size + self.window + 2 * self.n_features,
            ),
        }
        if self.with_cross:
            out[CROSS_BLOCK] = slice(self.cross_index, self.cross_index + 1)
        return out


def active_indices(
    i: int,
    j: int,
    fi: Sequence[int],
    fj: Sequence[int],
    indexer: ParamIndexer,
    cross: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Flat coefficient indices active for candidate pair ``(i, j)``.

    Returns ``(indices, values)`` where ``values`` are the feature values
    multiplying each coefficient: 1.0 for every indicator, and the topic
    cross-entropy for the cross weight when the indexer carries one.

    For a cross-message link exactly one (value, value) cell fires for each
    of the K*K feature pairs, plus the distance coefficient; a self-link
    activates the K self-block cells instead.
    """
    if j not in range(max(0, i - indexer.window), i + 1):
        raise ValueError(f"candidate {j} outside the window of message {i}")
    k_feats = indexer.n_features
    if len(fi) != k_feats or len(fj) != k_feats:
        raise ValueError("feature vectors do not match the indexer")
    idx: list[int] = []
    if i == j:
        idx.extend(indexer.self_index(k, fi[k]) for k in range(k_feats))
    else:
        idx.extend(
            indexer.pair_index(k, l, fi[k], fj[l])
            for k in range(k_feats)
            for l in range(k_feats)
        )
        idx.append(indexer.distance_index(i - j))
    values = [1.0] * len(idx)
    if indexer.with_cross and cross is not None:
        idx.append(indexer.cross_index)
        values.append(float(cross))
    return np.asarray(idx, dtype=np.int64), np.asarray(values, dtype=np.float64)
