"""Pairwise log-linear model of message dependency links.

The probability that message ``i`` links to candidate ``j`` is proportional
to the exponential of a sum of coefficients selected by the two messages'
binary features, their backward distance, and (for self-links) the message's
own features; an optional extra term weights the topic cross-entropy
between the pair.  Training minimizes the L2-regularized negative
conditional log-likelihood of the gold links, which is convex.

:class:`LinkClassifier` wraps training and decoding in an sklearn-style
estimator; the module-level functions expose the individual operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import AnnotationSet, Chat, DEFAULT_WINDOW, LinkLabel
from .features import (
    FEATURE_NAMES,
    NUM_FEATURES,
    ParamIndexer,
    active_indices,
    annotate_features,
    candidate_set,
)
from .lexicons import LexiconSet
from .optim import OptimConfig, minimize
from .topics import cross_feature
from .validation import as_distances, check_chats, check_phi_map, ensure_flags

MODEL_FILE_VERSION = 1

LABEL_POLICIES = ("majority", "all")

PhiMap = Mapping[str, Sequence[np.ndarray]]


class Mode(str, Enum):
    BASE = "base"
    WITH_LDA = "with-lda"


@dataclass
class Parameters:
    """Flat coefficient vector plus the indexer describing its layout."""

    theta: np.ndarray
    indexer: ParamIndexer

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.indexer.dim,):
            raise ValueError(
                f"theta has shape {self.theta.shape}, expected ({self.indexer.dim},)"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta has non-finite entries")

    @property
    def mode(self) -> Mode:
        return Mode.WITH_LDA if self.indexer.with_cross else Mode.BASE

    @classmethod
    def zeros(cls, indexer: ParamIndexer) -> "Parameters":
        return cls(theta=np.zeros(indexer.dim), indexer=indexer)


@dataclass
class TrainConfig:
    l2: float = 1.0
    window: int = DEFAULT_WINDOW
    label_policy: str = "majority"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.l2 < 0:
            raise ValueError("l2 strength must be >= 0")
        if self.label_policy not in LABEL_POLICIES:
            raise ValueError(
                f"label_policy must be one of {LABEL_POLICIES}, got {self.label_policy!r}"
            )


def _check_mode(params: Parameters, phi) -> None:
    if params.mode is Mode.WITH_LDA and phi is None:
        raise ValueError("topic distributions are required in with-lda mode")
    if params.mode is Mode.BASE and phi is not None:
        raise ValueError("mode mismatch: base-mode parameters given topic distributions")


def link_score(
    i: int,
    j: int,
    chat: Chat,
    params: Parameters,
    phi: Sequence[np.ndarray] | None = None,
) -> float:
    """Unnormalized log-score of message ``i`` linking to candidate ``j``."""
    _check_mode(params, phi)
    fi = chat.messages[i].flags
    fj = chat.messages[j].flags
    if fi is None or fj is None:
        raise ValueError("messages lack feature flags; run feature annotation first")
    cross = None
    if params.indexer.with_cross:
        cross = cross_feature(phi[i], phi[j])
    idx, values = active_indices(i, j, fi, fj, params.indexer, cross)
    return float(params.theta[idx] @ values)


def link_distribution(
    i: int,
    chat: Chat,
    params: Parameters,
    phi: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Probabilities over ``candidate_set(i)`` in ascending candidate order.

    Computed as a max-shifted softmax of the link scores, so arbitrarily
    large coefficients cannot overflow.
    """
    candidates = candidate_set(i, params.indexer.window)
    scores = np.array(
        [link_score(i, j, chat, params, phi) for j in candidates], dtype=np.float64
    )
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def predict_links(
    chat: Chat,
    params: Parameters,
    phi: Sequence[np.ndarray] | None = None,
) -> list[LinkLabel]:
    """Most probable link per message; ties go to the smallest distance."""
    _check_mode(params, phi)
    phi_map = {chat.chat_id: phi} if phi is not None else None
    return _Design([chat], params.indexer, phi_map).decode(params.theta)[0]


# ---------------------------------------------------------------------------
# vectorized evaluation


class _Design:
    """Precomputed active-coefficient structure for a fixed set of chats.

    Rows are messages; columns are backward distances 0..W (0 = self).
    Every valid (message, distance) pair stores its active flat indices,
    padded with a virtual slot at position ``dim`` whose coefficient is
    pinned to zero.  One structure supports many objective evaluations, so
    training touches Python loops only once.
    """

    def __init__(
        self,
        chats: Sequence[Chat],
        indexer: ParamIndexer,
        phi_map: PhiMap | None = None,
    ):
        ensure_flags(chats)
        if indexer.with_cross:
            if phi_map is None:
                raise ValueError("topic distributions are required in with-lda mode")
            check_phi_map(chats, phi_map)
        self.indexer = indexer
        window = indexer.window
        width = indexer.n_features**2 + 1 + (1 if indexer.with_cross else 0)
        pad = indexer.dim

        self.row_offsets: list[int] = []
        pair_row: list[int] = []
        pair_col: list[int] = []
        idx_rows: list[np.ndarray] = []
        val_rows: list[np.ndarray] = []
        row = 0
        for chat in chats:
            self.row_offsets.append(row)
            phi = phi_map[chat.chat_id] if indexer.with_cross else None
            for i, message in enumerate(chat.messages):
                for m in range(min(window, i) + 1):
                    j = i - m
                    cross = (
                        cross_feature(phi[i], phi[j]) if indexer.with_cross else None
                    )
                    idx, values = active_indices(
                        i, j, message.flags, chat.messages[j].flags, indexer, cross
                    )
                    if idx.size < width:
                        fill = width - idx.size
                        idx = np.concatenate([idx, np.full(fill, pad, dtype=np.int64)])
                        values = np.concatenate([values, np.zeros(fill)])
                    pair_row.append(row)
                    pair_col.append(m)
                    idx_rows.append(idx)
                    val_rows.append(values)
                row += 1

        self.n_rows = row
        self.pair_row = np.asarray(pair_row, dtype=np.int64)
        self.pair_col = np.asarray(pair_col, dtype=np.int64)
        self.idx = np.vstack(idx_rows) if idx_rows else np.zeros((0, width), np.int64)
        self.val = np.vstack(val_rows) if val_rows else np.zeros((0, width))
        self.chats = list(chats)

    def scores(self, theta: np.ndarray) -> np.ndarray:
        """(messages x distances) score matrix; invalid cells are -inf."""
        theta_ext = np.concatenate([theta, [0.0]])
        pair_scores = (theta_ext[self.idx] * self.val).sum(axis=1)
        scores = np.full((self.n_rows, self.indexer.window + 1), -np.inf)
        scores[self.pair_row, self.pair_col] = pair_scores
        return scores

    def log_distributions(self, theta: np.ndarray) -> np.ndarray:
        scores = self.scores(theta)
        peak = scores.max(axis=1, keepdims=True)
        shifted = scores - peak
        with np.errstate(divide="ignore"):  # empty cells stay -inf
            log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return shifted - log_norm

    def decode(self, theta: np.ndarray) -> list[list[LinkLabel]]:
        """Argmax distance per message; argmax resolves ties to smallest m."""
        best = np.argmax(self.scores(theta), axis=1)
        out = []
        for offset, chat in zip(self.row_offsets, self.chats):
            out.append(
                [LinkLabel(i, int(best[offset + i])) for i in range(len(chat))]
            )
        return out

    def gold_arrays(
        self,
        labels: Sequence,
        label_policy: str,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Observed-label weight matrix and per-row total weights.

        Each gold source contributes weighted one-hot rows: plain labels and
        majority-resolved annotations with weight 1, the all-annotations
        policy one instance per annotator with weight 1/n.
        """
        window = self.indexer.window
        obs = np.zeros((self.n_rows, window + 1))
        row_weight = np.zeros(self.n_rows)
        if len(labels) != len(self.chats):
            raise ValueError(
                f"got labels for {len(labels)} chats, expected {len(self.chats)}"
            )
        for chat, offset, y_entry in zip(self.chats, self.row_offsets, labels):
            if isinstance(y_entry, AnnotationSet) and label_policy == "all":
                entries = y_entry.entries
                instances = [
                    (y_entry.distances(a), 1.0 / len(entries)) for a in entries
                ]
            else:
                instances = [(as_distances(y_entry, len(chat)), 1.0)]
            for distances, weight in instances:
                if len(distances) != len(chat):
                    raise ValueError(
                        f"labels for chat {chat.chat_id!r} cover {len(distances)} "
                        f"messages, expected {len(chat)}"
                    )
                for i, m in enumerate(distances):
                    if not 0 <= m <= min(window, i):
                        raise ValueError(
                            f"label out of candidate set: chat {chat.chat_id!r} "
                            f"message {i} distance {m}"
                        )
                    obs[offset + i, m] += weight
                    row_weight[offset + i] += weight
        return obs, row_weight

    def nll_and_grad(
        self,
        theta: np.ndarray,
        obs: np.ndarray,
        row_weight: np.ndarray,
        l2: float,
    ) -> tuple[float, np.ndarray]:
        """Regularized negative log-likelihood and its analytic gradient.

        The gradient is expected minus observed active-feature counts, with
        the fixed summation order of ``bincount`` so repeated evaluations
        are bit-identical.
        """
        logp = self.log_distributions(theta)
        safe_logp = np.where(obs > 0, logp, 0.0)
        value = -float((obs * safe_logp).sum()) + l2 * float(theta @ theta)
        probs = np.exp(logp)
        coef = row_weight[:, None] * probs - obs
        contrib = coef[self.pair_row, self.pair_col][:, None] * self.val
        grad = np.bincount(
            self.idx.ravel(), weights=contrib.ravel(), minlength=self.indexer.dim + 1
        )[: self.indexer.dim]
        grad += 2.0 * l2 * theta
        return value, grad


def nll_and_gradient(
    params: Parameters,
    chats: Sequence[Chat],
    labels: Sequence,
    config: TrainConfig,
    phi: PhiMap | None = None,
) -> tuple[float, np.ndarray]:
    """Objective value and gradient at ``params`` for the given gold links.

    ``labels`` holds one entry per chat: a distance sequence, a sequence of
    :class:`LinkLabel`, or an :class:`AnnotationSet` resolved according to
    ``config.label_policy``.
    """
    _check_mode(params, phi)
    design = _Design(chats, params.indexer, phi)
    obs, row_weight = design.gold_arrays(labels, config.label_policy)
    return design.nll_and_grad(params.theta, obs, row_weight, config.l2)


# ---------------------------------------------------------------------------
# persistence


def save_model(
    path: str | Path,
    params: Parameters,
    metadata: Mapping[str, object] | None = None,
    feature_order: Sequence[str] | None = None,
) -> None:
    """Write the model as a single JSON document; floats round-trip exactly."""
    indexer = params.indexer
    slices = indexer.block_slices()
    theta = params.theta
    if feature_order is None:
        if indexer.n_features == NUM_FEATURES:
            feature_order = FEATURE_NAMES
        else:
            feature_order = tuple(f"f{k}" for k in range(indexer.n_features))
    metadata = dict(metadata or {})
    blocks = {
        "eta": theta[slices["pair"]].tolist(),
        "tau": theta[slices["distance"]].tolist(),
        "pi": theta[slices["self"]].tolist(),
    }
    if indexer.with_cross:
        blocks["w"] = float(theta[indexer.cross_index])
    payload = {
        "version": MODEL_FILE_VERSION,
        "mode": params.mode.value,
        "K": indexer.n_features,
        "W": indexer.window,
        "feature_order": list(feature_order),
        "vocab_hash": metadata.pop("vocab_hash", None),
        "lexicon_hashes": metadata.pop("lexicon_hashes", None),
        "theta_blocks": blocks,
        "metadata": metadata,
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> tuple[Parameters, dict]:
    """Read a model file back into parameters plus its descriptive header."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("version")
    if version != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported model file version {version!r}")
    try:
        mode = Mode(payload["mode"])
        k_feats = int(payload["K"])
        window = int(payload["W"])
        blocks = payload["theta_blocks"]
        eta, tau, pi = blocks["eta"], blocks["tau"], blocks["pi"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed model file: {exc}") from None
    indexer = ParamIndexer(
        n_features=k_feats, window=window, with_cross=mode is Mode.WITH_LDA
    )
    if len(eta) != indexer.pair_size or len(tau) != window or len(pi) != 2 * k_feats:
        raise ValueError("model file block sizes do not match K and W")
    if mode is Mode.WITH_LDA and "w" not in blocks:
        raise ValueError("with-lda model file lacks the cross weight")
    theta = np.concatenate(
        [
            np.asarray(eta, dtype=np.float64),
            np.asarray(tau, dtype=np.float64),
            np.asarray(pi, dtype=np.float64),
            np.asarray([blocks["w"]], dtype=np.float64)
            if mode is Mode.WITH_LDA
            else np.zeros(0),
        ]
    )
    header = {
        "feature_order": tuple(payload.get("feature_order") or ()),
        "vocab_hash": payload.get("vocab_hash"),
        "lexicon_hashes": payload.get("lexicon_hashes"),
        "metadata": payload.get("metadata") or {},
    }
    return Parameters(theta=theta, indexer=indexer), header


# ---------------------------------------------------------------------------
# estimator


class LinkClassifier(BaseEstimator):
    """Dependency-link classifier over chats, in the sklearn idiom.

    ``fit`` expects a sequence of chats and, per chat, gold links given as
    distances, :class:`LinkLabel` lists, or an :class:`AnnotationSet`
    (resolved per ``label_policy``).  ``predict`` returns per-chat label
    lists.  With ``use_lda=True`` every call also needs ``phi``: a mapping
    from chat id to per-message topic distributions.
    """

    def __init__(
        self,
        window: int = DEFAULT_WINDOW,
        l2: float = 1.0,
        label_policy: str = "majority",
        use_lda: bool = False,
        lexicons: LexiconSet | None = None,
        memory: int = 10,
        max_iters: int = 500,
        grad_tol: float = 1e-6,
        seed: int = 0,
    ):
        self.window = window
        self.l2 = l2
        self.label_policy = label_policy
        self.use_lda = use_lda
        self.lexicons = lexicons
        self.memory = memory
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed

    # -- internals ---------------------------------------------------------

    def _prepare(self, X) -> list[Chat]:
        chats = check_chats(X)
        return annotate_features(chats, self.lexicons)

    def _indexer(self) -> ParamIndexer:
        return ParamIndexer(
            n_features=NUM_FEATURES, window=self.window, with_cross=self.use_lda
        )

    def _check_phi(self, phi) -> PhiMap | None:
        if self.use_lda and phi is None:
            raise ValueError("use_lda=True requires per-chat topic distributions")
        if not self.use_lda and phi is not None:
            raise ValueError("mode mismatch: phi given but use_lda=False")
        return phi

    def _require_fitted(self) -> Parameters:
        if not hasattr(self, "params_"):
            raise NotFittedError("LinkClassifier is not fitted")
        return self.params_

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y, phi: PhiMap | None = None):
        TrainConfig(l2=self.l2, label_policy=self.label_policy)  # validates
        phi = self._check_phi(phi)
        chats = self._prepare(X)
        design = _Design(chats, self._indexer(), phi)
        obs, row_weight = design.gold_arrays(y, self.label_policy)

        def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
            return design.nll_and_grad(theta, obs, row_weight, self.l2)

        report = minimize(
            objective,
            np.zeros(design.indexer.dim),
            OptimConfig(
                memory=self.memory, max_iters=self.max_iters, grad_tol=self.grad_tol
            ),
        )
        self.params_ = Parameters(theta=report.x, indexer=design.indexer)
        self.optim_report_ = report
        return self

    def predict(self, X, phi: PhiMap | None = None) -> list[list[LinkLabel]]:
        params = self._require_fitted()
        phi = self._check_phi(phi)
        chats = self._prepare(X)
        return _Design(chats, params.indexer, phi).decode(params.theta)

    def predict_proba(
        self, X, phi: PhiMap | None = None
    ) -> list[list[np.ndarray]]:
        """Per message, probabilities over its candidates in ascending order."""
        params = self._require_fitted()
        phi = self._check_phi(phi)
        out = []
        for chat in self._prepare(X):
            chat_phi = phi[chat.chat_id] if phi is not None else None
            out.append(
                [
                    link_distribution(i, chat, params, chat_phi)
                    for i in range(len(chat))
                ]
            )
        return out

    def score(self, X, y, phi: PhiMap | None = None) -> float:
        """Exact-match accuracy against gold distances, pooled over messages."""
        predictions = self.predict(X, phi)
        chats = check_chats(X)
        hits = 0
        total = 0
        for chat, predicted, y_entry in zip(chats, predictions, y):
            gold = as_distances(y_entry, len(chat))
            hits += sum(
                1 for label, m in zip(predicted, gold) if label.distance == m
            )
            total += len(chat)
        if total == 0:
            raise ValueError("cannot score an empty corpus")
        return hits / total

    def save(self, path: str | Path, metadata: Mapping[str, object] | None = None):
        save_model(path, self._require_fitted(), metadata)

    @classmethod
    def from_file(cls, path: str | Path) -> "LinkClassifier":
        params, _ = load_model(path)
        est = cls(
            window=params.indexer.window, use_lda=params.indexer.with_cross
        )
        est.params_ = params
        return est
