"""Rule baselines, agreement statistics, metrics, and cross-validation.

Accuracy here is the expected probability that a prediction matches a
uniformly chosen annotator, the weighted F1 averages per-distance harmonic
means by gold support, and Fleiss' kappa measures chance-corrected
agreement among a fixed number of annotators.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    AnnotationSet,
    Chat,
    DEFAULT_WINDOW,
    LinkLabel,
    Speaker,
    majority_distances,
)
from .validation import as_distances


@dataclass
class ClassMetrics:
    distance: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricReport:
    accuracy: float
    weighted_f1: float
    per_class: list[ClassMetrics]
    n_messages: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "n_messages": self.n_messages,
            "per_class": [
                {
                    "distance": c.distance,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
        }


def rule1(chat: Chat) -> list[LinkLabel]:
    """Every message links to its immediate precedent (first one to itself)."""
    return [LinkLabel(i, 0 if i == 0 else 1) for i in range(len(chat))]


def rule2(chat: Chat) -> list[LinkLabel]:
    """Link to the precedent only when the precedent is a customer message."""
    labels = [LinkLabel(0, 0)]
    for i in range(1, len(chat)):
        precedent_is_customer = chat.messages[i - 1].speaker is Speaker.CUSTOMER
        labels.append(LinkLabel(i, 1 if precedent_is_customer else 0))
    return labels


def accuracy_vs_random_annotator(
    preds: Sequence[LinkLabel] | Sequence[int], annots: AnnotationSet
) -> float:
    """Mean over messages of the fraction of annotators agreeing with the
    prediction, i.e. the exact expectation of matching one random annotator."""
    if not annots.entries:
        raise ValueError(f"chat {annots.chat_id!r} has no annotators")
    n_messages = annots.n_messages()
    distances = as_distances(preds, n_messages, what="predictions")
    n_annotators = len(annots.entries)
    agree = 0.0
    for i, predicted in enumerate(distances):
        agree += sum(
            1 for labels in annots.entries.values() if labels[i].distance == predicted
        ) / n_annotators
    return agree / n_messages


def corpus_accuracy(
    preds_by_chat: Mapping[str, Sequence[LinkLabel] | Sequence[int]],
    annotation_sets: Sequence[AnnotationSet],
) -> float:
    """Message-pooled accuracy over a whole corpus."""
    agree = 0.0
    total = 0
    for annots in annotation_sets:
        n = annots.n_messages()
        preds = preds_by_chat[annots.chat_id]
        agree += accuracy_vs_random_annotator(preds, annots) * n
        total += n
    if total == 0:
        raise ValueError("no annotated messages to score")
    return agree / total


def weighted_f1(
    preds: Sequence[LinkLabel] | Sequence[int],
    gold: Sequence[LinkLabel] | Sequence[int],
    window: int = DEFAULT_WINDOW,
) -> MetricReport:
    """Per-distance precision/recall/F1 (0/0 counts as 0) with the weighted
    average taken over gold support.  ``accuracy`` is plain exact match."""
    gold_d = as_distances(gold, len(gold), what="gold labels")
    pred_d = as_distances(preds, len(gold_d), what="predictions")
    n = len(gold_d)
    per_class = []
    weighted = 0.0
    hits = sum(1 for p, g in zip(pred_d, gold_d) if p == g)
    for m in range(window + 1):
        tp = sum(1 for p, g in zip(pred_d, gold_d) if p == m and g == m)
        fp = sum(1 for p, g in zip(pred_d, gold_d) if p == m and g != m)
        fn = sum(1 for p, g in zip(pred_d, gold_d) if p != m and g == m)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        per_class.append(ClassMetrics(m, precision, recall, f1, support))
        weighted += f1 * support
    return MetricReport(
        accuracy=hits / n if n else 0.0,
        weighted_f1=weighted / n if n else 0.0,
        per_class=per_class,
        n_messages=n,
    )


def pooled_weighted_f1(
    preds_by_chat: Mapping[str, Sequence[LinkLabel] | Sequence[int]],
    gold_by_chat: Mapping[str, Sequence[int]],
    window: int = DEFAULT_WINDOW,
) -> MetricReport:
    """Weighted F1 over the concatenation of all chats' messages."""
    all_preds: list[int] = []
    all_gold: list[int] = []
    for chat_id, gold in gold_by_chat.items():
        preds = as_distances(preds_by_chat[chat_id], len(gold), what="predictions")
        all_preds.extend(preds)
        all_gold.extend(gold)
    return weighted_f1(all_preds, all_gold, window)


def fleiss_kappa(
    annotation_sets: Sequence[AnnotationSet], window: int = DEFAULT_WINDOW
) -> float:
    """Chance-corrected agreement over all messages, categories 0..W.

    Every message must carry the same number n >= 2 of labels.  When the
    expected agreement is 1 (a single category used throughout), returns
    1.0 by convention.
    """
    n_raters = None
    counts = []
    for annots in annotation_sets:
        if len(annots.entries) < 2:
            raise ValueError(
                f"chat {annots.chat_id!r} has fewer than 2 annotators"
            )
        if n_raters is None:
            n_raters = len(annots.entries)
        elif len(annots.entries) != n_raters:
            raise ValueError("all messages must have the same number of annotators")
        for i in range(annots.n_messages()):
            row = Counter(labels[i].distance for labels in annots.entries.values())
            if any(not 0 <= m <= window for m in row):
                raise ValueError("annotation distance outside 0..W")
            counts.append([row.get(m, 0) for m in range(window + 1)])
    if not counts:
        raise ValueError("no annotated messages")
    table = np.asarray(counts, dtype=np.float64)
    n_items = table.shape[0]
    p_item = (np.square(table).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = float(p_item.mean())
    category_share = table.sum(axis=0) / (n_items * n_raters)
    p_expected = float(np.square(category_share).sum())
    if p_expected >= 1.0:
        return 1.0
    return (p_bar - p_expected) / (1.0 - p_expected)


def human_performance(
    annotation_sets: Sequence[AnnotationSet],
) -> tuple[float, float]:
    """Score each annotator against the others they co-annotated with.

    Per annotator: the fraction of the *other* annotators agreeing with
    them, averaged over all messages they labeled.  Returns the mean and
    population standard deviation across annotators.
    """
    agree: dict[str, float] = {}
    seen: dict[str, int] = {}
    for annots in annotation_sets:
        annotators = annots.annotators
        if len(annotators) < 2:
            raise ValueError(
                f"chat {annots.chat_id!r} has fewer than 2 annotators"
            )
        n = annots.n_messages()
        for annotator in annotators:
            others = [a for a in annotators if a != annotator]
            own = annots.entries[annotator]
            for i in range(n):
                matching = sum(
                    1 for o in others if annots.entries[o][i].distance == own[i].distance
                )
                agree[annotator] = agree.get(annotator, 0.0) + matching / len(others)
                seen[annotator] = seen.get(annotator, 0) + 1
    scores = np.array([agree[a] / seen[a] for a in sorted(agree)])
    return float(scores.mean()), float(scores.std())


def agreement_upper_bound(annotation_sets: Sequence[AnnotationSet]) -> float:
    """Best achievable accuracy: per message pick the modal label (ties to
    the smallest distance) and score it against a random annotator."""
    best_preds = {
        annots.chat_id: majority_distances(annots) for annots in annotation_sets
    }
    return corpus_accuracy(best_preds, annotation_sets)


def kfold_split(
    chats: Sequence[Chat], k: int = 5, seed: int = 0
) -> list[tuple[list[Chat], list[Chat]]]:
    """Chat-level k-fold partition after a seed-deterministic shuffle.

    Fold sizes differ by at most one; every chat lands in exactly one test
    fold.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(chats) < k:
        raise ValueError(f"need at least k={k} chats, got {len(chats)}")
    order = np.random.default_rng(seed).permutation(len(chats))
    folds = []
    for fold in range(k):
        test_ids = {int(x) for x in order[fold::k]}
        train = [chat for idx, chat in enumerate(chats) if idx not in test_ids]
        test = [chat for idx, chat in enumerate(chats) if idx in test_ids]
        folds.append((train, test))
    return folds
