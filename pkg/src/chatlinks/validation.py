"""Input validation helpers shared by the estimators, ops, and CLI."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import AnnotationSet, Chat, LinkLabel, majority_distances


def check_chats(X) -> list[Chat]:
    """Materialize and type-check a chat collection."""
    chats = list(X)
    for item in chats:
        if not isinstance(item, Chat):
            raise TypeError(f"expected a Chat, got {type(item).__name__}")
    return chats


def ensure_flags(chats: Iterable[Chat]) -> None:
    """Require every message to carry an extracted feature vector."""
    for chat in chats:
        for message in chat.messages:
            if message.flags is None:
                raise ValueError(
                    f"message {message.index} of chat {chat.chat_id!r} has no "
                    "feature flags; run feature annotation first"
                )


def check_phi_map(
    chats: Sequence[Chat], phi_map: Mapping[str, Sequence[np.ndarray]]
) -> None:
    """Topic distributions must cover every message of every chat."""
    for chat in chats:
        if chat.chat_id not in phi_map:
            raise ValueError(f"no topic distributions for chat {chat.chat_id!r}")
        if len(phi_map[chat.chat_id]) != len(chat):
            raise ValueError(
                f"topic distributions for chat {chat.chat_id!r} cover "
                f"{len(phi_map[chat.chat_id])} messages, expected {len(chat)}"
            )


def as_distances(
    y_entry, n_messages: int, what: str = "labels"
) -> list[int]:
    """Normalize one chat's gold labels to a plain distance list."""
    if isinstance(y_entry, AnnotationSet):
        distances = majority_distances(y_entry)
    else:
        entry = list(y_entry)
        if entry and isinstance(entry[0], LinkLabel):
            distances = [label.distance for label in entry]
        else:
            distances = [int(m) for m in entry]
    if len(distances) != n_messages:
        raise ValueError(
            f"{what} cover {len(distances)} messages, expected {n_messages}"
        )
    return distances
