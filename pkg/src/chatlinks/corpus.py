"""Data model and preparation for two-party chat transcripts.

A corpus is a sequence of :class:`Chat` objects, each an ordered list of
:class:`Message` turns spoken by one of two roles.  Dependency links are
expressed as backward distances (:class:`LinkLabel`), human labels are
grouped per chat in :class:`AnnotationSet`, and the training vocabulary is
a frequency-ranked :class:`Vocab`.

File formats (UTF-8, one JSON object per line):

* chat record:        ``{"chat_id": ..., "messages": [{"speaker": "C"|"A",
  "text": ..., "tokens": [...]?}, ...]}``
* annotation record:  ``{"chat_id": ..., "annotator_id": ...,
  "distances": [int, ...]}``

Both record kinds may appear in one file; :func:`load_corpus` returns them
separately, preserving file order.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from hashlib import sha256
from pathlib import Path
from typing import Iterable, Sequence

from .lexicons import LexiconSet

DEFAULT_WINDOW = 5
DEFAULT_VOCAB_CAP = 5400

URL_TOKEN = "<URL>"
IMG_TOKEN = "<IMG>"
EMO_TOKEN = "<EMO>"
GEO_TOKEN = "<GEO>"
NUM_TOKEN = "<NUM>"
RARE_TOKEN = "<RARE>"

#: type tokens substituted for non-word or rare material; always in-vocabulary
RESERVED_TOKENS = frozenset(
    {URL_TOKEN, IMG_TOKEN, EMO_TOKEN, GEO_TOKEN, NUM_TOKEN, RARE_TOKEN}
)

#: ASCII and full-width question marks
QUESTION_MARKS = frozenset({"?", "？"})

_NUM_RE = re.compile(r"\d+(?:[.,]\d+)*")


class Speaker(str, Enum):
    CUSTOMER = "C"
    AGENT = "A"


class CorpusFormatError(ValueError):
    """A corpus or annotation file failed parsing or validation."""


@dataclass(frozen=True)
class Message:
    """One turn in a chat.

    ``flags`` holds the binary feature vector once the features module has
    filled it; it is ``None`` for raw, un-annotated messages.
    """

    index: int
    speaker: Speaker
    raw_text: str = ""
    tokens: tuple[str, ...] = ()
    flags: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Chat:
    chat_id: str
    messages: tuple[Message, ...]

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError(f"chat {self.chat_id!r} has no messages")
        for pos, message in enumerate(self.messages):
            if message.index != pos:
                raise ValueError(
                    f"chat {self.chat_id!r}: message index {message.index} "
                    f"does not match position {pos}"
                )

    def __len__(self) -> int:
        return len(self.messages)

    @property
    def speakers(self) -> tuple[Speaker, ...]:
        return tuple(m.speaker for m in self.messages)


@dataclass(frozen=True)
class LinkLabel:
    """Dependency of one message expressed as a backward distance.

    Distance 0 is a self-link; distance m points at message
    ``message_index - m``.  Links may never point past the window or before
    message 0, which keeps the per-chat link structure a 1-regular directed
    graph whose only cycles are self loops.
    """

    message_index: int
    distance: int

    def __post_init__(self) -> None:
        if self.message_index < 0:
            raise ValueError("message_index must be >= 0")

    @property
    def antecedent(self) -> int:
        return self.message_index - self.distance

    def check_range(self, window: int) -> None:
        limit = min(window, self.message_index)
        if not 0 <= self.distance <= limit:
            raise ValueError(
                f"label out of range: message {self.message_index} "
                f"distance {self.distance} exceeds {limit}"
            )


@dataclass
class AnnotationSet:
    """Per-chat labels from one or more annotators, one label per message."""

    chat_id: str
    entries: dict[str, tuple[LinkLabel, ...]]

    @property
    def annotators(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def distances(self, annotator_id: str) -> list[int]:
        return [label.distance for label in self.entries[annotator_id]]

    def n_messages(self) -> int:
        lengths = {len(labels) for labels in self.entries.values()}
        if len(lengths) != 1:
            raise ValueError(f"annotators of chat {self.chat_id!r} disagree on length")
        return lengths.pop()


@dataclass(frozen=True)
class Vocab:
    """Frequency-ranked word list capped at ``cap`` entries.

    Ties are broken lexicographically.  Reserved type tokens are always
    treated as in-vocabulary and never occupy ranked slots.
    """

    words: tuple[str, ...]
    counts: tuple[int, ...]
    cap: int

    @cached_property
    def _index(self) -> frozenset[str]:
        return frozenset(self.words)

    def __contains__(self, token: str) -> bool:
        return token in RESERVED_TOKENS or token in self._index

    def __len__(self) -> int:
        return len(self.words)

    def fingerprint(self) -> str:
        return sha256("\n".join(self.words).encode("utf-8")).hexdigest()


def tokenize(text: str) -> tuple[str, ...]:
    """Default tokenizer: whitespace splitting.

    Pre-segmented input (a ``tokens`` array in the corpus file) bypasses
    this entirely, so language-specific segmentation can happen upstream.
    """
    return tuple(text.split())


def labels_from_distances(distances: Sequence[int]) -> tuple[LinkLabel, ...]:
    return tuple(LinkLabel(i, int(m)) for i, m in enumerate(distances))


def exchange_ratio(chat: Chat) -> float:
    """Fraction of adjacent message pairs spoken by different roles."""
    if len(chat) < 2:
        raise ValueError(f"undefined ratio: chat {chat.chat_id!r} has fewer than 2 messages")
    speakers = chat.speakers
    pairs = len(speakers) - 1
    changes = sum(1 for a, b in zip(speakers, speakers[1:]) if a != b)
    return changes / pairs


def build_vocab(chats: Iterable[Chat], cap: int = DEFAULT_VOCAB_CAP) -> Vocab:
    """Rank words by frequency (ties lexicographic) and keep the top ``cap``.

    Reserved type tokens are skipped: they are unconditionally treated as
    in-vocabulary by :meth:`Vocab.__contains__`.
    """
    if cap <= 0:
        raise ValueError(f"vocabulary cap must be positive, got {cap}")
    freq: Counter[str] = Counter()
    for chat in chats:
        for message in chat.messages:
            freq.update(t for t in message.tokens if t not in RESERVED_TOKENS)
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    words = tuple(w for w, _ in ranked)
    counts = tuple(c for _, c in ranked)
    return Vocab(words=words, counts=counts, cap=cap)


def replace_special_tokens(
    tokens: Sequence[str], lexicons: LexiconSet
) -> tuple[str, ...]:
    """Substitute type tokens for URLs, images, emoticons, places, numbers.

    This is the vocabulary-independent half of normalization; it runs
    before vocabulary construction so that type tokens are counted as
    single types.
    """
    out = []
    for token in tokens:
        if token in RESERVED_TOKENS:
            out.append(token)
        elif lexicons.url_regex.fullmatch(token):
            out.append(URL_TOKEN)
        elif token in lexicons.image_markers:
            out.append(IMG_TOKEN)
        elif token in lexicons.emoticons:
            out.append(EMO_TOKEN)
        elif token in lexicons.geo_names:
            out.append(GEO_TOKEN)
        elif _NUM_RE.fullmatch(token):
            out.append(NUM_TOKEN)
        else:
            out.append(token)
    return tuple(out)


def normalize_message(message: Message, vocab: Vocab, lexicons: LexiconSet) -> Message:
    """Replace special material by type tokens and rare words by ``<RARE>``.

    Question and answer lexicon entries (and question marks) survive
    normalization even when outside the ranked vocabulary, because the
    binary features are read off the normalized token stream.  The original
    ``raw_text`` is retained untouched.
    """
    kept = (
        lexicons.question_words | lexicons.answer_words | QUESTION_MARKS
    )
    out = []
    for token in replace_special_tokens(message.tokens, lexicons):
        if token in vocab or token in kept:
            out.append(token)
        else:
            out.append(RARE_TOKEN)
    return replace(message, tokens=tuple(out))


def normalize_chat(chat: Chat, vocab: Vocab, lexicons: LexiconSet) -> Chat:
    messages = tuple(normalize_message(m, vocab, lexicons) for m in chat.messages)
    return Chat(chat_id=chat.chat_id, messages=messages)


def filter_chats(
    chats: Iterable[Chat],
    min_len: int = 10,
    max_len: int = 35,
    min_ratio: float = 0.4,
    max_ratio: float = 0.6,
) -> list[Chat]:
    """Keep chats whose length and exchange ratio fall in the given closed
    intervals.  Single-message chats have no exchange ratio and are dropped."""
    if min_len > max_len:
        raise ValueError(f"min_len {min_len} exceeds max_len {max_len}")
    if min_ratio > max_ratio:
        raise ValueError(f"min_ratio {min_ratio} exceeds max_ratio {max_ratio}")
    kept = []
    for chat in chats:
        if not min_len <= len(chat) <= max_len:
            continue
        if len(chat) < 2:
            continue
        if min_ratio <= exchange_ratio(chat) <= max_ratio:
            kept.append(chat)
    return kept


def majority_distances(annots: AnnotationSet) -> list[int]:
    """Per-message plurality label; ties resolved toward the smallest distance."""
    n = annots.n_messages()
    out = []
    for i in range(n):
        votes = Counter(labels[i].distance for labels in annots.entries.values())
        best = min(votes, key=lambda d: (-votes[d], d))
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# file IO


def _parse_chat_record(record: dict, line_no: int) -> Chat:
    try:
        chat_id = record["chat_id"]
        raw_messages = record["messages"]
    except KeyError as exc:
        raise CorpusFormatError(f"line {line_no}: missing key {exc}") from None
    if not isinstance(raw_messages, list) or not raw_messages:
        raise CorpusFormatError(f"line {line_no}: chat {chat_id!r} has no messages")
    messages = []
    for i, raw in enumerate(raw_messages):
        try:
            speaker = Speaker(raw["speaker"])
        except (KeyError, ValueError):
            raise CorpusFormatError(
                f"line {line_no}: message {i} of chat {chat_id!r} has no valid speaker"
            ) from None
        text = raw.get("text", "")
        tokens = tuple(raw["tokens"]) if "tokens" in raw else tokenize(text)
        messages.append(
            Message(index=i, speaker=speaker, raw_text=text, tokens=tokens)
        )
    return Chat(chat_id=str(chat_id), messages=tuple(messages))


def _parse_annotation_record(
    record: dict, line_no: int, chat_lengths: dict[str, int], window: int
) -> tuple[str, str, tuple[LinkLabel, ...]]:
    chat_id = str(record["chat_id"])
    annotator_id = str(record["annotator_id"])
    distances = record.get("distances")
    if not isinstance(distances, list):
        raise CorpusFormatError(f"line {line_no}: annotation lacks a distances array")
    if chat_id not in chat_lengths:
        raise CorpusFormatError(f"line {line_no}: annotation references unknown chat {chat_id!r}")
    if len(distances) != chat_lengths[chat_id]:
        raise CorpusFormatError(
            f"line {line_no}: annotation for chat {chat_id!r} covers "
            f"{len(distances)} messages, expected {chat_lengths[chat_id]}"
        )
    labels = []
    for i, m in enumerate(distances):
        label = LinkLabel(i, int(m))
        try:
            label.check_range(window)
        except ValueError as exc:
            raise CorpusFormatError(f"line {line_no}: {exc}") from None
        labels.append(label)
    return chat_id, annotator_id, tuple(labels)


def _iter_records(path: Path):
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise CorpusFormatError(f"line {line_no}: record is not a JSON object")
            yield line_no, record


def load_corpus(
    path: str | Path, window: int = DEFAULT_WINDOW
) -> tuple[list[Chat], list[AnnotationSet]]:
    """Parse a line-delimited corpus file, including embedded annotations.

    Records appear in the result in file order.  Annotations are grouped
    per chat and validated against the chats seen so far.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    chats: list[Chat] = []
    chat_lengths: dict[str, int] = {}
    annot_by_chat: dict[str, AnnotationSet] = {}
    for line_no, record in _iter_records(path):
        if "messages" in record:
            chat = _parse_chat_record(record, line_no)
            if chat.chat_id in chat_lengths:
                raise CorpusFormatError(
                    f"line {line_no}: duplicate chat id {chat.chat_id!r}"
                )
            chats.append(chat)
            chat_lengths[chat.chat_id] = len(chat)
        elif "annotator_id" in record:
            chat_id, annotator_id, labels = _parse_annotation_record(
                record, line_no, chat_lengths, window
            )
            group = annot_by_chat.setdefault(
                chat_id, AnnotationSet(chat_id=chat_id, entries={})
            )
            group.entries[annotator_id] = labels
        else:
            raise CorpusFormatError(
                f"line {line_no}: record is neither a chat nor an annotation"
            )
    return chats, list(annot_by_chat.values())


def load_annotations(
    path: str | Path, chats: Sequence[Chat], window: int = DEFAULT_WINDOW
) -> list[AnnotationSet]:
    """Parse an annotation-only file, validated against ``chats``."""
    path = Path(path)
    chat_lengths = {c.chat_id: len(c) for c in chats}
    annot_by_chat: dict[str, AnnotationSet] = {}
    for line_no, record in _iter_records(path):
        if "annotator_id" not in record:
            raise CorpusFormatError(f"line {line_no}: expected an annotation record")
        chat_id, annotator_id, labels = _parse_annotation_record(
            record, line_no, chat_lengths, window
        )
        group = annot_by_chat.setdefault(
            chat_id, AnnotationSet(chat_id=chat_id, entries={})
        )
        group.entries[annotator_id] = labels
    return list(annot_by_chat.values())


def chat_to_record(chat: Chat) -> dict:
    return {
        "chat_id": chat.chat_id,
        "messages": [
            {"speaker": m.speaker.value, "text": m.raw_text, "tokens": list(m.tokens)}
            for m in chat.messages
        ],
    }


def annotation_records(annots: AnnotationSet) -> list[dict]:
    return [
        {
            "chat_id": annots.chat_id,
            "annotator_id": annotator_id,
            "distances": [label.distance for label in labels],
        }
        for annotator_id, labels in annots.entries.items()
    ]


def save_corpus(
    path: str | Path,
    chats: Sequence[Chat],
    annotations: Sequence[AnnotationSet] = (),
) -> None:
    """Write chats (then annotations) as line-delimited JSON, order preserved."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for chat in chats:
            json.dump(chat_to_record(chat), handle, ensure_ascii=False)
            handle.write("\n")
        for annots in annotations:
            for record in annotation_records(annots):
                json.dump(record, handle, ensure_ascii=False)
                handle.write("\n")
