"""Lexicon resources driving token normalization and binary message features.

A :class:`LexiconSet` bundles the word lists (question words, answer words,
emoticons, image markers, geographic names) and the URL pattern used when
preparing transcripts.  Lexicons are plain text files with one entry per
line; sample English and Chinese lists ship with the package.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path

DEFAULT_URL_PATTERN = r"(?:https?|ftp)://\S+|www\.\S+"

#: lexicon file stem -> LexiconSet field, in load order
LEXICON_FILES = (
    "question_words",
    "answer_words",
    "emoticons",
    "image_markers",
    "geo_names",
)


@dataclass(frozen=True)
class LexiconSet:
    """Immutable bundle of word lists plus the URL pattern."""

    question_words: frozenset[str]
    answer_words: frozenset[str]
    emoticons: frozenset[str]
    image_markers: frozenset[str]
    geo_names: frozenset[str]
    url_pattern: str = DEFAULT_URL_PATTERN

    @cached_property
    def url_regex(self) -> re.Pattern[str]:
        return re.compile(self.url_pattern)

    def fingerprints(self) -> dict[str, str]:
        """SHA-256 digest per word list, for embedding in model files."""
        out: dict[str, str] = {}
        for name in LEXICON_FILES:
            entries = sorted(getattr(self, name))
            digest = hashlib.sha256("\n".join(entries).encode("utf-8"))
            out[name] = digest.hexdigest()
        out["url_pattern"] = hashlib.sha256(
            self.url_pattern.encode("utf-8")
        ).hexdigest()
        return out

    def merged(self, other: "LexiconSet") -> "LexiconSet":
        """Union of the word lists; keeps this set's URL pattern."""
        merged = {
            name: frozenset(getattr(self, name) | getattr(other, name))
            for name in LEXICON_FILES
        }
        return LexiconSet(url_pattern=self.url_pattern, **merged)


def read_word_list(path: str | Path) -> frozenset[str]:
    """Read a one-entry-per-line word list; blank lines are ignored."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(line.strip() for line in lines if line.strip())


def load_lexicons(directory: str | Path, url_pattern: str = DEFAULT_URL_PATTERN) -> LexiconSet:
    """Load a lexicon set from a directory of ``<name>.txt`` word lists.

    Missing files yield empty lists rather than errors, so partial
    lexicon directories are usable.
    """
    directory = Path(directory)
    kwargs = {}
    for name in LEXICON_FILES:
        path = directory / f"{name}.txt"
        kwargs[name] = read_word_list(path) if path.exists() else frozenset()
    return LexiconSet(url_pattern=url_pattern, **kwargs)


@lru_cache(maxsize=None)
def bundled_lexicons(language: str = "all") -> LexiconSet:
    """The sample lexicons shipped with the package.

    ``language`` is ``"en"``, ``"zh"``, or ``"all"`` for the union of both.
    """
    root = resources.files("chatlinks").joinpath("data/lexicons")
    if language in ("en", "zh"):
        return load_lexicons(Path(str(root.joinpath(language))))
    if language == "all":
        en = load_lexicons(Path(str(root.joinpath("en"))))
        zh = load_lexicons(Path(str(root.joinpath("zh"))))
        return en.merged(zh)
    raise ValueError(f"unknown lexicon language {language!r}")
