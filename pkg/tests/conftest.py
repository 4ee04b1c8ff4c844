"""Shared builders for the test suite."""

import pytest

from chatlinks import Chat, Message, Speaker


def build_chat(chat_id, speakers, tokens=None, flags=None):
    """Chat from a speaker string like "CACA"; optional per-message extras."""
    messages = []
    for i, code in enumerate(speakers):
        toks = tuple(tokens[i]) if tokens is not None else ()
        f = tuple(flags[i]) if flags is not None else None
        messages.append(
            Message(
                index=i,
                speaker=Speaker(code),
                raw_text=" ".join(toks),
                tokens=toks,
                flags=f,
            )
        )
    return Chat(chat_id=chat_id, messages=tuple(messages))


@pytest.fixture
def chat_factory():
    return build_chat
