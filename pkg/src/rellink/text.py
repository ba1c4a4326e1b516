"""Surface normalization and tokenization shared by all pipeline stages."""

import re
import unicodedata
from typing import List, NamedTuple

_WS = re.compile(r"\s+")
# word runs, or any single non-space non-word character
_TOKEN = re.compile(r"\w+|[^\w\s]")
_WORD = re.compile(r"\w")


class Token(NamedTuple):
    text: str
    start: int
    end: int

    @property
    def is_word(self) -> bool:
        return _WORD.match(self.text) is not None


def normalize_surface(text: str, lowercase: bool = True) -> str:
    """NFC-normalize, collapse whitespace runs, strip and (by default) lowercase."""
    text = unicodedata.normalize("NFC", text)
    text = _WS.sub(" ", text).strip()
    return text.lower() if lowercase else text


def tokenize(text: str) -> List[Token]:
    """Split text into word and punctuation tokens with code-point offsets."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN.finditer(text)]


def normalize_title(title: str) -> str:
    """Canonical Wikipedia-style title: underscores, no fragment, capitalized first letter."""
    title = title.split("#", 1)[0]
    title = _WS.sub(" ", title.replace("_", " ")).strip().replace(" ", "_")
    if not title:
        return title
    return title[0].upper() + title[1:]
