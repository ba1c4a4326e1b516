"""Mention detection: dictionary n-gram matching and an adapter for external spans."""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import InvalidSpan, MalformedLine, OutOfBounds, Overlap
from .text import Token, tokenize


@dataclass(frozen=True)
class Span:
    start: int
    length: int
    md_confidence: Optional[float] = None
    tag: Optional[str] = None

    @property
    def end(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class DetectorConfig:
    max_ngram: int = 5
    min_link_probability: float = 0.001

    def __post_init__(self):
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")
        if not 0.0 <= self.min_link_probability <= 1.0:
            raise ValueError("min_link_probability must lie in [0, 1]")


def resolve_overlaps(matches: Iterable[Tuple[int, int, int, int]]) -> List[Tuple[int, int]]:
    """Greedy longest-first selection over (n_tokens, tok_start, char_start, char_end).

    Longer matches (in tokens) win, then the leftmost; anything overlapping an
    accepted match is discarded. Returns accepted (char_start, char_end) sorted.
    """
    taken: List[Tuple[int, int]] = []
    for _, _, s, e in sorted(matches, key=lambda m: (-m[0], m[2])):
        if all(e <= ts or s >= te for ts, te in taken):
            taken.append((s, e))
    return sorted(taken)


def detect_gazetteer(doc: str, store, cfg: DetectorConfig = DetectorConfig(),
                     tokens: Optional[List[Token]] = None) -> List[Span]:
    """Match every token n-gram (n <= max_ngram) against the store's surface index.

    A match survives the threshold when its best prior is >= min_link_probability.
    """
    tokens = tokens if tokens is not None else tokenize(doc)
    matches = []
    for i in range(len(tokens)):
        for n in range(1, min(cfg.max_ngram, len(tokens) - i) + 1):
            start, end = tokens[i].start, tokens[i + n - 1].end
            top = store.top_prior(store.normalize(doc[start:end]))
            if top is not None and top >= cfg.min_link_probability:
                matches.append((n, i, start, end))
    return [Span(s, e - s) for s, e in resolve_overlaps(matches)]


def adapt_external_spans(doc: str, spans: Sequence) -> List[Span]:
    """Validate spans produced elsewhere (an NER tagger, an API client).

    Accepts :class:`Span` objects, ``(start, length[, tag[, confidence]])``
    sequences, or dicts with those keys. Errors name the offending index in
    the caller's order.
    """
    parsed = []
    for idx, raw in enumerate(spans):
        span = _coerce_span(idx, raw)
        if span.length < 1:
            raise InvalidSpan(idx, "length must be >= 1")
        if span.start < 0 or span.end > len(doc):
            raise OutOfBounds(idx, span.start, span.length, len(doc))
        parsed.append((idx, span))
    parsed.sort(key=lambda p: (p[1].start, p[1].length))
    for (i, a), (j, b) in zip(parsed, parsed[1:]):
        if b.start < a.end:
            raise Overlap(min(i, j), max(i, j))
    return [span for _, span in parsed]


def _coerce_span(idx: int, raw) -> Span:
    if isinstance(raw, Span):
        return raw
    try:
        if isinstance(raw, dict):
            start, length = raw["start"], raw["length"]
            tag, conf = raw.get("tag"), raw.get("confidence", raw.get("md_confidence"))
        else:
            raw = list(raw)
            if not 2 <= len(raw) <= 4:
                raise ValueError
            start, length = raw[0], raw[1]
            tag = raw[2] if len(raw) > 2 else None
            conf = raw[3] if len(raw) > 3 else None
        if isinstance(start, bool) or isinstance(length, bool):
            raise ValueError
        if not (isinstance(start, int) and isinstance(length, int)):
            raise ValueError
        conf = None if conf is None else float(conf)
    except (KeyError, TypeError, ValueError):
        raise InvalidSpan(idx, "expected integer start and length") from None
    return Span(start, length, conf, None if tag is None else str(tag))


def read_span_tsv(path) -> List[tuple]:
    """Read ``start<TAB>length[<TAB>tag[<TAB>confidence]]`` lines."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                if not 2 <= len(parts) <= 4:
                    raise ValueError
                row = [int(parts[0]), int(parts[1])]
                if len(parts) > 2:
                    row.append(parts[2] or None)
                if len(parts) > 3:
                    row.append(float(parts[3]))
            except ValueError:
                raise MalformedLine(path, lineno, "expected start<TAB>length[<TAB>tag[<TAB>confidence]]") from None
            out.append(tuple(row))
    return out
