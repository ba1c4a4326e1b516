"""Candidate selection: top entities by prior plus the best of the rest by context."""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .mention import Span
from .store import KnowledgeStore, PriorEntry
from .text import Token


@dataclass(frozen=True)
class SelectionParams:
    k1: int = 4
    k2: int = 3
    k: int = 30
    n_context: int = 50

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 0 or self.n_context < 1:
            raise ValueError("need k1 >= 1, k2 >= 0, n_context >= 1")
        if self.k < self.k1 + self.k2:
            raise ValueError("k must be >= k1 + k2")


@dataclass
class CandidateSet:
    span: Span
    surface: str
    candidates: List[PriorEntry] = field(default_factory=list)
    context: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)


def mention_token_range(tokens: Sequence[Token], span: Span):
    """Indices [lo, hi) of the tokens overlapping the span."""
    lo = hi = None
    for i, tok in enumerate(tokens):
        if tok.end > span.start and tok.start < span.end:
            if lo is None:
                lo = i
            hi = i + 1
        elif tok.start >= span.end:
            break
    if lo is None:
        # span covers only whitespace: anchor the window at its position
        lo = hi = next((i for i, t in enumerate(tokens) if t.start >= span.end), len(tokens))
    return lo, hi


def extract_context(tokens: Sequence[Token], span: Span, n_context: int = 50) -> List[str]:
    """Up to n//2 word tokens left of the mention and n - n//2 to its right."""
    lo, hi = mention_token_range(tokens, span)
    left = [t.text for t in tokens[:lo] if t.is_word]
    right = [t.text for t in tokens[hi:] if t.is_word]
    n_left = n_context // 2
    return (left[-n_left:] if n_left else []) + right[:n_context - n_left]


def context_score(entity: int, context: Sequence[str], store: KnowledgeStore) -> float:
    """e . sum of context word vectors (out-of-vocabulary words skipped)."""
    words = store.word_matrix(context)
    if len(words) == 0:
        return 0.0
    total = words.astype(np.float64).sum(axis=0)
    return float(store.entity_matrix([entity])[0].astype(np.float64) @ total)


def select_candidates(doc: str, tokens: Sequence[Token], span: Span, store: KnowledgeStore,
                      params: SelectionParams = SelectionParams()) -> CandidateSet:
    surface = doc[span.start:span.end]
    context = extract_context(tokens, span, params.n_context)
    ranked = store.lookup_prior(surface)[:params.k]
    result = CandidateSet(span, surface, context=context)
    if len(ranked) <= params.k1:
        result.candidates = ranked
        return result
    head, rest = ranked[:params.k1], ranked[params.k1:]
    picked: List[PriorEntry] = []
    if params.k2 > 0:
        words = store.word_matrix(context)
        if len(words):
            ctx = words.astype(np.float64).sum(axis=0)
            ents = store.entity_matrix([c.entity for c in rest]).astype(np.float64)
            scores = ents @ ctx
        else:
            scores = np.zeros(len(rest))
        order = sorted(range(len(rest)), key=lambda i: (-scores[i], rest[i].entity))
        picked = [rest[i] for i in order[:params.k2]]
    result.candidates = head + picked
    return result
