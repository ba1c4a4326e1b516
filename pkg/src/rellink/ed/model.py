"""Document-level disambiguation: candidate prep, joint scoring and decoding."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..candidates import CandidateSet, SelectionParams, mention_token_range, select_candidates
from ..mention import Span
from ..store import KnowledgeStore
from ..text import Token, tokenize
from .calibration import apply_calibration
from .lbp import max_product_lbp
from .params import EDParams
from .scoring import NEG, encode_mentions, final_score, local_psi, pairwise_alpha, pairwise_tables


@dataclass
class Annotation:
    start: int
    length: int
    surface: str
    entity: str
    ed_confidence: float
    md_confidence: Optional[float] = None
    tag: Optional[str] = None

    def to_record(self) -> list:
        """[start, length, mention, entity, ED confidence, MD confidence, tag]."""
        return [self.start, self.length, self.surface, self.entity,
                self.ed_confidence, self.md_confidence, self.tag]


@dataclass
class PreparedDoc:
    """Candidate sets and padded embedding tensors for the linkable mentions.

    Everything here is fixed by the store, so training prepares each document once.
    """

    candsets: List[CandidateSet]
    entity_ids: np.ndarray        # (n, C), -1 on padding
    cand: torch.Tensor            # (n, C, d)
    cand_mask: torch.Tensor       # (n, C)
    log_prior: torch.Tensor       # (n, C)
    ctx: torch.Tensor             # (n, c, d)
    ctx_mask: torch.Tensor        # (n, c)
    mention_avg: torch.Tensor     # (n, d)
    ctx_avg: torch.Tensor         # (n, d)

    def __len__(self) -> int:
        return len(self.candsets)


def _mean_or_zero(mat: np.ndarray, d: int) -> np.ndarray:
    return mat.astype(np.float64).mean(axis=0) if len(mat) else np.zeros(d)


def prepare_document(doc: str, spans: Sequence[Span], store: KnowledgeStore,
                     selection: SelectionParams = SelectionParams(),
                     tokens: Optional[List[Token]] = None,
                     dtype=torch.float64) -> PreparedDoc:
    tokens = tokens if tokens is not None else tokenize(doc)
    d = store.dim
    candsets, ctx_rows, mention_rows = [], [], []
    for span in spans:
        cs = select_candidates(doc, tokens, span, store, selection)
        if not cs.candidates:
            continue
        lo, hi = mention_token_range(tokens, span)
        candsets.append(cs)
        ctx_rows.append(store.word_matrix(cs.context))
        mention_rows.append(store.word_matrix([t.text for t in tokens[lo:hi] if t.is_word]))

    n = len(candsets)
    C = max((len(cs) for cs in candsets), default=0)
    c = max((len(r) for r in ctx_rows), default=0)
    entity_ids = np.full((n, C), -1, dtype=np.int64)
    cand = np.zeros((n, C, d))
    log_prior = np.zeros((n, C))
    ctx = np.zeros((n, c, d))
    ctx_mask = np.zeros((n, c), dtype=bool)
    for i, cs in enumerate(candsets):
        ids = [e.entity for e in cs.candidates]
        entity_ids[i, :len(ids)] = ids
        cand[i, :len(ids)] = store.entity_matrix(ids)
        log_prior[i, :len(ids)] = np.log([e.prior for e in cs.candidates])
        ctx[i, :len(ctx_rows[i])] = ctx_rows[i]
        ctx_mask[i, :len(ctx_rows[i])] = True
    t = lambda a: torch.as_tensor(a, dtype=dtype)
    return PreparedDoc(
        candsets=candsets,
        entity_ids=entity_ids,
        cand=t(cand),
        cand_mask=torch.as_tensor(entity_ids >= 0),
        log_prior=t(log_prior),
        ctx=t(ctx),
        ctx_mask=torch.as_tensor(ctx_mask),
        mention_avg=t(np.array([_mean_or_zero(m, d) for m in mention_rows]).reshape(n, d)),
        ctx_avg=t(np.array([_mean_or_zero(r, d) for r in ctx_rows]).reshape(n, d)),
    )


def score_document(prep: PreparedDoc, params: EDParams) -> dict:
    """Raw scores for every candidate slot.

    Returns a dict with ``psi``, ``max_marginal`` (shifted to per-mention max 0)
    and ``score`` (final scorer output), each (n, C).
    """
    hyper = params.hyper
    mask = prep.cand_mask
    psi = local_psi(prep.cand, mask, prep.ctx, prep.ctx_mask, params)
    if len(prep) >= 2:
        f = encode_mentions(prep.mention_avg, prep.ctx_avg, params)
        alpha = pairwise_alpha(f, params.D_diag)
        pair = pairwise_tables(prep.cand, alpha, params.R_diag)
        marginal = max_product_lbp(psi, pair, mask, hyper.lbp_iters, hyper.lbp_damping)
    else:
        marginal = psi
    top = marginal.masked_fill(~mask, NEG).amax(dim=1, keepdim=True)
    marginal = torch.where(mask, marginal - top, torch.zeros_like(marginal))
    score = final_score(marginal, prep.log_prior, params)
    return {"psi": psi, "max_marginal": marginal, "score": score}


def decode(scores: torch.Tensor, prep: PreparedDoc) -> List[int]:
    """Per-mention best candidate slot; equal scores go to the lower entity id."""
    out = []
    s = scores.detach().cpu().numpy()
    for i, cs in enumerate(prep.candsets):
        row = s[i, :len(cs)]
        best = row.max()
        ties = [a for a in range(len(cs)) if row[a] == best]
        out.append(min(ties, key=lambda a: prep.entity_ids[i, a]))
    return out


def disambiguate_prepared(prep: PreparedDoc, params: EDParams, store: KnowledgeStore) -> List[Annotation]:
    if len(prep) == 0:
        return []
    with torch.no_grad():
        scores = score_document(prep, params)["score"]
    picks = decode(scores, prep)
    a, b = float(params.calib_a), float(params.calib_b)
    out = []
    for i, (cs, slot) in enumerate(zip(prep.candsets, picks)):
        raw = float(scores[i, slot])
        out.append(Annotation(
            start=cs.span.start,
            length=cs.span.length,
            surface=cs.surface,
            entity=store.entity_title(int(prep.entity_ids[i, slot])),
            ed_confidence=float(apply_calibration(raw, a, b)),
            md_confidence=cs.span.md_confidence,
            tag=cs.span.tag,
        ))
    return out


def disambiguate_document(doc: str, spans: Sequence[Span], store: KnowledgeStore,
                          params: EDParams, selection: SelectionParams = SelectionParams(),
                          tokens: Optional[List[Token]] = None) -> List[Annotation]:
    """Link each span to one of its candidates; spans without candidates are omitted."""
    prep = prepare_document(doc, spans, store, selection, tokens=tokens)
    return disambiguate_prepared(prep, params, store)
