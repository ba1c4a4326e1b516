"""Strong-matching InKB evaluation (micro/macro P, R, F1) and stage timing."""

import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence

from .errors import DuplicatePrediction, SpanNotInGold

NIL_TITLES = frozenset({"", "NIL", "--NME--"})
EMPTY_DOC_CONVENTION = "a document with no gold and no predicted mentions scores F1 = 1"


class GoldMention(NamedTuple):
    start: int
    length: int
    entity: Optional[str]


def _triple(x):
    if isinstance(x, dict):
        return x["start"], x["length"], x.get("entity")
    if hasattr(x, "entity"):
        return x.start, x.length, x.entity
    start, length, entity = x[:3]
    return start, length, entity


def _resolve(title, redirects):
    if title is None or redirects is None:
        return title
    return redirects.resolve(title)


def is_nil(entity) -> bool:
    return entity is None or entity in NIL_TITLES


def strong_match(pred, gold, redirects=None) -> bool:
    """Exact start, length and entity (after optional redirect resolution)."""
    ps, pl, pe = _triple(pred)
    gs, gl, ge = _triple(gold)
    return ps == gs and pl == gl and _resolve(pe, redirects) == _resolve(ge, redirects)


def prf(tp: int, fp: int, fn: int):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class DocCounts:
    tp: int
    fp: int
    fn: int

    @property
    def f1(self) -> float:
        if self.tp == self.fp == self.fn == 0:
            return 1.0
        return prf(self.tp, self.fp, self.fn)[2]


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f1: float
    macro_f1: float
    tp: int
    fp: int
    fn: int
    docs: List[DocCounts] = field(default_factory=list)
    empty_doc_convention: str = EMPTY_DOC_CONVENTION

    @classmethod
    def from_counts(cls, docs: List[DocCounts]) -> "ScoreReport":
        tp = sum(d.tp for d in docs)
        fp = sum(d.fp for d in docs)
        fn = sum(d.fn for d in docs)
        p, r, f = prf(tp, fp, fn)
        macro = sum(d.f1 for d in docs) / len(docs) if docs else 0.0
        return cls(p, r, f, macro, tp, fp, fn, docs)

    def to_dict(self) -> dict:
        return asdict(self)

    def format_table(self) -> str:
        rows = [
            ("micro precision", self.precision),
            ("micro recall", self.recall),
            ("micro F1", self.f1),
            ("macro F1", self.macro_f1),
        ]
        lines = [f"{name:<16} {value:.4f}" for name, value in rows]
        lines.append(f"{'tp/fp/fn':<16} {self.tp}/{self.fp}/{self.fn}  ({len(self.docs)} docs)")
        return "\n".join(lines)


def _check_aligned(preds, golds):
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} prediction documents but {len(golds)} gold documents")


def score_el(preds_per_doc: Sequence[Sequence], golds_per_doc: Sequence[Sequence],
             redirects=None) -> ScoreReport:
    """End-to-end scoring: a prediction counts only on exact span and entity."""
    _check_aligned(preds_per_doc, golds_per_doc)
    docs = []
    for doc_idx, (preds, golds) in enumerate(zip(preds_per_doc, golds_per_doc)):
        gold = {}
        for g in golds:
            s, l, e = _triple(g)
            if not is_nil(e):
                gold[s, l] = _resolve(e, redirects)
        seen = set()
        tp = 0
        for p in preds:
            s, l, e = _triple(p)
            if (s, l) in seen:
                raise DuplicatePrediction(f"document {doc_idx}: duplicate prediction for span ({s}, {l})")
            seen.add((s, l))
            if (s, l) in gold and gold[s, l] == _resolve(e, redirects):
                tp += 1
        docs.append(DocCounts(tp, len(seen) - tp, len(gold) - tp))
    return ScoreReport.from_counts(docs)


def score_ed(preds_per_doc: Sequence[Sequence], golds_per_doc: Sequence[Sequence],
             redirects=None) -> ScoreReport:
    """Disambiguation-only scoring over predictions made on the gold spans.

    A wrong entity is both a false positive and a false negative; a gold span
    without a prediction is a false negative. Predictions on NIL gold spans are
    ignored.
    """
    _check_aligned(preds_per_doc, golds_per_doc)
    docs = []
    for doc_idx, (preds, golds) in enumerate(zip(preds_per_doc, golds_per_doc)):
        gold, nil_spans = {}, set()
        for g in golds:
            s, l, e = _triple(g)
            if is_nil(e):
                nil_spans.add((s, l))
            else:
                gold[s, l] = _resolve(e, redirects)
        seen = set()
        tp = fp = 0
        for p in preds:
            s, l, e = _triple(p)
            if (s, l) in nil_spans:
                continue
            if (s, l) not in gold:
                raise SpanNotInGold(f"document {doc_idx}: prediction for span ({s}, {l}) not in gold")
            if (s, l) in seen:
                raise DuplicatePrediction(f"document {doc_idx}: duplicate prediction for span ({s}, {l})")
            seen.add((s, l))
            if gold[s, l] == _resolve(e, redirects):
                tp += 1
            else:
                fp += 1
        docs.append(DocCounts(tp, fp, len(gold) - tp))
    return ScoreReport.from_counts(docs)


# ---------------------------------------------------------------- efficiency


@dataclass
class StageTiming:
    samples: List[float]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples) if self.samples else 0.0

    @property
    def sd(self) -> float:
        """Sample standard deviation (n - 1 denominator); 0 for a single sample."""
        return statistics.stdev(self.samples) if len(self.samples) > 1 else 0.0


@dataclass
class EfficiencyReport:
    stages: Dict[str, StageTiming]
    n_docs: int
    words: StageTiming
    mentions: StageTiming

    def to_dict(self) -> dict:
        out = {"n_docs": self.n_docs}
        for name, t in self.stages.items():
            out[name] = {"mean": t.mean, "sd": t.sd}
        out["words"] = {"mean": self.words.mean, "sd": self.words.sd}
        out["mentions"] = {"mean": self.mentions.mean, "sd": self.mentions.sd}
        return out

    def format_table(self) -> str:
        lines = [
            f"{self.n_docs} documents, {self.words.mean:.0f} (+/- {self.words.sd:.0f}) words and "
            f"{self.mentions.mean:.0f} (+/- {self.mentions.sd:.0f}) mentions per document",
            f"{'':<8}{'seconds per document':>22}",
        ]
        for name, t in self.stages.items():
            lines.append(f"{'Time ' + name:<8}{t.mean:>12.4f} +/- {t.sd:.4f}")
        return "\n".join(lines)


def measure_efficiency(docs: Sequence[str], pipeline) -> EfficiencyReport:
    """Wall-clock time per document for mention detection and disambiguation.

    ``pipeline`` needs ``detect(text) -> spans`` and ``disambiguate(text, spans)``.
    """
    if not docs:
        raise ValueError("need at least one document")
    md, ed, words, mentions = [], [], [], []
    for text in docs:
        t0 = time.perf_counter()
        spans = pipeline.detect(text)
        t1 = time.perf_counter()
        pipeline.disambiguate(text, spans)
        t2 = time.perf_counter()
        md.append(t1 - t0)
        ed.append(t2 - t1)
        words.append(float(len(text.split())))
        mentions.append(float(len(spans)))
    stages = {"MD": StageTiming(md), "ED": StageTiming(ed),
              "total": StageTiming([a + b for a, b in zip(md, ed)])}
    return EfficiencyReport(stages, len(docs), StageTiming(words), StageTiming(mentions))
