"""Max-margin training of the ED parameters with Adam and a one-time LR drop."""

import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .candidates import SelectionParams
from .datasets import TrainingDoc
from .ed import EDHyperParams, EDParams, PreparedDoc, decode, fit_calibration, prepare_document, score_document
from .errors import DegenerateCalibration, EmptyTrainingSet
from .evaluation import ScoreReport, is_nil, score_ed
from .mention import Span
from .store import KnowledgeStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr_initial: float = 1e-3
    lr_reduced: float = 1e-4
    f1_switch: float = 0.88
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.lr_reduced < self.lr_initial:
            raise ValueError("need 0 < lr_reduced < lr_initial")
        if not 0 < self.f1_switch < 1:
            raise ValueError("f1_switch must lie in (0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_f1: Optional[float]
    lr: float
    lr_switched: bool = False


@dataclass
class TrainHistory:
    epochs: List[EpochRecord] = field(default_factory=list)
    lr_switch_epoch: Optional[int] = None
    best_epoch: Optional[int] = None
    best_val_f1: Optional[float] = None
    initial_val_f1: Optional[float] = None
    skipped_mentions: int = 0
    config: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def margin_loss(scores: torch.Tensor, gold: torch.Tensor, mask: torch.Tensor,
                margin: float) -> torch.Tensor:
    """sum_i sum_{e != gold_i} max(0, margin - g_i(gold_i) + g_i(e)).

    ``gold[i]`` is the gold slot of mention i, or -1 to leave the mention out.
    """
    use = gold >= 0
    if not bool(use.any()):
        return scores.sum() * 0.0
    s, m, g = scores[use], mask[use], gold[use]
    gold_score = s.gather(1, g[:, None])
    hinge = torch.relu(margin - gold_score + s)
    competitor = m.clone()
    competitor[torch.arange(len(g)), g] = False
    return (hinge * competitor).sum()


@dataclass
class _Item:
    doc: TrainingDoc
    prep: PreparedDoc
    gold: torch.Tensor   # slot per prepared mention, -1 when gold is NIL or not a candidate
    skipped: int


def _prepare(doc: TrainingDoc, store: KnowledgeStore, selection: SelectionParams) -> _Item:
    spans = [Span(m.start, m.length) for m in doc.mentions]
    prep = prepare_document(doc.text, spans, store, selection)
    gold_by_span = {(m.start, m.length): m.entity for m in doc.mentions}
    slots, skipped = [], 0
    for i, cs in enumerate(prep.candsets):
        title = gold_by_span[cs.span.start, cs.span.length]
        eid = None if is_nil(title) else store.entity_id(title)
        row = list(prep.entity_ids[i, :len(cs)])
        if eid is not None and eid in row:
            slots.append(row.index(eid))
        else:
            slots.append(-1)
            skipped += not is_nil(title)
    linked = {(cs.span.start, cs.span.length) for cs in prep.candsets}
    skipped += sum(1 for m in doc.mentions
                   if not is_nil(m.entity) and (m.start, m.length) not in linked)
    return _Item(doc, prep, torch.tensor(slots, dtype=torch.long), skipped)


def predict_prepared(item: _Item, params: EDParams, store: KnowledgeStore) -> List[tuple]:
    if len(item.prep) == 0:
        return []
    with torch.no_grad():
        scores = score_document(item.prep, params)["score"]
    picks = decode(scores, item.prep)
    return [(cs.span.start, cs.span.length, store.entity_title(int(item.prep.entity_ids[i, slot])))
            for i, (cs, slot) in enumerate(zip(item.prep.candsets, picks))]


def _evaluate(items: Sequence[_Item], params: EDParams, store: KnowledgeStore) -> ScoreReport:
    preds = [predict_prepared(it, params, store) for it in items]
    return score_ed(preds, [it.doc.mentions for it in items])


def evaluate_ed(docs: Sequence[TrainingDoc], store: KnowledgeStore, params: EDParams,
                selection: SelectionParams = SelectionParams()) -> ScoreReport:
    """ED-only micro/macro scores of ``params`` on gold spans."""
    return _evaluate([_prepare(d, store, selection) for d in docs], params, store)


def _fit_calibration(items: Sequence[_Item], params: EDParams) -> None:
    scores, labels = [], []
    with torch.no_grad():
        for it in items:
            if len(it.prep) == 0:
                continue
            s = score_document(it.prep, params)["score"]
            for i, cs in enumerate(it.prep.candsets):
                if it.gold[i] < 0:
                    continue
                for a in range(len(cs)):
                    scores.append(float(s[i, a]))
                    labels.append(int(a == it.gold[i]))
    try:
        a, b = fit_calibration(scores, labels)
    except DegenerateCalibration:
        log.warning("calibration data has a single class; keeping identity calibration")
        return
    params.calib_a.fill_(a)
    params.calib_b.fill_(b)


def train(train_docs: Sequence[TrainingDoc], val_docs: Sequence[TrainingDoc],
          store: KnowledgeStore, config: TrainConfig = TrainConfig(),
          hyper: Optional[EDHyperParams] = None,
          selection: SelectionParams = SelectionParams()) -> Tuple[EDParams, TrainHistory]:
    """Train on one document per step; return the best-validation parameters.

    The learning rate drops to ``lr_reduced`` (once, permanently) after the
    first epoch whose validation micro F1 reaches ``f1_switch``. Calibration is
    fit afterwards on the training candidates' final scores.
    """
    if not train_docs:
        raise EmptyTrainingSet("no training documents")
    hyper = hyper or EDHyperParams(d=store.dim)
    if hyper.d != store.dim:
        raise ValueError(f"hyper.d={hyper.d} but store dim is {store.dim}")
    params = EDParams(hyper, seed=config.seed)
    history = TrainHistory(config=asdict(config), hyper=hyper.to_dict())
    if config.epochs == 0:
        return params, history

    items = [_prepare(d, store, selection) for d in train_docs]
    val_items = [_prepare(d, store, selection) for d in val_docs]
    history.skipped_mentions = sum(it.skipped for it in items)
    opt = torch.optim.Adam(params.parameters(), lr=config.lr_initial,
                           betas=(config.beta1, config.beta2), eps=config.eps)
    rng = np.random.default_rng(config.seed)
    lr = config.lr_initial
    best_state, best_f1 = None, -1.0
    if val_items:
        history.initial_val_f1 = _evaluate(val_items, params, store).f1

    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for idx in rng.permutation(len(items)):
            it = items[idx]
            if len(it.prep) == 0 or not bool((it.gold >= 0).any()):
                continue
            opt.zero_grad()
            scores = score_document(it.prep, params)["score"]
            loss = margin_loss(scores, it.gold, it.prep.cand_mask, hyper.margin)
            loss.backward()
            opt.step()
            total += loss.item()

        val_f1 = _evaluate(val_items, params, store).f1 if val_items else None
        record = EpochRecord(epoch, total, val_f1, lr)
        if history.lr_switch_epoch is None and val_f1 is not None and val_f1 >= config.f1_switch:
            lr = config.lr_reduced
            for group in opt.param_groups:
                group["lr"] = lr
            history.lr_switch_epoch = epoch
            record.lr_switched = True
        history.epochs.append(record)
        log.info("epoch %d loss %.4f val F1 %s lr %g", epoch, total, val_f1, record.lr)

        score = val_f1 if val_f1 is not None else -total
        if best_state is None or score > best_f1:
            best_f1, best_state = score, copy.deepcopy(params.state_dict())
            history.best_epoch = epoch
            history.best_val_f1 = val_f1

    params.load_state_dict(best_state)
    _fit_calibration(items, params)
    return params, history
