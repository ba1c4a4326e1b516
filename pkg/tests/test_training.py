import pytest
import torch

from rellink.datasets import TrainingDoc
from rellink.ed import EDHyperParams, EDParams
from rellink.errors import EmptyTrainingSet
from rellink.evaluation import GoldMention
from rellink.store import KnowledgeStore
from rellink.synthetic import make_synthetic_corpus
from rellink.training import TrainConfig, evaluate_ed, margin_loss, train


def test_margin_loss_hand_value():
    scores = torch.tensor([[1.0, 0.5, 0.2, 7.0], [0.0, 2.0, -1.0, 0.0]], dtype=torch.float64)
    mask = torch.tensor([[True, True, True, False], [True, True, True, False]])
    gold = torch.tensor([0, 1])
    # row 0: (0.9 - 1 + 0.5) + (0.9 - 1 + 0.2); row 1: both competitors below the margin
    loss = margin_loss(scores, gold, mask, 0.9)
    assert loss.item() == pytest.approx(0.5, abs=1e-12)


def test_margin_loss_skips_and_excludes_gold():
    scores = torch.tensor([[0.0, 0.0]], dtype=torch.float64, requires_grad=True)
    mask = torch.ones(1, 2, dtype=torch.bool)
    assert margin_loss(scores, torch.tensor([0]), mask, 1.0).item() == 1.0
    skipped = margin_loss(scores, torch.tensor([-1]), mask, 1.0)
    assert skipped.item() == 0.0
    skipped.backward()
    assert torch.equal(scores.grad, torch.zeros(1, 2, dtype=torch.float64))


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    corpus = make_synthetic_corpus(tmp_path_factory.mktemp("syn"), seed=0, n_train=30, n_val=10, dim=16)
    with KnowledgeStore.open(corpus.store_path, preload=True) as store:
        yield corpus, store


def _hyper(store):
    return EDHyperParams(K=2, d=store.dim, scorer_hidden=16)


def test_deterministic_given_seed(small_corpus):
    corpus, store = small_corpus
    cfg = TrainConfig(epochs=2, seed=5)
    p1, h1 = train(corpus.train, corpus.val, store, cfg, _hyper(store))
    p2, h2 = train(corpus.train, corpus.val, store, cfg, _hyper(store))
    for (_, a), (_, b) in zip(p1.tensors(), p2.tensors()):
        assert torch.equal(a, b)
    assert h1.to_dict() == h2.to_dict()


def test_zero_epochs_returns_init(small_corpus):
    corpus, store = small_corpus
    params, history = train(corpus.train, corpus.val, store, TrainConfig(epochs=0, seed=2), _hyper(store))
    fresh = EDParams(_hyper(store), seed=2)
    for (_, a), (_, b) in zip(params.tensors(), fresh.tensors()):
        assert torch.equal(a, b)
    assert history.epochs == []


def test_no_trainable_mentions_leaves_params(small_corpus):
    corpus, store = small_corpus
    docs = [TrainingDoc("w001 w002", [GoldMention(0, 4, "Entity_001")])]  # not a surface: no candidates
    params, history = train(docs, [], store, TrainConfig(epochs=2, seed=1), _hyper(store))
    fresh = EDParams(_hyper(store), seed=1)
    for (_, a), (_, b) in zip(params.tensors(), fresh.tensors()):
        assert torch.equal(a, b)
    assert history.skipped_mentions == 1


def test_lr_switch_and_best_checkpoint(small_corpus):
    corpus, store = small_corpus
    params, history = train(corpus.train, corpus.val, store, TrainConfig(epochs=4, seed=0), _hyper(store))
    assert len(history.epochs) == 4
    f1s = [e.val_f1 for e in history.epochs]
    crossed = [e.epoch for e in history.epochs if e.val_f1 >= 0.88]
    if crossed:
        assert history.lr_switch_epoch == crossed[0]
        for e in history.epochs:
            assert e.lr == (1e-3 if e.epoch <= crossed[0] else 1e-4)
            assert e.lr_switched == (e.epoch == crossed[0])
    else:
        assert history.lr_switch_epoch is None
    assert history.best_val_f1 == max(f1s)
    assert history.epochs[history.best_epoch - 1].val_f1 == max(f1s)
    # the returned parameters are the best checkpoint
    assert evaluate_ed(corpus.val, store, params).f1 == pytest.approx(history.best_val_f1, abs=1e-12)


def test_training_reduces_loss_from_a_bad_start(small_corpus):
    corpus, store = small_corpus
    # seed 2 starts with a scorer that ranks candidates backwards on this corpus
    params, history = train(corpus.train, corpus.val, store, TrainConfig(epochs=3, seed=2), _hyper(store))
    losses = [e.train_loss for e in history.epochs]
    assert losses[-1] < losses[0]
    assert history.initial_val_f1 < 0.5
    assert history.best_val_f1 >= 0.95


def test_calibration_fit_after_training(small_corpus):
    corpus, store = small_corpus
    params, _ = train(corpus.train, corpus.val, store, TrainConfig(epochs=1, seed=0), _hyper(store))
    assert float(params.calib_a) != 1.0 or float(params.calib_b) != 0.0


def test_errors(small_corpus):
    corpus, store = small_corpus
    with pytest.raises(EmptyTrainingSet):
        train([], corpus.val, store)
    with pytest.raises(ValueError):
        train(corpus.train, corpus.val, store, hyper=EDHyperParams(d=store.dim + 1))
    with pytest.raises(ValueError):
        TrainConfig(lr_initial=1e-4, lr_reduced=1e-3)
