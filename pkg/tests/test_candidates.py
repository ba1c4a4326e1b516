import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rellink.candidates import (SelectionParams, context_score, extract_context, mention_token_range,
                                select_candidates)
from rellink.mention import Span
from rellink.store import KnowledgeStore
from rellink.text import tokenize

from conftest import random_store
from oracles import oracle_candidates, oracle_context, random_mention_case


@pytest.fixture(scope="module")
def wide_store(tmp_path_factory):
    path, words, entities, priors = random_store(tmp_path_factory.mktemp("c") / "s.rel", seed=11,
                                                 n_entities=120, n_surfaces=30, max_entries=60)
    with KnowledgeStore.open(path) as store:
        yield store, words, entities, priors


def _oracle_inputs(words, entities):
    rank = {t: i for i, t in enumerate(sorted(entities.tokens, key=str.encode))}
    evec = {t: entities.vector(t) for t in entities.tokens}
    wvec = {t: words.vector(t) for t in words.tokens}
    return rank, evec, wvec


def test_matches_brute_force(wide_store):
    store, words, entities, priors = wide_store
    rank, evec, wvec = _oracle_inputs(words, entities)
    rng = np.random.default_rng(0)
    surfaces = sorted(priors)
    for _ in range(200):
        doc, start, length, surface = random_mention_case(rng, surfaces, words.tokens)
        got = select_candidates(doc, tokenize(doc), Span(start, length), store)
        want = oracle_candidates(doc, start, length, priors[surface], rank, evec, wvec)
        assert [store.entity_title(c.entity) for c in got.candidates] == want
        assert len(got) <= 7
        assert got.surface == surface


@pytest.mark.parametrize("k1,k2,k", [(1, 0, 1), (2, 5, 10), (4, 3, 30), (6, 6, 60)])
def test_matches_brute_force_other_settings(wide_store, k1, k2, k):
    store, words, entities, priors = wide_store
    rank, evec, wvec = _oracle_inputs(words, entities)
    rng = np.random.default_rng(k1 * 100 + k2)
    params = SelectionParams(k1=k1, k2=k2, k=k, n_context=20)
    for _ in range(40):
        doc, start, length, surface = random_mention_case(rng, sorted(priors), words.tokens)
        got = select_candidates(doc, tokenize(doc), Span(start, length), store, params)
        want = oracle_candidates(doc, start, length, priors[surface], rank, evec, wvec,
                                 k1=k1, k2=k2, k=k, n=20)
        assert [store.entity_title(c.entity) for c in got.candidates] == want
        assert len(got) <= k1 + k2


def test_prior_order_kept_for_head(wide_store):
    store, _, _, priors = wide_store
    surface = max(priors, key=lambda s: len(priors[s]))
    cs = select_candidates(surface, tokenize(surface), Span(0, len(surface)), store)
    head = cs.candidates[:4]
    assert head == store.lookup_prior(surface)[:4]
    # empty context: the k2 picks fall back to entity-id order among ranks 5..30
    rest = sorted(store.lookup_prior(surface)[4:30], key=lambda e: e.entity)[:3]
    assert cs.candidates[4:] == rest


def test_unknown_surface_has_no_candidates(toy_store):
    store, *_ = toy_store
    doc = "nothing here"
    assert select_candidates(doc, tokenize(doc), Span(0, 7), store).candidates == []


def test_no_duplicates(wide_store):
    store, words, _, priors = wide_store
    rng = np.random.default_rng(3)
    for _ in range(50):
        doc, start, length, _ = random_mention_case(rng, sorted(priors), words.tokens)
        ids = [c.entity for c in select_candidates(doc, tokenize(doc), Span(start, length), store).candidates]
        assert len(ids) == len(set(ids))


@settings(max_examples=100, deadline=None)
@given(n_left=st.integers(0, 60), n_right=st.integers(0, 60), n=st.integers(1, 80),
       punct=st.booleans())
def test_context_window_arithmetic(n_left, n_right, n, punct):
    left = [f"l{i}" for i in range(n_left)]
    right = [f"r{i}" for i in range(n_right)]
    sep = " ; " if punct else " "
    prefix = sep.join(left) + (" " if left else "")
    doc = prefix + "MENTION here" + " " + sep.join(right)
    span = Span(len(prefix), len("MENTION here"))
    got = extract_context(tokenize(doc), span, n)
    want_left, want_right = oracle_context(doc, span.start, span.length, n)
    assert got == want_left + want_right
    assert got == left[max(0, n_left - n // 2):] + right[:n - n // 2]
    assert len(got) <= n


def test_mention_token_range_partial_token():
    toks = tokenize("New Yorkers live here")
    # a span cutting into a token still covers that token
    assert mention_token_range(toks, Span(0, 6)) == (0, 2)
    assert mention_token_range(toks, Span(13, 4)) == (2, 3)


def test_context_score_matches_dot(wide_store):
    store, words, entities, _ = wide_store
    ctx = ["word1", "WORD2", "missing"]
    want = float(entities.vector(store.entity_title(5)).astype(np.float64)
                 @ (words.vector("word1").astype(np.float64) + words.vector("word2")))
    assert context_score(5, ctx, store) == pytest.approx(want, rel=1e-9)
    assert context_score(5, [], store) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        SelectionParams(k1=0)
    with pytest.raises(ValueError):
        SelectionParams(k1=4, k2=3, k=5)
