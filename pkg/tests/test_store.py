import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rellink.errors import DimensionMismatch, DuplicateToken, MalformedLine, RelError, StoreFormatError
from rellink.store import (HEADER, EmbeddingMatrix, KnowledgeStore, PriorEntry, ingest_embeddings,
                           read_vector_file, write_store)

from conftest import random_store


def _write_vec(path, rows, dim):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(rows)} {dim}\n")
        for tok, vec in rows:
            f.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@pytest.mark.parametrize("preload", [False, True])
def test_round_trip_priors_and_vectors(tmp_path, preload):
    path, words, entities, priors = random_store(tmp_path / "s.rel")
    with KnowledgeStore.open(path, preload=preload) as store:
        assert store.dim == 8
        assert store.word_count == 60 and store.entity_count == 40
        for surface, entries in priors.items():
            want = sorted(((store.entity_id(t), p) for t, p in entries), key=lambda e: (-e[1], e[0]))
            assert store.lookup_prior(surface) == [PriorEntry(e, p) for e, p in want]
        for tok in words.tokens:
            np.testing.assert_array_equal(store.get_vector("word", tok), words.vector(tok))
        for title in entities.tokens:
            assert store.get_vector("entity", title).tobytes() == entities.vector(title).tobytes()


def test_entity_ids_are_utf8_rank(tmp_path):
    titles = ["Zeta", "Älpha", "alpha", "Beta"]
    ents = EmbeddingMatrix(titles, np.eye(4, dtype=np.float32))
    write_store(tmp_path / "s.rel", EmbeddingMatrix(["x"], np.ones((1, 4))), ents, {})
    with KnowledgeStore.open(tmp_path / "s.rel") as store:
        ranked = sorted(titles, key=lambda t: t.encode("utf-8"))
        assert [store.entity_id(t) for t in ranked] == list(range(4))
        assert list(store.entity_titles()) == ranked


def test_write_is_order_independent(tmp_path):
    rng = np.random.default_rng(1)
    vecs = rng.standard_normal((3, 4))
    a = EmbeddingMatrix(["b", "a", "c"], vecs)
    b = EmbeddingMatrix(["c", "a", "b"], vecs[[2, 1, 0]])
    pa = {"m": [("b", 0.5), ("a", 0.5)], "n": [("c", 1.0)]}
    pb = {"n": [("c", 1.0)], "m": [("a", 0.5), ("b", 0.5)]}
    write_store(tmp_path / "1.rel", a, a, pa)
    write_store(tmp_path / "2.rel", b, b, pb)
    assert (tmp_path / "1.rel").read_bytes() == (tmp_path / "2.rel").read_bytes()


def test_sections_are_8_byte_aligned(tmp_path):
    path, *_ = random_store(tmp_path / "s.rel")
    size = path.stat().st_size
    assert size % 8 == 0
    magic, version, dim, *_ = HEADER.unpack_from(path.read_bytes())
    assert magic == b"RELSTORE" and version == 1 and dim == 8


def test_tie_order_by_entity_id(tmp_path):
    ents = EmbeddingMatrix(["B", "A", "C"], np.eye(3))
    write_store(tmp_path / "s.rel", EmbeddingMatrix(["w"], np.ones((1, 3))), ents,
                {"m": [("C", 0.25), ("B", 0.5), ("A", 0.25)]})
    with KnowledgeStore.open(tmp_path / "s.rel") as store:
        assert store.lookup_prior("M") == [PriorEntry(1, 0.5), PriorEntry(0, 0.25), PriorEntry(2, 0.25)]


def test_truncates_to_max_candidates(tmp_path):
    n = 150
    titles = [f"E{i:03d}" for i in range(n)]
    ents = EmbeddingMatrix(titles, np.ones((n, 2)))
    priors = {"m": [(t, (i + 1) / (n * n)) for i, t in enumerate(titles)]}
    write_store(tmp_path / "s.rel", EmbeddingMatrix(["w"], np.ones((1, 2))), ents, priors)
    with KnowledgeStore.open(tmp_path / "s.rel") as store:
        got = store.lookup_prior("m")
        assert len(got) == 100
        assert got[0].entity == n - 1


def test_lookup_normalizes_case_and_whitespace(toy_store):
    store, *_ = toy_store
    assert store.lookup_prior("  SURF3 ") == store.lookup_prior("surf3")
    assert store.lookup_prior("unknown") == []


def test_case_sensitive_flag(tmp_path):
    path, *_ = random_store(tmp_path / "s.rel", case_sensitive=True)
    with KnowledgeStore.open(path) as store:
        assert store.case_sensitive
        assert store.lookup_prior("SURF3") == []
        assert store.lookup_prior("surf3")


def test_word_lookup_falls_back_to_lowercase(toy_store):
    store, words, *_ = toy_store
    assert store.word_id("WORD5") == store.word_id("word5")
    assert store.get_vector("word", "WORD5") is None
    assert store.word_matrix(["word1", "nope", "Word2"]).shape == (2, 8)


def test_get_vector_returns_copy(toy_store):
    store, *_ = toy_store
    v = store.get_vector("entity", 0)
    v[:] = 99
    assert store.get_vector("entity", 0)[0] != 99
    assert store.get_vector("entity", 10_000) is None
    with pytest.raises(ValueError):
        store.get_vector("thing", 0)


def test_lazy_and_preload_agree(tmp_path):
    path, _, _, priors = random_store(tmp_path / "s.rel", seed=5)
    with KnowledgeStore.open(path) as lazy, KnowledgeStore.open(path, preload=True) as full:
        assert lazy.bytes_read == HEADER.size
        assert full.bytes_read == path.stat().st_size
        assert list(lazy.surfaces()) == list(full.surfaces())
        for s in priors:
            assert lazy.lookup_prior(s) == full.lookup_prior(s)
        np.testing.assert_array_equal(lazy.entity_matrix([0, 3]), full.entity_matrix([0, 3]))


@pytest.mark.parametrize("mutate, match", [
    (lambda b: b"NOTSTORE" + b[8:], "bad magic"),
    (lambda b: b[:8] + struct.pack("<I", 9) + b[12:], "unsupported"),
    (lambda b: b[:-8], "size mismatch|truncated"),
    (lambda b: b[:20], "truncated"),
    (lambda b: b"", "truncated|empty"),
])
@pytest.mark.parametrize("preload", [False, True])
def test_corrupt_files_rejected(tmp_path, mutate, match, preload):
    path, *_ = random_store(tmp_path / "s.rel")
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(StoreFormatError, match=match):
        KnowledgeStore.open(path, preload=preload)


def test_write_rejects_bad_priors(tmp_path):
    m = EmbeddingMatrix(["a"], np.ones((1, 2)))
    with pytest.raises(RelError, match="no embedding"):
        write_store(tmp_path / "s.rel", m, m, {"x": [("zzz", 0.5)]})
    with pytest.raises(RelError, match="outside"):
        write_store(tmp_path / "s.rel", m, m, {"x": [("a", 1.5)]})
    with pytest.raises(DimensionMismatch):
        write_store(tmp_path / "s.rel", m, EmbeddingMatrix(["b"], np.ones((1, 3))), {})


def test_ingest_routes_prefixed_tokens(tmp_path):
    _write_vec(tmp_path / "w.vec", [("the", [1, 0]), ("ENTITY/new_york", [0, 1]), ("city", [1, 1])], 2)
    _write_vec(tmp_path / "e.vec", [("Paris", [2, 2])], 2)
    words, ents = ingest_embeddings(tmp_path / "w.vec", tmp_path / "e.vec")
    assert words.tokens == ["the", "city"]
    assert ents.tokens == ["New_york", "Paris"]
    np.testing.assert_array_equal(ents.vector("Paris"), [2, 2])


def test_ingest_errors(tmp_path):
    _write_vec(tmp_path / "a.vec", [("x", [1, 0])], 2)
    _write_vec(tmp_path / "b.vec", [("y", [1, 0, 0])], 3)
    with pytest.raises(DimensionMismatch):
        ingest_embeddings(tmp_path / "a.vec", tmp_path / "b.vec")
    _write_vec(tmp_path / "d.vec", [("x", [1, 0]), ("x", [0, 1])], 2)
    with pytest.raises(DuplicateToken):
        ingest_embeddings(tmp_path / "d.vec")
    (tmp_path / "bad.vec").write_text("1 2\nx 1.0 nope\n")
    with pytest.raises(MalformedLine) as err:
        read_vector_file(tmp_path / "bad.vec")
    assert ":2" in str(err.value)


def test_vector_tokens_may_contain_spaces(tmp_path):
    (tmp_path / "s.vec").write_text("1 2\nNew York 0.5 0.25\n")
    tokens, vecs = read_vector_file(tmp_path / "s.vec")
    assert tokens == ["New York"]
    np.testing.assert_array_equal(vecs, [[0.5, 0.25]])


@settings(max_examples=25, deadline=None)
@given(
    surfaces=st.dictionaries(
        st.text(alphabet="abcxyzé ", min_size=1, max_size=6).map(str.strip).filter(bool),
        st.lists(st.tuples(st.integers(0, 9), st.floats(1e-6, 1.0)), min_size=1, max_size=5,
                 unique_by=lambda t: t[0]),
        max_size=8),
)
def test_round_trip_property(tmp_path_factory, surfaces):
    titles = [f"T{i}" for i in range(10)]
    ents = EmbeddingMatrix(titles, np.arange(20, dtype=np.float32).reshape(10, 2))
    priors = {" ".join(s.split()): [(titles[e], p) for e, p in entries] for s, entries in surfaces.items()}
    path = tmp_path_factory.mktemp("rt") / "s.rel"
    write_store(path, EmbeddingMatrix(["w"], np.ones((1, 2))), ents, priors)
    with KnowledgeStore.open(path) as store:
        assert store.surface_count == len(priors)
        for s, entries in priors.items():
            got = {(store.entity_title(e.entity), e.prior) for e in store.lookup_prior(s)}
            assert got == set(entries)
