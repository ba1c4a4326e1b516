"""Seeded desk-scale fixtures: a planted-topic ED corpus and a throughput profile.

Planted corpus: entities and words belong to topics whose embeddings cluster
around a shared random direction. Every surface maps to entities of pairwise
distinct topics, and every document draws its mentions and most of its
context words from a single topic, so the gold entity of a mention is the
unique candidate sharing the document's topic.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .datasets import TrainingDoc, write_jsonl
from .evaluation import GoldMention
from .store import EmbeddingMatrix, write_store

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "kr", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]


def _name(rng: np.random.Generator, syllables: int) -> str:
    s = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables))
    return s.capitalize()


def _unit(rng, shape):
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _unique_names(rng, count: int, taken: set) -> List[str]:
    out = []
    while len(out) < count:
        parts = [_name(rng, int(rng.integers(2, 4)))]
        if rng.random() < 0.3:
            parts.append(_name(rng, 2))
        name = " ".join(parts)
        if name.lower() not in taken:
            taken.add(name.lower())
            out.append(name)
    return out


@dataclass
class SyntheticCorpus:
    store_path: Path
    train: List[TrainingDoc]
    val: List[TrainingDoc]
    entity_topic: Dict[str, int]
    surface_entities: Dict[str, List[str]]
    train_topics: List[int] = field(default_factory=list)
    val_topics: List[int] = field(default_factory=list)

    def oracle_entity(self, surface: str, topic: int) -> str:
        """The planted gold: the surface's only candidate from ``topic``."""
        matches = [e for e in self.surface_entities[surface.lower()] if self.entity_topic[e] == topic]
        assert len(matches) == 1
        return matches[0]


def make_synthetic_corpus(out_dir, seed: int = 0, n_entities: int = 50, vocab_size: int = 500,
                          n_train: int = 200, n_val: int = 50, dim: int = 32,
                          n_topics: int = 10, mentions_per_doc: Tuple[int, int] = (2, 8),
                          max_ambiguity: int = 6) -> SyntheticCorpus:
    """Write ``store.rel``, ``train.jsonl`` and ``val.jsonl`` under ``out_dir``."""
    if not (1 <= n_entities <= 100 and 1 <= vocab_size <= 1000 and n_train + n_val <= 500):
        raise ValueError("sizes limited to E <= 100, V <= 1000, N <= 500")
    if n_topics < 2 or n_topics > n_entities:
        raise ValueError("need 2 <= n_topics <= n_entities")
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    centers = _unit(rng, (n_topics, dim))
    titles = [f"Entity_{i:03d}" for i in range(n_entities)]
    entity_topic = {t: i % n_topics for i, t in enumerate(titles)}
    entity_vecs = _unit(rng, (n_entities, dim)) * 0.35 + centers[[entity_topic[t] for t in titles]]
    entity_vecs /= np.linalg.norm(entity_vecs, axis=1, keepdims=True)

    n_topic_words = int(vocab_size * 0.8)
    words = [f"w{i:03d}" for i in range(vocab_size)]
    word_topic = {w: (i % n_topics if i < n_topic_words else None) for i, w in enumerate(words)}
    word_vecs = _unit(rng, (vocab_size, dim))
    for i, w in enumerate(words):
        if word_topic[w] is not None:
            word_vecs[i] = 0.6 * word_vecs[i] + centers[word_topic[w]]
    word_vecs /= np.linalg.norm(word_vecs, axis=1, keepdims=True)

    # surfaces: each entity joins a surface lacking its topic, or opens a new one
    surface_entities: List[List[str]] = []
    for idx in rng.permutation(n_entities):
        title = titles[idx]
        open_ = [s for s in surface_entities
                 if len(s) < max_ambiguity and entity_topic[title] not in {entity_topic[e] for e in s}]
        if open_ and rng.random() < 0.75:
            open_[int(rng.integers(len(open_)))].append(title)
        else:
            surface_entities.append([title])
    names = _unique_names(rng, len(surface_entities), set())
    priors = {}
    for name, ents in zip(names, surface_entities):
        p = rng.dirichlet(np.full(len(ents), 2.0))
        p = np.maximum(p, 1e-3)
        priors[name.lower()] = [(e, float(v / p.sum())) for e, v in zip(ents, p)]
    store_path = out_dir / "store.rel"
    write_store(store_path, EmbeddingMatrix(words, word_vecs), EmbeddingMatrix(titles, entity_vecs), priors)

    by_topic_surfaces = {t: [i for i, ents in enumerate(surface_entities)
                             if t in {entity_topic[e] for e in ents}] for t in range(n_topics)}
    topic_words = {t: [w for w in words if word_topic[w] == t] for t in range(n_topics)}
    filler = [w for w in words if word_topic[w] is None] or words

    def make_doc(doc_id: str):
        topic = int(rng.integers(n_topics))
        n_mentions = int(rng.integers(mentions_per_doc[0], mentions_per_doc[1] + 1))
        text, mentions = "", []

        def add_words(k):
            nonlocal text
            for _ in range(k):
                pool = topic_words[topic] if rng.random() < 0.6 else filler
                text += ("" if not text else " ") + pool[int(rng.integers(len(pool)))]

        add_words(int(rng.integers(2, 6)))
        for _ in range(n_mentions):
            s = by_topic_surfaces[topic][int(rng.integers(len(by_topic_surfaces[topic])))]
            gold = next(e for e in surface_entities[s] if entity_topic[e] == topic)
            text += " "
            mentions.append(GoldMention(len(text), len(names[s]), gold))
            text += names[s]
            add_words(int(rng.integers(3, 9)))
        text += "."
        return TrainingDoc(text, mentions, doc_id), topic

    train, train_topics, val, val_topics = [], [], [], []
    for i in range(n_train):
        doc, topic = make_doc(f"train-{i}")
        train.append(doc)
        train_topics.append(topic)
    for i in range(n_val):
        doc, topic = make_doc(f"val-{i}")
        val.append(doc)
        val_topics.append(topic)
    write_jsonl(out_dir / "train.jsonl", train)
    write_jsonl(out_dir / "val.jsonl", val)
    return SyntheticCorpus(
        store_path=store_path, train=train, val=val, entity_topic=entity_topic,
        surface_entities={n.lower(): ents for n, ents in zip(names, surface_entities)},
        train_topics=train_topics, val_topics=val_topics,
    )


@dataclass
class ProfileFixture:
    store_path: Path
    docs: List[str]
    gold: List[List[GoldMention]]


def make_profile_fixture(out_dir, seed: int = 0, n_docs: int = 50, words_mean: float = 323,
                         words_sd: float = 105, mentions_mean: float = 42, mentions_sd: float = 19,
                         min_words: int = 200, dim: int = 300, n_entities: int = 3000,
                         n_surfaces: int = 1500, vocab_size: int = 5000) -> ProfileFixture:
    """Throughput fixture shaped like long news documents.

    Word and mention counts are drawn from normal distributions with the given
    moments (words clipped at ``min_words``). Surfaces carry between 1 and 60
    candidate entities so every candidate-selection path is exercised.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    words = [f"w{i:05d}" for i in range(vocab_size)]
    titles = [f"Entity_{i:05d}" for i in range(n_entities)]
    word_vecs = (rng.standard_normal((vocab_size, dim)) / np.sqrt(dim)).astype(np.float32)
    entity_vecs = (rng.standard_normal((n_entities, dim)) / np.sqrt(dim)).astype(np.float32)
    names = _unique_names(rng, n_surfaces, set())
    priors = {}
    for name in names:
        k = int(min(60, 1 + rng.geometric(0.12)))
        ents = rng.choice(n_entities, size=k, replace=False)
        p = rng.dirichlet(np.ones(k))
        p = np.maximum(p, 1e-4)
        priors[name.lower()] = [(titles[e], float(v / p.sum())) for e, v in zip(ents, p)]
    store_path = out_dir / "profile_store.rel"
    write_store(store_path, EmbeddingMatrix(words, word_vecs), EmbeddingMatrix(titles, entity_vecs), priors)

    docs, gold = [], []
    for _ in range(n_docs):
        n_words = int(max(min_words + 1, round(rng.normal(words_mean, words_sd))))
        n_mentions = int(np.clip(round(rng.normal(mentions_mean, mentions_sd)), 1, n_words // 3))
        mention_slots = set(rng.choice(n_words, size=n_mentions, replace=False).tolist())
        text, mentions = "", []
        for i in range(n_words):
            if text:
                text += " "
            if i in mention_slots:
                name = names[int(rng.integers(n_surfaces))]
                ents = priors[name.lower()]
                mentions.append(GoldMention(len(text), len(name), ents[0][0]))
                text += name
            else:
                text += words[int(rng.integers(vocab_size))]
        docs.append(text + ".")
        gold.append(mentions)
    return ProfileFixture(store_path, docs, gold)
