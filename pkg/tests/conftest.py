import numpy as np
import pytest

from rellink.store import EmbeddingMatrix, KnowledgeStore, write_store

EXAMPLE_TEXT = ("Belgrade 1996-08-30 Result in an international basketball tournament on Friday: "
             "Red Star ( Yugoslavia ) beat Dinamo ( Russia) 92-90 ( halftime 47-47 ).")


def random_store(path, seed=0, n_words=60, n_entities=40, n_surfaces=25, dim=8,
                 max_entries=12, case_sensitive=False):
    """Random store; returns (path, words, entities, priors) with the written inputs."""
    rng = np.random.default_rng(seed)
    words = EmbeddingMatrix([f"word{i}" for i in range(n_words)],
                            rng.standard_normal((n_words, dim)))
    titles = [f"Ent_{i:03d}" for i in range(n_entities)]
    entities = EmbeddingMatrix(titles, rng.standard_normal((n_entities, dim)))
    priors = {}
    for s in range(n_surfaces):
        k = int(rng.integers(1, max_entries + 1))
        ents = rng.choice(n_entities, size=k, replace=False)
        p = rng.dirichlet(np.ones(k))
        priors[f"surf{s}"] = [(titles[e], float(max(v, 1e-6))) for e, v in zip(ents, p)]
    write_store(path, words, entities, priors, case_sensitive=case_sensitive)
    return path, words, entities, priors


def example_store(path, dim=8, seed=3):
    """Five-surface store covering the mentions of the API example."""
    rng = np.random.default_rng(seed)
    vocab = ["Result", "in", "an", "international", "basketball", "tournament", "on", "Friday",
             "beat", "halftime", "1996", "08", "30", "92", "90", "47", "Red", "Star"]
    titles = ["Belgrade", "Belgrade_Fortress", "KK_Crvena_zvezda", "Red_Star_Belgrade",
              "Yugoslavia", "FC_Dinamo_Bucuresti", "GNK_Dinamo_Zagreb", "Russia",
              "Russia_national_basketball_team"]
    priors = {
        "belgrade": [("Belgrade", 0.9), ("Belgrade_Fortress", 0.1)],
        "red star": [("Red_Star_Belgrade", 0.6), ("KK_Crvena_zvezda", 0.4)],
        "yugoslavia": [("Yugoslavia", 1.0)],
        "dinamo": [("GNK_Dinamo_Zagreb", 0.5), ("FC_Dinamo_Bucuresti", 0.5)],
        "russia": [("Russia", 0.8), ("Russia_national_basketball_team", 0.2)],
    }
    write_store(path, EmbeddingMatrix(vocab, rng.standard_normal((len(vocab), dim))),
                EmbeddingMatrix(titles, rng.standard_normal((len(titles), dim))), priors)
    return path


@pytest.fixture
def toy_store(tmp_path):
    path, words, entities, priors = random_store(tmp_path / "toy.rel")
    with KnowledgeStore.open(path) as store:
        yield store, words, entities, priors


@pytest.fixture
def example_store_path(tmp_path):
    return example_store(tmp_path / "example.rel")


def randomized_params(hyper, seed=0, scale=0.5):
    """EDParams with every tensor drawn at random (the default init has ones and zeros)."""
    import torch

    from rellink.ed import EDParams

    params = EDParams(hyper, seed=seed)
    gen = torch.Generator().manual_seed(seed + 1)
    with torch.no_grad():
        for _, t in params.tensors():
            t.copy_(torch.randn(t.shape, generator=gen, dtype=t.dtype) * scale)
    return params


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if rep.when == "call" and "criterion" in props:
                rows.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(rows):
            terminalreporter.write_line(f"{status}  {name}")
