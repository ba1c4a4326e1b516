"""Entity linking: gazetteer mention detection, prior-based candidate selection and
joint disambiguation with latent-relation coherence and max-product LBP."""

__version__ = "0.1.0"

from .candidates import CandidateSet, SelectionParams, select_candidates
from .mention import DetectorConfig, Span, adapt_external_spans, detect_gazetteer
from .store import EmbeddingMatrix, KnowledgeStore, PriorEntry, ingest_embeddings, write_store
from .text import normalize_surface, tokenize

__all__ = [
    "CandidateSet", "DetectorConfig", "EmbeddingMatrix", "KnowledgeStore", "PriorEntry",
    "SelectionParams", "Span", "adapt_external_spans", "detect_gazetteer", "ingest_embeddings",
    "normalize_surface", "select_candidates", "tokenize", "write_store",
]
