"""End-to-end linker: mention detection followed by document-level disambiguation."""

from typing import List, Optional, Sequence

from .candidates import SelectionParams
from .ed import Annotation, EDParams, disambiguate_document
from .errors import DimensionMismatch
from .mention import DetectorConfig, Span, adapt_external_spans, detect_gazetteer
from .store import KnowledgeStore
from .text import tokenize


class EntityLinker:
    """Holds one read-only store and one parameter set; safe to share across threads."""

    def __init__(self, store: KnowledgeStore, params: EDParams,
                 selection: SelectionParams = SelectionParams(),
                 detector: DetectorConfig = DetectorConfig()):
        if params.hyper.d != store.dim:
            raise DimensionMismatch(f"model dim {params.hyper.d} != store dim {store.dim}")
        self.store = store
        self.params = params.eval()
        self.selection = selection
        self.detector = detector

    @classmethod
    def from_files(cls, store_path, model_path, preload: bool = False, **kwargs) -> "EntityLinker":
        return cls(KnowledgeStore.open(store_path, preload=preload), EDParams.load(model_path), **kwargs)

    def detect(self, text: str) -> List[Span]:
        return detect_gazetteer(text, self.store, self.detector)

    def disambiguate(self, text: str, spans: Sequence) -> List[Annotation]:
        """ED-only mode: link caller-supplied spans (validated and sorted first)."""
        spans = adapt_external_spans(text, spans)
        return disambiguate_document(text, spans, self.store, self.params, self.selection,
                                     tokens=tokenize(text))

    def link(self, text: str, spans: Optional[Sequence] = None) -> List[Annotation]:
        if spans is None:
            spans = self.detect(text)
        return self.disambiguate(text, spans)
