"""Build the mention-entity prior index from anchor corpora and a name dictionary.

P(e|m) combines hyperlink statistics with a uniform dictionary prior::

    P_wiki(e|m) = count(m, e) / sum_e' count(m, e')
    P_dict(e|m) = 1 / |dict(m)|          for e in dict(m)
    P(e|m)      = min(1, P_wiki(e|m) + P_dict(e|m))
"""

import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Set, Tuple, Union

from .errors import EmptyStore, MalformedLine
from .store import MAX_CANDIDATES_STORED, EmbeddingMatrix, write_store
from .text import normalize_surface, normalize_title

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

DOC_SEPARATOR = re.compile(r"^= = = DOC (.*?) = = =\s*$", re.MULTILINE)
SKIPPED_NAMESPACES = (
    "file:", "image:", "category:", "template:", "wikipedia:", "help:",
    "portal:", "draft:", "talk:", "user:", "module:", "special:", "media:",
)


class AnchorCount(NamedTuple):
    surface: str
    entity: str
    count: int


@dataclass
class ParseStats:
    links: int = 0
    skipped_unbalanced: int = 0
    skipped_namespace: int = 0
    files: int = 0


class RedirectTable:
    """Alias -> canonical title map with transitive closure.

    Titles on a redirect cycle, or whose chain runs into one, cannot be
    resolved; they map to themselves. Each cycle is listed in :attr:`cycles`.
    """

    def __init__(self, mapping: Optional[Mapping[str, str]] = None):
        raw = {normalize_title(a): normalize_title(c) for a, c in (mapping or {}).items()}
        raw = {a: c for a, c in raw.items() if a != c}
        self.cycles: List[List[str]] = []
        self._resolved: Dict[str, str] = {}
        stuck: Set[str] = set()  # on, or leading into, a cycle
        for start in sorted(raw):
            path: List[str] = []
            where: Dict[str, int] = {}
            node = start
            while True:
                if node in self._resolved:
                    target = self._resolved[node]
                    break
                if node in stuck:
                    target = None
                    break
                if node not in raw:
                    target = node
                    break
                if node in where:
                    self.cycles.append(path[where[node]:])
                    target = None
                    break
                where[node] = len(path)
                path.append(node)
                node = raw[node]
            for alias in path:
                if target is None:
                    stuck.add(alias)
                else:
                    self._resolved[alias] = target
        for cycle in self.cycles:
            log.warning("redirect cycle left unresolved: %s", " -> ".join(cycle))

    @classmethod
    def from_tsv(cls, paths: Union[PathLike, Iterable[PathLike]]) -> "RedirectTable":
        mapping = {}
        for path in _as_paths(paths):
            with open(path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    line = line.rstrip("\n")
                    if not line.strip():
                        continue
                    parts = line.split("\t")
                    if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                        raise MalformedLine(path, lineno, "expected 'alias<TAB>canonical'")
                    mapping[parts[0]] = parts[1]
        return cls(mapping)

    def resolve(self, title: str) -> str:
        title = normalize_title(title)
        return self._resolved.get(title, title)

    def __len__(self) -> int:
        return len(self._resolved)


def _as_paths(paths) -> List[Path]:
    if isinstance(paths, (str, Path)):
        return [Path(paths)]
    return [Path(p) for p in paths]


def iter_wikitext_docs(text: str) -> Iterator[Tuple[Optional[str], str]]:
    """Split a concatenated dump on ``= = = DOC <title> = = =`` lines.

    Text without separators is a single untitled document.
    """
    marks = list(DOC_SEPARATOR.finditer(text))
    if not marks:
        yield None, text
        return
    if text[:marks[0].start()].strip():
        yield None, text[:marks[0].start()]
    for m, nxt in zip(marks, marks[1:] + [None]):
        yield m.group(1).strip(), text[m.end():nxt.start() if nxt else len(text)]


def extract_links(text: str, stats: Optional[ParseStats] = None) -> Iterator[Tuple[str, str]]:
    """Yield (anchor text, target title) for ``[[Target|anchor]]`` and ``[[Target]]``.

    An opening ``[[`` with no ``]]`` before the next ``[[`` is unbalanced and skipped.
    """
    stats = stats if stats is not None else ParseStats()
    pos = 0
    while True:
        open_at = text.find("[[", pos)
        if open_at < 0:
            return
        close_at = text.find("]]", open_at + 2)
        reopen = text.find("[[", open_at + 2)
        if close_at < 0 or (0 <= reopen < close_at):
            stats.skipped_unbalanced += 1
            pos = open_at + 2 if close_at < 0 else reopen
            continue
        body = text[open_at + 2:close_at]
        pos = close_at + 2
        target, bar, anchor = body.partition("|")
        if not bar:
            anchor = target
        if target.strip().lower().startswith(SKIPPED_NAMESPACES):
            stats.skipped_namespace += 1
            continue
        if not target.strip() or not anchor.strip():
            stats.skipped_unbalanced += 1
            continue
        stats.links += 1
        yield anchor, target


def _is_tsv(path: Path) -> bool:
    return path.suffix.lower() in (".tsv", ".tab")


def parse_anchor_corpus(
    paths: Union[PathLike, Iterable[PathLike]],
    redirects: Optional[RedirectTable] = None,
    fmt: str = "auto",
    case_sensitive: bool = False,
    stats: Optional[ParseStats] = None,
) -> List[AnchorCount]:
    """Aggregate (surface, entity) link counts over wikitext and/or TSV count files.

    ``fmt`` is ``"wikitext"``, ``"tsv"`` or ``"auto"`` (``.tsv``/``.tab`` suffix
    means TSV). Surfaces are normalized and targets redirect-resolved before
    counting. The result is sorted by (surface, entity).
    """
    redirects = redirects or RedirectTable()
    stats = stats if stats is not None else ParseStats()
    counts: Counter = Counter()
    lower = not case_sensitive
    for path in _as_paths(paths):
        stats.files += 1
        tsv = fmt == "tsv" or (fmt == "auto" and _is_tsv(path))
        if tsv:
            with open(path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    line = line.rstrip("\n")
                    if not line.strip():
                        continue
                    parts = line.split("\t")
                    try:
                        if len(parts) != 3:
                            raise ValueError
                        n = int(parts[2])
                        if n < 1:
                            raise ValueError
                    except ValueError:
                        raise MalformedLine(
                            path, lineno, "expected 'surface<TAB>entity<TAB>positive count'"
                        ) from None
                    surface = normalize_surface(parts[0], lowercase=lower)
                    entity = redirects.resolve(parts[1])
                    if surface and entity:
                        counts[surface, entity] += n
        else:
            text = Path(path).read_text(encoding="utf-8")
            for _title, body in iter_wikitext_docs(text):
                for anchor, target in extract_links(body, stats):
                    surface = normalize_surface(anchor, lowercase=lower)
                    entity = redirects.resolve(target)
                    if surface and entity:
                        counts[surface, entity] += 1
    if stats.skipped_unbalanced:
        log.warning("skipped %d malformed anchors", stats.skipped_unbalanced)
    return [AnchorCount(s, e, c) for (s, e), c in sorted(counts.items())]


def compute_wiki_prior(counts: Iterable[AnchorCount]) -> Dict[str, Dict[str, float]]:
    """P_wiki(e|m) = count(m, e) / total count of m."""
    by_surface: Dict[str, Dict[str, int]] = defaultdict(dict)
    for surface, entity, count in counts:
        by_surface[surface][entity] = by_surface[surface].get(entity, 0) + count
    prior = {}
    for surface, ents in by_surface.items():
        total = sum(ents.values())
        prior[surface] = {e: c / total for e, c in ents.items()}
    return prior


def load_uniform_dict(
    paths: Union[PathLike, Iterable[PathLike]],
    redirects: Optional[RedirectTable] = None,
    case_sensitive: bool = False,
) -> Dict[str, Set[str]]:
    """Read ``surface<TAB>entity`` dictionary files into surface -> set of titles."""
    redirects = redirects or RedirectTable()
    out: Dict[str, Set[str]] = defaultdict(set)
    for path in _as_paths(paths):
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise MalformedLine(path, lineno, "expected 'surface<TAB>entity'")
                surface = normalize_surface(parts[0], lowercase=not case_sensitive)
                entity = redirects.resolve(parts[1])
                if surface and entity:
                    out[surface].add(entity)
    return dict(out)


def combine_priors(
    p_wiki: Mapping[str, Mapping[str, float]],
    uniform_dict: Optional[Mapping[str, Set[str]]] = None,
    max_candidates: int = MAX_CANDIDATES_STORED,
) -> Dict[str, List[Tuple[str, float]]]:
    """P(e|m) = min(1, P_wiki + P_dict) over the union of both sources.

    Each surface's list is sorted by prior descending, then title ascending
    (title order is entity-id order in the store), and truncated.
    """
    uniform_dict = uniform_dict or {}
    combined = {}
    for surface in set(p_wiki) | set(uniform_dict):
        scores = dict(p_wiki.get(surface, {}))
        ents = uniform_dict.get(surface)
        if ents:
            share = 1.0 / len(ents)
            for e in ents:
                scores[e] = scores.get(e, 0.0) + share
        entries = [(e, min(1.0, p)) for e, p in scores.items() if p > 0]
        entries.sort(key=lambda ep: (-ep[1], ep[0].encode("utf-8")))
        if entries:
            combined[surface] = entries[:max_candidates]
    return combined


@dataclass
class BuildReport:
    dropped_entities: int = 0
    dropped_surfaces: int = 0
    surfaces: int = 0
    entries: int = 0
    missing: List[str] = field(default_factory=list)


def build_store(
    embeddings: Tuple[EmbeddingMatrix, EmbeddingMatrix],
    combined_priors: Mapping[str, List[Tuple[str, float]]],
    out_path: PathLike,
    case_sensitive: bool = False,
    max_candidates: int = MAX_CANDIDATES_STORED,
) -> BuildReport:
    """Write a store, dropping prior entities that have no embedding row.

    ``dropped_entities`` counts distinct titles dropped; a surface left with no
    entries is dropped too.
    """
    words, entities = embeddings
    report = BuildReport()
    missing: Set[str] = set()
    kept = {}
    for surface, entries in combined_priors.items():
        survivors = []
        for title, prior in entries:
            if title in entities:
                survivors.append((title, prior))
            else:
                missing.add(title)
        if survivors:
            kept[surface] = survivors
        else:
            report.dropped_surfaces += 1
    report.missing = sorted(missing)
    report.dropped_entities = len(missing)
    if report.dropped_entities:
        log.warning("dropped %d prior entities without embeddings", report.dropped_entities)
    if not kept:
        raise EmptyStore("no surface has an entity with an embedding; nothing to write")
    report.surfaces = len(kept)
    report.entries = sum(min(len(v), max_candidates) for v in kept.values())
    write_store(out_path, words, entities, kept, case_sensitive=case_sensitive,
                max_candidates=max_candidates)
    return report
