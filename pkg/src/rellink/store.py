"""Single-file knowledge store: word/entity embeddings plus the P(e|m) index.

File layout (little-endian; every section starts on an 8-byte boundary)::

    header       magic "RELSTORE", version u32, dim u32, word_count u64,
                 entity_count u64, surface_count u64, flags u32,
                 reserved u32, entry_count u64
    words        string table
    entities     string table
    word vecs    float32[word_count, dim]
    entity vecs  float32[entity_count, dim]
    surfaces     string table
    index        u64[surface_count, 2]   (first entry, entry count)
    entries      {entity u32, reserved u32, prior f64}[entry_count]

A string table is ``u64 offsets[count + 1]`` followed by the UTF-8 blob.
Strings are sorted by their UTF-8 bytes, so an entity's id is the rank of its
title. Opening without preload maps the file and reads nothing but the header;
pages of the tables and vectors are touched only when a lookup needs them.
"""

import functools
import logging
import mmap
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, DuplicateToken, MalformedLine, RelError, StoreFormatError
from .text import normalize_surface, normalize_title

log = logging.getLogger(__name__)

MAGIC = b"RELSTORE"
VERSION = 1
HEADER = struct.Struct("<8sIIQQQIIQ")
FLAG_CASE_SENSITIVE = 1
DEFAULT_ENTITY_PREFIX = "ENTITY/"
MAX_CANDIDATES_STORED = 100
ENTRY_DTYPE = np.dtype([("entity", "<u4"), ("reserved", "<u4"), ("prior", "<f8")])


class PriorEntry(NamedTuple):
    entity: int
    prior: float


@dataclass
class EmbeddingMatrix:
    """Token list plus a float32 matrix with one row per token."""

    tokens: List[str]
    vectors: np.ndarray
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise DimensionMismatch(
                f"{len(self.tokens)} tokens but vectors of shape {self.vectors.shape}"
            )
        self.index = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.index:
                raise DuplicateToken(tok)
            self.index[tok] = i

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self.index

    def vector(self, token: str) -> Optional[np.ndarray]:
        i = self.index.get(token)
        return None if i is None else self.vectors[i]


def read_vector_file(path) -> Tuple[List[str], np.ndarray]:
    """Parse a text vector file: a ``count dim`` header, then ``token v1 .. vd`` lines.

    Tokens may contain spaces; the last ``dim`` fields of a line are the vector.
    """
    tokens: List[str] = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        try:
            count, dim = int(header[0]), int(header[1])
            if len(header) != 2 or count < 0 or dim < 1:
                raise ValueError
        except (ValueError, IndexError):
            raise MalformedLine(path, 1, "expected header 'count dim'") from None
        vectors = np.empty((count, dim), dtype=np.float32)
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            parts = line.rsplit(maxsplit=dim)
            if len(parts) != dim + 1:
                raise MalformedLine(path, lineno, f"expected token and {dim} values")
            if len(tokens) >= count:
                raise MalformedLine(path, lineno, f"more than {count} vectors")
            try:
                vectors[len(tokens)] = np.array(parts[1:], dtype=np.float32)
            except ValueError:
                raise MalformedLine(path, lineno, "non-numeric vector component") from None
            tokens.append(parts[0])
    if len(tokens) != count:
        raise MalformedLine(path, 1, f"header declares {count} vectors, found {len(tokens)}")
    return tokens, vectors


def ingest_embeddings(
    word_vec_file, entity_vec_file=None, entity_prefix: str = DEFAULT_ENTITY_PREFIX
) -> Tuple[EmbeddingMatrix, EmbeddingMatrix]:
    """Load word and entity embeddings from text vector files.

    Tokens carrying ``entity_prefix`` are routed to the entity matrix wherever
    they appear, so a combined Wikipedia2Vec-style dump works as ``word_vec_file``
    alone. Every token of ``entity_vec_file`` is an entity, prefixed or not.
    Entity titles are canonicalized with :func:`normalize_title`.
    """
    w_tokens, w_rows, e_tokens, e_rows = [], [], [], []
    dims = []
    sources = [(word_vec_file, False)]
    if entity_vec_file is not None:
        sources.append((entity_vec_file, True))
    for path, all_entities in sources:
        tokens, vectors = read_vector_file(path)
        dims.append(vectors.shape[1])
        if dims[0] != dims[-1]:
            raise DimensionMismatch(
                f"{word_vec_file} has dim {dims[0]} but {path} has dim {dims[-1]}"
            )
        seen_w, seen_e = set(w_tokens), set(e_tokens)
        for tok, vec in zip(tokens, vectors):
            if tok.startswith(entity_prefix) or all_entities:
                if tok.startswith(entity_prefix):
                    tok = tok[len(entity_prefix):]
                tok = normalize_title(tok)
                if tok in seen_e:
                    raise DuplicateToken(tok, path)
                seen_e.add(tok)
                e_tokens.append(tok)
                e_rows.append(vec)
            else:
                if tok in seen_w:
                    raise DuplicateToken(tok, path)
                seen_w.add(tok)
                w_tokens.append(tok)
                w_rows.append(vec)
    dim = dims[0]
    words = EmbeddingMatrix(w_tokens, np.array(w_rows, dtype=np.float32).reshape(-1, dim))
    entities = EmbeddingMatrix(e_tokens, np.array(e_rows, dtype=np.float32).reshape(-1, dim))
    return words, entities


# ---------------------------------------------------------------- writing


def _pad8(n: int) -> int:
    return -n % 8


def _utf8_sorted(strings) -> List[str]:
    return sorted(strings, key=lambda s: s.encode("utf-8"))


def _string_table(strings: Sequence[str]) -> bytes:
    encoded = [s.encode("utf-8") for s in strings]
    offsets = np.zeros(len(encoded) + 1, dtype="<u8")
    np.cumsum([len(b) for b in encoded], out=offsets[1:])
    blob = b"".join(encoded)
    return offsets.tobytes() + blob + b"\0" * _pad8(len(blob))


def write_store(
    path,
    words: EmbeddingMatrix,
    entities: EmbeddingMatrix,
    priors: Mapping[str, Sequence[Tuple[str, float]]],
    case_sensitive: bool = False,
    max_candidates: int = MAX_CANDIDATES_STORED,
) -> None:
    """Serialize a store. ``priors`` maps normalized surface -> (entity title, prior).

    Output depends only on the content of the arguments, never on their order.
    """
    if words.dim != entities.dim:
        raise DimensionMismatch(f"word dim {words.dim} != entity dim {entities.dim}")
    dim = words.dim
    word_tokens = _utf8_sorted(words.tokens)
    entity_titles = _utf8_sorted(entities.tokens)
    entity_ids = {t: i for i, t in enumerate(entity_titles)}

    surfaces, index, records = [], [], []
    for surface in _utf8_sorted(priors):
        entries = []
        for title, prior in priors[surface]:
            if title not in entity_ids:
                raise RelError(f"surface {surface!r}: entity {title!r} has no embedding")
            if not 0.0 < prior <= 1.0:
                raise RelError(f"surface {surface!r}: prior {prior} outside (0, 1]")
            entries.append((entity_ids[title], float(prior)))
        if not entries:
            continue
        entries.sort(key=lambda e: (-e[1], e[0]))
        entries = entries[:max_candidates]
        surfaces.append(surface)
        index.append((len(records), len(entries)))
        records.extend(entries)

    entry_arr = np.zeros(len(records), dtype=ENTRY_DTYPE)
    if records:
        entry_arr["entity"] = [r[0] for r in records]
        entry_arr["prior"] = [r[1] for r in records]

    flags = FLAG_CASE_SENSITIVE if case_sensitive else 0
    header = HEADER.pack(
        MAGIC, VERSION, dim, len(word_tokens), len(entity_titles), len(surfaces),
        flags, 0, len(records),
    )
    w_vecs = words.vectors[[words.index[t] for t in word_tokens]] if word_tokens else np.zeros((0, dim))
    e_vecs = (
        entities.vectors[[entities.index[t] for t in entity_titles]]
        if entity_titles else np.zeros((0, dim))
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        for chunk in (
            header,
            _string_table(word_tokens),
            _string_table(entity_titles),
        ):
            f.write(chunk)
        for mat in (w_vecs, e_vecs):
            raw = np.ascontiguousarray(mat, dtype="<f4").tobytes()
            f.write(raw + b"\0" * _pad8(len(raw)))
        f.write(_string_table(surfaces))
        f.write(np.array(index, dtype="<u8").reshape(-1, 2).tobytes())
        f.write(entry_arr.tobytes())
    os.replace(tmp, path)


# ---------------------------------------------------------------- reading


class _StringTable:
    def __init__(self, buf, pos: int, count: int):
        self.count = count
        self.offsets = np.frombuffer(buf, dtype="<u8", count=count + 1, offset=pos)
        blob_start = pos + 8 * (count + 1)
        blob_len = int(self.offsets[-1])
        if blob_start + blob_len > len(buf):
            raise StoreFormatError("string table runs past end of file")
        self.blob = memoryview(buf)[blob_start:blob_start + blob_len]
        self.end = blob_start + blob_len + _pad8(blob_len)

    def raw(self, i: int) -> bytes:
        return bytes(self.blob[int(self.offsets[i]):int(self.offsets[i + 1])])

    def __getitem__(self, i: int) -> str:
        return self.raw(i).decode("utf-8")

    def __len__(self) -> int:
        return self.count

    def find(self, s: str) -> int:
        key = s.encode("utf-8")
        lo, hi = 0, self.count
        while lo < hi:
            mid = (lo + hi) // 2
            if self.raw(mid) < key:
                lo = mid + 1
            else:
                hi = mid
        if lo < self.count and self.raw(lo) == key:
            return lo
        return -1

    def as_dict(self) -> Dict[str, int]:
        return {self[i]: i for i in range(self.count)}


class KnowledgeStore:
    """Read-only view of a store file.

    With ``preload=False`` the file is memory-mapped and opening reads only the
    header. With ``preload=True`` the whole file is read into memory and lookup
    dictionaries are built up front. Either way the object is immutable and may
    be shared between threads.
    """

    def __init__(self, path, preload: bool = False):
        self.path = str(path)
        self.preload = preload
        self._mmap = None
        with open(path, "rb") as f:
            head = f.read(HEADER.size)
            if len(head) < HEADER.size:
                raise StoreFormatError(f"{path}: truncated header")
            if preload:
                buf = head + f.read()
            else:
                if os.fstat(f.fileno()).st_size == 0:
                    raise StoreFormatError(f"{path}: empty file")
                self._mmap = buf = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
        self.bytes_read = len(buf) if preload else HEADER.size

        magic, version, dim, n_words, n_entities, n_surfaces, flags, _, n_entries = HEADER.unpack(head)
        if magic != MAGIC:
            raise StoreFormatError(f"{path}: not a store file (bad magic)")
        if version != VERSION:
            raise StoreFormatError(f"{path}: unsupported store version {version}")
        self.version = version
        self.dim = dim
        self.case_sensitive = bool(flags & FLAG_CASE_SENSITIVE)
        try:
            self._words = _StringTable(buf, HEADER.size, n_words)
            self._entities = _StringTable(buf, self._words.end, n_entities)
            pos = self._entities.end
            self._word_vecs = np.frombuffer(buf, "<f4", n_words * dim, pos).reshape(n_words, dim)
            pos += n_words * dim * 4
            pos += _pad8(pos)
            self._entity_vecs = np.frombuffer(buf, "<f4", n_entities * dim, pos).reshape(n_entities, dim)
            pos += n_entities * dim * 4
            pos += _pad8(pos)
            self._surfaces = _StringTable(buf, pos, n_surfaces)
            pos = self._surfaces.end
            self._index = np.frombuffer(buf, "<u8", 2 * n_surfaces, pos).reshape(n_surfaces, 2)
            pos += 16 * n_surfaces
            self._entries = np.frombuffer(buf, ENTRY_DTYPE, n_entries, pos)
            pos += ENTRY_DTYPE.itemsize * n_entries
        except ValueError as exc:
            raise StoreFormatError(f"{path}: truncated or corrupt ({exc})") from None
        if pos != len(buf):
            raise StoreFormatError(f"{path}: size mismatch ({pos} expected, {len(buf)} found)")

        if preload:
            word_ids = self._words.as_dict()
            entity_ids = self._entities.as_dict()
            surface_ids = self._surfaces.as_dict()
            self._word_id = lambda t: word_ids.get(t, -1)
            self._entity_id = lambda t: entity_ids.get(t, -1)
            self._surface_id = lambda s: surface_ids.get(s, -1)
        else:
            self._word_id = functools.lru_cache(maxsize=1 << 16)(self._words.find)
            self._entity_id = self._entities.find
            self._surface_id = functools.lru_cache(maxsize=1 << 16)(self._surfaces.find)

    @classmethod
    def open(cls, path, preload: bool = False) -> "KnowledgeStore":
        return cls(path, preload=preload)

    def close(self) -> None:
        if self._mmap is not None:
            try:
                self._mmap.close()
            except BufferError:
                # numpy views handed out earlier still reference the map
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- metadata

    @property
    def word_count(self) -> int:
        return len(self._words)

    @property
    def entity_count(self) -> int:
        return len(self._entities)

    @property
    def surface_count(self) -> int:
        return len(self._surfaces)

    @property
    def meta(self) -> dict:
        return {
            "version": self.version,
            "dim": self.dim,
            "words": self.word_count,
            "entities": self.entity_count,
            "surfaces": self.surface_count,
            "entries": len(self._entries),
            "case_sensitive": self.case_sensitive,
        }

    # -- vocabularies

    def words(self) -> Iterator[str]:
        return (self._words[i] for i in range(self.word_count))

    def entity_titles(self) -> Iterator[str]:
        return (self._entities[i] for i in range(self.entity_count))

    def surfaces(self) -> Iterator[str]:
        return (self._surfaces[i] for i in range(self.surface_count))

    def entity_id(self, title: str) -> Optional[int]:
        i = self._entity_id(title)
        return None if i < 0 else i

    def entity_title(self, entity_id: int) -> str:
        return self._entities[entity_id]

    def normalize(self, surface: str) -> str:
        return normalize_surface(surface, lowercase=not self.case_sensitive)

    # -- priors

    def _entries_for(self, normalized: str):
        i = self._surface_id(normalized)
        if i < 0:
            return None
        first, count = self._index[i]
        return self._entries[int(first):int(first + count)]

    def lookup_prior(self, surface: str) -> List[PriorEntry]:
        entries = self._entries_for(self.normalize(surface))
        if entries is None:
            return []
        return [PriorEntry(int(e), float(p)) for e, p in zip(entries["entity"], entries["prior"])]

    def top_prior(self, normalized: str) -> Optional[float]:
        """Highest prior for an already-normalized surface, or None if unknown."""
        entries = self._entries_for(normalized)
        if entries is None or len(entries) == 0:
            return None
        return float(entries["prior"][0])

    # -- vectors

    def word_id(self, token: str) -> Optional[int]:
        """Exact vocabulary hit first, then the lowercased token."""
        i = self._word_id(token)
        if i < 0:
            lower = token.lower()
            if lower != token:
                i = self._word_id(lower)
        return None if i < 0 else i

    def get_vector(self, kind: str, key: Union[str, int]) -> Optional[np.ndarray]:
        """Stored vector for a word token or an entity (id or title); None when absent."""
        if kind == "word":
            i = self._word_id(key)
            return None if i < 0 else np.array(self._word_vecs[i])
        if kind == "entity":
            if isinstance(key, str):
                key = self._entity_id(key)
            if not 0 <= key < self.entity_count:
                return None
            return np.array(self._entity_vecs[key])
        raise ValueError(f"kind must be 'word' or 'entity', not {kind!r}")

    def word_matrix(self, tokens: Sequence[str]) -> np.ndarray:
        """Vectors of the in-vocabulary tokens (OOV tokens skipped), float32 (n, dim)."""
        ids = [i for i in map(self.word_id, tokens) if i is not None]
        if not ids:
            return np.zeros((0, self.dim), dtype=np.float32)
        return self._word_vecs[ids]

    def entity_matrix(self, ids: Sequence[int]) -> np.ndarray:
        if len(ids) == 0:
            return np.zeros((0, self.dim), dtype=np.float32)
        return self._entity_vecs[np.asarray(ids, dtype=np.int64)]
