"""Annotated document I/O.

The native format is JSON lines, one document per line::

    {"text": "...", "mentions": [{"start": 0, "length": 8, "entity": "Belgrade"}]}

``entity`` may be null (or a NIL marker) for out-of-KB mentions. An importer
for CoNLL/AIDA-style token TSV is provided as well.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional

from .errors import MalformedLine
from .evaluation import GoldMention, NIL_TITLES
from .mention import adapt_external_spans
from .text import normalize_title


@dataclass
class TrainingDoc:
    text: str
    mentions: List[GoldMention] = field(default_factory=list)
    doc_id: Optional[str] = None

    def to_json(self) -> dict:
        out = {"text": self.text,
               "mentions": [{"start": m.start, "length": m.length, "entity": m.entity}
                            for m in self.mentions]}
        if self.doc_id is not None:
            out["id"] = self.doc_id
        return out


def parse_doc(obj: dict, where: str = "") -> TrainingDoc:
    if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
        raise ValueError(f"{where}record needs a string 'text'")
    mentions = []
    for m in obj.get("mentions", []):
        entity = m.get("entity")
        mentions.append(GoldMention(int(m["start"]), int(m["length"]),
                                    None if entity is None else str(entity)))
    adapt_external_spans(obj["text"], [(m.start, m.length) for m in mentions])
    return TrainingDoc(obj["text"], sorted(mentions), obj.get("id"))


def read_jsonl(path) -> List[TrainingDoc]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                docs.append(parse_doc(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedLine(path, lineno, str(exc)) from None
    return docs


def write_jsonl(path, docs: Iterable[TrainingDoc]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps(doc.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_conll(path) -> List[TrainingDoc]:
    """Import AIDA-style token TSV.

    ``-DOCSTART-`` lines open documents; other non-blank lines are
    ``token[<TAB>B|I<TAB>mention<TAB>entity ...]``. Tokens are joined by single
    spaces and sentences (blank-line separated) by newlines. ``--NME--``
    entities become NIL mentions.
    """
    docs: List[TrainingDoc] = []
    parts: List[str] = []
    mentions: List[list] = []
    doc_id = None
    pos = 0
    sentence_start = True

    def flush():
        if parts or doc_id is not None:
            text = "".join(parts)
            docs.append(TrainingDoc(text, [GoldMention(*m) for m in mentions], doc_id))

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if line.startswith("-DOCSTART-"):
                flush()
                parts, mentions, pos, sentence_start = [], [], 0, True
                doc_id = line[len("-DOCSTART-"):].strip().strip("()") or None
                continue
            if not line.strip():
                sentence_start = True
                continue
            fields = line.split("\t")
            token = fields[0]
            sep = "" if not parts else ("\n" if sentence_start else " ")
            parts.append(sep + token)
            pos += len(sep)
            start = pos
            pos += len(token)
            sentence_start = False
            if len(fields) >= 2 and fields[1] in ("B", "I"):
                if len(fields) < 4:
                    raise MalformedLine(path, lineno, "mention token needs flag, mention and entity")
                entity = fields[3]
                entity = None if entity in NIL_TITLES else normalize_title(entity)
                if fields[1] == "B" or not mentions:
                    mentions.append([start, len(token), entity])
                else:
                    mentions[-1][1] = pos - mentions[-1][0]
            elif len(fields) >= 2:
                raise MalformedLine(path, lineno, f"unknown mention flag {fields[1]!r}")
    flush()
    return docs
