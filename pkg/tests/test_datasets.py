import json

import pytest

from rellink.datasets import TrainingDoc, parse_doc, read_conll, read_jsonl, write_jsonl
from rellink.errors import MalformedLine
from rellink.evaluation import GoldMention


def test_jsonl_round_trip(tmp_path):
    docs = [TrainingDoc("Paris is nice", [GoldMention(0, 5, "Paris")], "d1"),
            TrainingDoc("Nothing", [], None),
            TrainingDoc("Zürich and Bern", [GoldMention(11, 4, None), GoldMention(0, 6, "Zürich")])]
    write_jsonl(tmp_path / "d.jsonl", docs)
    back = read_jsonl(tmp_path / "d.jsonl")
    assert back[0] == docs[0] and back[1] == docs[1]
    # mentions come back sorted by offset
    assert back[2].mentions == sorted(docs[2].mentions)
    line = (tmp_path / "d.jsonl").read_text(encoding="utf-8").splitlines()[0]
    assert list(json.loads(line)) == sorted(json.loads(line))


@pytest.mark.parametrize("bad", [
    '{"mentions": []}',
    '{"text": "abc", "mentions": [{"start": 5, "length": 3, "entity": "X"}]}',
    '{"text": "abcdef", "mentions": [{"start": 0, "length": 3}, {"start": 2, "length": 2}]}',
    'not json',
])
def test_jsonl_errors_name_the_line(tmp_path, bad):
    (tmp_path / "d.jsonl").write_text('{"text": "ok"}\n' + bad + "\n")
    with pytest.raises(MalformedLine, match=r"d\.jsonl:2"):
        read_jsonl(tmp_path / "d.jsonl")


def test_parse_doc_nil_entity():
    doc = parse_doc({"text": "abc", "mentions": [{"start": 0, "length": 3, "entity": None}]})
    assert doc.mentions == [GoldMention(0, 3, None)]


def test_read_conll(tmp_path):
    (tmp_path / "a.tsv").write_text(
        "-DOCSTART- (1 EU)\n"
        "EU\tB\tEU\tEuropean_Union\thttp://x\n"
        "rejects\n"
        "German\tB\tGerman\tGermany\n"
        "call\n"
        "\n"
        "Peter\tB\tPeter Blackburn\t--NME--\n"
        "Blackburn\tI\tPeter Blackburn\t--NME--\n"
        "-DOCSTART- (2 next)\n"
        "New\tB\tNew York\tNew_York_City\n"
        "York\tI\tNew York\tNew_York_City\n"
    )
    docs = read_conll(tmp_path / "a.tsv")
    assert [d.doc_id for d in docs] == ["1 EU", "2 next"]
    assert docs[0].text == "EU rejects German call\nPeter Blackburn"
    assert docs[0].mentions == [GoldMention(0, 2, "European_Union"), GoldMention(11, 6, "Germany"),
                                GoldMention(23, 15, None)]
    assert docs[1].mentions == [GoldMention(0, 8, "New_York_City")]
    for d in docs:
        for m in d.mentions:
            assert d.text[m.start:m.start + m.length]


def test_read_conll_bad_flag(tmp_path):
    (tmp_path / "a.tsv").write_text("-DOCSTART-\nx\tQ\n")
    with pytest.raises(MalformedLine):
        read_conll(tmp_path / "a.tsv")
