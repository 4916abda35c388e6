import json

import pytest

from coview_extractor import cli
from coview_extractor.encoder import MaskedLmEncoder
from coview_extractor.instances import Span, TextInstance


@pytest.fixture(scope="module")
def encoder(tiny_model_dir):
    return MaskedLmEncoder(tiny_model_dir, seed=0)


INSTS = [
    TextInstance(id="a", sentence="john works at acme", kind="relation",
                 head=Span(0, 4), tail=Span(14, 18)),
    TextInstance(id="b", sentence="mary was born in paris", kind="relation",
                 head=Span(0, 4), tail=Span(17, 22)),
]


def test_predict_names_filters_pieces_and_specials(encoder):
    names = encoder.predict_names(INSTS, top_k=10)
    assert len(names) == 2
    for words in names:
        assert len(words) == 10
        assert all(not w.startswith("##") for w in words)
        assert all(not (w.startswith("[") and w.endswith("]")) for w in words)
        assert all(w not in ("<h>", "</h>", "<t>", "</t>", "<tgr>", "</tgr>") for w in words)


def test_predict_names_top_k_zero(encoder):
    assert encoder.predict_names(INSTS, top_k=0) == [[], []]


def test_predict_names_deterministic(encoder):
    assert encoder.predict_names(INSTS, top_k=5) == encoder.predict_names(INSTS, top_k=5)


def test_cli_names_export(tmp_path, tiny_model_dir):
    lines = [
        {"id": "a", "sentence": "john works at acme", "kind": "relation",
         "head": [0, 4], "tail": [14, 18], "label": "employer", "known": True},
        {"id": "b", "sentence": "mary founded globex", "kind": "relation",
         "head": [0, 4], "tail": [13, 19], "label": "founder", "known": False},
        {"id": "c", "sentence": "bob was born in oslo", "kind": "relation",
         "head": [0, 3], "tail": [16, 20], "label": "birthplace", "known": False},
    ]
    inp = tmp_path / "in.jsonl"
    inp.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    out = tmp_path / "out"
    code = cli.run([
        "--input", str(inp), "--model", tiny_model_dir, "--out", str(out),
        "--names", "--top-k", "4",
    ])
    assert code == 0
    rows = [json.loads(x) for x in (out / "names.jsonl").read_text().splitlines()]
    assert [r["id"] for r in rows] == ["a", "b", "c"]
    assert all(len(r["names"]) == 4 for r in rows)
