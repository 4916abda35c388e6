import json

import numpy as np
import pytest

from coview_extractor.export import ExportError, export, read_emb, write_emb
from coview_extractor.instances import Span, TextInstance


def toy_instances(n_known=3, n_unknown=4):
    out = []
    for i in range(n_known):
        out.append(
            TextInstance(
                id=f"k{i}", sentence="john works at acme", kind="relation",
                head=Span(0, 4), tail=Span(14, 18), label=f"ktype{i % 2}", known=True,
            )
        )
    for i in range(n_unknown):
        out.append(
            TextInstance(
                id=f"u{i}", sentence="mary founded globex", kind="relation",
                head=Span(0, 4), tail=Span(13, 19), label=f"utype{i % 2}", known=False,
                split="test" if i % 2 else "train",
            )
        )
    return out


def rows(n, d, seed=0):
    return np.random.default_rng(seed).normal(size=(n, d)).astype(np.float32)


def test_export_writes_all_files(tmp_path):
    insts = toy_instances()
    export(insts, rows(7, 8), rows(7, 4, seed=1), tmp_path)
    assert (tmp_path / "meta.jsonl").exists()
    assert (tmp_path / "labels.json").exists()
    assert read_emb(tmp_path / "view_token.emb").shape == (7, 8)
    assert read_emb(tmp_path / "view_mask.emb").shape == (7, 4)
    labels = json.loads((tmp_path / "labels.json").read_text())
    assert labels["known_types"] == ["ktype0", "ktype1"]
    assert labels["num_unknown"] == 2


def test_meta_gold_placement(tmp_path):
    export(toy_instances(), rows(7, 8), rows(7, 4), tmp_path)
    lines = [json.loads(x) for x in (tmp_path / "meta.jsonl").read_text().splitlines()]
    known = [x for x in lines if x["known"]]
    unknown = [x for x in lines if not x["known"]]
    assert all(x["label"] is not None and "gold" not in x for x in known)
    assert all(x["label"] is None and x["gold"].startswith("utype") for x in unknown)


def test_num_unknown_override_and_error(tmp_path):
    insts = toy_instances(n_unknown=0)
    insts.append(
        TextInstance(id="u", sentence="mary founded globex", kind="relation",
                     head=Span(0, 4), tail=Span(13, 19), known=False)
    )
    with pytest.raises(ExportError):
        export(insts, rows(4, 8), rows(4, 4), tmp_path / "a")
    export(insts, rows(4, 8), rows(4, 4), tmp_path / "b", num_unknown=5)
    labels = json.loads((tmp_path / "b" / "labels.json").read_text())
    assert labels["num_unknown"] == 5


def test_row_count_mismatch(tmp_path):
    with pytest.raises(ExportError):
        export(toy_instances(), rows(6, 8), rows(7, 4), tmp_path)


def test_non_finite_rejected(tmp_path):
    bad = rows(7, 8)
    bad[3, 2] = np.nan
    with pytest.raises(ExportError):
        export(toy_instances(), bad, rows(7, 4), tmp_path)


def test_emb_round_trip(tmp_path):
    arr = rows(5, 3, seed=7)
    write_emb(tmp_path / "x.emb", arr)
    assert np.array_equal(read_emb(tmp_path / "x.emb"), arr)
    blob = (tmp_path / "x.emb").read_bytes()
    assert blob[:4] == b"EMB1"
    assert len(blob) == 12 + 5 * 3 * 4
