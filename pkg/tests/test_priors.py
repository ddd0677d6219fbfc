# tests/test_priors.py
# Testuje prompty globalne/lokalne, pseudo-embedder i format pliku embeddingów (nagłówek JSON + DPAT).
import io

import numpy as np
import orjson
import pytest

from diffpose_animal.errors import ConfigError, FormatError, ValidationError
from diffpose_animal.numerics import write_records
from diffpose_animal.priors import (
    build_prompts,
    collapse_prior,
    embedding_bytes,
    load_embeddings,
    parse_embeddings,
    pseudo_embed,
    save_embeddings,
    write_prompts,
)
from diffpose_animal.synthdata import QUADRUPED_KEYPOINTS


def _raw_file(fg, fl, names, d=None):
    header = {"version": 1, "species": "cat", "keypoint_names": names, "d": d or len(fg),
              "encoder_name": "external"}
    buf = io.BytesIO()
    buf.write(orjson.dumps(header, option=orjson.OPT_SORT_KEYS) + b"\n")
    write_records(buf, [np.asarray(fg, float), np.asarray(fl, float)])
    return buf.getvalue()


def test_build_prompts_substitution_and_order():
    b = build_prompts("tiger", ["nose"])
    assert len(b.keypoint_prompts) == 1
    assert "tiger" in b.keypoint_prompts["nose"] and "nose" in b.keypoint_prompts["nose"]
    assert "tiger" in b.global_prompt
    b17 = build_prompts("dog", QUADRUPED_KEYPOINTS)
    assert b17.keypoint_names == list(QUADRUPED_KEYPOINTS)


def test_build_prompts_rejects_bad_input():
    with pytest.raises(ValidationError):
        build_prompts("  ", ["nose"])
    with pytest.raises(ValidationError):
        build_prompts("cat", [])
    with pytest.raises(ValidationError):
        build_prompts("cat", ["nose", "nose"])


def test_write_prompts_audit_file(tmp_path):
    p = write_prompts(build_prompts("cat", ["nose", "neck"]), tmp_path / "emb.prompts.txt")
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "species\tcat"
    assert lines[3].startswith("keypoint:nose\t")


def test_pseudo_embed_deterministic_unit_rows():
    b = build_prompts("cat", ["nose", "neck", "tail"])
    a, c = pseudo_embed(b, 64, 0), pseudo_embed(b, 64, 0)
    assert a.F_l.tobytes() == c.F_l.tobytes()
    assert a.F_g.tobytes() == c.F_g.tobytes()
    np.testing.assert_allclose(np.linalg.norm(a.F_l, axis=1), 1.0, atol=1e-12)
    assert not np.array_equal(pseudo_embed(b, 64, 1).F_g, a.F_g)
    with pytest.raises(ConfigError):
        pseudo_embed(b, 4, 0)


def test_pseudo_embed_distinct_texts_nearly_orthogonal():
    names = [f"kp{i}" for i in range(200)]
    pr = pseudo_embed(build_prompts("cat", names), 64, 0)
    cos = [abs(float(pr.F_l[2 * i] @ pr.F_l[2 * i + 1])) for i in range(100)]
    assert max(cos) < 0.5


def test_collapse_prior_shares_one_vector():
    pr = collapse_prior(pseudo_embed(build_prompts("cat", ["a", "b", "c"]), 16, 0), seed=3)
    assert pr.source == "collapsed"
    for row in pr.F_l:
        np.testing.assert_array_equal(row, pr.F_g)


def test_embedding_file_roundtrip_is_byte_identical(tmp_path):
    pr = pseudo_embed(build_prompts("cat", ["nose", "neck"]), 16, 7)
    p = save_embeddings(pr, tmp_path / "emb.dpat")
    back = load_embeddings(p, expected_n=2)
    assert back.keypoint_names == ("nose", "neck")
    assert embedding_bytes(back) == p.read_bytes()


def test_load_renormalizes_off_unit_rows():
    fg = np.zeros(8)
    fg[0] = 2.0
    fl = np.eye(8)[:2] * 3.0
    pr = parse_embeddings(_raw_file(fg, fl, ["a", "b"]))
    np.testing.assert_allclose(pr.F_g, np.eye(8)[0])
    np.testing.assert_allclose(np.linalg.norm(pr.F_l, axis=1), 1.0)


def test_load_rejects_zero_row():
    fl = np.eye(8)[:2].copy()
    fl[1] = 0.0
    with pytest.raises(ValidationError):
        parse_embeddings(_raw_file(np.eye(8)[0], fl, ["a", "b"]))


def test_load_truncated_names_offset(tmp_path):
    data = _raw_file(np.eye(8)[0], np.eye(8)[:2], ["a", "b"])
    with pytest.raises(FormatError) as ei:
        parse_embeddings(data[:-10])
    assert ei.value.offset is not None and ei.value.offset > 0
    assert "offset=" in str(ei.value)


def test_load_n_mismatch(tmp_path):
    p = save_embeddings(pseudo_embed(build_prompts("cat", ["nose", "neck"]), 16, 0), tmp_path / "e.dpat")
    with pytest.raises(ValidationError) as ei:
        load_embeddings(p, expected_n=17)
    assert "17" in str(ei.value) and "N=2" in str(ei.value)
