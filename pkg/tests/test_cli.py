# tests/test_cli.py
# Testuje podkomendy CLI (gen-data, embed, train, infer, eval, plot), kody wyjścia i epilog --help.
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from diffpose_animal.main import main
from diffpose_animal.priors import load_embeddings
from diffpose_animal.synthdata.split import ppm_bytes
from diffpose_animal.utils.fs import read_json

SVG = "{http://www.w3.org/2000/svg}"
TINY_SET = ["C=4", "heads=2", "t_dim=4", "T=3", "epochs=1", "batch_size=2", "lr_decay_epochs=[]"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-data", "--n", "3", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_gen_data_lists_images_and_is_reproducible(data_dir, tmp_path):
    ann = read_json(data_dir / "annotations.json")
    assert len(ann["images"]) == 3 and len(ann["annotations"]) == 3
    assert (data_dir / "run_manifest.json").is_file()
    assert read_json(data_dir / "run_manifest.json")["status"] == "ok"

    again = tmp_path / "again"
    assert main(["gen-data", "--n", "3", "--seed", "5", "--out", str(again)]) == 0
    assert (again / "annotations.json").read_bytes() == (data_dir / "annotations.json").read_bytes()
    assert (again / "images" / "000002.ppm").read_bytes() == (data_dir / "images" / "000002.ppm").read_bytes()


def test_missing_required_flag_prints_usage(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["gen-data", "--n", "3"])
    assert ei.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_help_lists_format_versions(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--help"])
    assert ei.value.code == 0
    out = capsys.readouterr().out
    assert "DPAT" in out and "checkpoint" in out and "v1" in out


def test_embed_pseudo_and_import(data_dir, tmp_path):
    emb = tmp_path / "emb.dpat"
    assert main(["embed", "--keypoints-from", str(data_dir / "annotations.json"), "--d", "16", "--out", str(emb)]) == 0
    prior = load_embeddings(emb)
    assert prior.n == 17 and prior.d == 16
    assert (tmp_path / "emb.prompts.txt").is_file()

    copy = tmp_path / "copy.dpat"
    assert main(["embed", "--import", str(emb), "--keypoints-from", str(data_dir / "annotations.json"),
                 "--out", str(copy)]) == 0
    assert copy.read_bytes() == emb.read_bytes()


def test_embed_rejects_small_d(data_dir, tmp_path):
    code = main(["embed", "--keypoints-from", str(data_dir / "annotations.json"), "--d", "4",
                 "--out", str(tmp_path / "e.dpat")])
    assert code == 2
    assert not (tmp_path / "e.dpat").exists()


def test_train_rejects_bad_embeddings(data_dir, tmp_path, capsys):
    bad = tmp_path / "bad.dpat"
    bad.write_bytes(b"not an embedding file")
    code = main(["train", "--data", str(data_dir), "--embeddings", str(bad), "--out", str(tmp_path / "run")])
    assert code == 2
    assert "diffpose-animal train:" in capsys.readouterr().err
    assert not (tmp_path / "run" / "checkpoints").exists()

    assert main(["train", "--data", str(data_dir), "--embeddings", str(tmp_path / "missing.dpat"),
                 "--out", str(tmp_path / "run")]) == 2


def test_train_mixed_image_sizes_is_config_error(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["gen-data", "--n", "3", "--seed", "5", "--out", str(data)]) == 0
    (data / "images" / "000002.ppm").write_bytes(ppm_bytes(np.zeros((3, 32, 32))))
    emb = tmp_path / "emb.dpat"
    assert main(["embed", "--keypoints-from", str(data / "annotations.json"), "--d", "8", "--out", str(emb)]) == 0

    code = main(["train", "--data", str(data), "--embeddings", str(emb), "--out", str(tmp_path / "run")])
    assert code == 2
    assert "[PREFLIGHT][01.after_data]" in capsys.readouterr().err


def test_train_infer_eval_chain_is_deterministic(data_dir, tmp_path):
    emb = tmp_path / "emb.dpat"
    assert main(["embed", "--keypoints-from", str(data_dir / "annotations.json"), "--d", "8", "--out", str(emb)]) == 0
    sets = [a for kv in TINY_SET for a in ("--set", kv)]
    for run in ("a", "b"):
        assert main(["train", "--data", str(data_dir), "--embeddings", str(emb), *sets,
                     "--out", str(tmp_path / run)]) == 0
    assert (tmp_path / "a" / "loss.csv").read_bytes() == (tmp_path / "b" / "loss.csv").read_bytes()

    ckpt = tmp_path / "a" / "checkpoints" / "final.ckpt"
    preds = []
    for k in range(2):
        p = tmp_path / f"pred{k}.json"
        assert main(["infer", "--data", str(data_dir), "--embeddings", str(emb), "--checkpoint", str(ckpt),
                     "--mode", "ddim", "--out", str(p)]) == 0
        preds.append(p.read_bytes())
    assert preds[0] == preds[1]
    assert (tmp_path / "pred0.json.run.json").is_file()

    assert main(["eval", "--gt", str(data_dir / "annotations.json"), "--pred", str(tmp_path / "pred0.json"),
                 "--out", str(tmp_path / "eval")]) == 0
    rep = read_json(tmp_path / "eval" / "metrics.json")
    assert 0.0 <= rep["overall"]["PCK"] <= 1.0


def test_eval_self_is_perfect(data_dir, tmp_path):
    gt = str(data_dir / "annotations.json")
    assert main(["eval", "--gt", gt, "--pred", gt, "--out", str(tmp_path)]) == 0
    rep = read_json(tmp_path / "metrics.json")
    assert rep["overall"]["AP"] == pytest.approx(1.0)
    assert rep["overall"]["AR"] == pytest.approx(1.0)
    assert rep["overall"]["PCK"] == 1.0
    assert (tmp_path / "metrics.csv").is_file() and (tmp_path / "pck_curve.csv").is_file()


def test_plot_two_points(tmp_path):
    csv = tmp_path / "loss.csv"
    csv.write_text("step,epoch,loss,lr\n1,0,0.5,0.0005\n2,0,0.25,0.0005\n")
    out = tmp_path / "loss.svg"
    assert main(["plot", "--csv", str(csv), "--out", str(out)]) == 0
    root = ET.parse(out).getroot()
    assert root.tag == f"{SVG}svg"
    series = [g for g in root.iter(f"{SVG}g") if g.get("id") == "series-0"]
    assert len(series) == 1
    assert len(list(series[0].iter(f"{SVG}use"))) == 2

    again = tmp_path / "again.svg"
    assert main(["plot", "--csv", str(csv), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()

    assert main(["plot", "--csv", str(csv), "--y", "nope", "--out", str(out)]) == 2
