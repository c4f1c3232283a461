import hashlib

import pytest

from fvpad.cli import main
from fvpad.features import read_descriptor_dump
from fvpad.filterbank import load_filter_bank, random_bank, save_filter_bank
from fvpad.ingest import Label, load_manifest
from fvpad.synthetic import SPECIES, generate_synthetic_dataset, render_sample

TINY_CFG = "n_components = 4\npca_dim = 8\nradii = 4, 6\ngmm_max_iter = 30\n" \
           "bank_sizes = 3\nbank_filters = 5\nfilter_patches = 500\n"


def test_no_arguments_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["score", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_error_exit_one(tmp_path, capsys):
    assert main(["score", "--model", str(tmp_path / "missing"), "--image", "x.png"]) == 1
    assert "error" in capsys.readouterr().err


def test_learn_extract(tiny_dataset, tmp_path, capsys):
    bank_path = tmp_path / "b.bank"
    assert main(["learn-filters", "--manifest", str(tiny_dataset), "--size", "3",
                 "--filters", "5", "--patches", "500", "--out", str(bank_path)]) == 0
    assert load_filter_bank(bank_path).bank_id == (5, 3)
    img = load_manifest(tiny_dataset)[0].image_path
    dump = tmp_path / "d.bin"
    assert main(["extract", "--bank", str(bank_path), "--image", img, "--radii", "4,6",
                 "--colourspace", "ycbcr", "--out", str(dump)]) == 0
    points, radii, values = read_descriptor_dump(dump)
    assert values.shape == (288, 384) and points.shape == (288, 2)
    assert set(radii.tolist()) == {4, 6}


def test_train_score_time(tiny_dataset, tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY_CFG)
    model = tmp_path / "m.bundle"
    assert main(["train", "--config", str(cfg), "--manifest", str(tiny_dataset),
                 "--out", str(model)]) == 0
    img = load_manifest(tiny_dataset)[-1].image_path
    capsys.readouterr()
    assert main(["score", "--model", str(model), "--image", img]) == 0
    (line,) = capsys.readouterr().out.splitlines()
    path, value = line.split(" ")
    assert path == img
    float(value)
    assert main(["time", "--model", str(model), "--image", img]) == 0
    assert "mean_s:" in capsys.readouterr().out


def test_evaluate_loo_writes_report(tiny_dataset, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY_CFG)
    out = tmp_path / "rep"
    assert main(["evaluate", "--config", str(cfg), "--manifest", str(tiny_dataset),
                 "--protocol", "loo", "--out", str(out)]) == 0
    text = (out / "report.txt").read_text()
    for s in SPECIES:
        assert f"[sweep loo-{s}]" in text


def test_sweep_command(tiny_dataset, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY_CFG.replace("bank_filters = 5", "bank_filters = 5, 6"))
    out = tmp_path / "rep"
    assert main(["sweep", "--config", str(cfg), "--manifest", str(tiny_dataset),
                 "--out", str(out)]) == 0
    text = (out / "sweep_report.txt").read_text()
    assert "n_banks: 2" in text and "d_eer_std:" in text


def test_bank_file_config(tiny_dataset, tmp_path):
    bank = tmp_path / "r.bank"
    save_filter_bank(random_bank(5, 3, 1), bank)
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY_CFG + f"bank_path = {bank}\n")
    assert main(["train", "--config", str(cfg), "--manifest", str(tiny_dataset),
                 "--out", str(tmp_path / "m.bundle")]) == 0


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.png")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_synthetic_is_byte_identical(tmp_path):
    a = generate_synthetic_dataset(3, 2, tmp_path / "a", size=32)
    b = generate_synthetic_dataset(3, 2, tmp_path / "b", size=32)
    assert _digest(a.parent) == _digest(b.parent)
    c = generate_synthetic_dataset(4, 2, tmp_path / "c", size=32)
    assert _digest(a.parent) != _digest(c.parent)


def test_synthetic_counts(tmp_path):
    recs = load_manifest(generate_synthetic_dataset(0, 10, tmp_path, size=24))
    for role in ("train", "test"):
        rows = [r for r in recs if r.role == role]
        assert sum(r.label is Label.BONA_FIDE for r in rows) == 10
        assert sum(r.is_attack for r in rows) == 30
        assert {r.pai_species for r in rows if r.is_attack} == set(SPECIES)
    assert len({r.dataset_id for r in recs}) >= 2
    train_subj = {r.subject_id for r in recs if r.role == "train"}
    assert not train_subj & {r.subject_id for r in recs if r.role == "test"}


def test_render_in_unit_range():
    for s in ("",) + SPECIES:
        img = render_sample(1, 0, "synthA", s, size=32)
        assert img.shape == (3, 32, 32) and img.min() >= 0 and img.max() <= 1


def test_generate_command(tmp_path, capsys):
    assert main(["generate", "--seed", "1", "--n-per-class", "1", "--size", "24",
                 "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip().endswith("manifest.txt")
