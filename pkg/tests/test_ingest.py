import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fvpad.ingest import (ColourSpace, FaceImage, ImageError, Label, ManifestError,
                          ProtocolError, ProtocolKind, SampleRecord, build_splits,
                          convert_colorspace, decode_and_crop, load_manifest, ycbcr_to_rgb)
from conftest import write_rgb


def _rec(path, label="bonafide", species="", subject="s", dataset="A", role="train"):
    return SampleRecord(path, Label(label), species, subject, dataset, role)


def test_manifest_two_lines(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("# comment\nbf.png;train;bonafide;;s1;A\n\natt.png;test;attack;print;s2;A\n")
    recs = load_manifest(m)
    assert [r.label for r in recs] == [Label.BONA_FIDE, Label.ATTACK]
    assert recs[1].pai_species == "print" and recs[1].role == "test"
    assert recs[0].image_path == str(tmp_path / "bf.png")


def test_manifest_empty(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("")
    assert load_manifest(m) == []


def test_manifest_species_on_bona_fide(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("a.png;train;bonafide;;s;A\nb.png;train;bonafide;print;s;A\n")
    with pytest.raises(ManifestError, match=r"line 2: species on bona fide"):
        load_manifest(m)


@pytest.mark.parametrize("line", ["a.png;train;bonafide;;s", "a.png;dev;bonafide;;s;A",
                                  "a.png;train;genuine;;s;A", "a.png;train;attack;;s;A"])
def test_manifest_malformed(tmp_path, line):
    m = tmp_path / "m.txt"
    m.write_text(line + "\n")
    with pytest.raises(ManifestError, match="line 1"):
        load_manifest(m)


def test_decode_and_crop(tmp_path, rng):
    arr = rng.integers(0, 256, size=(100, 100, 3))
    p = write_rgb(tmp_path / "x.png", arr)
    rec = SampleRecord(p, Label.BONA_FIDE, crop_box=(10, 10, 50, 60))
    img = decode_and_crop(rec)
    assert (img.width, img.height) == (50, 60)
    np.testing.assert_array_equal(img.planes[1], arr[10:70, 10:60, 1] / 255.0)
    full = decode_and_crop(SampleRecord(p, Label.BONA_FIDE))
    assert (full.width, full.height) == (100, 100)
    assert full.planes.min() >= 0 and full.planes.max() <= 1


def test_decode_bmp_deterministic(tmp_path, rng):
    from PIL import Image
    arr = rng.integers(0, 256, size=(30, 40, 3)).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(tmp_path / "x.bmp")
    rec = SampleRecord(str(tmp_path / "x.bmp"), Label.BONA_FIDE)
    a, b = decode_and_crop(rec), decode_and_crop(rec)
    np.testing.assert_array_equal(a.planes, b.planes)
    assert a.planes.shape == (3, 30, 40)


def test_crop_out_of_bounds(tmp_path):
    p = write_rgb(tmp_path / "x.png", np.zeros((100, 100, 3)))
    with pytest.raises(ImageError, match="exceeds"):
        decode_and_crop(SampleRecord(p, Label.BONA_FIDE, crop_box=(90, 90, 20, 20)))


def test_grey_image_rejected(tmp_path):
    from PIL import Image
    Image.fromarray(np.zeros((20, 20), np.uint8), "L").save(tmp_path / "g.png")
    with pytest.raises(ImageError, match="expected 3 channels"):
        decode_and_crop(SampleRecord(str(tmp_path / "g.png"), Label.BONA_FIDE))


def test_undecodable(tmp_path):
    (tmp_path / "bad.png").write_bytes(b"not an image")
    with pytest.raises(ImageError, match="cannot decode"):
        decode_and_crop(SampleRecord(str(tmp_path / "bad.png"), Label.BONA_FIDE))


def _pixel(r, g, b):
    return FaceImage(np.array([r, g, b], dtype=float).reshape(3, 1, 1))


def test_ycbcr_white():
    out = convert_colorspace(_pixel(1, 1, 1), ColourSpace.YCBCR).planes.ravel()
    np.testing.assert_allclose(out, [1.0, 128 / 255, 128 / 255], atol=1e-12)


def test_hsv_pure_red_and_grey():
    np.testing.assert_allclose(convert_colorspace(_pixel(1, 0, 0), ColourSpace.HSV).planes.ravel(),
                               [0.0, 1.0, 1.0])
    assert convert_colorspace(_pixel(0.5, 0.5, 0.5), ColourSpace.HSV).planes[1, 0, 0] == 0.0


@pytest.mark.parametrize("rgb,hsv", [((0, 1, 0), (1 / 3, 1, 1)), ((0, 0, 1), (2 / 3, 1, 1)),
                                     ((1, 0, 1), (5 / 6, 1, 1)), ((0.5, 0.25, 0), (1 / 12, 1, 0.5))])
def test_hsv_against_colorsys(rgb, hsv):
    import colorsys
    out = convert_colorspace(_pixel(*rgb), ColourSpace.HSV).planes.ravel()
    np.testing.assert_allclose(out, hsv, atol=1e-12)
    np.testing.assert_allclose(out, colorsys.rgb_to_hsv(*rgb), atol=1e-12)


def test_hsv_random_vs_colorsys(rng):
    import colorsys
    px = rng.random((3, 20, 20))
    out = convert_colorspace(FaceImage(px), ColourSpace.HSV).planes
    ref = np.array([[colorsys.rgb_to_hsv(*px[:, i, j]) for j in range(20)] for i in range(20)])
    np.testing.assert_allclose(np.moveaxis(out, 0, -1), ref, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4, 4), elements=st.floats(0, 1)))
def test_ycbcr_round_trip(px):
    img = FaceImage(px)
    ycc = convert_colorspace(img, ColourSpace.YCBCR)
    assert ycc.planes.min() >= 0 and ycc.planes.max() <= 1
    np.testing.assert_allclose(ycbcr_to_rgb(ycc.planes), px, atol=1e-6)


def test_convert_from_non_rgb():
    hsv = convert_colorspace(_pixel(1, 0, 0), ColourSpace.HSV)
    with pytest.raises(ValueError, match="must be RGB"):
        convert_colorspace(hsv, ColourSpace.YCBCR)


def _species_records(species, datasets=("A",)):
    recs = []
    for role in ("train", "test"):
        for ds in datasets:
            recs.append(_rec(f"{role}_{ds}_bf.png", subject=f"{role}{ds}", dataset=ds, role=role))
            for s in species:
                recs.append(_rec(f"{role}_{ds}_{s}.png", "attack", s, f"{role}{ds}", ds, role))
    return recs


def _check_split_invariants(split):
    train_paths = {r.image_path for r in split.train}
    assert not train_paths & {r.image_path for r in split.test}
    if split.kind is ProtocolKind.LEAVE_ONE_OUT_PAI:
        assert all(r.pai_species != split.held_out for r in split.train)
        assert {r.pai_species for r in split.test if r.is_attack} == {split.held_out}
    if split.kind is ProtocolKind.CROSS_DATASET:
        assert not {r.dataset_id for r in split.train} & {r.dataset_id for r in split.test}


def test_loo_three_species():
    splits = build_splits(_species_records(["print", "cut", "video"]), "loo")
    assert len(splits) == 3
    video = next(s for s in splits if s.held_out == "video")
    assert not any(r.pai_species == "video" for r in video.train)
    for s in splits:
        _check_split_invariants(s)


def test_loo_thirteen_species():
    species = [f"pai{i:02d}" for i in range(13)]
    splits = build_splits(_species_records(species), ProtocolKind.LEAVE_ONE_OUT_PAI)
    assert len(splits) == 13
    for s in splits:
        assert len({r.pai_species for r in s.train if r.is_attack}) == 12
        _check_split_invariants(s)


def test_cross_dataset_pairs():
    splits = build_splits(_species_records(["print"], ("A", "B")), "cross")
    assert [s.name for s in splits] == ["cross-A-to-B", "cross-B-to-A"]
    for s in splits:
        _check_split_invariants(s)


def test_known_uses_roles():
    recs = _species_records(["print", "video"])
    (split,) = build_splits(recs, "known")
    assert all(r.role == "train" for r in split.train)
    assert all(r.role == "test" for r in split.test)
    _check_split_invariants(split)


def test_protocol_preconditions():
    with pytest.raises(ProtocolError):
        build_splits(_species_records(["print"]), "loo")
    with pytest.raises(ProtocolError):
        build_splits(_species_records(["print"]), "cross")
    with pytest.raises(ProtocolError):
        build_splits([], "known")


def test_subject_overlap_warns():
    recs = [_rec("a.png", subject="s1"), _rec("b.png", "attack", "p", "s1"),
            _rec("c.png", subject="s1", role="test"), _rec("d.png", "attack", "p", "s1", role="test")]
    with pytest.warns(UserWarning, match="subject"):
        build_splits(recs, "known")


def test_record_invariant():
    with pytest.raises(ValueError, match="species on bona fide"):
        SampleRecord("x.png", Label.BONA_FIDE, "print")
