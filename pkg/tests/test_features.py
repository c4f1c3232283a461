import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvpad.features import (FeatureError, bsif_code_map, compact_histogram, disc_offsets,
                            extract_dense_descriptors, patch_histogram, read_descriptor_dump,
                            write_descriptor_dump)
from fvpad.filterbank import FilterBank, random_bank
from fvpad.ingest import FaceImage
from oracles import disc_cardinality, naive_bsif


def test_zero_plane_gives_zero_codes():
    codes = bsif_code_map(np.zeros((12, 12)), random_bank(8, 5, seed=1))
    assert not codes.any()


def test_sign_cases():
    bank = FilterBank(np.array([[[1.0]], [[-1.0]]]))
    assert bsif_code_map(np.full((3, 3), 3.0), bank)[1, 1] == 1
    assert bsif_code_map(np.full((3, 3), -3.0), bank)[1, 1] == 2


def test_bit_order_least_significant_first():
    filters = np.zeros((3, 1, 1))
    filters[:, 0, 0] = [-1.0, 1.0, 1.0]
    assert bsif_code_map(np.ones((2, 2)), FilterBank(filters))[0, 0] == 0b110


def test_code_map_vs_naive_oracle(rng):
    plane = rng.random((9, 9))
    bank = random_bank(5, 3, seed=11)
    np.testing.assert_array_equal(bsif_code_map(plane, bank), naive_bsif(plane, bank.filters))


def test_code_map_borders_vs_oracle(rng):
    plane = rng.random((7, 8))
    bank = random_bank(4, 7, seed=2)
    codes = bsif_code_map(plane, bank)
    np.testing.assert_array_equal(codes, naive_bsif(plane, bank.filters))
    assert codes.max() < 2 ** 4


def test_plane_smaller_than_filter():
    with pytest.raises(FeatureError, match="smaller"):
        bsif_code_map(np.zeros((4, 4)), random_bank(2, 5))


@pytest.mark.parametrize("r,n", [(0, 1), (4, 49), (6, 113), (8, 197), (10, 317)])
def test_disc_cardinality(r, n):
    assert disc_cardinality(r) == n
    assert len(disc_offsets(r)) == n


def test_patch_histogram_uniform():
    codes = np.full((21, 21), 37)
    h = patch_histogram(codes, (10, 10), 4, 256)
    assert h.sum() == 49 and h[37] == 49 and h.sum() - h[37] == 0
    assert patch_histogram(codes, (0, 0), 0, 256).sum() == 1


def test_patch_histogram_bounds():
    with pytest.raises(FeatureError, match="exceeds"):
        patch_histogram(np.zeros((10, 10), int), (3, 3), 4, 32)


def test_compact_examples():
    np.testing.assert_array_equal(compact_histogram(np.ones(1024, dtype=int)), np.full(128, 8))
    h = np.zeros(4096, dtype=int)
    h[37] = 1
    out = compact_histogram(h)
    assert out[1] == 1 and out.sum() == 1
    small = compact_histogram(np.arange(32))
    assert len(small) == 128 and small[:32].tolist() == list(range(32)) and not small[32:].any()


def test_compact_rejects_non_power_of_two():
    with pytest.raises(FeatureError, match="power of two"):
        compact_histogram(np.ones(100))


@settings(max_examples=60, deadline=None)
@given(st.integers(5, 12), st.integers(0, 2 ** 32 - 1))
def test_compact_conserves_mass(n, seed):
    h = np.random.default_rng(seed).integers(0, 50, size=2 ** n)
    out = compact_histogram(h)
    assert out.shape == (128,) and out.sum() == h.sum()


def _image(size, rng, h=None):
    return FaceImage(rng.random((3, h or size, size)))


def test_single_grid_point(rng):
    ds = extract_dense_descriptors(_image(21, rng), random_bank(8, 3, seed=0))
    assert len(ds) == 4
    assert ds.points.tolist() == [[10, 10]] * 4


def test_grid_24(rng):
    ds = extract_dense_descriptors(_image(24, rng), random_bank(8, 3, seed=0))
    # margin 10 and stride 3 admit coordinates 10 and 13 only
    coords = [c for c in range(24) if c >= 10 and c + 10 <= 23 and (c - 10) % 3 == 0]
    assert coords == [10, 13]
    assert len(ds) == len(coords) ** 2 * 4
    assert {tuple(p) for p in ds.points} == {(x, y) for x in coords for y in coords}


def test_descriptor_block_sums_and_nonnegative(rng):
    ds = extract_dense_descriptors(_image(30, rng, 27), random_bank(10, 5, seed=4))
    assert ds.values.shape[1] == 384 and np.all(ds.values >= 0)
    blocks = ds.values.reshape(len(ds), 3, 128).sum(axis=2)
    expected = np.array([disc_cardinality(int(r)) for r in ds.radii])
    np.testing.assert_array_equal(blocks, np.repeat(expected[:, None], 3, axis=1))


@pytest.mark.parametrize("n_filters", [5, 8, 11])
def test_descriptor_equals_composed_ops(rng, n_filters):
    img = _image(23, rng)
    bank = random_bank(n_filters, 3, seed=n_filters)
    ds = extract_dense_descriptors(img, bank, stride=3, radii=(2, 5))
    codes = [bsif_code_map(img.planes[c], bank) for c in range(3)]
    for (x, y), r, v in zip(ds.points, ds.radii, ds.values):
        ref = np.concatenate([compact_histogram(patch_histogram(codes[c], (x, y), r, 2 ** n_filters))
                              for c in range(3)])
        np.testing.assert_array_equal(v, ref)


def test_image_below_minimum(rng):
    with pytest.raises(FeatureError, match="minimum"):
        extract_dense_descriptors(_image(20, rng), random_bank(5, 3))


def test_descriptor_dump_round_trip(tmp_path, rng):
    ds = extract_dense_descriptors(_image(24, rng), random_bank(6, 3, seed=0))
    write_descriptor_dump(ds, tmp_path / "d.bin")
    points, radii, values = read_descriptor_dump(tmp_path / "d.bin")
    data = (tmp_path / "d.bin").read_bytes()
    assert len(data) == 4 + len(ds) * (12 + 384 * 8)
    np.testing.assert_array_equal(points, ds.points)
    np.testing.assert_array_equal(radii, ds.radii)
    np.testing.assert_array_equal(values, ds.values)
