"""Dense compact BSIF descriptors.

Every colour channel is turned into a BSIF code image; histograms of codes
inside circular patches around a regular grid are compacted to 128 bins and
the three channel histograms of one patch are concatenated into a single
384-d local descriptor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .filterbank import FilterBank
from .ingest import FaceImage

COMPACT_BINS = 128
DEFAULT_RADII = (4, 6, 8, 10)
DEFAULT_STRIDE = 3


class FeatureError(ValueError):
    pass


def bsif_code_map(plane: np.ndarray, bank: FilterBank) -> np.ndarray:
    """BSIF code of every pixel of a single image plane.

    Filter responses are plain correlations ``sum W[n, m] * X[n, m]`` over the
    ``l x l`` neighbourhood centred on the pixel, with the plane extended by
    mirror reflection (edge pixel not repeated). Filter ``i`` contributes
    ``2**i`` when its response is strictly positive.
    """
    plane = np.asarray(plane, dtype=np.float64)
    size = bank.size
    if plane.ndim != 2:
        raise FeatureError(f"expected a 2-D plane, got shape {plane.shape}")
    h, w = plane.shape
    if h < size or w < size:
        raise FeatureError(f"plane {w}x{h} is smaller than the {size}x{size} filters")
    half = size // 2
    padded = np.pad(plane, half, mode="reflect")
    codes = np.zeros((h, w), dtype=np.int32)
    # offsets are accumulated in row-major order, one product at a time, so the
    # result is reproducible by a scalar loop
    windows = [padded[n:n + h, m:m + w] for n in range(size) for m in range(size)]
    for i, filt in enumerate(bank.filters):
        resp = np.zeros((h, w))
        for coef, win in zip(filt.ravel(), windows):
            resp += coef * win
        codes |= (resp > 0).astype(np.int32) << i
    return codes


def disc_offsets(radius: int) -> np.ndarray:
    """Integer (dy, dx) offsets of the closed disc dx^2 + dy^2 <= r^2."""
    r = int(radius)
    d = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    mask = dx * dx + dy * dy <= r * r
    return np.stack([dy[mask], dx[mask]], axis=1)


def patch_histogram(codes: np.ndarray, center: tuple[int, int], radius: int,
                    n_bins: int) -> np.ndarray:
    """Histogram of the codes inside the closed disc around ``center=(x, y)``."""
    codes = np.asarray(codes)
    x, y = center
    h, w = codes.shape
    if x - radius < 0 or y - radius < 0 or x + radius >= w or y + radius >= h:
        raise FeatureError(f"disc of radius {radius} at {center} exceeds the {w}x{h} code image")
    off = disc_offsets(radius)
    vals = codes[y + off[:, 0], x + off[:, 1]]
    return np.bincount(vals, minlength=n_bins)[:n_bins] if vals.size else np.zeros(n_bins, int)


def compact_histogram(hist: np.ndarray) -> np.ndarray:
    """Reduce a ``2**N`` histogram to 128 bins.

    Consecutive groups of ``2**N / 128`` bins are summed; histograms with at
    most 128 bins are zero-padded to 128.
    """
    hist = np.asarray(hist)
    n = hist.shape[-1]
    if n < 1 or n & (n - 1):
        raise FeatureError(f"histogram length must be a power of two, got {n}")
    if n <= COMPACT_BINS:
        pad = [(0, 0)] * (hist.ndim - 1) + [(0, COMPACT_BINS - n)]
        return np.pad(hist, pad)
    group = n // COMPACT_BINS
    return hist.reshape(hist.shape[:-1] + (COMPACT_BINS, group)).sum(axis=-1)


def compact_codes(codes: np.ndarray, n_filters: int) -> np.ndarray:
    """Map codes to their compact bin; equivalent to compacting histograms."""
    shift = max(n_filters - 7, 0)
    return codes >> shift


def grid_points(width: int, height: int, stride: int, margin: int) -> np.ndarray:
    """Grid coordinates ``(x, y)`` spaced by ``stride`` inside a ``margin`` border."""
    xs = np.arange(margin, width - margin, stride)
    ys = np.arange(margin, height - margin, stride)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass(frozen=True)
class DescriptorSet:
    """Local descriptors of one image.

    ``values`` has shape (n_points * n_radii, 384); ``points`` and ``radii``
    give the grid point and patch radius of each row. Rows are ordered by grid
    point (row-major over the grid) and then by radius.
    """

    values: np.ndarray
    points: np.ndarray
    radii: np.ndarray
    bank_id: tuple[int, int]
    source: str = ""

    def __len__(self) -> int:
        return self.values.shape[0]


def extract_dense_descriptors(img: FaceImage, bank: FilterBank,
                              stride: int = DEFAULT_STRIDE,
                              radii: Sequence[int] = DEFAULT_RADII,
                              source: str = "") -> DescriptorSet:
    """Dense compact colour BSIF descriptors of a face image.

    Grid points sit at ``(r_max + a*stride, r_max + b*stride)`` so that every
    radius fits at every point.
    """
    radii = tuple(int(r) for r in radii)
    if not radii or min(radii) < 0:
        raise FeatureError(f"invalid radii {radii}")
    if stride < 1:
        raise FeatureError(f"stride must be positive, got {stride}")
    r_max = max(radii)
    min_side = 2 * r_max + 1
    if img.width < min_side or img.height < min_side:
        raise FeatureError(f"image {img.width}x{img.height} is below the minimum "
                           f"{min_side}x{min_side} for radius {r_max}")
    pts = grid_points(img.width, img.height, stride, r_max)
    n_pts = len(pts)
    n_rad = len(radii)
    out = np.empty((n_pts, n_rad, 3 * COMPACT_BINS))
    point_idx = np.arange(n_pts)
    for c in range(3):
        codes = compact_codes(bsif_code_map(img.planes[c], bank), bank.n_filters)
        for j, r in enumerate(radii):
            off = disc_offsets(r)
            ys = pts[:, 1, None] + off[None, :, 0]
            xs = pts[:, 0, None] + off[None, :, 1]
            keys = point_idx[:, None] * COMPACT_BINS + codes[ys, xs]
            hist = np.bincount(keys.ravel(), minlength=n_pts * COMPACT_BINS)
            out[:, j, c * COMPACT_BINS:(c + 1) * COMPACT_BINS] = hist.reshape(n_pts, COMPACT_BINS)
    return DescriptorSet(
        values=out.reshape(n_pts * n_rad, -1),
        points=np.repeat(pts, n_rad, axis=0),
        radii=np.tile(np.asarray(radii), n_pts),
        bank_id=bank.bank_id,
        source=source,
    )


_DESC_HEAD = struct.Struct("<I")
_DESC_ROW = struct.Struct("<III")


def write_descriptor_dump(ds: DescriptorSet, path: str | Path) -> None:
    """uint32 count, then per descriptor uint32 x, y, r and 384 float64 (LE)."""
    parts = [_DESC_HEAD.pack(len(ds))]
    for (x, y), r, v in zip(ds.points, ds.radii, ds.values):
        parts.append(_DESC_ROW.pack(int(x), int(y), int(r)))
        parts.append(v.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_descriptor_dump(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (points (n, 2), radii (n,), values (n, 384)) from a dump."""
    data = Path(path).read_bytes()
    (count,) = _DESC_HEAD.unpack_from(data)
    width = 3 * COMPACT_BINS
    row = _DESC_ROW.size + 8 * width
    if len(data) != _DESC_HEAD.size + count * row:
        raise FeatureError("descriptor dump length does not match its count")
    rec = np.dtype([("x", "<u4"), ("y", "<u4"), ("r", "<u4"), ("v", "<f8", width)])
    arr = np.frombuffer(data, dtype=rec, offset=_DESC_HEAD.size, count=count)
    return (np.stack([arr["x"], arr["y"]], axis=1).astype(np.int64),
            arr["r"].astype(np.int64), arr["v"].astype(np.float64))
