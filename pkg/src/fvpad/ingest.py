"""Dataset manifests, image decoding, colour spaces and protocol splits.

A manifest is UTF-8 text with one sample per line and ``;``-separated
fields::

    path;role;label;species;subject;dataset

``role`` is ``train`` or ``test`` and ``label`` is ``bonafide`` or
``attack``. Lines starting with ``#`` and blank lines are ignored. Relative
image paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image


class Label(enum.Enum):
    BONA_FIDE = "bonafide"
    ATTACK = "attack"


class ColourSpace(enum.Enum):
    RGB = "rgb"
    HSV = "hsv"
    YCBCR = "ycbcr"


class ProtocolKind(enum.Enum):
    KNOWN_ATTACK = "known"
    LEAVE_ONE_OUT_PAI = "loo"
    CROSS_DATASET = "cross"


class ManifestError(ValueError):
    """Raised for a malformed manifest line."""


class ImageError(ValueError):
    """Raised when an image cannot be decoded or cropped."""


class ProtocolError(ValueError):
    """Raised when a protocol's preconditions are not met."""


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    label: Label
    pai_species: str = ""
    subject_id: str = ""
    dataset_id: str = ""
    role: str = "train"
    crop_box: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if self.label is Label.BONA_FIDE and self.pai_species:
            raise ValueError(f"species on bona fide sample {self.image_path!r}")
        if self.role not in ("train", "test"):
            raise ValueError(f"role must be 'train' or 'test', got {self.role!r}")

    @property
    def is_attack(self) -> bool:
        return self.label is Label.ATTACK


@dataclass(frozen=True)
class FaceImage:
    """Three-plane face crop with values in [0, 1].

    ``planes`` has shape ``(3, height, width)``.
    """

    planes: np.ndarray
    colourspace: ColourSpace = ColourSpace.RGB

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ImageError(f"expected 3 channels, got array of shape {planes.shape}")
        if not np.all(np.isfinite(planes)):
            raise ImageError("image contains non-finite values")
        if planes.size and (planes.min() < 0.0 or planes.max() > 1.0):
            raise ImageError("image values must lie in [0, 1]")
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]


@dataclass(frozen=True)
class ProtocolSplit:
    name: str
    kind: ProtocolKind
    train: tuple[SampleRecord, ...]
    test: tuple[SampleRecord, ...]
    held_out: str = ""
    meta: Mapping[str, str] = field(default_factory=dict)


def _parse_line(line: str, lineno: int, base: Path) -> SampleRecord:
    fields = [f.strip() for f in line.split(";")]
    if len(fields) != 6:
        raise ManifestError(f"line {lineno}: expected 6 ';'-separated fields, got {len(fields)}")
    path, role, label, species, subject, dataset = fields
    if not path:
        raise ManifestError(f"line {lineno}: empty image path")
    if role not in ("train", "test"):
        raise ManifestError(f"line {lineno}: role must be train or test, got {role!r}")
    try:
        lab = Label(label.lower())
    except ValueError:
        raise ManifestError(f"line {lineno}: label must be bonafide or attack, got {label!r}") from None
    if lab is Label.BONA_FIDE and species:
        raise ManifestError(f"line {lineno}: species on bona fide sample")
    if lab is Label.ATTACK and not species:
        raise ManifestError(f"line {lineno}: attack sample without species")
    p = Path(path)
    if not p.is_absolute():
        p = base / p
    return SampleRecord(str(p), lab, species, subject, dataset, role)


def load_manifest(path: str | Path) -> list[SampleRecord]:
    """Parse a manifest file into records, preserving line order.

    Image files are not checked for existence here.
    """
    path = Path(path)
    base = path.parent
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            records.append(_parse_line(line, lineno, base))
    return records


def write_manifest(records: Iterable[SampleRecord], path: str | Path) -> None:
    path = Path(path)
    base = path.parent.resolve()
    lines = ["# path;role;label;species;subject;dataset"]
    for r in records:
        p = Path(r.image_path)
        try:
            p = p.resolve().relative_to(base)
        except ValueError:
            pass
        lines.append(";".join([p.as_posix(), r.role, r.label.value, r.pai_species,
                               r.subject_id, r.dataset_id]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def decode_and_crop(record: SampleRecord) -> FaceImage:
    """Decode an 8-bit RGB image and apply the record's crop box if present."""
    try:
        with Image.open(record.image_path) as im:
            im.load()
            if im.mode != "RGB":
                raise ImageError(f"expected 3 channels, got image mode {im.mode!r} "
                                 f"in {record.image_path}")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise ImageError(f"cannot decode {record.image_path}: {exc}") from exc
    if record.crop_box is not None:
        x, y, w, h = record.crop_box
        height, width = arr.shape[:2]
        if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > width or y + h > height:
            raise ImageError(f"crop box {record.crop_box} exceeds image bounds {width}x{height}")
        arr = arr[y:y + h, x:x + w]
    planes = np.moveaxis(arr, -1, 0).astype(np.float64) / 255.0
    return FaceImage(planes, ColourSpace.RGB)


# Full-range BT.601 luma. Chroma is offset by 128/255 and scaled by 127/255 so
# that the full chroma range maps onto [1/255, 1] and the transform stays
# exactly invertible.
_KR, _KG, _KB = 0.299, 0.587, 0.114
_C_OFFSET = 128.0 / 255.0
_C_SCALE = 127.0 / 255.0


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb
    y = _KR * r + _KG * g + _KB * b
    cb = _C_OFFSET + _C_SCALE * (b - y) / (1.0 - _KB)
    cr = _C_OFFSET + _C_SCALE * (r - y) / (1.0 - _KR)
    return np.stack([y, cb, cr])


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = np.asarray(ycc, dtype=np.float64)
    b = y + (cb - _C_OFFSET) * (1.0 - _KB) / _C_SCALE
    r = y + (cr - _C_OFFSET) * (1.0 - _KR) / _C_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b])


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb
    maxc = rgb.max(axis=0)
    minc = rgb.min(axis=0)
    delta = maxc - minc
    v = maxc
    s = np.divide(delta, maxc, out=np.zeros_like(maxc), where=maxc > 0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(maxc == r, ((g - b) / safe) % 6.0,
                 np.where(maxc == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(delta > 0, h / 6.0, 0.0)
    return np.stack([h, s, v])


def convert_colorspace(img: FaceImage, target: ColourSpace) -> FaceImage:
    """Convert an RGB face image to ``target``; all outputs lie in [0, 1]."""
    if img.colourspace is not ColourSpace.RGB:
        raise ValueError(f"conversion source must be RGB, got {img.colourspace.name}")
    target = ColourSpace(target)
    if target is ColourSpace.RGB:
        return img
    if target is ColourSpace.YCBCR:
        out = _rgb_to_ycbcr(img.planes)
    else:
        out = _rgb_to_hsv(img.planes)
    return FaceImage(np.clip(out, 0.0, 1.0), target)


def _check_subjects(split: ProtocolSplit) -> None:
    train_subjects = {r.subject_id for r in split.train if r.subject_id}
    overlap = train_subjects & {r.subject_id for r in split.test if r.subject_id}
    if overlap:
        warnings.warn(f"split {split.name!r}: {len(overlap)} subject(s) appear in both "
                      f"train and test", stacklevel=3)


def build_splits(records: Sequence[SampleRecord], kind: ProtocolKind | str,
                 params: Mapping[str, object] | None = None) -> list[ProtocolSplit]:
    """Materialise the splits of one evaluation protocol.

    Parameters
    ----------
    records : sequence of SampleRecord
        Full manifest.
    kind : ProtocolKind or str
        ``known`` uses the manifest role column directly. ``loo`` yields one
        split per attack species: training uses the train-role records minus
        that species, testing uses the test-role bona fide samples and the
        test-role attacks of the held-out species. ``cross`` yields one split per
        ordered pair of datasets, training on the source's train-role records
        and testing on the target's test-role records.
    params : mapping, optional
        ``dataset``: restrict records to one dataset id (known/loo).
        ``species``: restrict the held-out species (loo).
    """
    kind = ProtocolKind(kind)
    params = dict(params or {})
    records = list(records)
    if params.get("dataset"):
        records = [r for r in records if r.dataset_id == params["dataset"]]
    if not records:
        raise ProtocolError("no records to build splits from")

    splits: list[ProtocolSplit] = []
    if kind is ProtocolKind.KNOWN_ATTACK:
        train = tuple(r for r in records if r.role == "train")
        test = tuple(r for r in records if r.role == "test")
        splits.append(ProtocolSplit("known", kind, train, test))
    elif kind is ProtocolKind.LEAVE_ONE_OUT_PAI:
        species = sorted({r.pai_species for r in records if r.is_attack})
        if len(species) < 2:
            raise ProtocolError(f"leave-one-out needs at least 2 PAI species, found {len(species)}")
        wanted = params.get("species")
        if wanted:
            wanted = [wanted] if isinstance(wanted, str) else list(wanted)
            unknown = set(wanted) - set(species)
            if unknown:
                raise ProtocolError(f"unknown species requested: {sorted(unknown)}")
            species = [s for s in species if s in wanted]
        for s in species:
            train = tuple(r for r in records
                          if r.role == "train" and not (r.is_attack and r.pai_species == s))
            test = tuple(r for r in records
                         if r.role == "test" and (not r.is_attack or r.pai_species == s))
            splits.append(ProtocolSplit(f"loo-{s}", kind, train, test, held_out=s))
    else:
        datasets = sorted({r.dataset_id for r in records})
        if len(datasets) < 2:
            raise ProtocolError(f"cross-dataset needs at least 2 datasets, found {len(datasets)}")
        for src, dst in itertools.permutations(datasets, 2):
            train = tuple(r for r in records if r.dataset_id == src and r.role == "train")
            test = tuple(r for r in records if r.dataset_id == dst and r.role == "test")
            splits.append(ProtocolSplit(f"cross-{src}-to-{dst}", kind, train, test,
                                        meta={"train_dataset": src, "test_dataset": dst}))

    for split in splits:
        if not split.train or not split.test:
            raise ProtocolError(f"split {split.name!r} has an empty train or test set")
        if {r.image_path for r in split.train} & {r.image_path for r in split.test}:
            raise ProtocolError(f"split {split.name!r}: train and test share image paths")
        _check_subjects(split)
    return splits
