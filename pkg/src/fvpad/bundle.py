"""Trained model bundles and the single-image scoring pipeline.

Bundle file layout (little-endian)::

    b"FVPAD1" | uint32 n_sections | n * (4-byte tag | uint64 length | payload) | uint32 crc32

The CRC-32 covers every section including tags and lengths. Sections:
``VERS`` format version, ``BANK`` filter bank in its own file format,
``PCA_``, ``GMM_`` and ``SVM_`` float64 model payloads, ``CONF`` the
configuration text.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import LinearModel, score_batch
from .config import ExperimentConfig, dump_config, parse_config
from .features import COMPACT_BINS, extract_dense_descriptors
from .filterbank import FilterBank
from .fisher import FisherVector, encode_fv, normalize_fv
from .gmm import GmmModel
from .ingest import ColourSpace, FaceImage, convert_colorspace
from .reduction import PcaModel, project

MAGIC = b"FVPAD1"
FORMAT_VERSION = 1


class BundleError(ValueError):
    pass


def encode_image(img: FaceImage, bank: FilterBank, pca: PcaModel, gmm: GmmModel,
                 cfg: ExperimentConfig, source: str = "") -> FisherVector:
    """Colour conversion, dense BSIF, PCA projection and FV encoding of one face."""
    img = convert_colorspace(img, ColourSpace(cfg.colourspace))
    ds = extract_dense_descriptors(img, bank, cfg.stride, cfg.radii, source)
    fv = encode_fv(gmm, project(pca, ds.values), source)
    if cfg.power_normalize or cfg.l2_normalize:
        fv = normalize_fv(fv, cfg.power_normalize, cfg.l2_normalize)
    return fv


@dataclass(frozen=True, eq=False)
class ModelBundle:
    bank: FilterBank
    pca: PcaModel
    gmm: GmmModel
    svm: LinearModel
    config: ExperimentConfig
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.check_dimensions()

    def check_dimensions(self, expected: ExperimentConfig | None = None) -> None:
        if self.pca.n_features != 3 * COMPACT_BINS:
            raise BundleError(f"PCA input is {self.pca.n_features}-d, expected {3 * COMPACT_BINS}")
        if self.gmm.dim != self.pca.n_components:
            raise BundleError(f"GMM is {self.gmm.dim}-d but PCA keeps {self.pca.n_components}")
        fv_len = 2 * self.gmm.dim * self.gmm.n_components
        if self.svm.dim != fv_len:
            raise BundleError(f"SVM expects {self.svm.dim}-d encodings, FV length is {fv_len}")
        if expected is not None:
            if expected.n_components != self.gmm.n_components:
                raise BundleError(f"bundle has K={self.gmm.n_components}, "
                                  f"configuration expects K={expected.n_components}")
            if expected.pca_dim != self.pca.n_components:
                raise BundleError(f"bundle has d={self.pca.n_components}, "
                                  f"configuration expects d={expected.pca_dim}")

    def encode(self, img: FaceImage, source: str = "") -> FisherVector:
        return encode_image(img, self.bank, self.pca, self.gmm, self.config, source)

    def score_image(self, img: FaceImage) -> float:
        return float(score_batch(self.svm, self.encode(img).values[None, :])[0])


def _f64(*arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def _pack_pca(p: PcaModel) -> bytes:
    return (struct.pack("<II", p.n_components, p.n_features)
            + _f64(p.mean, p.basis, p.eigenvalues, [p.retained_variance_fraction]))


def _unpack_pca(data: bytes) -> PcaModel:
    d, n = struct.unpack_from("<II", data)
    v = np.frombuffer(data, dtype="<f8", offset=8).astype(np.float64)
    if v.size != n + d * n + d + 1:
        raise BundleError("PCA section has the wrong length")
    return PcaModel(v[:n], v[n:n + d * n].reshape(d, n), v[n + d * n:n + d * n + d], float(v[-1]))


def _pack_gmm(g: GmmModel) -> bytes:
    return (struct.pack("<IIQ", g.n_components, g.dim, g.seed)
            + _f64(g.weights, g.means, g.variances))


def _unpack_gmm(data: bytes) -> GmmModel:
    k, d, seed = struct.unpack_from("<IIQ", data)
    v = np.frombuffer(data, dtype="<f8", offset=16).astype(np.float64)
    if v.size != k + 2 * k * d:
        raise BundleError("GMM section has the wrong length")
    return GmmModel(v[:k], v[k:k + k * d].reshape(k, d), v[k + k * d:].reshape(k, d), int(seed))


def _pack_svm(m: LinearModel) -> bytes:
    return struct.pack("<I", m.dim) + _f64(m.w, [m.b, m.C])


def _unpack_svm(data: bytes) -> LinearModel:
    (n,) = struct.unpack_from("<I", data)
    v = np.frombuffer(data, dtype="<f8", offset=4).astype(np.float64)
    if v.size != n + 2:
        raise BundleError("SVM section has the wrong length")
    return LinearModel(v[:n], float(v[n]), float(v[n + 1]))


def bundle_to_bytes(bundle: ModelBundle) -> bytes:
    sections = [
        (b"VERS", struct.pack("<I", bundle.format_version)),
        (b"BANK", bundle.bank.to_bytes()),
        (b"PCA_", _pack_pca(bundle.pca)),
        (b"GMM_", _pack_gmm(bundle.gmm)),
        (b"SVM_", _pack_svm(bundle.svm)),
        (b"CONF", dump_config(bundle.config).encode("utf-8")),
    ]
    body = b"".join(tag + struct.pack("<Q", len(p)) + p for tag, p in sections)
    return MAGIC + struct.pack("<I", len(sections)) + body + struct.pack("<I", zlib.crc32(body))


def bundle_from_bytes(data: bytes, expected: ExperimentConfig | None = None) -> ModelBundle:
    if not data.startswith(MAGIC):
        raise BundleError("not a model bundle (bad magic)")
    off = len(MAGIC)
    if len(data) < off + 8:
        raise BundleError("bundle truncated")
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    body_start = off
    sections = {}
    for _ in range(count):
        if off + 12 > len(data):
            raise BundleError("bundle truncated in a section header")
        tag = data[off:off + 4]
        (length,) = struct.unpack_from("<Q", data, off + 4)
        off += 12
        if off + length > len(data):
            raise BundleError(f"bundle truncated in section {tag!r}")
        sections[tag] = data[off:off + length]
        off += length
    if off + 4 != len(data):
        raise BundleError("bundle length does not match its sections")
    (crc,) = struct.unpack_from("<I", data, off)
    if zlib.crc32(data[body_start:off]) != crc:
        raise BundleError("bundle checksum mismatch")
    missing = {b"VERS", b"BANK", b"PCA_", b"GMM_", b"SVM_", b"CONF"} - set(sections)
    if missing:
        raise BundleError(f"bundle lacks sections {sorted(missing)}")
    (version,) = struct.unpack("<I", sections[b"VERS"])
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle version {version}, expected {FORMAT_VERSION}")
    bundle = ModelBundle(
        bank=FilterBank.from_bytes(sections[b"BANK"]),
        pca=_unpack_pca(sections[b"PCA_"]),
        gmm=_unpack_gmm(sections[b"GMM_"]),
        svm=_unpack_svm(sections[b"SVM_"]),
        config=parse_config(sections[b"CONF"].decode("utf-8")),
        format_version=version,
    )
    bundle.check_dimensions(expected)
    return bundle


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    Path(path).write_bytes(bundle_to_bytes(bundle))


def load_bundle(path: str | Path, expected: ExperimentConfig | None = None) -> ModelBundle:
    return bundle_from_bytes(Path(path).read_bytes(), expected)
