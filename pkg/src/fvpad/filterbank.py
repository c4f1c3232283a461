"""BSIF filter banks: persistence and ICA learning from image patches.

Bank file layout (all little-endian)::

    b"BSIF1" | uint32 N | uint32 l | N*l*l float64, filter-major, row-major

Filter ``i`` (0-based) sets bit ``2**i`` of the BSIF code.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = b"BSIF1"
_HEADER = struct.Struct("<5sII")
MAX_FILTERS = 12
MAX_SIZE = 17


class FilterBankError(ValueError):
    pass


class Provenance(enum.Enum):
    LOADED = "loaded"
    ICA_LEARNED = "ica"


@dataclass(frozen=True, eq=False)
class FilterBank:
    filters: np.ndarray
    provenance: Provenance = Provenance.LOADED
    seed: int | None = None

    def __post_init__(self):
        filters = np.array(self.filters, dtype=np.float64)
        if filters.ndim != 3 or filters.shape[1] != filters.shape[2]:
            raise FilterBankError(f"filters must have shape (N, l, l), got {filters.shape}")
        n, size, _ = filters.shape
        if not 1 <= n <= MAX_FILTERS:
            raise FilterBankError(f"number of filters must be in 1..{MAX_FILTERS}, got {n}")
        if size % 2 == 0 or not 1 <= size <= MAX_SIZE:
            raise FilterBankError(f"filter size must be odd and at most {MAX_SIZE}, got {size}")
        if not np.all(np.isfinite(filters)):
            raise FilterBankError("filter coefficients must be finite")
        if np.any(np.all(filters.reshape(n, -1) == 0.0, axis=1)):
            raise FilterBankError("every filter needs at least one nonzero coefficient")
        filters.setflags(write=False)
        object.__setattr__(self, "filters", filters)

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def size(self) -> int:
        return self.filters.shape[1]

    @property
    def bank_id(self) -> tuple[int, int]:
        return (self.n_filters, self.size)

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, self.n_filters, self.size) + self.filters.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, provenance: Provenance = Provenance.LOADED) -> "FilterBank":
        if len(data) < _HEADER.size:
            raise FilterBankError("file too short for BSIF1 header")
        magic, n, size = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FilterBankError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if size % 2 == 0:
            raise FilterBankError(f"filter size must be odd, got {size}")
        expected = _HEADER.size + 8 * n * size * size
        if len(data) != expected:
            raise FilterBankError(f"length mismatch: header declares {expected} bytes, "
                                  f"file has {len(data)}")
        coef = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(n, size, size)
        return cls(coef.astype(np.float64), provenance)


def save_filter_bank(bank: FilterBank, path: str | Path) -> None:
    Path(path).write_bytes(bank.to_bytes())


def load_filter_bank(path: str | Path) -> FilterBank:
    return FilterBank.from_bytes(Path(path).read_bytes())


def valid_grid(sizes: Iterable[int], counts: Iterable[int]) -> list[tuple[int, int]]:
    """(l, N) pairs for which an N-filter bank of size l can exist (N < l*l).

    With l in {3, 5, ..., 17} and N in {5, ..., 12} this yields 60 pairs.
    """
    counts = list(counts)
    return [(l, n) for l in sizes for n in counts if n <= l * l - 1]


def sample_patches(planes: Iterable[np.ndarray], size: int, n_patches: int,
                   seed: int) -> np.ndarray:
    """Draw ``n_patches`` random ``size x size`` patches from grey planes."""
    rng = np.random.default_rng(seed)
    planes = [np.asarray(p, dtype=np.float64) for p in planes]
    planes = [p for p in planes if p.shape[0] >= size and p.shape[1] >= size]
    if not planes:
        raise FilterBankError(f"no image is large enough for {size}x{size} patches")
    which = rng.integers(len(planes), size=n_patches)
    out = np.empty((n_patches, size, size))
    for i, j in enumerate(which):
        p = planes[j]
        y = rng.integers(p.shape[0] - size + 1)
        x = rng.integers(p.shape[1] - size + 1)
        out[i] = p[y:y + size, x:x + size]
    return out


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fastica_symmetric(z: np.ndarray, n: int, rng: np.random.Generator,
                      max_iter: int = 500, tol: float = 1e-6) -> np.ndarray:
    """Symmetric fixed-point ICA with tanh nonlinearity on whitened data.

    ``z`` has shape (n_samples, n) with identity covariance. Returns an
    orthogonal unmixing matrix of shape (n, n).
    """
    w = _sym_decorrelate(rng.standard_normal((n, n)))
    m = z.shape[0]
    for _ in range(max_iter):
        y = z @ w.T
        g = np.tanh(y)
        g_prime = 1.0 - g * g
        w_new = (g.T @ z) / m - g_prime.mean(axis=0)[:, None] * w
        w_new = _sym_decorrelate(w_new)
        converged = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0)) < tol
        w = w_new
        if converged:
            break
    return w


def learn_filter_bank(patches: np.ndarray, n_filters: int, seed: int = 0,
                      max_iter: int = 500, tol: float = 1e-6) -> FilterBank:
    """Learn BSIF filters from grey ``l x l`` patches.

    Each patch has its mean removed, the ensemble is PCA-whitened down to
    ``n_filters`` dimensions and rotated by symmetric FastICA. The returned
    filters are zero-mean and their responses on the training patches have
    (up to numerical precision) identity covariance.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[1] != patches.shape[2]:
        raise FilterBankError(f"patches must have shape (M, l, l), got {patches.shape}")
    m, size, _ = patches.shape
    if n_filters > size * size - 1:
        raise FilterBankError(f"whitening rank is at most {size * size - 1} for l={size}, "
                              f"cannot learn {n_filters} filters")
    if m < 50 * n_filters:
        raise FilterBankError(f"need at least {50 * n_filters} patches, got {m}")
    x = patches.reshape(m, -1)
    x = x - x.mean(axis=1, keepdims=True)
    x = x - x.mean(axis=0)
    cov = x.T @ x / m
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_filters]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] <= 1e-12 * max(evals[0], 1e-300):
        rank = int(np.sum(evals > 1e-12 * max(evals[0], 1e-300)))
        raise FilterBankError(f"whitening rank {rank} < {n_filters}")
    whitening = evecs.T / np.sqrt(evals)[:, None]
    z = x @ whitening.T
    rng = np.random.default_rng(seed)
    unmixing = fastica_symmetric(z, n_filters, rng, max_iter=max_iter, tol=tol)
    filters = (unmixing @ whitening).reshape(n_filters, size, size)
    return FilterBank(filters, Provenance.ICA_LEARNED, seed)


def random_bank(n_filters: int, size: int, seed: int = 0) -> FilterBank:
    """Zero-mean Gaussian random bank, for tests and quick experiments."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n_filters, size, size))
    if size > 1:
        f -= f.mean(axis=(1, 2), keepdims=True)
    return FilterBank(f, Provenance.LOADED, seed)
