"""PCA decorrelation of local descriptors."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

DEFAULT_DIM = 64
MAX_FIT_SAMPLES = 1_000_000
_TARGET_VARIANCE = 0.95


class PcaError(ValueError):
    pass


class LowRetainedVarianceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    retained_variance_fraction: float

    @property
    def n_components(self) -> int:
        return self.basis.shape[0]

    @property
    def n_features(self) -> int:
        return self.basis.shape[1]

    @property
    def low_variance(self) -> bool:
        return self.retained_variance_fraction < _TARGET_VARIANCE


def subsample(x: np.ndarray, cap: int, seed: int) -> np.ndarray:
    """Uniform random subset of at most ``cap`` rows, in original order."""
    if cap is None or len(x) <= cap:
        return x
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(x), size=cap, replace=False))
    return x[idx]


def fit_pca(x: np.ndarray, d: int = DEFAULT_DIM, max_samples: int | None = MAX_FIT_SAMPLES,
            seed: int = 0) -> PcaModel:
    """Fit a rank-``d`` PCA on the rows of ``x``.

    Eigenvalues are variances with the ``n - 1`` denominator. Each basis
    vector is signed so that its largest-magnitude coefficient is positive.
    A :class:`LowRetainedVarianceWarning` is issued when the retained
    variance fraction is below 0.95.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise PcaError(f"expected a 2-D sample matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise PcaError("descriptors contain non-finite values")
    if len(x) <= d:
        raise PcaError(f"need more than {d} samples, got {len(x)}")
    if d > x.shape[1]:
        raise PcaError(f"cannot keep {d} components of {x.shape[1]}-d data")
    x = subsample(x, max_samples, seed)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (len(x) - 1)
    evals, evecs = linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    total = float(np.sum(np.clip(evals, 0.0, None)))
    rank_tol = max(evals[0], 0.0) * x.shape[1] * np.finfo(float).eps * 10
    rank = int(np.sum(evals > rank_tol))
    if rank < d:
        raise PcaError(f"degenerate sample: achieved rank {rank} < {d}")
    basis = evecs[:, :d].T.copy()
    flip = np.sign(basis[np.arange(d), np.argmax(np.abs(basis), axis=1)])
    basis *= flip[:, None]
    kept = evals[:d].copy()
    retained = float(kept.sum() / total) if total > 0 else 0.0
    model = PcaModel(mean, basis, kept, retained)
    if model.low_variance:
        warnings.warn(f"PCA keeps {retained:.3f} of the variance with d={d}",
                      LowRetainedVarianceWarning, stacklevel=2)
    return model


def project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """``basis @ (x - mean)`` for a single vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise PcaError(f"descriptor has {x.shape[-1]} dims, model expects {model.n_features}")
    return (x - model.mean) @ model.basis.T
