"""Fisher Vector encoding of local descriptor sets."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gmm import GmmModel, posteriors


class FisherError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FisherVector:
    """Encoded image of length ``2 * d * K``.

    Layout: for each component k, the d first-order entries followed by the
    d second-order entries.
    """

    values: np.ndarray
    n_components: int
    dim: int
    normalised: bool = False
    source: str = ""

    def __len__(self) -> int:
        return self.values.shape[0]

    def blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """First- and second-order statistics, each of shape (K, d)."""
        v = self.values.reshape(self.n_components, 2, self.dim)
        return v[:, 0], v[:, 1]


def fv_statistics(model: GmmModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-component sums S0 (K,), S1 (K, d), S2 (K, d) of posteriors times 1, x, x^2."""
    alpha = posteriors(model, x)
    return alpha.sum(axis=0), alpha.T @ x, alpha.T @ (x * x)


def encode_fv(model: GmmModel, x: np.ndarray, source: str = "") -> FisherVector:
    """Unnormalised Fisher Vector of ``T`` projected descriptors (rows of ``x``).

    For every component k::

        first  = sum_t a_t(k) (x_t - mu_k) / sigma_k               / (T sqrt(pi_k))
        second = sum_t a_t(k) ((x_t - mu_k)^2 / sigma_k^2 - 1)     / (T sqrt(2 pi_k))

    evaluated elementwise over the descriptor dimensions.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise FisherError(f"need a non-empty (T, d) descriptor matrix, got shape {x.shape}")
    if x.shape[1] != model.dim:
        raise FisherError(f"descriptors have {x.shape[1]} dims, model expects {model.dim}")
    t = x.shape[0]
    s0, s1, s2 = fv_statistics(model, x)
    mu = model.means
    var = model.variances
    sigma = np.sqrt(var)
    first = (s1 - mu * s0[:, None]) / sigma
    second = (s2 - 2.0 * mu * s1 + mu * mu * s0[:, None]) / var - s0[:, None]
    first /= (t * np.sqrt(model.weights))[:, None]
    second /= (t * np.sqrt(2.0 * model.weights))[:, None]
    values = np.stack([first, second], axis=1).reshape(-1)
    return FisherVector(values, model.n_components, model.dim, False, source)


def normalize_fv(fv: FisherVector, power: bool = True, l2: bool = True) -> FisherVector:
    """Signed square root followed by L2 normalisation; zero stays zero."""
    v = fv.values
    if power:
        v = np.sign(v) * np.sqrt(np.abs(v))
    if l2:
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
    return FisherVector(v, fv.n_components, fv.dim, True, fv.source)


_FV_HEAD = struct.Struct("<II")


def write_fv(fv: FisherVector, path: str | Path) -> None:
    """uint32 K, uint32 d, then 2*d*K float64 (little-endian)."""
    Path(path).write_bytes(_FV_HEAD.pack(fv.n_components, fv.dim)
                           + fv.values.astype("<f8").tobytes())


def read_fv(path: str | Path) -> FisherVector:
    data = Path(path).read_bytes()
    if len(data) < _FV_HEAD.size:
        raise FisherError("FV dump too short")
    k, d = _FV_HEAD.unpack_from(data)
    if len(data) != _FV_HEAD.size + 16 * k * d:
        raise FisherError("FV dump length does not match its header")
    values = np.frombuffer(data, dtype="<f8", offset=_FV_HEAD.size).astype(np.float64)
    return FisherVector(values, k, d)
