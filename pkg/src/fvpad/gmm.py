"""Diagonal-covariance Gaussian mixtures fitted by EM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reduction import subsample

VARIANCE_FLOOR = 1e-6
MAX_FIT_SAMPLES = 1_000_000
_LOG_2PI = np.log(2.0 * np.pi)


class GmmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GmmModel:
    """K weights, means (K, d) and diagonal variances (K, d)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    seed: int = 0
    loglik_trace: tuple[float, ...] = field(default=())
    n_iter: int = 0
    converged: bool = False

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _log_joint(model: GmmModel, x: np.ndarray, xx: np.ndarray | None = None) -> np.ndarray:
    """log(pi_k) + log N(x; mu_k, diag var_k) for each row and component.

    ``xx`` may carry the precomputed ``hstack([x*x, x])``.
    """
    prec = 1.0 / model.variances
    if xx is None:
        xx = np.hstack([x * x, x])
    coef = np.hstack([-0.5 * prec, model.means * prec])
    const = (np.log(model.weights)
             - 0.5 * (model.dim * _LOG_2PI + np.sum(np.log(model.variances), axis=1)
                      + np.sum(model.means * model.means * prec, axis=1)))
    return xx @ coef.T + const


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))


def _check_input(model: GmmModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dim:
        raise GmmError(f"input has {x.shape[1]} dims, model expects {model.dim}")
    if not np.all(np.isfinite(x)):
        raise GmmError("input contains non-finite values")
    return x, squeeze


def posteriors(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """Soft assignments of each row of ``x`` (or a single vector) to the components."""
    x, squeeze = _check_input(model, x)
    lj = _log_joint(model, x)
    lj -= _logsumexp_rows(lj)
    post = np.exp(lj)
    return post[0] if squeeze else post


def log_likelihood(model: GmmModel, x: np.ndarray) -> float:
    """Mean per-row log density of ``x`` under the mixture."""
    x, _ = _check_input(model, x)
    if len(x) == 0:
        raise GmmError("log-likelihood of an empty set")
    return float(np.mean(_logsumexp_rows(_log_joint(model, x))))


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` seeds chosen by k-means++ D^2 sampling."""
    n = len(x)
    idx = [int(rng.integers(n))]
    d2 = np.sum((x - x[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a seed
            choice = int(rng.integers(n))
        else:
            choice = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            choice = min(choice, n - 1)
        idx.append(choice)
        d2 = np.minimum(d2, np.sum((x - x[choice]) ** 2, axis=1))
    return np.asarray(idx)


def _m_step(xx: np.ndarray, resp: np.ndarray, floor: float):
    d = xx.shape[1] // 2
    nk = resp.sum(axis=0)
    # empty components keep a tiny mass so their parameters stay defined
    nk_safe = np.maximum(nk, 10 * np.finfo(float).eps)
    moments = (resp.T @ xx) / nk_safe[:, None]
    sq, means = moments[:, :d], moments[:, d:]
    variances = np.maximum(sq - means * means, floor)
    weights = nk_safe / nk_safe.sum()
    return weights, means, variances


def fit_gmm(x: np.ndarray, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-5,
            variance_floor: float = VARIANCE_FLOOR,
            max_samples: int | None = MAX_FIT_SAMPLES) -> GmmModel:
    """Fit a K-component diagonal GMM by EM from a k-means++ start.

    The start assigns each point to its nearest k-means++ seed and takes the
    hard-assignment weights, means and variances. EM stops after ``max_iter``
    iterations or when the relative improvement of the mean log-likelihood
    drops below ``tol``. ``loglik_trace`` holds the mean log-likelihood of
    the parameters entering every E-step plus that of the final model.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise GmmError(f"expected a 2-D sample matrix, got shape {x.shape}")
    if k < 1:
        raise GmmError(f"K must be positive, got {k}")
    if not np.all(np.isfinite(x)):
        raise GmmError("input contains non-finite values")
    x = subsample(x, max_samples, seed)
    if len(x) < 10 * k:
        raise GmmError(f"need at least {10 * k} samples for K={k}, got {len(x)}")
    # EM runs on centred data to limit cancellation in the expanded quadratics
    shift = x.mean(axis=0)
    x = x - shift
    rng = np.random.default_rng(seed)
    seeds = x[kmeans_plus_plus(x, k, rng)]
    d2 = (np.sum(x * x, axis=1)[:, None] - 2.0 * x @ seeds.T
          + np.sum(seeds * seeds, axis=1)[None, :])
    resp = np.zeros((len(x), k))
    resp[np.arange(len(x)), np.argmin(d2, axis=1)] = 1.0
    xx = np.hstack([x * x, x])
    weights, means, variances = _m_step(xx, resp, variance_floor)
    model = GmmModel(weights, means, variances, seed)

    trace: list[float] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        lj = _log_joint(model, x, xx)
        norm = _logsumexp_rows(lj)
        ll = float(np.mean(norm))
        if trace and abs(ll - trace[-1]) <= tol * abs(trace[-1]):
            trace.append(ll)
            converged = True
            break
        trace.append(ll)
        lj -= norm
        resp = np.exp(lj, out=lj)
        weights, means, variances = _m_step(xx, resp, variance_floor)
        model = GmmModel(weights, means, variances, seed)
    else:
        trace.append(log_likelihood(model, x))
    return GmmModel(model.weights, model.means + shift, model.variances, seed,
                    tuple(trace), n_iter, converged)
