"""Linear SVM for the bona fide (+1) versus attack (-1) decision."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ingest import Label

BONA_FIDE = 1
ATTACK = -1
_TAU = 1e-12


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinearModel:
    w: np.ndarray
    b: float
    C: float
    n_iter: int = 0
    objective: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PadScore:
    """Signed confidence; higher means more bona fide."""

    value: float

    def decision(self, threshold: float = 0.0) -> Label:
        return Label.BONA_FIDE if self.value >= threshold else Label.ATTACK


def primal_objective(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (x @ w + b)
    return float(0.5 * w @ w + C * np.sum(np.maximum(0.0, 1.0 - margins)))


def _as_labels(y) -> np.ndarray:
    y = [(BONA_FIDE if v is Label.BONA_FIDE else ATTACK) if isinstance(v, Label) else v for v in y]
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isin(y, (BONA_FIDE, ATTACK))):
        raise ClassifierError("labels must be +1 (bona fide) or -1 (attack)")
    return y


def solve_dual(gram: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-9,
               max_iter: int | None = None) -> tuple[np.ndarray, float, int]:
    """Two-coordinate descent on the hinge-loss SVM dual with an unregularised bias.

    Minimises ``0.5 a'Qa - sum(a)`` s.t. ``0 <= a <= C`` and ``y'a = 0`` with
    ``Q = (y y') * gram``, choosing pairs by maximal second-order gain. Stops
    when the maximal KKT violation is below ``tol``. Returns the multipliers,
    the bias and the iteration count.
    """
    n = len(y)
    q = gram * np.outer(y, y)
    qd = np.diag(q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    if max_iter is None:
        max_iter = max(10_000_000 // max(n, 1), 100 * n)
    it = 0
    for it in range(1, max_iter + 1):
        at_upper = alpha >= C
        at_lower = alpha <= 0
        # i maximises -y_t G_t over I_up
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        yg = -y * grad
        cand = np.where(up, yg, -np.inf)
        i = int(np.argmax(cand))
        g_max = cand[i]
        lowvals = np.where(low, -yg, -np.inf)
        g_max2 = lowvals.max()
        if g_max + g_max2 < tol:
            break
        grad_diff = g_max - yg
        quad = qd[i] + qd - 2.0 * y[i] * y * q[i]
        quad = np.where(quad > 0, quad, _TAU)
        obj = np.where(low & (grad_diff > 0), -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(obj))

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad_ij = max(qd[i] + qd[j] + 2.0 * q[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad_ij
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad_ij = max(qd[i] + qd[j] - 2.0 * q[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad_ij
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
                if aj > C:
                    aj, ai = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
                if ai < 0:
                    ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += q[i] * (ai - ai_old) + q[j] * (aj - aj_old)
    else:
        warnings.warn(f"SVM solver stopped at max_iter={max_iter} before reaching tol={tol}",
                      RuntimeWarning, stacklevel=2)

    # bias from free multipliers, else the midpoint of the feasible interval
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        rho = float(np.mean(yg[free]))
    else:
        at_upper = alpha >= C
        ub_mask = np.where(at_upper, ~pos, pos)
        lb_mask = ~ub_mask
        ub = yg[ub_mask].min() if np.any(ub_mask) else np.inf
        lb = yg[lb_mask].max() if np.any(lb_mask) else -np.inf
        rho = float((ub + lb) / 2)
    return alpha, -rho, it


def train_linear_svm(x: np.ndarray, y: Sequence, C: float = 1.0, seed: int = 0,
                     tol: float = 1e-9) -> LinearModel:
    """Train ``score = w.x + b`` minimising ``0.5|w|^2 + C sum hinge(y (w.x + b))``.

    ``y`` holds +1 for bona fide and -1 for attacks (:class:`Label` values are
    accepted too). The solver is deterministic, ``seed`` is recorded only.
    """
    x = np.asarray(x, dtype=np.float64)
    y = _as_labels(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ClassifierError(f"inconsistent shapes: x {x.shape}, y {y.shape}")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ClassifierError("training needs both bona fide and attack samples")
    if C <= 0:
        raise ClassifierError(f"C must be positive, got {C}")
    gram = x @ x.T
    alpha, b, it = solve_dual(gram, y, C, tol=tol)
    w = x.T @ (alpha * y)
    obj = primal_objective(w, b, x, y, C)
    return LinearModel(w, b, float(C), it, obj, {"seed": seed, "n_sv": int(np.sum(alpha > 0))})


def score(model: LinearModel, fv) -> PadScore:
    """``w . x + b`` for one encoding (array or FisherVector)."""
    x = np.asarray(getattr(fv, "values", fv), dtype=np.float64)
    if x.shape != model.w.shape:
        raise ClassifierError(f"encoding has length {x.shape}, model expects {model.w.shape}")
    return PadScore(float(x @ model.w + model.b))


def score_batch(model: LinearModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ClassifierError(f"encodings have shape {x.shape}, model expects (*, {model.dim})")
    return x @ model.w + model.b


def select_c(x: np.ndarray, y: Sequence, grid: Sequence[float] = (0.01, 0.1, 1.0, 10.0),
             folds: int = 3, seed: int = 0) -> float:
    """Pick C from ``grid`` by stratified k-fold cross-validated D-EER.

    Ties go to the smaller C.
    """
    from .metrics import ScoreSet, d_eer

    x = np.asarray(x, dtype=np.float64)
    y = _as_labels(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=int)
    for cls in (BONA_FIDE, ATTACK):
        idx = np.flatnonzero(y == cls)
        fold_of[rng.permutation(idx)] = np.arange(len(idx)) % folds
    best_c, best_err = None, np.inf
    for c in sorted(grid):
        scores = np.empty(len(y))
        for f in range(folds):
            tr, te = fold_of != f, fold_of == f
            if not np.any(te):
                continue
            if len(np.unique(y[tr])) < 2:
                raise ClassifierError("a cross-validation fold lost one class")
            m = train_linear_svm(x[tr], y[tr], c, seed)
            scores[te] = score_batch(m, x[te])
        err = d_eer(ScoreSet(scores[y > 0], scores[y < 0]))[0]
        if err < best_err:
            best_c, best_err = c, err
    return float(best_c)
