"""ISO/IEC 30107-3 PAD error rates, DET curves, AUC and a Mann-Whitney test.

Scores are oriented so that bona fide presentations score high: a sample is
accepted as bona fide iff ``score >= threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata


class MetricsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScoreSet:
    bona_fide: np.ndarray
    attack: np.ndarray
    attack_species: tuple[str, ...] | None = None

    def __post_init__(self):
        bf = np.asarray(self.bona_fide, dtype=np.float64).ravel()
        at = np.asarray(self.attack, dtype=np.float64).ravel()
        if not (np.all(np.isfinite(bf)) and np.all(np.isfinite(at))):
            raise MetricsError("scores must be finite")
        object.__setattr__(self, "bona_fide", bf)
        object.__setattr__(self, "attack", at)

    def check(self) -> None:
        if self.bona_fide.size == 0 or self.attack.size == 0:
            raise MetricsError("both bona fide and attack scores are required")

    def swapped(self) -> "ScoreSet":
        return ScoreSet(self.attack, self.bona_fide)


@dataclass(frozen=True, eq=False)
class DetCurve:
    thresholds: np.ndarray
    apcer: np.ndarray
    bpcer: np.ndarray

    def __len__(self) -> int:
        return self.thresholds.shape[0]

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.apcer.tolist(), self.bpcer.tolist()))


def error_rates(scores: ScoreSet, threshold: float) -> tuple[float, float]:
    """(APCER, BPCER) at ``threshold``."""
    scores.check()
    apcer = np.count_nonzero(scores.attack >= threshold) / scores.attack.size
    bpcer = np.count_nonzero(scores.bona_fide < threshold) / scores.bona_fide.size
    return float(apcer), float(bpcer)


def det_curve(scores: ScoreSet) -> DetCurve:
    """Every distinct operating point of the score populations.

    Thresholds are -inf, the midpoints between consecutive distinct scores
    (pooled over both classes) and +inf.
    """
    scores.check()
    pooled = np.unique(np.concatenate([scores.bona_fide, scores.attack]))
    mids = (pooled[:-1] + pooled[1:]) / 2.0
    thresholds = np.concatenate([[-np.inf], mids, [np.inf]])
    att = np.sort(scores.attack)
    bf = np.sort(scores.bona_fide)
    n_accepted = att.size - np.searchsorted(att, thresholds, side="left")
    n_rejected = np.searchsorted(bf, thresholds, side="left")
    return DetCurve(thresholds, n_accepted / att.size, n_rejected / bf.size)


def d_eer(scores: ScoreSet) -> tuple[float, float]:
    """Detection equal error rate and its threshold.

    Picks the operating point minimising ``|APCER - BPCER|`` (lowest threshold
    on ties) and reports ``(APCER + BPCER) / 2`` there.
    """
    curve = det_curve(scores)
    gap = np.abs(curve.apcer - curve.bpcer)
    k = int(np.argmin(gap))
    return float((curve.apcer[k] + curve.bpcer[k]) / 2.0), float(curve.thresholds[k])


def bpcer_at_apcer(scores: ScoreSet, alpha: float) -> float:
    """Lowest BPCER among operating points with ``APCER <= alpha``."""
    if not 0.0 < alpha <= 1.0:
        raise MetricsError(f"alpha must lie in (0, 1], got {alpha}")
    curve = det_curve(scores)
    ok = curve.apcer <= alpha
    return float(curve.bpcer[ok].min())


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> float:
    """U statistic of ``a``: pairs with a > b plus half the ties."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ranks = rankdata(np.concatenate([a, b]))
    return float(ranks[:a.size].sum() - a.size * (a.size + 1) / 2.0)


def auc(scores: ScoreSet) -> float:
    """P(bona fide score > attack score), ties counted one half."""
    scores.check()
    u = mann_whitney_u(scores.bona_fide, scores.attack)
    return u / (scores.bona_fide.size * scores.attack.size)


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    z: float
    p_value: float
    reject: bool


def mann_whitney(a: Sequence[float], b: Sequence[float],
                 confidence: float = 0.95) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test (normal approximation).

    Uses the tie-corrected variance and a 0.5 continuity correction. The null
    hypothesis (both samples carry the same information) is rejected when
    ``p < 1 - confidence``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise MetricsError("each sample needs at least 2 values")
    n1, n2 = a.size, b.size
    n = n1 + n2
    u = mann_whitney_u(a, b)
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = float(np.sum(counts ** 3 - counts)) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    mean = n1 * n2 / 2.0
    if var <= 0:
        z, p = 0.0, 1.0
    else:
        dev = abs(u - mean)
        z = max(dev - 0.5, 0.0) / math.sqrt(var)
        p = float(min(1.0, 2.0 * ndtr(-z)))
    return MannWhitneyResult(u, z, p, p < 1.0 - confidence)


def probit(p: np.ndarray) -> np.ndarray:
    """Inverse standard normal CDF; 0 and 1 map to -inf and +inf."""
    return ndtri(np.asarray(p, dtype=np.float64))


def write_det_csv(curve: DetCurve, path: str | Path) -> None:
    rows = ["threshold,apcer,bpcer,probit_apcer,probit_bpcer"]
    pa, pb = probit(curve.apcer), probit(curve.bpcer)
    for t, a, b, x, y in zip(curve.thresholds, curve.apcer, curve.bpcer, pa, pb):
        rows.append(",".join("%.10g" % v for v in (t, a, b, x, y)))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def summarise(scores: ScoreSet) -> dict[str, float]:
    """D-EER, its threshold, AUC and BPCER at APCER of 10%, 5% and 1%."""
    eer, thr = d_eer(scores)
    return {
        "d_eer": eer,
        "d_eer_threshold": thr,
        "auc": auc(scores),
        "bpcer10": bpcer_at_apcer(scores, 0.10),
        "bpcer20": bpcer_at_apcer(scores, 0.05),
        "bpcer100": bpcer_at_apcer(scores, 0.01),
    }
