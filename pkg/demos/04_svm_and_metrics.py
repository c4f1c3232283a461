"""Linear SVM scores and the PAD error-rate toolkit.

Trains the SVM on two separable-ish Gaussian classes, then reports D-EER,
BPCER at fixed APCERs, AUC and the probit-scaled DET curve on held-out data.
"""

import numpy as np

from fvpad.classifier import score_batch, train_linear_svm
from fvpad.metrics import ScoreSet, det_curve, mann_whitney, probit, summarise

rng = np.random.default_rng(0)


def sample(n):
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return rng.standard_normal((n, 20)) + 0.35 * y[:, None], y


x, y = sample(400)
model = train_linear_svm(x, y, C=1.0)
print(f"SVM: |w| = {np.linalg.norm(model.w):.3f}, b = {model.b:+.3f}, "
      f"objective {model.objective:.3f}")

xt, yt = sample(1000)
s = score_batch(model, xt)
scores = ScoreSet(s[yt > 0], s[yt < 0])
for k, v in summarise(scores).items():
    print(f"  {k:16s} {v:.4f}")

curve = det_curve(scores)
pa, pb = probit(curve.apcer), probit(curve.bpcer)
mid = len(curve.thresholds) // 2
print(f"DET: {len(curve.thresholds)} points, probit coordinates at the middle point "
      f"({pa[mid]:.2f}, {pb[mid]:.2f})")

# are bona fide scores significantly higher than attack scores?
res = mann_whitney(scores.bona_fide, scores.attack)
print(f"Mann-Whitney U={res.u:.0f}, z={res.z:.2f}, p={res.p_value:.2g}, reject={res.reject}")
