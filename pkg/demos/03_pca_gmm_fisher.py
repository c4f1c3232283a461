"""From descriptors to a Fisher Vector.

PCA decorrelates 384-d descriptors down to d dimensions, a diagonal GMM
models them, and each image becomes the normalised gradient of the GMM
log-likelihood with respect to means and variances (length 2*d*K).
"""

import numpy as np

from fvpad.features import extract_dense_descriptors
from fvpad.filterbank import random_bank
from fvpad.fisher import encode_fv, normalize_fv
from fvpad.gmm import fit_gmm
from fvpad.ingest import FaceImage
from fvpad.reduction import fit_pca, project
from fvpad.synthetic import render_sample

bank = random_bank(8, 7, seed=0)
faces = [FaceImage(render_sample(5, s, "synthA", sp, size=64))
         for s in range(6) for sp in ("", "moire")]
desc = [extract_dense_descriptors(f, bank).values for f in faces]

# d=16 keeps well under 95% of the variance here, so a warning is expected
pca = fit_pca(np.concatenate(desc), d=16)
print(f"PCA keeps {pca.retained_variance_fraction:.1%} of the variance in 16 dims")

projected = [project(pca, d) for d in desc]
gmm = fit_gmm(np.concatenate(projected), k=8, seed=0)
print(f"GMM: {gmm.n_iter} EM iterations, converged={gmm.converged}, "
      f"log-likelihood {gmm.loglik_trace[0]:.3f} -> {gmm.loglik_trace[-1]:.3f}")

for face, p in list(zip(faces, projected))[:4]:
    fv = normalize_fv(encode_fv(gmm, p))
    first, second = fv.blocks()
    print(f"FV length {len(fv)}, |first| {np.linalg.norm(first):.3f}, "
          f"|second| {np.linalg.norm(second):.3f}")
