"""Persist a trained model and time single-image classification.

The bundle carries the filter bank, PCA, GMM, SVM and configuration in one
checksummed file; scoring after a reload is bit-identical.
"""

import tempfile
from pathlib import Path

from fvpad.bundle import load_bundle, save_bundle
from fvpad.config import ExperimentConfig
from fvpad.filterbank import random_bank
from fvpad.ingest import FaceImage, load_manifest
from fvpad.protocols import fit_models, time_classification
from fvpad.synthetic import generate_synthetic_dataset, render_sample

tmp = Path(tempfile.mkdtemp(prefix="fvpad_bundle_"))
records = load_manifest(generate_synthetic_dataset(1, 6, tmp / "data", size=48))
cfg = ExperimentConfig(n_components=8, pca_dim=16, radii=(4, 6))
bundle = fit_models([r for r in records if r.role == "train"], cfg, random_bank(6, 5, seed=0))

path = tmp / "model.bundle"
save_bundle(bundle, path)
reloaded = load_bundle(path)
face = FaceImage(render_sample(9, 99, "synthA", "replay", size=64))
print(f"bundle {path.stat().st_size} bytes; score before {bundle.score_image(face):+.6f}, "
      f"after reload {reloaded.score_image(face):+.6f}")

faces = [FaceImage(render_sample(9, i, "synthA", size=s)) for i, s in enumerate((160, 180, 64))]
stats = time_classification(reloaded, faces)
for k, v in stats.as_dict().items():
    print(f"  {k}: {v}")
