"""Known-attack and leave-one-out runs on a small synthetic dataset.

Generates 12 subjects per role, learns a BSIF bank, and runs both protocols
with a small GMM. Reports land in ./demo_out.
"""

import tempfile

from fvpad.config import ExperimentConfig
from fvpad.ingest import load_manifest
from fvpad.protocols import evaluate, write_report
from fvpad.synthetic import generate_synthetic_dataset

data_dir = tempfile.mkdtemp(prefix="fvpad_demo_")
manifest = generate_synthetic_dataset(seed=42, n_per_class=12, out_dir=data_dir)
records = load_manifest(manifest)
print(f"{len(records)} images in {data_dir}")

cfg = ExperimentConfig(n_components=16, pca_dim=32, bank_sizes=(7,), bank_filters=(8,),
                       filter_patches=5000, gmm_max_iter=50)
for protocol in ("known", "loo"):
    report = evaluate(records, cfg.replace(protocol=protocol))
    path = write_report(report, f"demo_out/{protocol}")
    for res in report.splits:
        m = res.metrics
        print(f"{res.name:12s} D-EER {m['d_eer']:.3f}  AUC {m['auc']:.3f}  "
              f"BPCER20 {m['bpcer20']:.3f}")
    print("report:", path)
