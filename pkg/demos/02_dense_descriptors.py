"""Dense colour descriptors from a single face.

A regular grid (stride 3) of disc histograms at four radii, one 128-bin
histogram per colour plane, concatenated into 384 dimensions.
"""

import numpy as np

from fvpad.features import extract_dense_descriptors
from fvpad.filterbank import random_bank
from fvpad.ingest import ColourSpace, FaceImage, convert_colorspace
from fvpad.synthetic import render_sample

img = FaceImage(render_sample(seed=3, subject=1, dataset="synthB", species="print", size=80))
bank = random_bank(n_filters=10, size=9, seed=0)

for space in ColourSpace:
    ds = extract_dense_descriptors(convert_colorspace(img, space), bank, stride=3)
    per_radius = {int(r): int(np.sum(ds.radii == r)) for r in np.unique(ds.radii)}
    print(f"{space.value:6s} {ds.values.shape} descriptors per radius {per_radius}")

# each 128-bin block sums to the disc size
block_sums = ds.values.reshape(len(ds), 3, 128).sum(axis=2)
print("block sums for the first 4 descriptors:\n", block_sums[:4])
