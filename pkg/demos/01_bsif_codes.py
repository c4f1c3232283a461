"""Binarised filter responses on a toy image.

Learns a small ICA filter bank from patches of a synthetic face, then shows
how each pixel gets an N-bit code and how a disc histogram of those codes is
folded down to 128 bins.
"""

import numpy as np

from fvpad.features import bsif_code_map, compact_histogram, patch_histogram
from fvpad.filterbank import learn_filter_bank, sample_patches
from fvpad.synthetic import render_sample

face = render_sample(seed=1, subject=0, dataset="synthA", size=96)
grey = face.mean(axis=0)

# ICA on 7x7 patches gives 8 filters, i.e. 8-bit codes in [0, 255]
patches = sample_patches([grey], size=7, n_patches=5000, seed=0)
bank = learn_filter_bank(patches, n_filters=8, seed=0)
print("bank:", bank.bank_id, "filter norms:", np.round(np.linalg.norm(bank.filters, axis=(1, 2)), 2))

codes = bsif_code_map(grey, bank)
print("code map", codes.shape, "range", codes.min(), "-", codes.max())
print("top-left 4x4 codes:\n", codes[:4, :4])

# one disc of radius 8 around the centre, 256 raw bins folded into 128
hist = patch_histogram(codes, (48, 48), 8, 2 ** bank.n_filters)
compact = compact_histogram(hist)
print("disc pixels:", int(hist.sum()), "compact bins:", compact.size, "mass:", int(compact.sum()))
