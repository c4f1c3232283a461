"""Fisher-Vector encoded dense-BSIF face presentation attack detection."""

from .ingest import (
    ColourSpace,
    FaceImage,
    Label,
    ProtocolKind,
    ProtocolSplit,
    SampleRecord,
    build_splits,
    convert_colorspace,
    decode_and_crop,
    load_manifest,
)
from .filterbank import FilterBank, learn_filter_bank, load_filter_bank, save_filter_bank
from .features import (
    DescriptorSet,
    bsif_code_map,
    compact_histogram,
    extract_dense_descriptors,
    patch_histogram,
)
from .reduction import PcaModel, fit_pca, project
from .gmm import GmmModel, fit_gmm, log_likelihood, posteriors
from .fisher import FisherVector, encode_fv, normalize_fv
from .classifier import LinearModel, PadScore, score, train_linear_svm
from .metrics import (
    DetCurve,
    ScoreSet,
    auc,
    bpcer_at_apcer,
    d_eer,
    det_curve,
    error_rates,
    mann_whitney,
)

__version__ = "0.1.0"
