"""End-to-end experiments: split runs, filter-bank sweeps, timing and reports."""

from __future__ import annotations

import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .bundle import ModelBundle, encode_image
from .classifier import ATTACK, BONA_FIDE, score_batch, select_c, train_linear_svm
from .config import ExperimentConfig
from .features import extract_dense_descriptors
from .filterbank import (FilterBank, learn_filter_bank, load_filter_bank, sample_patches,
                         valid_grid)
from .fisher import encode_fv, normalize_fv
from .gmm import fit_gmm
from .ingest import (ColourSpace, FaceImage, ProtocolSplit, SampleRecord, convert_colorspace,
                     decode_and_crop)
from .metrics import ScoreSet, det_curve, summarise, DetCurve
from .reduction import fit_pca, project, subsample

log = logging.getLogger(__name__)

FitHook = Callable[[str, Sequence[str]], None]


def worker_count() -> int:
    """Worker cap from ``FVPAD_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("FVPAD_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


def _map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_face(record: SampleRecord, colourspace: str) -> FaceImage:
    return convert_colorspace(decode_and_crop(record), ColourSpace(colourspace))


def grey_plane(img: FaceImage) -> np.ndarray:
    if img.colourspace is ColourSpace.RGB:
        r, g, b = img.planes
        return 0.299 * r + 0.587 * g + 0.114 * b
    return img.planes[0]


def learn_bank_from_records(records: Sequence[SampleRecord], size: int, n_filters: int,
                            n_patches: int, seed: int) -> FilterBank:
    """ICA bank learned from grey patches of ``records``' images."""
    planes = [grey_plane(decode_and_crop(r)) for r in records]
    patches = sample_patches(planes, size, max(n_patches, 50 * n_filters), seed)
    return learn_filter_bank(patches, n_filters, seed)


def banks_for_split(split: ProtocolSplit, cfg: ExperimentConfig, seed: int) -> list[FilterBank]:
    if cfg.bank_path:
        return [load_filter_bank(cfg.bank_path)]
    return [learn_bank_from_records(split.train, l, n, cfg.filter_patches, seed)
            for l, n in valid_grid(cfg.bank_sizes, cfg.bank_filters)]


@dataclass
class SplitResult:
    name: str
    kind: str
    bank_id: tuple[int, int]
    records: list[SampleRecord]
    scores: np.ndarray
    metrics: dict[str, float]
    det: DetCurve
    bundle: ModelBundle | None = None
    n_train: int = 0

    def score_set(self) -> ScoreSet:
        att = np.array([r.is_attack for r in self.records])
        return ScoreSet(self.scores[~att], self.scores[att],
                        tuple(r.pai_species for r in self.records if r.is_attack))


@dataclass
class EvalReport:
    splits: list[SplitResult] = field(default_factory=list)
    # split name -> (mean, std) of D-EER over banks, and the best bank
    sweep: dict[str, dict] = field(default_factory=dict)
    timing: dict | None = None


def _signed_labels(records: Iterable[SampleRecord]) -> np.ndarray:
    return np.array([ATTACK if r.is_attack else BONA_FIDE for r in records], dtype=float)


def fit_models(train: Sequence[SampleRecord], cfg: ExperimentConfig, bank: FilterBank,
               seed: int = 0, on_fit: FitHook | None = None) -> ModelBundle:
    """Fit PCA, GMM and SVM on the training records only."""
    labels = _signed_labels(train)
    if not (np.any(labels > 0) and np.any(labels < 0)):
        raise ValueError("training set needs both bona fide and attack samples")
    paths = [r.image_path for r in train]

    def extract(r):
        img = load_face(r, cfg.colourspace)
        values = extract_dense_descriptors(img, bank, cfg.stride, cfg.radii).values
        # histogram counts are small integers, exact in uint16
        return values.astype(np.uint16)

    desc = _map(extract, train)
    owner = np.repeat(np.arange(len(desc)), [len(d) for d in desc])
    stacked = np.concatenate(desc)
    if on_fit:
        on_fit("pca", paths)
    pca_sample = subsample(stacked, cfg.pca_max_descriptors, seed).astype(np.float64)
    pca = fit_pca(pca_sample, cfg.pca_dim, max_samples=None, seed=seed)
    del pca_sample
    projected = [project(pca, d.astype(np.float64)) for d in desc]
    del stacked
    if on_fit:
        on_fit("gmm", paths)
    proj_all = np.concatenate(projected)
    gmm_sample = subsample(proj_all, cfg.gmm_max_descriptors, seed + 1)
    del proj_all
    gmm = fit_gmm(gmm_sample, cfg.n_components, seed=seed, max_iter=cfg.gmm_max_iter,
                  tol=cfg.gmm_tol, max_samples=None)
    fvs = np.stack([_normalise(encode_fv(gmm, p), cfg).values for p in projected])
    if on_fit:
        on_fit("svm", paths)
    c = cfg.svm_c
    if cfg.svm_c_grid:
        c = select_c(fvs, labels, cfg.svm_c_grid, cfg.cv_folds, seed)
    svm = train_linear_svm(fvs, labels, C=c, seed=seed)
    log.debug("fitted models on %d images (%d descriptors)", len(train), len(owner))
    return ModelBundle(bank, pca, gmm, svm, cfg.replace(svm_c=c))


def _normalise(fv, cfg):
    if cfg.power_normalize or cfg.l2_normalize:
        return normalize_fv(fv, cfg.power_normalize, cfg.l2_normalize)
    return fv


def score_records(bundle: ModelBundle, records: Sequence[SampleRecord]) -> np.ndarray:
    def one(r):
        img = decode_and_crop(r)
        fv = encode_image(img, bundle.bank, bundle.pca, bundle.gmm, bundle.config, r.image_path)
        return fv.values

    fvs = np.stack(_map(one, records))
    return score_batch(bundle.svm, fvs)


def run_split(split: ProtocolSplit, cfg: ExperimentConfig, bank: FilterBank, seed: int | None = None,
              on_fit: FitHook | None = None, keep_bundle: bool = False) -> SplitResult:
    """Train on ``split.train`` and score every test sample."""
    seed = cfg.seed if seed is None else seed
    bundle = fit_models(split.train, cfg, bank, seed, on_fit)
    test = list(split.test)
    scores = score_records(bundle, test)
    is_attack = np.array([r.is_attack for r in test])
    ss = ScoreSet(scores[~is_attack], scores[is_attack])
    return SplitResult(split.name, split.kind.value, bank.bank_id, test, scores, summarise(ss),
                       det_curve(ss), bundle if keep_bundle else None, len(split.train))


def job_seed(seed_base: int, job_index: int) -> int:
    return seed_base ^ job_index


def sweep_statistics(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1); std is 0 for one value."""
    values = list(values)
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def run_sweep(splits: Sequence[ProtocolSplit], cfg: ExperimentConfig,
              banks: Sequence[FilterBank] | None = None,
              runner: Callable[..., SplitResult] = run_split) -> EvalReport:
    """Run every split with every bank and aggregate D-EER across banks.

    Without explicit ``banks`` each split learns its own grid of banks from
    its training images. Each (split, bank) job gets seed ``cfg.seed ^ index``.
    """
    report = EvalReport()
    job = 0
    for split in splits:
        split_banks = list(banks) if banks is not None else banks_for_split(split, cfg, cfg.seed)
        if not split_banks:
            raise ValueError("sweep needs at least one filter bank")
        per_bank = []
        for bank in split_banks:
            res = runner(split, cfg, bank, seed=job_seed(cfg.seed, job))
            job += 1
            per_bank.append(res)
            report.splits.append(res)
        eers = [r.metrics["d_eer"] for r in per_bank]
        mean, std = sweep_statistics(eers)
        best = min(per_bank, key=lambda r: r.metrics["d_eer"])
        report.sweep[split.name] = {
            "n_banks": len(per_bank),
            "d_eer_mean": mean,
            "d_eer_std": std,
            "best_bank": best.bank_id,
            "best_d_eer": best.metrics["d_eer"],
            "table": [(r.bank_id, r.metrics["d_eer"]) for r in per_bank],
        }
    return report


def evaluate(records: Sequence[SampleRecord], cfg: ExperimentConfig,
             splits: Sequence[ProtocolSplit] | None = None) -> EvalReport:
    """Build the configured protocol's splits and run them (one or more banks)."""
    from .ingest import build_splits

    if splits is None:
        splits = build_splits(records, cfg.protocol, cfg.protocol_params())
    return run_sweep(splits, cfg)


# face-size buckets as (min_w, max_w, min_h, max_h)
SIZE_BUCKETS = {
    "small": (150, 199, 150, 199),
    "medium": (250, 350, 350, 450),
    "large": (550, 700, 600, 1050),
}


def size_bucket(width: int, height: int) -> str:
    for name, (w0, w1, h0, h1) in SIZE_BUCKETS.items():
        if w0 <= width <= w1 and h0 <= height <= h1:
            return name
    return "other"


@dataclass
class TimingStats:
    samples: list[float]
    buckets: list[str]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples)

    @property
    def min(self) -> float:
        return min(self.samples)

    @property
    def max(self) -> float:
        return max(self.samples)

    def by_bucket(self) -> dict[str, float]:
        out: dict[str, list[float]] = {}
        for b, s in zip(self.buckets, self.samples):
            out.setdefault(b, []).append(s)
        return {b: statistics.fmean(v) for b, v in out.items()}

    def as_dict(self) -> dict:
        d = {"n": len(self.samples), "mean_s": self.mean, "min_s": self.min, "max_s": self.max}
        for b, v in sorted(self.by_bucket().items()):
            d[f"mean_s_{b}"] = v
        return d


def time_classification(bundle: ModelBundle, images: Sequence[FaceImage]) -> TimingStats:
    """Wall-clock seconds per image for extraction, projection, encoding and scoring.

    The bundle is already loaded, so loading is never timed.
    """
    samples, buckets = [], []
    for img in images:
        t0 = time.perf_counter()
        bundle.score_image(img)
        samples.append(time.perf_counter() - t0)
        buckets.append(size_bucket(img.width, img.height))
    return TimingStats(samples, buckets)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.10g" % v
    if isinstance(v, tuple):
        return "N=%d l=%d" % v
    return str(v)


def write_scores_csv(result: SplitResult, path: str | Path) -> None:
    lines = ["image_path,label,species,score"]
    for r, s in zip(result.records, result.scores):
        lines.append(f"{r.image_path},{r.label.value},{r.pai_species},{'%.17g' % s}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_report(report: EvalReport, out_dir: str | Path, name: str = "report.txt") -> Path:
    """Write the key-value report plus per-split score and DET CSV files."""
    from .metrics import write_det_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for res in report.splits:
        tag = f"{res.name}_N{res.bank_id[0]}_l{res.bank_id[1]}"
        scores_file = f"scores_{tag}.csv"
        det_file = f"det_{tag}.csv"
        write_scores_csv(res, out / scores_file)
        write_det_csv(res.det, out / det_file)
        ss = res.score_set()
        lines.append(f"[split {tag}]")
        lines.append(f"split: {res.name}")
        lines.append(f"kind: {res.kind}")
        lines.append(f"bank: {_fmt(res.bank_id)}")
        lines.append(f"n_train: {res.n_train}")
        lines.append(f"n_test_bona_fide: {ss.bona_fide.size}")
        lines.append(f"n_test_attack: {ss.attack.size}")
        for k, v in res.metrics.items():
            lines.append(f"{k}: {_fmt(v)}")
        lines.append(f"det_curve: {det_file}")
        lines.append(f"scores: {scores_file}")
        lines.append("")
    for split_name, s in report.sweep.items():
        lines.append(f"[sweep {split_name}]")
        for k in ("n_banks", "d_eer_mean", "d_eer_std", "best_bank", "best_d_eer"):
            lines.append(f"{k}: {_fmt(s[k])}")
        for bank_id, eer in s["table"]:
            lines.append(f"d_eer[{_fmt(bank_id)}]: {_fmt(eer)}")
        lines.append("")
    if report.timing:
        lines.append("[timing]")
        for k, v in report.timing.items():
            lines.append(f"{k}: {_fmt(v)}")
        lines.append("")
    if len(report.sweep) > 1:
        eers = [s["d_eer_mean"] for s in report.sweep.values()]
        lines.append("[summary]")
        lines.append(f"n_splits: {len(eers)}")
        lines.append(f"mean_d_eer: {_fmt(statistics.fmean(eers))}")
        lines.append("")
    path = out / name
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
