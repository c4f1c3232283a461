"""Command-line entry point: ``fvpad <command> [options]``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bundle import load_bundle, save_bundle
from .config import ExperimentConfig, load_config
from .features import extract_dense_descriptors, write_descriptor_dump
from .filterbank import load_filter_bank, save_filter_bank
from .ingest import ColourSpace, SampleRecord, Label, build_splits, convert_colorspace, \
    decode_and_crop, load_manifest
from .protocols import (banks_for_split, evaluate, fit_models, learn_bank_from_records,
                        run_sweep, time_classification, write_report)
from .synthetic import generate_synthetic_dataset

log = logging.getLogger("fvpad")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _image_record(path: str) -> SampleRecord:
    return SampleRecord(path, Label.BONA_FIDE)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {}
    if getattr(args, "manifest", None):
        overrides["manifest"] = args.manifest
    if getattr(args, "protocol", None):
        overrides["protocol"] = args.protocol
    if getattr(args, "out", None) and args.command in ("evaluate", "sweep"):
        overrides["output_dir"] = args.out
    return cfg.replace(**overrides) if overrides else cfg


def _records(cfg: ExperimentConfig):
    if not cfg.manifest:
        raise ValueError("no manifest given (set 'manifest' in the config or pass --manifest)")
    return load_manifest(cfg.manifest)


def cmd_learn_filters(args) -> int:
    records = [r for r in load_manifest(args.manifest) if r.role == "train"]
    bank = learn_bank_from_records(records, args.size, args.filters, args.patches, args.seed)
    save_filter_bank(bank, args.out)
    print(f"{args.out} N={bank.n_filters} l={bank.size}")
    return 0


def cmd_extract(args) -> int:
    bank = load_filter_bank(args.bank)
    img = convert_colorspace(decode_and_crop(_image_record(args.image)),
                             ColourSpace(args.colourspace))
    radii = tuple(int(r) for r in args.radii.split(","))
    ds = extract_dense_descriptors(img, bank, args.stride, radii, args.image)
    write_descriptor_dump(ds, args.out)
    print(f"{args.out} {len(ds)} descriptors")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    records = [r for r in _records(cfg) if r.role == "train"]
    if cfg.bank_path:
        bank = load_filter_bank(cfg.bank_path)
    else:
        bank = learn_bank_from_records(records, cfg.bank_sizes[0], cfg.bank_filters[0],
                                       cfg.filter_patches, cfg.seed)
    bundle = fit_models(records, cfg, bank, cfg.seed)
    save_bundle(bundle, args.out)
    print(f"{args.out} K={bundle.gmm.n_components} d={bundle.pca.n_components} "
          f"N={bank.n_filters} l={bank.size}")
    return 0


def cmd_score(args) -> int:
    bundle = load_bundle(args.model)
    for path in args.image:
        value = bundle.score_image(decode_and_crop(_image_record(path)))
        print(f"{path} {value:.10g}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    report = evaluate(_records(cfg), cfg)
    path = write_report(report, cfg.output_dir)
    print(path)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    splits = build_splits(_records(cfg), cfg.protocol, cfg.protocol_params())
    report = run_sweep(splits, cfg)
    path = write_report(report, cfg.output_dir, "sweep_report.txt")
    print(path)
    return 0


def cmd_time(args) -> int:
    bundle = load_bundle(args.model)
    paths = list(args.image)
    if args.manifest:
        paths += [r.image_path for r in load_manifest(args.manifest)]
    if not paths:
        raise ValueError("no images to time")
    images = [decode_and_crop(_image_record(p)) for p in paths]
    stats = time_classification(bundle, images)
    for k, v in stats.as_dict().items():
        print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    return 0


def cmd_generate(args) -> int:
    print(generate_synthetic_dataset(args.seed, args.n_per_class, args.out, args.size))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fvpad", description="Fisher Vector dense-BSIF face PAD toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("learn-filters", help="learn an ICA filter bank from training images")
    s.add_argument("--manifest", required=True)
    s.add_argument("--size", type=int, required=True, help="filter size l (odd)")
    s.add_argument("--filters", type=int, required=True, help="number of filters N")
    s.add_argument("--patches", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_learn_filters)

    s = sub.add_parser("extract", help="dump dense BSIF descriptors of one image")
    s.add_argument("--bank", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--stride", type=int, default=3)
    s.add_argument("--radii", default="4,6,8,10")
    s.add_argument("--colourspace", choices=[c.value for c in ColourSpace], default="rgb")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train a model bundle on the train-role records")
    s.add_argument("--config")
    s.add_argument("--manifest")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="score images with a model bundle")
    s.add_argument("--model", required=True)
    s.add_argument("--image", required=True, action="append")
    s.set_defaults(func=cmd_score)

    for name, func, helptext in (("evaluate", cmd_evaluate, "run an evaluation protocol"),
                                 ("sweep", cmd_sweep, "run a protocol over a filter-bank grid")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config")
        s.add_argument("--manifest")
        s.add_argument("--protocol", choices=["known", "loo", "cross"])
        s.add_argument("--out", help="report directory")
        s.set_defaults(func=func)

    s = sub.add_parser("time", help="time per-image classification")
    s.add_argument("--model", required=True)
    s.add_argument("--image", action="append", default=[])
    s.add_argument("--manifest")
    s.set_defaults(func=cmd_time)

    s = sub.add_parser("generate", help="write a synthetic PAD dataset")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--n-per-class", type=int, default=40)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"fvpad {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
