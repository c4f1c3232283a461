"""Experiment configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import get_type_hints


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str = ""
    output_dir: str = "fvpad_out"
    # single bank file, or a grid of (size, count) pairs learned by ICA
    bank_path: str = ""
    bank_sizes: tuple[int, ...] = (9,)
    bank_filters: tuple[int, ...] = (10,)
    filter_patches: int = 20000
    stride: int = 3
    radii: tuple[int, ...] = (4, 6, 8, 10)
    colourspace: str = "rgb"
    n_components: int = 1024
    pca_dim: int = 64
    power_normalize: bool = True
    l2_normalize: bool = True
    svm_c: float = 1.0
    svm_c_grid: tuple[float, ...] = ()
    cv_folds: int = 3
    seed: int = 0
    pca_max_descriptors: int = 1_000_000
    gmm_max_descriptors: int = 1_000_000
    gmm_max_iter: int = 200
    gmm_tol: float = 1e-5
    protocol: str = "known"
    protocol_dataset: str = ""
    protocol_species: tuple[str, ...] = ()

    def __post_init__(self):
        if self.colourspace not in ("rgb", "hsv", "ycbcr"):
            raise ConfigError(f"colourspace must be rgb, hsv or ycbcr, got {self.colourspace!r}")
        if self.protocol not in ("known", "loo", "cross"):
            raise ConfigError(f"protocol must be known, loo or cross, got {self.protocol!r}")
        if self.stride < 1 or not self.radii or min(self.radii) < 0:
            raise ConfigError("stride must be positive and radii non-negative")
        if self.n_components < 1 or self.pca_dim < 1 or self.svm_c <= 0:
            raise ConfigError("n_components, pca_dim and svm_c must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def protocol_params(self) -> dict:
        params = {}
        if self.protocol_dataset:
            params["dataset"] = self.protocol_dataset
        if self.protocol_species:
            params["species"] = list(self.protocol_species)
        return params


_HINTS = get_type_hints(ExperimentConfig)


def _parse_value(key: str, raw: str):
    hint = _HINTS[key]
    try:
        if hint is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if hint in (int, float, str):
            return hint(raw)
        item = hint.__args__[0]
        return tuple(item(v.strip()) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value)
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    cfg = parse_config(path.read_text(encoding="utf-8"))
    if cfg.manifest and not Path(cfg.manifest).is_absolute():
        cfg = cfg.replace(manifest=str(path.parent / cfg.manifest))
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n"
                   for f in fields(ExperimentConfig))
