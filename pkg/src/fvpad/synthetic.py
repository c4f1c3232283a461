"""Desk-scale synthetic face PAD dataset.

Bona fide images are smooth shaded ellipses on an illumination gradient with
mild sensor noise. Attacks re-render the same subject through a simulated
presentation instrument:

* ``moire``  - superposed high-frequency sinusoidal interference
* ``print``  - blur and a halftone dot pattern
* ``replay`` - blur and specular banding

Subjects alternate between two pseudo-datasets that differ in illumination
and noise level, so cross-dataset runs are possible.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .ingest import Label, SampleRecord, write_manifest

SPECIES = ("moire", "print", "replay")
DATASETS = ("synthA", "synthB")
_DATASET_STYLE = {
    "synthA": {"noise": 0.012, "gradient": 0.25},
    "synthB": {"noise": 0.02, "gradient": 0.4},
}


def _bona_fide(rng: np.random.Generator, size: int, style: dict) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    angle = rng.uniform(0, 2 * np.pi)
    grad = style["gradient"] * ((xx - 0.5) * np.cos(angle) + (yy - 0.5) * np.sin(angle))
    background = rng.uniform(0.3, 0.6, size=3)[:, None, None] + grad[None]

    cx, cy = rng.uniform(0.42, 0.58, size=2)
    ax, ay = rng.uniform(0.28, 0.36), rng.uniform(0.36, 0.44)
    rot = rng.uniform(-0.3, 0.3)
    u = ((xx - cx) * np.cos(rot) + (yy - cy) * np.sin(rot)) / ax
    v = (-(xx - cx) * np.sin(rot) + (yy - cy) * np.cos(rot)) / ay
    rho2 = u * u + v * v
    mask = 1.0 / (1.0 + np.exp((rho2 - 1.0) * 12.0))
    light = rng.uniform(-0.6, 0.6, size=2)
    shading = np.clip(1.0 - 0.35 * rho2 + 0.25 * (light[0] * u + light[1] * v), 0.2, 1.2)
    skin = np.array([0.78, 0.58, 0.48]) * rng.uniform(0.8, 1.1)
    face = skin[:, None, None] * shading[None]

    img = background * (1 - mask) + face * mask
    # fine skin texture: weak band-limited noise
    texture = gaussian_filter(rng.standard_normal((size, size)), 0.8) * 0.03
    img = img + texture[None] * mask[None]
    return img


def _sensor_noise(img: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    return img + rng.normal(0.0, sigma, size=img.shape)


def _moire(img, rng, size):
    yy, xx = np.mgrid[0:size, 0:size]
    out = img.copy()
    for _ in range(2):
        f = rng.uniform(0.28, 0.42)
        th = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * f * (xx * np.cos(th) + yy * np.sin(th)) + phase)
        out = out + rng.uniform(0.05, 0.08) * wave[None]
    return out


def _print(img, rng, size):
    blurred = gaussian_filter(img, (0, 1.2, 1.2))
    yy, xx = np.mgrid[0:size, 0:size]
    period = rng.uniform(3.0, 4.5)
    th = rng.uniform(0, np.pi / 2)
    u = xx * np.cos(th) + yy * np.sin(th)
    v = -xx * np.sin(th) + yy * np.cos(th)
    dots = np.cos(2 * np.pi * u / period) * np.cos(2 * np.pi * v / period)
    return blurred * (1.0 + 0.12 * dots[None])


def _replay(img, rng, size):
    blurred = gaussian_filter(img, (0, 1.5, 1.5))
    yy = np.mgrid[0:size, 0:size][0]
    period = rng.uniform(6.0, 10.0)
    bands = 0.5 + 0.5 * np.sin(2 * np.pi * yy / period + rng.uniform(0, 2 * np.pi))
    glare_y = rng.uniform(0.2, 0.8) * size
    glare = np.exp(-((yy - glare_y) / (0.15 * size)) ** 2)
    return blurred * (0.9 + 0.1 * bands[None]) + 0.15 * glare[None]


_ATTACKS = {"moire": _moire, "print": _print, "replay": _replay}


def _to_png(img: np.ndarray, path: Path) -> None:
    arr = np.clip(np.round(np.moveaxis(img, 0, -1) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def render_sample(seed: int, subject: int, dataset: str, species: str = "",
                  size: int = 64) -> np.ndarray:
    """Float RGB planes (3, size, size) of one sample, before quantisation."""
    style = _DATASET_STYLE[dataset]
    face_rng = np.random.default_rng([seed, subject])
    img = _bona_fide(face_rng, size, style)
    stream = 0 if not species else 1 + SPECIES.index(species)
    rng = np.random.default_rng([seed, subject, stream])
    if species:
        img = _ATTACKS[species](img, rng, size)
    return np.clip(_sensor_noise(img, rng, style["noise"]), 0.0, 1.0)


def generate_synthetic_dataset(seed: int, n_per_class: int, out_dir: str | Path,
                               size: int = 64) -> Path:
    """Write PNG images and ``manifest.txt`` under ``out_dir``; return the manifest path.

    Each role (train, test) gets ``n_per_class`` subjects; every subject has
    one bona fide image and one attack per species. Train and test subjects
    are disjoint.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for role_idx, role in enumerate(("train", "test")):
        for i in range(n_per_class):
            subject = role_idx * n_per_class + i
            dataset = DATASETS[subject % len(DATASETS)]
            sid = f"s{subject:04d}"
            for species in ("",) + SPECIES:
                name = f"{sid}_{species or 'bonafide'}.png"
                path = out / "images" / name
                _to_png(render_sample(seed, subject, dataset, species, size), path)
                label = Label.ATTACK if species else Label.BONA_FIDE
                records.append(SampleRecord(str(path), label, species, sid, dataset, role))
    manifest = out / "manifest.txt"
    write_manifest(records, manifest)
    return manifest
