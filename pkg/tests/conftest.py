import numpy as np
import pytest
from PIL import Image

from fvpad.synthetic import generate_synthetic_dataset


def write_rgb(path, arr):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), "RGB").save(path)
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """6 subjects per role, 48x48 images, 3 species, 2 pseudo-datasets."""
    out = tmp_path_factory.mktemp("tiny")
    return generate_synthetic_dataset(7, 6, out, size=48)



@pytest.fixture(scope="session")
def tiny_records(tiny_dataset):
    from fvpad.ingest import load_manifest

    return load_manifest(tiny_dataset)


@pytest.fixture(scope="session")
def tiny_bank():
    from fvpad.filterbank import random_bank

    return random_bank(5, 3, seed=3)


@pytest.fixture(scope="session")
def tiny_cfg():
    from fvpad.config import ExperimentConfig

    return ExperimentConfig(n_components=4, pca_dim=8, radii=(4, 6), gmm_max_iter=30)


@pytest.fixture(scope="session")
def tiny_bundle(tiny_records, tiny_bank, tiny_cfg):
    from fvpad.protocols import fit_models

    return fit_models([r for r in tiny_records if r.role == "train"], tiny_cfg, tiny_bank)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
