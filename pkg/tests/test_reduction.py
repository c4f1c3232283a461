import numpy as np
import pytest

from fvpad.reduction import LowRetainedVarianceWarning, PcaError, fit_pca, project


def _aligned(basis, vecs):
    """Flip oracle eigenvectors (columns) to the basis' sign convention."""
    signs = np.sign(np.sum(basis * vecs.T, axis=1))
    return vecs.T * signs[:, None]


def test_eigenpairs_vs_dense_oracle(rng):
    x = rng.standard_normal((3000, 384)) * np.linspace(3, 0.5, 384)
    model = fit_pca(x, 64)
    evals, evecs = np.linalg.eigh(np.cov(x, rowvar=False))
    evals, evecs = evals[::-1][:64], evecs[:, ::-1][:, :64]
    np.testing.assert_allclose(model.eigenvalues, evals, rtol=1e-8)
    ref = _aligned(model.basis, evecs)
    np.testing.assert_allclose(model.basis, ref, atol=1e-8)
    np.testing.assert_allclose(model.basis @ model.basis.T, np.eye(64), atol=1e-8)


def test_svd_route_agrees(rng):
    x = rng.standard_normal((500, 20)) @ rng.standard_normal((20, 20))
    model = fit_pca(x, 5)
    _, s, vt = np.linalg.svd(x - x.mean(axis=0), full_matrices=False)
    np.testing.assert_allclose(model.eigenvalues, s[:5] ** 2 / (len(x) - 1), rtol=1e-9)
    np.testing.assert_allclose(np.abs(model.basis @ vt[:5].T), np.eye(5), atol=1e-8)


def test_rank_one_line(rng):
    t = rng.standard_normal(200)
    x = np.zeros((200, 384))
    x[:, 0], x[:, 1] = t, 2 * t
    model = fit_pca(x, 1)
    assert model.retained_variance_fraction == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(model.basis[0, :2]), np.array([1, 2]) / np.sqrt(5))
    with pytest.raises(PcaError, match="rank 1"):
        fit_pca(x, 64)


def test_projection_centred_and_variances(rng):
    x = rng.standard_normal((2000, 50)) * np.arange(1, 51)
    model = fit_pca(x, 10)
    p = project(model, x)
    np.testing.assert_allclose(p.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(p.var(axis=0, ddof=1), model.eigenvalues, rtol=1e-6)


def test_project_examples(rng):
    x = rng.standard_normal((300, 30))
    model = fit_pca(x, 8)
    np.testing.assert_allclose(project(model, model.mean), 0.0, atol=1e-12)
    for k in (0, 3, 7):
        e = np.zeros(8)
        e[k] = 1.0
        np.testing.assert_allclose(project(model, model.mean + model.basis[k]), e, atol=1e-12)
    batch = project(model, x[:5])
    for i in range(5):
        np.testing.assert_allclose(batch[i], project(model, x[i]), rtol=1e-13, atol=1e-13)
    with pytest.raises(PcaError, match="dims"):
        project(model, np.zeros(31))


def test_low_variance_warning(rng):
    x = rng.standard_normal((500, 100))
    with pytest.warns(LowRetainedVarianceWarning):
        model = fit_pca(x, 10)
    assert model.low_variance


def test_too_few_samples(rng):
    with pytest.raises(PcaError, match="more than"):
        fit_pca(rng.standard_normal((64, 384)), 64)
