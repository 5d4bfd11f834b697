import math

import numpy as np
import pytest
from scipy import stats

from turnid.features import (feature_names, featurize, fit_pca,
                             fit_pca_model, haar_dwt, inverse_haar_dwt,
                             padded_length, simple_features)
from turnid.signals import COLUMNS

from conftest import make_aligned


class TestSimpleFeatures:
    def test_hand_values(self):
        s = simple_features([1.0, 2.0, 3.0, 4.0])
        assert s.mean == 2.5
        assert s.std == pytest.approx(math.sqrt(1.25))
        assert s.skew == pytest.approx(0.0, abs=1e-12)
        assert s.kurtosis == pytest.approx(-1.36)
        assert s.min == 1.0 and s.max == 4.0
        assert s.autocorr == pytest.approx(0.25)

    def test_constant_series_conventions(self):
        s = simple_features([3.0] * 10)
        assert (s.mean, s.min, s.max) == (3.0, 3.0, 3.0)
        assert (s.std, s.skew, s.kurtosis, s.autocorr) == (0.0, 0.0, 0.0, 0.0)

    def test_symmetric_pair_zero_skew(self):
        assert simple_features([-7.0, 7.0]).skew == pytest.approx(0.0, abs=1e-12)

    def test_against_scipy_population_moments(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            x = rng.standard_normal(rng.integers(4, 200)) * rng.uniform(0.1, 10)
            s = simple_features(x)
            assert s.mean == pytest.approx(np.mean(x), rel=1e-12)
            assert s.std == pytest.approx(np.std(x), rel=1e-12)
            assert s.skew == pytest.approx(stats.skew(x, bias=True), rel=1e-9)
            assert s.kurtosis == pytest.approx(
                stats.kurtosis(x, fisher=True, bias=True), rel=1e-9)
            mu = np.mean(x)
            expect_ac = np.sum((x[:-1] - mu) * (x[1:] - mu)) / np.sum((x - mu) ** 2)
            assert s.autocorr == pytest.approx(expect_ac, rel=1e-12)
            assert abs(s.autocorr) <= 1.0 + 1e-12

    def test_shift_equivariance(self):
        rng = np.random.default_rng(23)
        for _ in range(15):
            x = rng.standard_normal(50)
            c = rng.uniform(-100, 100)
            a = simple_features(x)
            b = simple_features(x + c)
            assert b.mean == pytest.approx(a.mean + c, abs=1e-12 * max(1, abs(c)))
            assert b.min == pytest.approx(a.min + c, abs=1e-12 * max(1, abs(c)))
            assert b.max == pytest.approx(a.max + c, abs=1e-12 * max(1, abs(c)))
            assert b.std == pytest.approx(a.std, abs=1e-12)
            assert b.skew == pytest.approx(a.skew, abs=1e-9)
            assert b.kurtosis == pytest.approx(a.kurtosis, abs=1e-9)
            assert b.autocorr == pytest.approx(a.autocorr, abs=1e-9)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            simple_features([1.0])


def haar_matrix(m: int) -> np.ndarray:
    """Independent construction of the orthonormal Haar analysis matrix.

    Row 0 is the global average; then detail rows from coarsest to finest,
    each +1 over the first half of its support and -1 over the second,
    scaled to unit norm.
    """
    rows = [np.full(m, 1.0 / math.sqrt(m))]
    level = 1
    while level < m:
        block = m // level
        for k in range(level):
            row = np.zeros(m)
            start = k * block
            half = block // 2
            row[start:start + half] = 1.0
            row[start + half:start + block] = -1.0
            rows.append(row / math.sqrt(block))
        level *= 2
    return np.array(rows)


class TestHaarDwt:
    def test_constant_four(self):
        assert np.allclose(haar_dwt([1.0, 1.0, 1.0, 1.0]), [2.0, 0.0, 0.0, 0.0])

    def test_pair(self):
        assert np.allclose(haar_dwt([1.0, -1.0]), [0.0, math.sqrt(2.0)])

    def test_zeros(self):
        assert np.all(haar_dwt(np.zeros(16)) == 0.0)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(31)
        for m in (2, 4, 8, 16, 32):
            w = haar_matrix(m)
            assert np.allclose(w @ w.T, np.eye(m), atol=1e-12)
            for _ in range(5):
                x = rng.standard_normal(m)
                assert np.allclose(haar_dwt(x), w @ x, atol=1e-10)

    def test_padding_repeats_last_value(self):
        x = np.array([3.0, 1.0, 2.0])
        assert padded_length(3) == 4
        assert np.allclose(haar_dwt(x), haar_dwt([3.0, 1.0, 2.0, 2.0]))

    def test_energy_preservation(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            k = int(rng.integers(2, 300))
            x = rng.standard_normal(k)
            padded = np.concatenate([x, np.full(padded_length(k) - k, x[-1])])
            c = haar_dwt(x)
            assert np.sum(c ** 2) == pytest.approx(np.sum(padded ** 2), rel=1e-9)

    def test_perfect_reconstruction(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            k = int(rng.integers(1, 260))
            x = rng.standard_normal(k)
            padded = np.concatenate([x, np.full(padded_length(k) - k, x[-1])])
            rec = inverse_haar_dwt(haar_dwt(x))
            assert np.allclose(rec, padded, atol=1e-9)


def pca_eig_oracle(x: np.ndarray, dims: int):
    """Covariance + symmetric eigendecomposition route."""
    cov = np.cov(x, rowvar=False)
    vals, vecs = np.linalg.eigh(np.atleast_2d(cov))
    order = np.argsort(vals)[::-1]
    return vals[order][:dims], vecs[:, order][:, :dims].T


class TestFitPca:
    def test_rank_one_line(self):
        t = np.linspace(-2, 2, 9)
        direction = np.array([3.0, 4.0]) / 5.0
        x = np.outer(t, direction) + np.array([1.0, -1.0])
        pca = fit_pca(x, dims=2)
        assert abs(np.dot(pca.components[0], direction)) == pytest.approx(1.0)
        assert pca.variances[0] > 0
        assert pca.variances[1] == pytest.approx(0.0, abs=1e-20)
        assert pca.variances[0] / pca.variances.sum() == pytest.approx(1.0)

    def test_mirrored_pair(self):
        p = np.array([2.0, -1.0, 0.5])
        pca = fit_pca(np.stack([p, -p]), dims=3)
        unit = p / np.linalg.norm(p)
        assert abs(np.dot(pca.components[0], unit)) == pytest.approx(1.0)
        # sample covariance of {p, -p} is 2 p p^T: top eigenvalue 2 |p|^2
        assert pca.variances[0] == pytest.approx(2 * np.sum(p ** 2))
        assert np.allclose(pca.components[1:], 0.0)

    def test_isotropic_degenerate(self):
        angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        x = np.column_stack([np.cos(angles), np.sin(angles)])
        pca = fit_pca(x, dims=2)
        gram = pca.components @ pca.components.T
        assert np.allclose(gram, np.eye(2), atol=1e-10)
        assert pca.variances.sum() == pytest.approx(
            np.trace(np.cov(x, rowvar=False)), rel=1e-9)

    def test_matches_eigendecomposition_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(25):
            n = int(rng.integers(6, 20))
            m = int(rng.integers(2, 9))
            x = rng.standard_normal((n, m)) * rng.uniform(0.5, 3.0, size=m)
            dims = min(5, m)
            pca = fit_pca(x, dims=dims)
            vals, vecs = pca_eig_oracle(x, dims)
            keep = min(dims, n - 1, m)
            assert np.allclose(pca.variances[:keep], np.clip(vals[:keep], 0, None),
                               atol=1e-8)
            for i in range(keep):
                if vals[i] > 1e-8 and (i + 1 >= len(vals) or vals[i] - abs(vals[i + 1]) > 1e-6):
                    assert abs(np.dot(pca.components[i], vecs[i])) == pytest.approx(
                        1.0, abs=1e-7)

    def test_orthonormal_components(self):
        rng = np.random.default_rng(47)
        x = rng.standard_normal((30, 16))
        pca = fit_pca(x, dims=5)
        gram = pca.components @ pca.components.T
        assert np.allclose(gram, np.eye(5), atol=1e-10)

    def test_projection_variance_equals_eigenvalue(self):
        rng = np.random.default_rng(53)
        x = rng.standard_normal((40, 12))
        pca = fit_pca(x, dims=5)
        proj = (x - pca.mean) @ pca.components.T
        emp = proj.var(axis=0, ddof=1)
        assert np.allclose(emp, pca.variances, rtol=1e-6)

    def test_sign_convention(self):
        rng = np.random.default_rng(59)
        x = rng.standard_normal((10, 6))
        pca = fit_pca(x, dims=3)
        for comp in pca.components:
            if np.any(comp != 0):
                assert comp[np.argmax(np.abs(comp))] > 0

    def test_needs_two_vectors(self):
        with pytest.raises(ValueError):
            fit_pca(np.ones((1, 4)))


class TestFeaturize:
    def test_vector_length(self):
        segs = [make_aligned("dA", f"s{j}", seed=j) for j in range(4)]
        model = fit_pca_model(segs)
        vec = featurize(segs[0], model)
        assert vec.values.shape == (144,)
        assert np.all(np.isfinite(vec.values))
        assert len(feature_names()) == 144

    def test_zero_segment_zero_model(self):
        segs = [make_aligned("dA", f"s{j}", seed=j) for j in range(4)]
        for seg in segs:
            seg.matrix[:] = 0.0
        model = fit_pca_model(segs)
        vec = featurize(segs[0], model)
        assert np.allclose(vec.values, 0.0)

    def test_reconstruction_error_is_discarded_mass(self):
        # 6 training vectors, rank 5: keeping 3 components leaves exactly
        # the two discarded eigenvalues as mean squared residual
        rng = np.random.default_rng(61)
        x = rng.standard_normal((6, 8))
        pca = fit_pca(x, dims=3)
        full_vals, _ = pca_eig_oracle(x, 8)
        centered = x - pca.mean
        recon = (centered @ pca.components.T) @ pca.components
        residual = np.sum((centered - recon) ** 2) / (len(x) - 1)
        discarded = np.sum(np.clip(full_vals[3:], 0, None))
        assert residual == pytest.approx(discarded, rel=1e-9)

        # full-rank keep: residual vanishes
        pca5 = fit_pca(x, dims=5)
        recon5 = (centered @ pca5.components.T) @ pca5.components
        assert np.sum((centered - recon5) ** 2) / (len(x) - 1) == pytest.approx(
            0.0, abs=1e-18)

    def test_site_mismatch(self):
        segs = [make_aligned("dA", f"s{j}", seed=j) for j in range(3)]
        model = fit_pca_model(segs)
        other = make_aligned("dA", "sX", site_id=2)
        with pytest.raises(ValueError, match="site"):
            featurize(other, model)

    def test_sensor_major_layout(self):
        segs = [make_aligned("dA", f"s{j}", seed=j) for j in range(3)]
        model = fit_pca_model(segs)
        vec = featurize(segs[0], model)
        names = feature_names()
        first_sensor = COLUMNS[0]
        assert names[0] == f"{first_sensor}.mean"
        assert names[7] == f"{first_sensor}.pc1"
        assert names[12] == f"{COLUMNS[1]}.mean"
        stats7 = simple_features(segs[0].matrix[:, 0])
        assert vec.values[0] == pytest.approx(stats7.mean)
        assert vec.values[4] == pytest.approx(stats7.min)
