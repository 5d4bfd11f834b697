"""Feature extraction: per-sensor summary statistics plus spectral components.

Every aligned segment becomes a 144-value vector: for each of the 12 sensors,
7 summary statistics and the first 5 principal components of its orthonormal
Haar wavelet decomposition. PCA is fit per sensor on training segments only;
the fitted model travels with the classifier so projection at predict time
uses the training-fold basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .align import AlignedSegment
from .signals import COLUMNS, N_SENSORS

STAT_NAMES = ("mean", "std", "skew", "kurtosis", "min", "max", "autocorr")
N_STATS = len(STAT_NAMES)
DEFAULT_DIMS = 5


@dataclass(frozen=True)
class SimpleStats:
    """Population summary statistics of one sensor series."""

    mean: float
    std: float
    skew: float
    kurtosis: float  # excess
    min: float
    max: float
    autocorr: float  # lag 1

    def to_array(self) -> np.ndarray:
        return np.array([self.mean, self.std, self.skew, self.kurtosis,
                         self.min, self.max, self.autocorr])


def simple_features(series) -> SimpleStats:
    """Population moments, extrema, and lag-1 autocorrelation.

    Degenerate series (zero variance) report 0 for skew, kurtosis, and
    autocorrelation so constant channels stay finite.
    """
    x = np.asarray(series, dtype=float)
    k = len(x)
    if k < 2:
        raise ValueError("series needs at least 2 samples")
    mu = float(np.mean(x))
    c = x - mu
    m2 = float(np.mean(c ** 2))
    std = math.sqrt(m2)
    if std > 0.0:
        skew = float(np.mean(c ** 3)) / std ** 3
        kurt = float(np.mean(c ** 4)) / std ** 4 - 3.0
        autocorr = float(np.sum(c[:-1] * c[1:]) / np.sum(c ** 2))
    else:
        skew = kurt = autocorr = 0.0
    return SimpleStats(mean=mu, std=std, skew=skew, kurtosis=kurt,
                       min=float(np.min(x)), max=float(np.max(x)),
                       autocorr=autocorr)


def padded_length(k: int) -> int:
    """Next power of two >= k."""
    if k < 1:
        raise ValueError("series must be non-empty")
    return 1 if k == 1 else 1 << (k - 1).bit_length()


def haar_dwt(series) -> np.ndarray:
    """Full-depth orthonormal Haar decomposition of an edge-padded series.

    The series is padded to the next power of two by repeating its last
    value. Output order: final approximation first, then detail bands from
    coarsest to finest. The transform is orthonormal, so it preserves the
    energy of the padded series exactly.
    """
    x = np.asarray(series, dtype=float)
    m = padded_length(len(x))
    if m > len(x):
        x = np.concatenate([x, np.full(m - len(x), x[-1])])
    approx = x
    details: list[np.ndarray] = []
    while len(approx) > 1:
        even = approx[0::2]
        odd = approx[1::2]
        details.append((even - odd) / math.sqrt(2.0))
        approx = (even + odd) / math.sqrt(2.0)
    return np.concatenate([approx] + details[::-1])


def inverse_haar_dwt(coeffs) -> np.ndarray:
    """Reconstruct the padded series from :func:`haar_dwt` output."""
    c = np.asarray(coeffs, dtype=float)
    m = len(c)
    if m & (m - 1):
        raise ValueError("coefficient length must be a power of two")
    approx = c[:1]
    pos = 1
    while pos < m:
        detail = c[pos:pos + len(approx)]
        out = np.empty(2 * len(approx))
        out[0::2] = (approx + detail) / math.sqrt(2.0)
        out[1::2] = (approx - detail) / math.sqrt(2.0)
        approx = out
        pos += len(detail)
    return approx


@dataclass
class SensorPca:
    mean: np.ndarray        # (M,)
    components: np.ndarray  # (dims, M), orthonormal rows (zero rows if rank-deficient)
    variances: np.ndarray   # (dims,), non-increasing, zeros past the rank


@dataclass
class PcaModel:
    """Per-sensor PCA bases fit on one site's training segments."""

    site_id: int
    dims: int
    length: int  # padded DWT length M
    sensors: list[SensorPca]

    def to_dict(self) -> dict:
        return {
            "site": self.site_id,
            "dims": self.dims,
            "length": self.length,
            "sensors": [{"mean": s.mean.tolist(),
                         "components": s.components.tolist(),
                         "variances": s.variances.tolist()}
                        for s in self.sensors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaModel":
        sensors = [SensorPca(mean=np.array(s["mean"], dtype=float),
                             components=np.array(s["components"], dtype=float),
                             variances=np.array(s["variances"], dtype=float))
                   for s in data["sensors"]]
        return cls(site_id=int(data["site"]), dims=int(data["dims"]),
                   length=int(data["length"]), sensors=sensors)


def fit_pca(vectors, dims: int = DEFAULT_DIMS) -> SensorPca:
    """Top principal components of the rows of ``vectors``.

    Components are the leading eigenvectors of the centered sample
    covariance, eigenvalues descending, each component's sign fixed so its
    largest-magnitude entry is positive. Fewer than ``dims`` directions are
    kept when the data is rank-deficient; the remainder is zero-padded.
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("PCA needs at least 2 training vectors")
    n, m = x.shape
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    tol = svals[0] * max(n, m) * np.finfo(float).eps if svals.size else 0.0
    rank = int(np.sum(svals > tol))
    keep = min(dims, rank, n - 1, m)

    components = np.zeros((dims, m))
    variances = np.zeros(dims)
    for i in range(keep):
        comp = vt[i]
        j = int(np.argmax(np.abs(comp)))
        if comp[j] < 0:
            comp = -comp
        components[i] = comp
        variances[i] = svals[i] ** 2 / (n - 1)
    return SensorPca(mean=mean, components=components, variances=variances)


def fit_pca_model(segments: list[AlignedSegment], dims: int = DEFAULT_DIMS) -> PcaModel:
    """Fit one PCA basis per sensor from the segments' DWT coefficients."""
    if len(segments) < 2:
        raise ValueError("PCA needs at least 2 training segments")
    site = segments[0].site_id
    if any(s.site_id != site for s in segments):
        raise ValueError("training segments span multiple sites")
    m = padded_length(segments[0].k)
    sensors = []
    for col in range(N_SENSORS):
        mat = np.stack([haar_dwt(seg.matrix[:, col]) for seg in segments])
        sensors.append(fit_pca(mat, dims))
    return PcaModel(site_id=site, dims=dims, length=m, sensors=sensors)


@dataclass
class FeatureVector:
    """One session's flattened features plus its labels."""

    values: np.ndarray  # (12 * (7 + dims),)
    driver_id: str
    session_id: str


def featurize(segment: AlignedSegment, model: PcaModel) -> FeatureVector:
    """Concatenate per-sensor statistics and PCA-projected DWT coefficients.

    Layout is sensor-major: sensor 1's 7 statistics then its spectral
    components, sensor 2's, and so on.
    """
    if segment.site_id != model.site_id:
        raise ValueError(
            f"segment site {segment.site_id} does not match model site {model.site_id}")
    blocks = []
    for col in range(N_SENSORS):
        series = segment.matrix[:, col]
        stats = simple_features(series).to_array()
        coeffs = haar_dwt(series)
        if len(coeffs) != model.length:
            raise ValueError("segment length does not match the fitted model")
        pca = model.sensors[col]
        proj = pca.components @ (coeffs - pca.mean)
        blocks.append(np.concatenate([stats, proj]))
    return FeatureVector(values=np.concatenate(blocks),
                         driver_id=segment.driver_id,
                         session_id=segment.session_id)


def feature_names(dims: int = DEFAULT_DIMS) -> list[str]:
    """Column names matching the featurize layout, e.g. ``speed.pc3``."""
    names = []
    for sensor in COLUMNS:
        names.extend(f"{sensor}.{stat}" for stat in STAT_NAMES)
        names.extend(f"{sensor}.pc{i + 1}" for i in range(dims))
    return names
