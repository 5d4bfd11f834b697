"""Per-site evaluation protocol: balancing, stratified k-fold, reporting.

For one site: take the n drivers with the most sessions, drop sessions so
every driver keeps the same count s, then run stratified k-fold cross
validation with k = s, reshuffled over R repetitions. Every fold fits its
own PCA basis and forest on the training sessions only, so nothing from a
fold's test set can leak into its model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from ._parallel import ordered_map
from .align import AlignedSegment
from .features import DEFAULT_DIMS, featurize, fit_pca_model
from .model.forest import ForestModel, ForestParams, predict, train_forest
from .signals import COLUMNS


def derive_seed(*parts: int) -> int:
    """Collision-resistant child seed from integer key parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _ids_digest(session_ids: list[str]) -> int:
    joined = "\x1f".join(session_ids).encode()
    return int.from_bytes(hashlib.sha256(joined).digest()[:8], "big")


@dataclass
class SiteDataset:
    """Balanced per-driver sessions for one site, flattened in driver blocks."""

    site_id: int
    drivers: list[str]               # block order
    segments: list[AlignedSegment]   # chronological within each driver block
    sessions_per_driver: int

    @property
    def labels(self) -> list[str]:
        return [seg.driver_id for seg in self.segments]

    def block(self, driver_index: int) -> np.ndarray:
        s = self.sessions_per_driver
        return np.arange(driver_index * s, (driver_index + 1) * s)


@dataclass
class EvalReport:
    site_id: int
    drivers: list[str]          # label order of the confusion matrix rows
    n: int
    s: int
    accuracy: float
    confusion: np.ndarray       # (n, n) row-normalized percentages
    counts: np.ndarray          # (n, n) raw prediction counts
    importance: list[tuple[str, float]]  # sensors, descending
    fold_accuracies: list[float]
    seed: int
    reps: int

    def to_dict(self) -> dict:
        return {
            "site": self.site_id,
            "drivers": self.drivers,
            "n": self.n,
            "s": self.s,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "counts": self.counts.tolist(),
            "importance": [[name, w] for name, w in self.importance],
            "fold_accuracies": self.fold_accuracies,
            "seed": self.seed,
            "reps": self.reps,
        }


def group_by_driver(segments: list[AlignedSegment]) -> dict[str, list[AlignedSegment]]:
    grouped: dict[str, list[AlignedSegment]] = {}
    for seg in segments:
        grouped.setdefault(seg.driver_id, []).append(seg)
    for sessions in grouped.values():
        sessions.sort(key=lambda s: (s.session_start, s.session_id))
    return grouped


def select_top_drivers(segments: list[AlignedSegment], n: int) -> list[str]:
    """The n drivers with the most sessions; count ties break by driver id."""
    grouped = group_by_driver(segments)
    if len(grouped) < n:
        raise ValueError(f"site has {len(grouped)} drivers, need {n}")
    ranked = sorted(grouped, key=lambda d: (-len(grouped[d]), d))
    return ranked[:n]


def balance_sessions(per_driver: dict[str, list[AlignedSegment]],
                     keep: str = "latest") -> SiteDataset:
    """Equalize session counts by dropping sessions in chronological order.

    ``keep="latest"`` drops the earliest sessions (the default reading);
    ``keep="earliest"`` inverts it.
    """
    if keep not in ("latest", "earliest"):
        raise ValueError("keep must be 'latest' or 'earliest'")
    if not per_driver or any(not v for v in per_driver.values()):
        raise ValueError("every driver needs at least one session")
    s = min(len(v) for v in per_driver.values())
    drivers = sorted(per_driver)
    segments: list[AlignedSegment] = []
    for driver in drivers:
        sessions = sorted(per_driver[driver],
                          key=lambda seg: (seg.session_start, seg.session_id))
        segments.extend(sessions[-s:] if keep == "latest" else sessions[:s])
    site_id = segments[0].site_id
    return SiteDataset(site_id=site_id, drivers=drivers, segments=segments,
                       sessions_per_driver=s)


def stratified_kfold(dataset: SiteDataset, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """k = s folds; each fold's test set holds exactly one session per driver.

    Each driver's sessions are shuffled by a stream keyed on the seed and a
    digest of that driver's session ids, so fold assignment does not depend
    on the driver's label or position.
    """
    s = dataset.sessions_per_driver
    if s < 2:
        raise ValueError("stratified k-fold needs at least 2 sessions per driver")
    assignments = np.empty(len(dataset.segments), dtype=np.intp)
    for d in range(len(dataset.drivers)):
        block = dataset.block(d)
        digest = _ids_digest([dataset.segments[i].session_id for i in block])
        rng = np.random.default_rng([seed, digest])
        perm = rng.permutation(s)
        assignments[block] = perm
    folds = []
    everything = np.arange(len(dataset.segments))
    for f in range(s):
        test = everything[assignments == f]
        train = everything[assignments != f]
        folds.append((train, test))
    return folds


def featurize_segments(segments: list[AlignedSegment], model: ForestModel) -> np.ndarray:
    if model.pca is None:
        raise ValueError("model carries no PCA basis")
    return np.stack([featurize(seg, model.pca).values for seg in segments])


def fit_fold_model(train_segments: list[AlignedSegment],
                   params: ForestParams, seed: int,
                   dims: int = DEFAULT_DIMS, threads: int = 1) -> ForestModel:
    """Fit the fold's PCA basis and forest from training segments only."""
    pca = fit_pca_model(train_segments, dims=dims)
    x = np.stack([featurize(seg, pca).values for seg in train_segments])
    y = [seg.driver_id for seg in train_segments]
    model = train_forest(x, y, dc_replace(params, seed=seed), threads=threads)
    model.pca = pca
    return model


def evaluate_site(segments: list[AlignedSegment], n: int,
                  params: ForestParams = ForestParams(), seed: int = 0,
                  reps: int = 10, dims: int = DEFAULT_DIMS,
                  keep: str = "latest", threads: int = 1) -> EvalReport:
    """Run the full cross-validated identification protocol for one site."""
    top = select_top_drivers(segments, n)
    grouped = group_by_driver(segments)
    dataset = balance_sessions({d: grouped[d] for d in top}, keep=keep)
    s = dataset.sessions_per_driver
    if s < 2:
        raise ValueError("each driver needs at least 2 sessions to cross-validate")
    label_order = dataset.drivers
    label_index = {d: i for i, d in enumerate(label_order)}

    jobs = []
    for rep in range(reps):
        folds = stratified_kfold(dataset, derive_seed(seed, rep))
        for fold_i, (train_idx, test_idx) in enumerate(folds):
            jobs.append((rep, fold_i, train_idx, test_idx))

    def run(job):
        rep, fold_i, train_idx, test_idx = job
        model = fit_fold_model([dataset.segments[i] for i in train_idx],
                               params, seed=derive_seed(seed, rep, fold_i),
                               dims=dims)
        pairs = []
        for i in test_idx:
            seg = dataset.segments[i]
            pred, _ = predict(model, featurize(seg, model.pca).values)
            pairs.append((seg.driver_id, pred))
        acc = sum(t == p for t, p in pairs) / len(pairs)
        return pairs, acc, model.importances

    results = ordered_map(run, jobs, threads=threads)

    counts = np.zeros((n, n), dtype=int)
    fold_accuracies = []
    importance_sum = np.zeros_like(results[0][2])
    for pairs, acc, imp in results:
        for true, pred in pairs:
            counts[label_index[true], label_index[pred]] += 1
        fold_accuracies.append(float(acc))
        importance_sum += imp

    row_totals = counts.sum(axis=1, keepdims=True)
    confusion = 100.0 * counts / np.maximum(row_totals, 1)
    accuracy = float(np.trace(counts) / counts.sum())

    mean_imp = importance_sum / len(results)
    total = mean_imp.sum()
    if total > 0:
        mean_imp = mean_imp / total
    per_sensor = mean_imp.reshape(len(COLUMNS), -1).sum(axis=1)
    ranked = sorted(zip(COLUMNS, per_sensor), key=lambda p: -p[1])
    importance = [(name, float(w)) for name, w in ranked]

    return EvalReport(site_id=dataset.site_id, drivers=label_order, n=n, s=s,
                      accuracy=accuracy, confusion=confusion, counts=counts,
                      importance=importance, fold_accuracies=fold_accuracies,
                      seed=seed, reps=reps)
