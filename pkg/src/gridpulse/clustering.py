"""Per-cell features, Lloyd's k-means, information-criterion k selection and
activity tiers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TextIO

import numpy as np

from ._parallel import thread_count
from .cube import DAY_MS, HOUR_MS, ActivityCube, hourly

FEATURE_SETS = ("profile", "total")
TIER_NAMES_3 = ("low", "medium", "high")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """One row of features per grid cell.

    ``activity_col`` indexes the log-total-activity column used to order
    tiers. For ``normalization="zscore"`` the per-column ``mean`` and ``std``
    of the raw features are kept so the same transform can be applied to
    unseen cells; ``constant`` flags columns that had zero spread.
    """

    values: np.ndarray
    cells: np.ndarray
    names: tuple[str, ...]
    activity_col: int
    normalization: str = "raw"
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    constant: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise ValueError("values must be n x d with one name per column")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix has non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=int).reshape(-1, 2))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def raw_activity(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Activity column in raw units for ``rows`` (default: all points)."""
        col = self.values[:, self.activity_col] if rows is None else np.asarray(rows)[..., self.activity_col]
        if self.normalization == "zscore":
            return col * self.std[self.activity_col] + self.mean[self.activity_col]
        return col

    def to_csv(self, fh: TextIO) -> None:
        fh.write("row,col," + ",".join(self.names) + "\n")
        for (r, c), row in zip(self.cells, self.values):
            fh.write(f"{r},{c}," + ",".join(repr(float(v)) for v in row) + "\n")


def extract_features(cube: ActivityCube, kind: str = "profile") -> FeatureMatrix:
    """Per-cell features from a cube with at least one day of data.

    ``profile`` (default): mean activity for each hour of the day (24 values,
    hour-of-day counted from midnight of the epoch day) followed by
    ``log(1 + total activity)``. ``total``: the log-total column alone.
    """
    if kind not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {kind!r}; expected one of {FEATURE_SETS}")
    if cube.n_bins * cube.bin_width_ms < DAY_MS:
        raise ValueError("feature extraction needs at least 24 hours of data")
    grid = cube.grid
    flat = cube.data.reshape(grid.n_cells, cube.n_bins)
    log_total = np.log1p(flat.sum(axis=1))
    cells = np.array([(r, c) for r in range(grid.rows) for c in range(grid.cols)])
    if kind == "total":
        return FeatureMatrix(log_total[:, None], cells, ("log_total",), 0)
    hours = hourly(cube).data.reshape(grid.n_cells, -1)
    first_hour = (cube.start_ms % DAY_MS) // HOUR_MS
    hod = (first_hour + np.arange(hours.shape[1])) % 24
    profile = np.stack([hours[:, hod == h].mean(axis=1) for h in range(24)], axis=1)
    names = tuple(f"hour_{h:02d}" for h in range(24)) + ("log_total",)
    return FeatureMatrix(np.column_stack([profile, log_total]), cells, names, 24)


def zscore_normalize(m: FeatureMatrix) -> FeatureMatrix:
    """Standardise every column with its population mean and std.

    Constant columns are set to 0 and flagged rather than rejected.
    """
    if m.normalization != "raw":
        raise ValueError("matrix is already normalised")
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)
    constant = m.values.max(axis=0) == m.values.min(axis=0)
    safe = np.where(constant, 1.0, std)
    z = np.where(constant, 0.0, (m.values - mean) / safe)
    return replace(m, values=z, normalization="zscore", mean=mean, std=safe, constant=constant)


def apply_normalization(m: FeatureMatrix, reference: FeatureMatrix) -> FeatureMatrix:
    """Apply ``reference``'s stored z-score transform to raw matrix ``m``."""
    if m.normalization != "raw":
        raise ValueError("expected a raw matrix")
    if reference.normalization == "raw":
        return m
    z = np.where(reference.constant, 0.0, (m.values - reference.mean) / reference.std)
    return replace(m, values=z, normalization="zscore", mean=reference.mean, std=reference.std,
                   constant=reference.constant)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wcss: float
    tier_order: np.ndarray
    iterations: int
    seed: int
    converged: bool = True
    wcss_history: tuple[float, ...] = ()

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _as_array(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, FeatureMatrix) else m, dtype=float)


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    return (diff * diff).sum(axis=2)


def _wcss(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> float:
    diff = X - C[labels]
    return float((diff * diff).sum())


def _update_centroids(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> np.ndarray:
    k = len(C)
    new = C.copy()
    empty = []
    for j in range(k):
        members = labels == j
        if members.any():
            new[j] = X[members].mean(axis=0)
        else:
            empty.append(j)
    if empty:
        # re-seed each empty cluster at the point farthest from its current centroid
        dist = ((X - C[labels]) ** 2).sum(axis=1)
        for j in empty:
            p = int(np.argmax(dist))
            new[j] = X[p]
            dist[p] = -1.0
    return new


def activity_order(centroids: np.ndarray, m) -> np.ndarray:
    """Cluster ids sorted by ascending centroid activity (stable on ties)."""
    if isinstance(m, FeatureMatrix):
        key = m.raw_activity(centroids)
    else:
        key = centroids.mean(axis=1)
    return np.argsort(key, kind="stable")


def kmeans(m, k: int, seed: int = 0, max_iter: int = 300) -> ClusterModel:
    """Lloyd's k-means.

    Centroids start at ``k`` distinct data points drawn uniformly without
    replacement by ``numpy.random.default_rng(seed)``. Points go to the
    nearest centroid by squared Euclidean distance, lowest index on ties.
    Centroids then move to the mean of their points, and the two steps
    repeat until no label changes or ``max_iter`` updates have run.
    """
    X = _as_array(m)
    n = len(X)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    rng = np.random.default_rng(seed)
    C = X[rng.choice(n, size=k, replace=False)].copy()
    labels = np.argmin(_sq_dists(X, C), axis=1)
    history = [_wcss(X, C, labels)]
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        C = _update_centroids(X, labels, C)
        new = np.argmin(_sq_dists(X, C), axis=1)
        history.append(_wcss(X, C, new))
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
    return ClusterModel(
        k=k,
        centroids=C,
        labels=labels,
        wcss=history[-1],
        tier_order=activity_order(C, m),
        iterations=iterations,
        seed=seed,
        converged=converged,
        wcss_history=tuple(history),
    )


@dataclass(frozen=True)
class KScore:
    k: int
    wcss: float
    aic: float
    bic: float


@dataclass(eq=False)
class KSelectionReport:
    scores: list[KScore]
    chosen_k: dict[str, int]
    criterion: str
    models: dict[int, ClusterModel] = field(default_factory=dict, repr=False)

    @property
    def best(self) -> ClusterModel:
        return self.models[self.chosen_k[self.criterion]]

    def to_csv(self, fh: TextIO) -> None:
        fh.write("k,wcss,aic,bic\n")
        for s in self.scores:
            fh.write(f"{s.k},{s.wcss!r},{s.aic!r},{s.bic!r}\n")


def information_criteria(wcss: float, counts: np.ndarray, n: int, d: int, mixing: bool = True) -> tuple[float, float]:
    """AIC and BIC for a hard-assigned spherical Gaussian mixture with one
    shared variance ``wcss / (n*d)``.

    With ``mixing`` the log-likelihood includes the cluster proportion term
    ``sum_j n_j ln(n_j / n)`` and the ``k - 1`` proportions are counted as
    parameters (the x-means form). Without it the score depends on WCSS
    alone, which keeps falling as k grows and over-splits compact blobs.
    """
    k = len(counts)
    var = max(wcss / (n * d), np.finfo(float).tiny)
    neg2ll = n * d * math.log(var)
    p = k * d + 1
    if mixing:
        nz = counts[counts > 0]
        neg2ll -= 2.0 * float((nz * np.log(nz / n)).sum())
        p += k - 1
    return neg2ll + 2 * p, neg2ll + p * math.log(n)


def restart_seed(seed: int, k: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, k, restart]).generate_state(1)[0])


def score_k(m, k_range, criterion: str = "bic", seed: int = 0, restarts: int = 10,
            mixing: bool = True) -> KSelectionReport:
    """Fit k-means for each k (best WCSS of ``restarts`` runs) and pick the k
    minimising AIC or BIC, lowest k on ties."""
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError(f"criterion must be aic or bic, got {criterion!r}")
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    X = _as_array(m)
    n, d = X.shape
    if ks[0] < 1 or ks[-1] > n:
        raise ValueError(f"k range must lie within [1, {n}]")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")

    tasks = [(k, r) for k in ks for r in range(restarts)]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        fits = list(pool.map(lambda t: kmeans(m, t[0], restart_seed(seed, *t)), tasks))

    models: dict[int, ClusterModel] = {}
    for (k, _), fit in zip(tasks, fits):
        if k not in models or fit.wcss < models[k].wcss:
            models[k] = fit
    scores = []
    for k in ks:
        aic, bic = information_criteria(models[k].wcss, models[k].counts(), n, d, mixing)
        scores.append(KScore(k, models[k].wcss, aic, bic))
    chosen = {
        "aic": min(scores, key=lambda s: (s.aic, s.k)).k,
        "bic": min(scores, key=lambda s: (s.bic, s.k)).k,
    }
    return KSelectionReport(scores, chosen, criterion, models)


def tier_names(k: int) -> tuple[str, ...]:
    return TIER_NAMES_3 if k == 3 else tuple(f"tier_{i}" for i in range(k))


def tier_ranks(model: ClusterModel, m) -> np.ndarray:
    """Tier rank (0 = least active) of every point."""
    order = activity_order(model.centroids, m)
    rank_of_cluster = np.empty(model.k, dtype=int)
    rank_of_cluster[order] = np.arange(model.k)
    return rank_of_cluster[model.labels]


def tier_labels(model: ClusterModel, m: FeatureMatrix) -> dict[tuple[int, int], str]:
    """Map each cell to ``low``/``medium``/``high`` (k=3) or ``tier_i``."""
    names = tier_names(model.k)
    ranks = tier_ranks(model, m)
    return {(int(r), int(c)): names[t] for (r, c), t in zip(m.cells, ranks)}


def export_clusters_csv(model: ClusterModel, m: FeatureMatrix, fh: TextIO) -> None:
    names = tier_names(model.k)
    ranks = tier_ranks(model, m)
    fh.write("row,col,cluster_id,tier\n")
    for (r, c), lab, t in zip(m.cells, model.labels, ranks):
        fh.write(f"{r},{c},{lab},{names[t]}\n")
