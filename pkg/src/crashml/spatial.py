"""K-means clustering of crash coordinates into spatial cluster IDs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import SPATIAL_CLUSTER, Dataset, GeoPoint
from .errors import ClusteringError
from .seeding import substream


@dataclass
class ClusterModel:
    """Fitted centroids in the projected plane.

    Points are projected as ``(lon * lon_scale, lat)`` where ``lon_scale`` is
    the cosine of the fitting data's mean latitude.
    """

    centroids: np.ndarray
    lon_scale: float
    inertia: float
    n_iter: int = 0
    converged: bool = True
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def project(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        return np.stack([lon * self.lon_scale, lat], axis=-1)

    @property
    def geo_centroids(self) -> list[GeoPoint]:
        return [GeoPoint(float(c[1]), float(c[0] / self.lon_scale)) for c in self.centroids]

    def predict(self, lat, lon) -> np.ndarray:
        """1-based nearest-centroid index for each coordinate pair."""
        return _nearest(self.project(lat, lon).reshape(-1, 2), self.centroids) + 1

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "lon_scale": self.lon_scale,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
        }

    @classmethod
    def from_dict(cls, data) -> "ClusterModel":
        return cls(np.array(data["centroids"], dtype=np.float64), float(data["lon_scale"]), float(data["inertia"]))


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, i.e. ties go to the lowest index
    return np.argmin(_sq_dists(points, centroids), axis=1)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centres = [points[rng.integers(n)]]
    d2 = _sq_dists(points, np.array(centres))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ClusteringError("k-means++ ran out of distinct points")
        pick = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        pick = min(pick, n - 1)
        while d2[pick] == 0:
            pick = (pick + 1) % n
        centres.append(points[pick])
        d2 = np.minimum(d2, _sq_dists(points, points[pick][None, :])[:, 0])
    return np.array(centres)


def kmeans_fit(
    points: list[GeoPoint] | np.ndarray,
    k: int = 10,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-10,
    n_init: int = 10,
) -> tuple[ClusterModel, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding.

    ``points`` is a list of :class:`GeoPoint` or an ``(n, 2)`` array of
    ``(lat, lon)``.  Returns the model and 1-based assignments.  Iteration
    stops when no centroid moves by ``tol`` or more (projected degrees) or
    after ``max_iter`` rounds.  ``n_init`` restarts draw from the streams
    ``(seed, "kmeans", r)``; the lowest final inertia wins, earliest on ties.
    """
    if isinstance(points, np.ndarray):
        latlon = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    else:
        latlon = np.array([[p.latitude, p.longitude] for p in points], dtype=np.float64).reshape(-1, 2)
    if k < 1:
        raise ClusteringError("k must be at least 1")
    if latlon.shape[0] < k:
        raise ClusteringError(f"need at least k={k} points, got {latlon.shape[0]}")
    if np.unique(latlon, axis=0).shape[0] < k:
        raise ClusteringError(f"fewer than k={k} distinct points")

    if n_init < 1:
        raise ValueError("n_init must be at least 1")

    lon_scale = math.cos(math.radians(float(latlon[:, 0].mean())))
    X = ClusterModel(np.zeros((k, 2)), lon_scale, 0.0).project(latlon[:, 0], latlon[:, 1])
    best = None
    for r in range(n_init):
        fit = _lloyd(X, _kmeans_pp(X, k, substream(seed, "kmeans", r)), lon_scale, max_iter, tol)
        if best is None or fit[0].inertia < best[0].inertia:
            best = fit
    return best


def _lloyd(X, centroids, lon_scale, max_iter, tol) -> tuple[ClusterModel, np.ndarray]:
    k = centroids.shape[0]

    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, centroids)
        assign = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(X)), assign].sum()))
        new = centroids.copy()
        own = d2[np.arange(len(X)), assign]
        for j in range(k):
            members = X[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                far = int(np.argmax(own))
                new[j] = X[far]
                own[far] = -1.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            converged = True
            break

    assign = _nearest(X, centroids)
    inertia = float(_sq_dists(X, centroids)[np.arange(len(X)), assign].sum())
    history.append(inertia)
    model = ClusterModel(centroids, lon_scale, inertia, it, converged, history)
    return model, assign + 1


def kmeans_assign(model: ClusterModel, point: GeoPoint) -> int:
    return int(model.predict([point.latitude], [point.longitude])[0])


def assign_clusters(dataset: Dataset, model: ClusterModel) -> Dataset:
    """Overwrite the spatial cluster ID of every located row.

    Rows without coordinates keep the cluster ID they already carry.
    """
    col = dataset.schema.index(SPATIAL_CLUSTER)
    attr = dataset.schema.inputs[col]
    if model.k > attr.size:
        raise ClusteringError(f"k={model.k} exceeds the {attr.size} cluster IDs the schema allows")
    codes = dataset.codes[:, col].copy()
    located = dataset.has_location
    if located.any():
        ids = model.predict(dataset.lat[located], dataset.lon[located])
        codes[located] = [attr.code(str(i)) for i in ids]
    return dataset.with_column(SPATIAL_CLUSTER, codes)


def cluster_dataset(dataset: Dataset, k: int = 10, seed: int = 0, max_iter: int = 300) -> tuple[Dataset, ClusterModel]:
    located = dataset.has_location
    if not located.any():
        raise ClusteringError("no rows carry coordinates")
    latlon = np.stack([dataset.lat[located], dataset.lon[located]], axis=1)
    model, _ = kmeans_fit(latlon, k=k, seed=seed, max_iter=max_iter)
    return assign_clusters(dataset, model), model
