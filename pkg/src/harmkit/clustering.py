"""K-means over sentence embeddings and cluster-stratified sampling.

Lloyd's algorithm with seeded k-means++ initialization. The assignment step
runs through harmkit.kernels (compiled when available); everything here is
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataValidationError
from .kernels import assign_nearest

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6


@dataclass
class ClusterModel:
    centroids: np.ndarray                 # (k, d)
    assignments: dict[str, int]           # sample id -> cluster index
    inertia: float
    iterations_run: int
    inertia_trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def members(self) -> dict[int, list[str]]:
        """Cluster index -> member ids, in assignment insertion order."""
        out: dict[int, list[str]] = {j: [] for j in range(self.k)}
        for sid, j in self.assignments.items():
            out[j].append(sid)
        return out


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Reads JSONL records {"id", "vector"} into an id -> vector mapping.

    Rejects missing ids, non-finite entries, and ragged dimensions, naming
    the offending record.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc
    out: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        sid = obj.get("id")
        vec = obj.get("vector")
        if not sid or not isinstance(sid, str):
            raise DataValidationError(f"line {lineno}: missing id")
        if not isinstance(vec, list) or not vec:
            raise DataValidationError(f"record {sid!r}: missing vector")
        arr = np.asarray(vec, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise DataValidationError(f"record {sid!r}: non-finite entry in vector")
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape[0] != dim:
            raise DataValidationError(
                f"record {sid!r}: dimension {arr.shape[0]} != expected {dim}")
        if sid in out:
            raise DataValidationError(f"record {sid!r}: duplicate id")
        out[sid] = arr
    return out


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    min_sq = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = float(min_sq.sum())
        if total <= 0.0:
            # all remaining points coincide with chosen centroids
            remaining = [i for i in range(n) if i not in set(chosen)]
            idx = remaining[int(rng.integers(len(remaining)))]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(min_sq), r, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        min_sq = np.minimum(min_sq, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans(
    vectors,
    k: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    init_centroids: np.ndarray | None = None,
) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    `vectors` is an id -> vector mapping or a plain sequence (ids become
    stringified positions). Stops when the relative centroid shift drops
    below `tol` or after `max_iter` iterations. Assignment ties break to the
    lowest cluster index; empty clusters are reseeded to the point farthest
    from its assigned centroid.
    """
    if isinstance(vectors, dict):
        ids = list(vectors.keys())
        x = np.asarray([vectors[i] for i in ids], dtype=np.float64)
    else:
        x = np.asarray(list(vectors), dtype=np.float64)
        ids = [str(i) for i in range(x.shape[0])]
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]
    if n == 0:
        raise DataValidationError("kmeans: empty input")
    if k < 1 or k > n:
        raise DataValidationError(f"kmeans: k={k} out of range for n={n}")
    if max_iter < 1:
        raise DataValidationError(f"kmeans: max_iter must be >= 1, got {max_iter}")
    if not np.isfinite(x).all():
        raise DataValidationError("kmeans: non-finite vector entries")

    rng = np.random.default_rng(seed)
    if init_centroids is not None:
        centroids = np.asarray(init_centroids, dtype=np.float64).copy()
        if centroids.shape != (k, x.shape[1]):
            raise DataValidationError("kmeans: init_centroids shape mismatch")
    else:
        centroids = _kmeanspp_init(x, k, rng)

    trace: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels, sq_dists = assign_nearest(x, centroids)
        trace.append(float(sq_dists.sum()))
        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = x[labels == j].mean(axis=0)
        # reseed empty clusters to the currently worst-fit points
        if (counts == 0).any():
            far_order = np.argsort(-sq_dists, kind="stable")
            cursor = 0
            for j in np.flatnonzero(counts == 0):
                new_centroids[j] = x[far_order[cursor]]
                cursor += 1
        shift = float(np.linalg.norm(new_centroids - centroids))
        scale = float(np.linalg.norm(centroids))
        centroids = new_centroids
        if shift <= tol * max(scale, 1.0):
            break

    labels, sq_dists = assign_nearest(x, centroids)
    inertia = float(sq_dists.sum())
    trace.append(inertia)
    assignments = {sid: int(lab) for sid, lab in zip(ids, labels)}
    return ClusterModel(centroids=centroids, assignments=assignments,
                        inertia=inertia, iterations_run=iterations,
                        inertia_trace=trace)


def cluster_sample(model: ClusterModel, per_cluster: int, seed: int) -> list[str]:
    """Uniform without-replacement draw of ids from every non-empty cluster.

    Clusters smaller than `per_cluster` contribute all their members. Output
    is ordered by cluster index, then selection order; deterministic for a
    fixed seed.
    """
    if per_cluster <= 0:
        raise DataValidationError(f"per_cluster must be positive, got {per_cluster}")
    if not model.assignments:
        raise DataValidationError("cluster_sample: model has no assigned samples")
    rng = random.Random(seed)
    out: list[str] = []
    members = model.members()
    for j in range(model.k):
        pool = members[j]
        if not pool:
            continue
        take = min(per_cluster, len(pool))
        out.extend(rng.sample(pool, take))
    return out


def recompute_inertia(model: ClusterModel, vectors: dict[str, np.ndarray]) -> float:
    """Inertia recomputed from scratch; used to audit a stored model."""
    total = 0.0
    for sid, j in model.assignments.items():
        diff = np.asarray(vectors[sid], dtype=np.float64) - model.centroids[j]
        total += float(diff @ diff)
    return total


def purity(assignments: dict[str, int], truth: dict[str, int]) -> float:
    """Fraction of samples in the majority truth group of their cluster."""
    from collections import Counter
    clusters: dict[int, Counter] = {}
    for sid, j in assignments.items():
        clusters.setdefault(j, Counter())[truth[sid]] += 1
    agree = sum(c.most_common(1)[0][1] for c in clusters.values())
    return agree / max(1, len(assignments))


def save_model(model: ClusterModel, path: str | Path) -> None:
    doc = {
        "k": model.k,
        "centroids": model.centroids.tolist(),
        "assignments": model.assignments,
        "inertia": model.inertia,
        "iterations_run": model.iterations_run,
        "inertia_trace": model.inertia_trace,
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ClusterModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ClusterModel(
        centroids=np.asarray(doc["centroids"], dtype=np.float64),
        assignments={str(k): int(v) for k, v in doc["assignments"].items()},
        inertia=float(doc["inertia"]),
        iterations_run=int(doc["iterations_run"]),
        inertia_trace=[float(v) for v in doc.get("inertia_trace", [])],
    )
