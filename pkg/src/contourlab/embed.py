"""Dimensionality reduction: exact PCA and a self-contained UMAP.

Both are exposed as estimator classes (``fit`` / ``transform`` /
``get_params``) plus thin functional wrappers used by the CLI and pipeline.

The UMAP here is deliberately free of external implementations so that every
stage is reproducible bit-for-bit from a seed:

- exact kNN (chunked O(n^2) with ties broken by index),
- per-point bandwidth calibration by binary search so the smoothed neighbor
  weights sum to log2(k),
- fuzzy union symmetrization W + W' - W.W',
- spectral initialization from the normalized graph Laplacian (dense solver
  for small n, Lanczos with a fixed start vector otherwise, seeded Gaussian
  if both fail),
- sequential SGD over edges with a per-epoch seeded shuffle and an internal
  Tausworthe generator, so the optimization is identical run to run.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
from numba import njit
from scipy.optimize import curve_fit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

__all__ = ["PcaModel", "UmapModel", "pca", "umap", "umap_transform"]

_SMOOTH_K_TOLERANCE = 1e-5
_MIN_K_DIST_SCALE = 1e-3


# --- PCA --------------------------------------------------------------------


class PcaModel(BaseEstimator):
    """PCA via the eigendecomposition of the sample covariance matrix.

    Components are orthonormal rows ordered by decreasing explained variance,
    with a deterministic sign convention (largest-magnitude loading positive).
    """

    def __init__(self, n_components: int | None = None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError("PCA needs at least 2 rows")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = centered.T @ centered / (X.shape[0] - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        k = self.n_components if self.n_components is not None else X.shape[1]
        k = min(k, X.shape[1])
        components = eigvecs[:, order[:k]].T
        for row in components:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        self.components_ = components
        self.explained_variance_ = np.maximum(eigvals[order[:k]], 0.0)
        total = max(float(eigvals.sum()), np.finfo(float).tiny)
        self.explained_variance_ratio_ = self.explained_variance_ / total
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) @ self.components_.T

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def inverse_transform(self, Y):
        check_is_fitted(self, "components_")
        Y = np.asarray(Y, dtype=np.float64)
        return Y @ self.components_ + self.mean_


def pca(matrix, n_components: int | None = None):
    """Fit PCA and return (projected coordinates, fitted model)."""
    model = PcaModel(n_components=n_components).fit(matrix)
    return model.transform(matrix), model


# --- exact k-nearest-neighbor search ---------------------------------------


def _knn(queries, corpus, k: int):
    """Indices and distances of the k nearest corpus rows per query row.

    Ties are broken by corpus index, so the neighbor lists are canonical.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    corpus = np.ascontiguousarray(corpus, dtype=np.float64)
    nq = queries.shape[0]
    idx = np.empty((nq, k), dtype=np.int64)
    d2out = np.empty((nq, k))
    corpus_sq = np.sum(corpus**2, axis=1)
    chunk = max(1, 4_000_000 // max(corpus.shape[0], 1))
    for start in range(0, nq, chunk):
        q = queries[start : start + chunk]
        q_sq = np.sum(q**2, axis=1)
        d2 = q_sq[:, None] + corpus_sq[None, :] - 2.0 * (q @ corpus.T)
        np.maximum(d2, 0.0, out=d2)
        # the expansion leaves O(eps)-scale residue on coincident rows; snap it
        # to an exact zero so duplicates tie canonically and rho stays the
        # distance to the nearest genuinely distinct neighbor
        d2[d2 <= 1e-12 * (q_sq[:, None] + corpus_sq[None, :])] = 0.0
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        pd = np.take_along_axis(d2, part, axis=1)
        for r in range(part.shape[0]):
            order = np.lexsort((part[r], pd[r]))
            idx[start + r] = part[r][order]
            d2out[start + r] = pd[r][order]
    return idx, np.sqrt(d2out)


# --- fuzzy neighborhood graph ----------------------------------------------


@njit(cache=True)
def _smooth_knn_dist(distances, k, n_iter=64, local_connectivity=1.0):
    """Per-row (sigma, rho): rho is the nearest nonzero distance and sigma is
    binary-searched so sum_j exp(-(d_ij - rho_i)/sigma_i) hits log2(k)."""
    target = np.log2(k)
    n = distances.shape[0]
    rho = np.zeros(n)
    sigma = np.zeros(n)
    mean_distances = np.mean(distances)

    for i in range(n):
        lo = 0.0
        hi = np.inf
        mid = 1.0
        ith = distances[i]
        non_zero = ith[ith > 0.0]
        if non_zero.shape[0] >= local_connectivity:
            index = int(np.floor(local_connectivity))
            interpolation = local_connectivity - index
            if index > 0:
                rho[i] = non_zero[index - 1]
                if interpolation > _SMOOTH_K_TOLERANCE:
                    rho[i] += interpolation * (non_zero[index] - non_zero[index - 1])
            else:
                rho[i] = interpolation * non_zero[0]
        elif non_zero.shape[0] > 0:
            rho[i] = np.max(non_zero)

        for _ in range(n_iter):
            psum = 0.0
            for j in range(1, distances.shape[1]):
                d = distances[i, j] - rho[i]
                if d > 0:
                    psum += np.exp(-(d / mid))
                else:
                    psum += 1.0
            if np.fabs(psum - target) < _SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                if hi == np.inf:
                    mid *= 2.0
                else:
                    mid = (lo + hi) / 2.0
        sigma[i] = mid

        if rho[i] > 0.0:
            mean_ith = np.mean(ith)
            if sigma[i] < _MIN_K_DIST_SCALE * mean_ith:
                sigma[i] = _MIN_K_DIST_SCALE * mean_ith
        else:
            if sigma[i] < _MIN_K_DIST_SCALE * mean_distances:
                sigma[i] = _MIN_K_DIST_SCALE * mean_distances
    return sigma, rho


@njit(cache=True)
def _membership_strengths(knn_indices, knn_dists, sigmas, rhos):
    n_samples, n_neighbors = knn_indices.shape
    rows = np.zeros(n_samples * n_neighbors, dtype=np.int64)
    cols = np.zeros(n_samples * n_neighbors, dtype=np.int64)
    vals = np.zeros(n_samples * n_neighbors)
    for i in range(n_samples):
        for j in range(n_neighbors):
            if knn_indices[i, j] == i:
                val = 0.0
            elif knn_dists[i, j] - rhos[i] <= 0.0 or sigmas[i] == 0.0:
                val = 1.0
            else:
                val = np.exp(-((knn_dists[i, j] - rhos[i]) / sigmas[i]))
            rows[i * n_neighbors + j] = i
            cols[i * n_neighbors + j] = knn_indices[i, j]
            vals[i * n_neighbors + j] = val
    return rows, cols, vals


def _fuzzy_graph(knn_indices, knn_dists, n_neighbors: int):
    n = knn_indices.shape[0]
    sigmas, rhos = _smooth_knn_dist(knn_dists, float(n_neighbors))
    rows, cols, vals = _membership_strengths(knn_indices, knn_dists, sigmas, rhos)
    w = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    w.sum_duplicates()
    w = w.tocsr()
    w.eliminate_zeros()
    transpose = w.transpose()
    graph = w + transpose - w.multiply(transpose)
    graph = graph.tocsr()
    graph.eliminate_zeros()
    return graph, sigmas, rhos


def _find_ab_params(spread: float, min_dist: float):
    """Fit a, b of the low-dimensional kernel 1/(1 + a d^(2b)) to the target
    fuzzy set membership: 1 up to min_dist, then exponential decay."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros(xv.shape)
    yv[xv < min_dist] = 1.0
    yv[xv >= min_dist] = np.exp(-(xv[xv >= min_dist] - min_dist) / spread)
    params, _ = curve_fit(curve, xv, yv)
    return float(params[0]), float(params[1])


def _make_epochs_per_sample(weights, n_epochs: int):
    result = -1.0 * np.ones(weights.shape[0])
    n_samples = n_epochs * (weights / weights.max())
    result[n_samples > 0] = float(n_epochs) / n_samples[n_samples > 0]
    return result


# --- spectral initialization ------------------------------------------------


def _spectral_init(graph, dim: int, rng: np.random.Generator):
    n = graph.shape[0]
    k = dim + 1
    try:
        lap = scipy.sparse.csgraph.laplacian(graph.tocsr(), normed=True)
        if n <= 2000:
            eigvals, eigvecs = np.linalg.eigh(np.asarray(lap.todense()))
            order = np.argsort(eigvals)[1:k]
            init = eigvecs[:, order]
        else:
            eigvals, eigvecs = scipy.sparse.linalg.eigsh(
                lap.tocsc(),
                k=k,
                which="SM",
                v0=np.ones(n),
                maxiter=n * 5,
                tol=1e-4,
            )
            order = np.argsort(eigvals)[1:k]
            init = eigvecs[:, order]
    except Exception:
        return rng.normal(0.0, 1.0, size=(n, dim))
    if init.shape[1] < dim:
        pad = rng.normal(0.0, 1.0, size=(n, dim - init.shape[1]))
        init = np.hstack([init, pad])
    for c in range(init.shape[1]):
        pivot = np.argmax(np.abs(init[:, c]))
        if init[pivot, c] < 0:
            init[:, c] = -init[:, c]
    return init


def _rescale_init(init, rng: np.random.Generator):
    init = np.array(init, dtype=np.float64, copy=True)
    for c in range(init.shape[1]):
        col = init[:, c]
        span = col.max() - col.min()
        if span > 0:
            init[:, c] = 10.0 * (col - col.min()) / span
        else:
            init[:, c] = 0.0
    init += rng.normal(0.0, 1e-4, size=init.shape)
    return init


# --- stochastic gradient optimization ---------------------------------------


@njit(cache=True)
def _tau_rand(state):
    state[0] = (((state[0] & 4294967294) << 12) & 0xFFFFFFFF) ^ (
        (((state[0] << 13) & 0xFFFFFFFF) ^ state[0]) >> 19
    )
    state[1] = (((state[1] & 4294967288) << 4) & 0xFFFFFFFF) ^ (
        (((state[1] << 2) & 0xFFFFFFFF) ^ state[1]) >> 25
    )
    state[2] = (((state[2] & 4294967280) << 17) & 0xFFFFFFFF) ^ (
        (((state[2] << 3) & 0xFFFFFFFF) ^ state[2]) >> 11
    )
    return state[0] ^ state[1] ^ state[2]


@njit(cache=True)
def _clip(val):
    if val > 4.0:
        return 4.0
    if val < -4.0:
        return -4.0
    return val


@njit(cache=True)
def _optimize_layout(
    embedding,
    head,
    tail,
    n_epochs,
    epochs_per_sample,
    a,
    b,
    rng_state,
    negative_sample_rate,
    initial_alpha,
):
    dim = embedding.shape[1]
    n_vertices = embedding.shape[0]
    n_edges = epochs_per_sample.shape[0]
    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    epoch_of_next_sample = epochs_per_sample.copy()
    order = np.arange(n_edges)

    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for i in range(n_edges - 1, 0, -1):
            j = _tau_rand(rng_state) % (i + 1)
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
        for oi in range(n_edges):
            e = order[oi]
            if epoch_of_next_sample[e] > epoch:
                continue
            jv = head[e]
            kv = tail[e]
            dist_squared = 0.0
            for d in range(dim):
                diff = embedding[jv, d] - embedding[kv, d]
                dist_squared += diff * diff
            if dist_squared > 0.0:
                grad_coeff = (-2.0 * a * b * dist_squared ** (b - 1.0)) / (
                    a * dist_squared**b + 1.0
                )
            else:
                grad_coeff = 0.0
            for d in range(dim):
                grad_d = _clip(grad_coeff * (embedding[jv, d] - embedding[kv, d]))
                embedding[jv, d] += grad_d * alpha
                embedding[kv, d] -= grad_d * alpha
            epoch_of_next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - epoch_of_next_negative_sample[e]) / epochs_per_negative_sample[e])
            for _ in range(n_neg):
                kn = _tau_rand(rng_state) % n_vertices
                if kn == jv:
                    continue
                dist_squared = 0.0
                for d in range(dim):
                    diff = embedding[jv, d] - embedding[kn, d]
                    dist_squared += diff * diff
                if dist_squared > 0.0:
                    grad_coeff = (2.0 * b) / (
                        (0.001 + dist_squared) * (a * dist_squared**b + 1.0)
                    )
                else:
                    grad_coeff = 0.0
                for d in range(dim):
                    if grad_coeff > 0.0:
                        grad_d = _clip(grad_coeff * (embedding[jv, d] - embedding[kn, d]))
                    else:
                        grad_d = 4.0
                    embedding[jv, d] += grad_d * alpha
            epoch_of_next_negative_sample[e] += n_neg * epochs_per_negative_sample[e]
    return embedding


# --- the estimator ----------------------------------------------------------


class UmapModel(BaseEstimator):
    """Seeded UMAP over euclidean input distances.

    ``fit`` learns an embedding of the training rows (``embedding_``);
    ``transform`` places new rows by kernel-weighted averaging of their
    nearest training embeddings. All randomness comes from ``seed``.
    """

    def __init__(
        self,
        n_neighbors: int = 15,
        min_dist: float = 0.1,
        target_dim: int = 10,
        n_epochs: int = 200,
        negative_sample_rate: int = 5,
        learning_rate: float = 1.0,
        seed: int = 0,
    ):
        self.n_neighbors = n_neighbors
        self.min_dist = min_dist
        self.target_dim = target_dim
        self.n_epochs = n_epochs
        self.negative_sample_rate = negative_sample_rate
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n = X.shape[0]
        if n <= self.n_neighbors:
            raise ValueError(
                f"need more than n_neighbors={self.n_neighbors} points, got {n}"
            )
        if self.n_epochs <= 0:
            raise ValueError("n_epochs must be positive")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

        knn_indices, knn_dists = _knn(X, X, self.n_neighbors)
        graph, sigmas, rhos = _fuzzy_graph(knn_indices, knn_dists, self.n_neighbors)

        a, b = _find_ab_params(1.0, self.min_dist)

        init = _spectral_init(graph, self.target_dim, rng)
        embedding = _rescale_init(init, rng)

        graph = graph.tocoo()
        graph.sum_duplicates()
        graph.data[graph.data < graph.data.max() / float(self.n_epochs)] = 0.0
        graph.eliminate_zeros()
        head = graph.row.astype(np.int64)
        tail = graph.col.astype(np.int64)
        epochs_per_sample = _make_epochs_per_sample(graph.data, self.n_epochs)

        rng_state = rng.integers(1, 2**31 - 1, size=3).astype(np.int64)
        embedding = _optimize_layout(
            np.ascontiguousarray(embedding),
            head,
            tail,
            self.n_epochs,
            epochs_per_sample,
            a,
            b,
            rng_state,
            self.negative_sample_rate,
            self.learning_rate,
        )

        self.a_ = a
        self.b_ = b
        self.training_points_ = X.copy()
        self.knn_indices_ = knn_indices
        self.knn_dists_ = knn_dists
        self.sigmas_ = sigmas
        self.rhos_ = rhos
        self.embedding_ = embedding
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.training_points_.shape[1]:
            raise ValueError(
                f"expected {self.training_points_.shape[1]} features, got {X.shape[1]}"
            )
        if X.shape[0] == 0:
            return np.empty((0, self.target_dim))
        idx, dst = _knn(X, self.training_points_, self.n_neighbors)
        sigmas, rhos = _smooth_knn_dist(dst, float(self.n_neighbors))
        weights = np.empty_like(dst)
        for i in range(dst.shape[0]):
            for j in range(dst.shape[1]):
                d = dst[i, j] - rhos[i]
                if d <= 0.0 or sigmas[i] == 0.0:
                    weights[i, j] = 1.0
                else:
                    weights[i, j] = np.exp(-d / sigmas[i])
        weights /= weights.sum(axis=1, keepdims=True)
        out = np.zeros((X.shape[0], self.embedding_.shape[1]))
        for i in range(X.shape[0]):
            out[i] = weights[i] @ self.embedding_[idx[i]]
        return out


def umap(
    matrix,
    n_neighbors: int = 15,
    min_dist: float = 0.1,
    target_dim: int = 10,
    n_epochs: int = 200,
    seed: int = 0,
):
    """Fit UMAP and return (embedded coordinates, fitted model)."""
    model = UmapModel(
        n_neighbors=n_neighbors,
        min_dist=min_dist,
        target_dim=target_dim,
        n_epochs=n_epochs,
        seed=seed,
    ).fit(matrix)
    return model.embedding_, model


def umap_transform(model: UmapModel, new_points):
    """Project new rows into an already-fitted UMAP space."""
    return model.transform(new_points)
