"""Adjacency post-processing and spectral clustering."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import csgraph
from sklearn.cluster import KMeans

from .directions import Adjacency
from .exceptions import ParameterError

DEGREE_FLOOR = 1e-12


@dataclass
class ClusteringResult:
    labels: np.ndarray
    kmeans_inertia: float
    restarts_used: int
    disconnected: bool = False
    n_components: int = 1


def _matrix(A):
    return A.A if isinstance(A, Adjacency) else np.asarray(A, dtype=float)


def sparsify_topk(A, k):
    """Keep the ``k`` largest entries of every column, zero the rest.

    Ties go to the lower row index.  ``k`` larger than the column length
    keeps everything.  Returns the same type it was given.
    """
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    X = _matrix(A)
    k = min(int(k), X.shape[0])
    keep = np.argsort(-X, axis=0, kind="stable")[:k]
    out = np.zeros_like(X)
    cols = np.broadcast_to(np.arange(X.shape[1]), keep.shape)
    out[keep, cols] = X[keep, cols]
    if isinstance(A, Adjacency):
        params = dict(A.params, topk=k)
        return dataclasses.replace(A, A=out, params=params)
    return out


def symmetrize(A):
    X = _matrix(A)
    return X + X.T


def spectral_embedding(W, m):
    """Row-normalized eigenvectors of the ``m`` smallest eigenvalues of
    ``I - D^{-1/2} W D^{-1/2}``."""
    W = np.asarray(W, dtype=float)
    deg = np.maximum(W.sum(axis=1), DEGREE_FLOOR)
    dinv = 1.0 / np.sqrt(deg)
    L = np.eye(W.shape[0]) - dinv[:, None] * W * dinv[None, :]
    L = (L + L.T) / 2
    m = min(m, W.shape[0])
    _, E = linalg.eigh(L, subset_by_index=[0, m - 1])
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    return E / np.where(norms > 0, norms, 1.0)


def spectral_cluster(W, m, seed=0, restarts=10, max_iter=100):
    """Normalized spectral clustering with k-means++ restarts.

    A graph with more than ``m`` connected components still gets
    clustered; ``disconnected`` is set so callers can report it.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ParameterError("W must be square")
    if np.any(W < 0):
        raise ParameterError("W must be nonnegative")
    M2 = W.shape[0]
    if m <= 1:
        return ClusteringResult(np.zeros(M2, dtype=int), 0.0, 0)
    ncomp, _ = csgraph.connected_components(W != 0, directed=False)
    E = spectral_embedding(W, m)
    km = KMeans(n_clusters=m, init="k-means++", n_init=restarts,
                max_iter=max_iter, random_state=seed)
    labels = km.fit_predict(E)
    return ClusteringResult(labels.astype(int), float(km.inertia_), restarts,
                            ncomp > m, int(ncomp))


def cluster_adjacency(A, m, topk=8, seed=0, restarts=10):
    """Steps 4 and 5 of the pipeline: sparsify, symmetrize, cluster."""
    return spectral_cluster(symmetrize(sparsify_topk(_matrix(A), topk)), m,
                            seed=seed, restarts=restarts)
