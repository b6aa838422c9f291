"""Clustering error, Requirement-1 margins, kappa-prime and subspace affinities."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .directions import Adjacency
from .exceptions import ComputationError, ParameterError


@dataclass
class RequirementMargin:
    """Per-column margins ``(m - 1) ||a_in||_p^p / ||a_out||_p^p``.

    ``+inf`` marks columns with no out-of-cluster mass.  Columns with no
    mass at all are NaN and listed in ``undefined``.
    """

    per_column: np.ndarray
    min_margin: float
    p: int
    undefined: np.ndarray

    def holds(self, kappa):
        """True iff every column satisfies the requirement at ``kappa``."""
        return self.undefined.size == 0 and self.min_margin > kappa


@dataclass
class AffinityReport:
    sigma_affinities: np.ndarray
    phi: float


def _matrix(A):
    return A.A if isinstance(A, Adjacency) else np.asarray(A, dtype=float)


def clustering_error(pred, truth):
    """Fraction of points misclassified under the best one-to-one label matching."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ParameterError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        return 0.0
    _, p_idx = np.unique(pred, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    conf = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
    np.add.at(conf, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return 1.0 - conf[rows, cols].sum() / pred.size


def assigned_clusters(ds):
    """``k_i = argmax_j ||U_j^T d_i||_2`` from the ground-truth bases."""
    proj = np.stack([np.linalg.norm(U.T @ ds.D, axis=0) for U in ds.bases.U])
    return np.argmax(proj, axis=0)


def requirement_margin(A, ds, p, include_self=True, check_labels=True):
    """Margins of every column of ``A`` against the clusters of ``ds``.

    Cluster membership comes from the argmax rule on the true bases; with
    ``check_labels`` a disagreement with the generated labels raises.
    """
    if p not in (1, 2):
        raise ParameterError(f"p must be 1 or 2, got {p}")
    X = _matrix(A)
    if X.shape != (ds.M2, ds.M2):
        raise ParameterError(f"adjacency shape {X.shape} does not match M2={ds.M2}")
    k = assigned_clusters(ds)
    if check_labels and not np.array_equal(k, ds.labels):
        bad = np.flatnonzero(k != ds.labels)
        raise ComputationError(f"argmax assignment disagrees with labels at {bad[:5].tolist()}")
    same = k[:, None] == k[None, :]
    if not include_self:
        same = same & ~np.eye(ds.M2, dtype=bool)
    P = np.abs(X) ** p
    inside = np.where(same, P, 0.0).sum(axis=0)
    outside = np.where(k[:, None] != k[None, :], P, 0.0).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = (ds.m - 1) * inside / outside
    margin[(outside == 0) & (inside > 0)] = np.inf
    undefined = np.flatnonzero((outside == 0) & (inside == 0))
    margin[undefined] = np.nan
    valid = np.delete(margin, undefined)
    min_margin = float(valid.min()) if valid.size else float("nan")
    return RequirementMargin(margin, min_margin, p, undefined)


def column_profile(A, ds, cluster_index):
    """Mean of the columns of ``A`` belonging to one cluster."""
    X = _matrix(A)
    cols = np.flatnonzero(ds.labels == cluster_index)
    if cols.size == 0:
        raise ParameterError(f"cluster {cluster_index} has no points")
    return X[:, cols].mean(axis=1)


def kappa_prime(A, ds, cluster_index=0):
    """``(m - 1) ||abar_in||_2^2 / ||abar_out||_2^2`` for the mean column of a cluster."""
    prof = column_profile(A, ds, cluster_index)
    mask = ds.labels == cluster_index
    num = (ds.m - 1) * float(prof[mask] @ prof[mask])
    den = float(prof[~mask] @ prof[~mask])
    if den == 0:
        return float("inf")
    return num / den


def sigma_affinity(U1, U2):
    """Root-mean-square cosine of the principal angles: ``||U1^T U2||_F / sqrt(r)``."""
    r = min(U1.shape[1], U2.shape[1])
    return float(np.linalg.norm(U1.T @ U2) / np.sqrt(r))


def affinity_report(bases):
    m = bases.m
    aff = np.ones((m, m))
    phi = 0.0
    for t in range(m):
        for j in range(t + 1, m):
            aff[t, j] = aff[j, t] = sigma_affinity(bases.U[t], bases.U[j])
            phi = max(phi, float(np.linalg.norm(bases.Udot[t].T @ bases.Udot[j], 2)))
    return AffinityReport(aff, min(phi, 1.0))


def write_margins_csv(path, A, ds, include_self=True):
    """One row per column: index, label and the margins for p = 1 and p = 2."""
    m1 = requirement_margin(A, ds, 1, include_self).per_column
    m2 = requirement_margin(A, ds, 2, include_self).per_column
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column_index", "label", "margin_p1", "margin_p2"])
        for i in range(ds.M2):
            w.writerow([i, int(ds.labels[i]), repr(float(m1[i])), repr(float(m2[i]))])
