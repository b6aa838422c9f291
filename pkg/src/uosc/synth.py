"""Synthetic data on a union of intersecting linear subspaces.

Every cluster ``i`` spans ``U_i = [S, Udot_i]``: a shared ``s``-dimensional
intersection ``S`` plus an ``(r - s)``-dimensional innovative part
``Udot_i`` orthogonal to ``S``.  Points are ``d = S @ alpha + Udot_k @ beta``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .exceptions import GenerationError, ParameterError

_BASES_PURPOSE = 0
_DATA_PURPOSE = 1


@dataclass(frozen=True)
class RngSpec:
    """Seed plus trial index; each (seed, stream) pair is an independent stream."""

    seed: int
    stream: int = 0

    def generator(self, purpose=0):
        return np.random.default_rng([int(self.seed) & (2**64 - 1), int(self.stream), int(purpose)])

    def child(self, stream):
        return RngSpec(self.seed, stream)


@dataclass
class BasisSet:
    """Orthonormal bases of the shared intersection and each innovative part."""

    M1: int
    m: int
    r: int
    s: int
    S: np.ndarray
    Udot: list
    U: list = field(init=False, repr=False)

    def __post_init__(self):
        self.U = [np.hstack([self.S, Ud]) for Ud in self.Udot]


@dataclass
class Dataset:
    """Data matrix with ground truth.

    ``alpha`` has shape (M2, s) and ``beta`` shape (M2, r - s); row ``i``
    holds the coefficients of column ``i`` before any normalization.
    ``scale[i]`` is the factor the column was divided by (1 when
    ``normalized`` is False), so ``D[:, i] * scale[i] == S @ alpha[i] +
    Udot[labels[i]] @ beta[i]``.
    """

    D: np.ndarray
    labels: np.ndarray
    n: int
    alpha: np.ndarray
    beta: np.ndarray
    bases: BasisSet
    normalized: bool = False
    scale: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        if self.scale is None:
            self.scale = np.ones(self.D.shape[1])

    @property
    def M1(self):
        return self.D.shape[0]

    @property
    def M2(self):
        return self.D.shape[1]

    @property
    def m(self):
        return self.bases.m

    @property
    def r(self):
        return self.bases.r

    @property
    def s(self):
        return self.bases.s

    def cluster(self, j):
        """Columns of cluster ``j`` (``D_j``)."""
        return self.D[:, self.labels == j]

    def dot_block(self, j):
        """``Udot_j^T D_j``, coordinates of cluster ``j`` in its innovative part."""
        return self.bases.Udot[j].T @ self.cluster(j)

    def bar_block(self, j):
        """``S^T D_j``, coordinates of cluster ``j`` in the intersection."""
        return self.bases.S.T @ self.cluster(j)

    def without_normalization(self):
        """Copy with every column restored to its generated scale."""
        if not self.normalized:
            return self
        return Dataset(self.D * self.scale, self.labels, self.n, self.alpha,
                       self.beta, self.bases, False, None, self.seed)


def _check_dims(M1, m, r, s):
    for name, v in (("M1", M1), ("m", m), ("r", r), ("s", s)):
        if int(v) != v:
            raise ParameterError(f"{name} must be an integer, got {v!r}")
    if m < 2:
        raise ParameterError(f"need at least two clusters, got m={m}")
    if not 0 <= s < r:
        raise ParameterError(f"need 0 <= s < r, got s={s}, r={r}")
    if r > M1:
        raise ParameterError(f"subspace dimension r={r} exceeds ambient M1={M1}")


def _orthonormalize(G, what):
    if G.shape[1] == 0:
        return G.copy()
    Q, R = np.linalg.qr(G)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-10 * max(d.max(), 1.0):
        raise GenerationError(f"rank-deficient draw while orthonormalizing {what}")
    return Q


def generate_bases(M1, m, r, s, rng):
    """Draw a random intersection ``S`` and innovative parts inside ``S^perp``."""
    _check_dims(M1, m, r, s)
    if s + (r - s) * m > M1:
        warnings.warn(
            f"s + (r - s) m = {s + (r - s) * m} exceeds M1 = {M1}; "
            "innovative parts cannot be independent", stacklevel=2)
    g = rng.generator(_BASES_PURPOSE)
    S = _orthonormalize(g.standard_normal((M1, s)), "S")
    Udot = []
    for i in range(m):
        G = g.standard_normal((M1, r - s))
        G -= S @ (S.T @ G)
        Q = _orthonormalize(G, f"Udot[{i}]")
        # one reorthogonalization pass keeps S^T Udot at machine precision
        Q -= S @ (S.T @ Q)
        Q, _ = np.linalg.qr(Q)
        Udot.append(Q)
    return BasisSet(M1, m, r, s, S, Udot)


def normalize_columns(D):
    """Scale every column to unit l2 norm; returns (normalized, norms)."""
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms == 0):
        raise ParameterError("cannot normalize a zero column")
    return D / norms, norms


def generate_dataset(bases, n, rng, normalize=False):
    """Draw ``n`` points per cluster with iid N(0, 1/r) coefficients.

    Columns are grouped cluster by cluster; labels carry ground truth.
    """
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    g = rng.generator(_DATA_PURPOSE)
    m, r, s = bases.m, bases.r, bases.s
    blocks, coeffs = [], []
    for i in range(m):
        Gi = g.standard_normal((r, n)) / np.sqrt(r)
        blocks.append(bases.U[i] @ Gi)
        coeffs.append(Gi)
    D = np.hstack(blocks)
    G = np.hstack(coeffs)
    labels = np.repeat(np.arange(m), n)
    scale = None
    if normalize:
        D, scale = normalize_columns(D)
    return Dataset(D, labels, n, G[:s].T.copy(), G[s:].T.copy(), bases,
                   bool(normalize), scale, rng.seed)


def make_dataset(M1, m, r, s, n, rng, normalize=False):
    """Bases and data in one call, drawn from the same ``RngSpec``."""
    return generate_dataset(generate_bases(M1, m, r, s, rng), n, rng, normalize)


def decompose_point(ds, i):
    """Return ``(alpha, beta)`` with ``d_i = S alpha + Udot_k beta`` for the current column."""
    if not 0 <= i < ds.M2:
        raise IndexError(f"column {i} out of range for M2={ds.M2}")
    d = ds.D[:, i]
    return ds.bases.S.T @ d, ds.bases.Udot[ds.labels[i]].T @ d


def save_dataset(ds, directory):
    """Write ``D.mat``, ``labels.csv``, ``bases.mat``, ``coefficients.mat`` and ``meta.txt``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / "D.mat", ds.D)
    np.savetxt(out / "labels.csv", ds.labels, fmt="%d", header="label", comments="")
    b = ds.bases
    io.write_blocks(out / "bases.mat", [b.S, *b.Udot])
    # rows: s alpha coordinates, r - s beta coordinates, then the scale
    io.write_matrix(out / "coefficients.mat",
                    np.vstack([ds.alpha.T, ds.beta.T, ds.scale[None, :]]))
    io.write_keyvalues(out / "meta.txt", {
        "M1": b.M1, "m": b.m, "r": b.r, "s": b.s, "n": ds.n,
        "seed": ds.seed, "normalized": int(ds.normalized),
    })


def load_dataset(directory):
    src = Path(directory)
    meta = io.read_keyvalues(src / "meta.txt")
    M1, m, r, s, n = (int(meta[k]) for k in ("M1", "m", "r", "s", "n"))
    S, *Udot = io.read_blocks(src / "bases.mat")
    bases = BasisSet(M1, m, r, s, S, Udot)
    D = io.read_matrix(src / "D.mat")
    labels = np.loadtxt(src / "labels.csv", dtype=int, skiprows=1, ndmin=1)
    coef = io.read_matrix(src / "coefficients.mat")
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    return Dataset(D, labels, n, coef[:s].T.copy(), coef[s:r].T.copy(), bases,
                   bool(int(meta["normalized"])), coef[r].copy(), seed)
