import itertools

import numpy as np
import pytest

from uosc.synth import RngSpec, make_dataset


def lp_vertex_oracle(D, i, tol=1e-9):
    """Exhaustive vertex enumeration for ``min ||D^T c||_1 s.t. d_i^T c = 1``.

    Works in the column space of ``D`` through its own orthonormal basis.
    Every basic solution zeroes ``rank - 1`` of the inner products; the
    optimum of a bounded piecewise-linear program sits at one of them.
    """
    Uc, sv, _ = np.linalg.svd(D, full_matrices=False)
    k = int(np.count_nonzero(sv > 1e-10 * sv[0]))
    B = Uc[:, :k]                      # c = B y
    G = D.T @ B                        # inner products: D^T c = G y
    best = np.inf
    for rows in itertools.combinations(range(D.shape[1]), k - 1):
        K = np.vstack([G[list(rows)], G[i][None, :]])
        if abs(np.linalg.det(K)) < tol:
            continue
        rhs = np.zeros(k)
        rhs[-1] = 1.0
        y = np.linalg.solve(K, rhs)
        best = min(best, float(np.abs(G @ y).sum()))
    return best


def sphere_oracle(M, samples, rng, p):
    """Extremes of ``||u^T M||_p^p`` over random unit directions."""
    U = rng.standard_normal((samples, M.shape[0]))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    vals = (np.abs(U @ M) ** p).sum(axis=1)
    return vals.min(), vals.max()


@pytest.fixture
def small_ds():
    return make_dataset(30, 3, 4, 1, 20, RngSpec(11))


@pytest.fixture
def indep_ds():
    # s = 0 and m r <= M1: independent subspaces
    return make_dataset(40, 3, 4, 0, 15, RngSpec(12))
