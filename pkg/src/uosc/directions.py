"""Optimal directions and adjacency matrices for MFC, iPursuit and TSC.

All direction searches work in the coordinates of the thin SVD
``D = U diag(sigma) V^T``.  Writing ``c = U diag(1/sigma) w`` gives
``D^T c = V w`` and ``d_i^T c = v_i^T w`` (``v_i`` is row ``i`` of ``V``),
so the search over ``c`` in R^M1 reduces to a search over ``w`` in R^rank.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from . import io
from .exceptions import ComputationError, ConvergenceError, ParameterError

MFC = "MFC"
IP_L1 = "IP_L1"
IP_L2 = "IP_L2"
TSC = "TSC"
SOURCES = (MFC, IP_L1, IP_L2, TSC)

RELAX = 1.6


@dataclass
class SvdFactor:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    rank: int

    def row(self, i):
        return self.V[i]


@dataclass
class Adjacency:
    """Nonnegative M2 x M2 matrix; column ``i`` describes point ``i``."""

    A: np.ndarray
    source: str
    p: int
    params: dict = field(default_factory=dict)
    iterations: np.ndarray = None

    @property
    def shape(self):
        return self.A.shape


@dataclass(frozen=True)
class L1SolverParams:
    """ADMM settings; ``polish_every = 0`` turns vertex polishing off."""

    rho: float = 1.0
    max_iters: int = 2000
    tol_abs: float = 1e-8
    tol_obj: float = 1e-6
    polish_every: int = 25
    max_pivots: int = 50

    def __post_init__(self):
        if self.rho <= 0:
            raise ParameterError("rho must be positive")
        if self.tol_abs <= 0 or self.tol_obj <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if self.polish_every < 0 or self.max_pivots < 0:
            raise ParameterError("polish_every and max_pivots must be nonnegative")


@dataclass
class L1Result:
    """Reduced-space solutions of ``min ||V w||_1  s.t.  v_i^T w = 1``.

    ``W[:, k]`` solves the problem for column ``columns[k]``.
    ``certified[k]`` is True when a dual certificate proved optimality.
    """

    W: np.ndarray
    columns: np.ndarray
    objective: np.ndarray
    iterations: np.ndarray
    certified: np.ndarray
    constraint_residual: np.ndarray


def svd_factor(D, rank_tol=1e-10):
    """Thin SVD truncated to singular values above ``rank_tol * sigma_max``."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.size == 0:
        raise ParameterError("svd_factor needs a nonempty 2-D matrix")
    U, sig, Vt = np.linalg.svd(D, full_matrices=False)
    if sig[0] == 0:
        raise ComputationError("zero matrix has no nonzero singular values")
    rank = int(np.count_nonzero(sig > rank_tol * sig[0]))
    return SvdFactor(U[:, :rank].copy(), sig[:rank].copy(), Vt[:rank].T.copy(), rank)


def _row_norms2(f):
    nrm2 = np.einsum("ij,ij->i", f.V, f.V)
    if np.any(nrm2 == 0):
        bad = np.flatnonzero(nrm2 == 0)[:5]
        raise ComputationError(f"zero row of V for columns {bad.tolist()}")
    return nrm2


def mfc_adjacency(f):
    """``A[j, i] = |v_j . v_i| / ||v_i||^2``: ``|V V^T|`` with unit diagonal."""
    nrm2 = _row_norms2(f)
    A = np.abs(f.V @ f.V.T) / nrm2[None, :]
    return Adjacency(A, MFC, 2)


def l2_direction(f, i):
    """Closed-form minimizer of ``||c^T D||_2`` subject to ``c^T d_i = 1``."""
    if not 0 <= i < f.V.shape[0]:
        raise IndexError(f"column {i} out of range")
    v = f.V[i]
    nrm2 = float(v @ v)
    if nrm2 == 0:
        raise ComputationError(f"column {i} has zero projection on the right singular vectors")
    return f.U @ (v / f.sigma) / nrm2


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _vertex_rows(V, z, k):
    """Pick ``k`` linearly independent rows of ``V``, favouring small ``|z_j|``.

    Pivoted QR on rows weighted by ``1 / (|z_j| + eps)`` takes the row with
    the largest remaining weighted residual first, so dependent rows are
    skipped and rows near zero are preferred.  The candidate pool grows
    until it holds ``k`` independent rows; whole clusters can vanish at
    once, so the smallest entries alone may be rank deficient.
    """
    absz = np.abs(z)
    scale = absz.max() + 1e-300
    order = np.argsort(absz, kind="stable")
    count = max(int(np.count_nonzero(absz <= 1e-4 * scale)), 2 * k + 8)
    while True:
        cand = order[:min(z.size, count)]
        wts = 1.0 / (absz[cand] + 1e-9 * scale)
        _, _, piv = linalg.qr(V[cand].T * wts[None, :], mode="economic", pivoting=True)
        rows = cand[piv[:k]]
        if rows.size == k:
            sv = np.linalg.svd(V[rows], compute_uv=False)
            if sv[-1] > 1e-9 * sv[0]:
                return rows
        if count >= z.size:
            return None
        count *= 2


def _certify(V, a, zp, g0=None, allow_lp=False):
    """Search for a subgradient certificate of optimality at ``z = V w``.

    Needs ``g`` with ``g_j = sign(z_j)`` off the zero set, ``|g_j| <= 1``
    on it and ``V^T g = lambda a`` for some scalar ``lambda``.  The
    candidate is the minimum-norm correction of ``g0`` (the ADMM dual
    estimate) onto that affine set; ``allow_lp`` adds an exact feasibility
    LP when the correction overshoots the box.
    """
    scale = max(np.abs(zp).max(), 1e-300)
    Z = np.abs(zp) <= 1e-10 * scale
    N = ~Z
    nz = int(Z.sum())
    rhs = -V[N].T @ np.sign(zp[N])
    lhs = np.hstack([V[Z].T, -a[:, None]])
    x0 = np.zeros(nz + 1)
    if g0 is not None:
        x0[:nz] = np.clip(g0[Z], -1.0, 1.0)
    delta, *_ = np.linalg.lstsq(lhs, rhs - lhs @ x0, rcond=None)
    sol = x0 + delta
    tol = 1e-8 * max(1.0, np.linalg.norm(rhs))
    if np.linalg.norm(lhs @ sol - rhs) > tol:
        return False
    if nz == 0 or np.abs(sol[:-1]).max() <= 1.0 + 1e-9:
        return True
    if not allow_lp:
        return False
    bounds = [(-1.0, 1.0)] * nz + [(None, None)]
    res = optimize.linprog(np.zeros(nz + 1), A_eq=lhs, b_eq=rhs, bounds=bounds,
                           method="highs")
    return bool(res.status == 0)


def _vertex(V, a, rows):
    k = V.shape[1]
    K = np.vstack([V[rows], a[None, :]])
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    try:
        Kinv = np.linalg.inv(K)
    except np.linalg.LinAlgError:
        return None, None
    w = Kinv @ rhs
    if not np.all(np.isfinite(w)):
        return None, None
    return w, Kinv


def _vertex_descent(V, a, rows, max_pivots):
    """Simplex-style pivoting between vertices of ``min ||V w||_1, a^T w = 1``.

    At a vertex the rows in ``rows`` are zero.  Releasing row ``j`` in
    either sign gives an edge; the steepest descending edge is followed by
    an exact line search on the piecewise-linear objective, which lands on
    a neighbouring vertex.  Returns ``(w, rows, stalled)`` where
    ``stalled`` is True when no edge descends.
    """
    k = V.shape[1]
    w, Kinv = _vertex(V, a, rows)
    if w is None:
        return None, rows, False
    for pivot in range(max_pivots):
        z = V @ w
        zscale = np.abs(z).max() + 1e-300
        off = np.ones(V.shape[0], dtype=bool)
        off[rows] = False
        E = Kinv[:, :k - 1]                     # edge directions, one per row
        nonzero = np.abs(z) > 1e-12 * zscale
        sz = np.where(off & nonzero, np.sign(z), 0.0)
        lin = (sz @ V) @ E
        degenerate = np.flatnonzero(off & ~nonzero)
        absd = np.abs(V[degenerate] @ E).sum(axis=0)
        # derivative along +e_j and -e_j; the released row contributes 1
        deriv = np.concatenate([lin + absd + 1.0, -lin + absd + 1.0])
        best = int(np.argmin(deriv))
        if deriv[best] >= -1e-10 * (1.0 + np.abs(lin).max()):
            return w, rows, True
        j = best % (k - 1)
        sgn = 1.0 if best < k - 1 else -1.0
        y = sgn * (V @ E[:, j])
        # line search: slope rises by 2|y_n| when z_n + t y_n crosses zero
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -z / y
        cand = np.flatnonzero((t > 0) & np.isfinite(t) & nonzero)
        if cand.size == 0:
            return w, rows, True
        cand = cand[np.argsort(t[cand], kind="stable")]
        crossing = deriv[best] + 2.0 * np.cumsum(np.abs(y[cand]))
        stop = np.flatnonzero(crossing >= 0)
        if stop.size == 0:
            return w, rows, True
        hit = cand[stop[0]]
        new_rows = rows.copy()
        new_rows[j] = hit
        if pivot % 20 == 19:
            w_new, Kinv_new = _vertex(V, a, new_rows)
            if w_new is None:
                return w, rows, True
        else:
            # Sherman-Morrison update for replacing row j of K
            u = V[hit] - V[rows[j]]
            col = Kinv[:, j]
            uK = u @ Kinv
            den = 1.0 + uK[j]
            if abs(den) < 1e-12:
                return w, rows, True
            Kinv_new = Kinv - np.outer(col, uK) / den
            w_new = Kinv_new[:, -1]
        w, Kinv, rows = w_new, Kinv_new, new_rows
    return w, rows, False


def _polish(V, a, z, max_pivots):
    """Snap ``z`` to a vertex and descend; returns ``(w, stalled)``.

    ``stalled`` means no edge of the final vertex descends, which proves
    optimality at a nondegenerate vertex; degenerate ones still need
    ``_certify``.
    """
    k = V.shape[1]
    if k == 1:
        return np.array([1.0 / a[0]]), True
    rows = _vertex_rows(V, z, k - 1)
    if rows is None:
        return None, False
    w, rows, stalled = _vertex_descent(V, a, rows, max_pivots)
    if w is None:
        return None, False
    # refactor from scratch; rank-one updates accumulate rounding error
    w, _ = _vertex(V, a, rows)
    if w is None or abs(a @ w - 1.0) > 1e-10:
        return None, False
    return w, stalled


def solve_l1_reduced(f, columns, params=None):
    """Batched ADMM for ``min ||V w||_1  s.t.  v_i^T w = 1``.

    Splits ``z = V w``.  Since ``V^T V = I`` the ``w`` update is a
    projection of ``V^T (z - u)`` onto the constraint hyperplane, and the
    ``z`` update is soft thresholding.  The penalty is adapted per column
    by residual balancing.  Every ``polish_every`` iterations each active
    column is snapped to a nearby vertex; columns whose vertex carries a
    dual certificate stop early.  Warm start is the l2 solution.
    """
    params = params or L1SolverParams()
    columns = np.atleast_1d(np.asarray(columns, dtype=int))
    V = f.V
    M2, k = V.shape
    nrm2 = _row_norms2(f)[columns]
    Acon = V[columns].T                      # k x B, constraint vectors
    W = Acon / nrm2[None, :]
    Z = V @ W
    Udual = np.zeros_like(Z)
    B = columns.size
    rho = np.full(B, float(params.rho))
    active = np.ones(B, dtype=bool)
    certified = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    best_W = W.copy()
    best_obj = np.abs(Z).sum(axis=0)
    prev_obj = best_obj.copy()
    r_pri = np.full(B, np.inf)
    r_dual = np.full(B, np.inf)
    sqrtM2 = np.sqrt(M2)

    for it in range(1, params.max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        a = Acon[:, idx]
        Y = V.T @ (Z[:, idx] - Udual[:, idx])
        Y += a * ((1.0 - np.einsum("ij,ij->j", a, Y)) / nrm2[idx])[None, :]
        VW = V @ Y
        Zold = Z[:, idx]
        relaxed = RELAX * VW + (1.0 - RELAX) * Zold
        Znew = _soft(relaxed + Udual[:, idx], 1.0 / rho[idx][None, :])
        Udual[:, idx] += relaxed - Znew
        Z[:, idx] = Znew
        W[:, idx] = Y
        iters[idx] = it

        rp = np.linalg.norm(VW - Znew, axis=0)
        rd = rho[idx] * np.linalg.norm(Znew - Zold, axis=0)
        r_pri[idx], r_dual[idx] = rp, rd
        obj = np.abs(VW).sum(axis=0)
        better = obj < best_obj[idx]
        best_obj[idx[better]] = obj[better]
        best_W[:, idx[better]] = Y[:, better]

        scale = np.maximum(1.0, np.linalg.norm(Znew, axis=0))
        eps = params.tol_abs * (sqrtM2 + scale)
        small_obj = np.abs(obj - prev_obj[idx]) <= params.tol_obj * np.maximum(obj, 1e-300)
        prev_obj[idx] = obj
        done = (rp <= eps) & (rd <= eps)
        done |= small_obj & (rp <= np.sqrt(params.tol_abs) * scale) & (rd <= np.sqrt(params.tol_abs) * scale)

        if not params.polish_every:
            to_polish = ()
        elif it % params.polish_every == 0 or it == params.max_iters:
            to_polish = range(idx.size)
        else:
            to_polish = np.flatnonzero(done)
        if len(to_polish):
            for loc in to_polish:
                col = idx[loc]
                w, stalled = _polish(V, Acon[:, col], VW[:, loc], params.max_pivots)
                if w is None:
                    continue
                zp = V @ w
                pobj = np.abs(zp).sum()
                if pobj <= best_obj[col] * (1 + 1e-12):
                    best_obj[col] = pobj
                    best_W[:, col] = w
                    g0 = rho[col] * Udual[:, col]
                    if stalled and _certify(V, Acon[:, col], zp, g0, allow_lp=True):
                        certified[col] = True
                        done[loc] = True

        if it % 10:
            active[idx[done]] = False
            continue
        # residual balancing; rescale the scaled dual with rho
        grow = rp > 10 * rd
        shrink = rd > 10 * rp
        factor = np.where(grow, 2.0, np.where(shrink, 0.5, 1.0))
        factor[done] = 1.0
        if np.any(factor != 1.0):
            rho[idx] *= factor
            Udual[:, idx] /= factor[None, :]
        active[idx[done]] = False

    if np.any(active):
        bad = np.flatnonzero(active)
        raise ConvergenceError(
            f"l1 direction search did not converge for {bad.size} column(s) "
            f"within {params.max_iters} iterations",
            primal_residual=float(r_pri[bad].max()),
            dual_residual=float(r_dual[bad].max()),
            iterations=params.max_iters)

    cres = np.abs(np.einsum("ij,ij->j", Acon, best_W) - 1.0)
    return L1Result(best_W, columns, best_obj, iters, certified, cres)


def l1_direction(f, i, params=None):
    """Minimizer of ``||c^T D||_1`` subject to ``c^T d_i = 1``."""
    if not 0 <= i < f.V.shape[0]:
        raise IndexError(f"column {i} out of range")
    res = solve_l1_reduced(f, [i], params)
    return f.U @ (res.W[:, 0] / f.sigma)


def ipursuit_adjacency(D, p, params=None, rank_tol=1e-10, factor=None):
    """``A = |D^T C|`` where column ``i`` of ``C`` is the l_p optimal direction for ``d_i``.

    ``p = 2`` uses the closed form.  ``p = 1`` runs the ADMM solver and
    records per-column iteration counts.
    """
    if p not in (1, 2):
        raise ParameterError(f"p must be 1 or 2, got {p}")
    D = np.asarray(D, dtype=float)
    f = factor if factor is not None else svd_factor(D, rank_tol)
    if p == 2:
        nrm2 = _row_norms2(f)
        C = f.U @ ((f.V / nrm2[:, None]) / f.sigma[None, :]).T
        return Adjacency(np.abs(D.T @ C), IP_L2, 2, {"rank": f.rank})
    params = params or L1SolverParams()
    res = solve_l1_reduced(f, np.arange(D.shape[1]), params)
    C = f.U @ (res.W / f.sigma[:, None])
    info = {"rank": f.rank, "rho": params.rho, "max_iters": params.max_iters,
            "tol_abs": params.tol_abs, "tol_obj": params.tol_obj,
            "certified": int(res.certified.sum())}
    return Adjacency(np.abs(D.T @ C), IP_L1, 1, info, res.iterations)


def tsc_adjacency(D):
    """``A = |D^T D|``; unit diagonal when the columns are unit norm."""
    D = np.asarray(D, dtype=float)
    G = D.T @ D
    A = np.abs((G + G.T) / 2)
    return Adjacency(A, TSC, 2)


def build_adjacency(D, source, params=None, rank_tol=1e-10):
    """Dispatch on an algorithm tag from ``SOURCES``."""
    if source == MFC:
        return mfc_adjacency(svd_factor(D, rank_tol))
    if source == IP_L2:
        return ipursuit_adjacency(D, 2, rank_tol=rank_tol)
    if source == IP_L1:
        return ipursuit_adjacency(D, 1, params, rank_tol)
    if source == TSC:
        return tsc_adjacency(D)
    raise ParameterError(f"unknown algorithm {source!r}; expected one of {SOURCES}")


def save_adjacency(adj, directory, name="A"):
    """Write ``<name>.mat`` plus a ``<name>.txt`` sidecar."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / f"{name}.mat", adj.A)
    meta = {"source": adj.source, "p": adj.p}
    meta.update({f"param.{k}": v for k, v in sorted(adj.params.items())})
    if adj.iterations is not None:
        meta["iterations"] = ",".join(str(int(x)) for x in adj.iterations)
    io.write_keyvalues(out / f"{name}.txt", meta)


def load_adjacency(directory, name="A"):
    src = Path(directory)
    meta = io.read_keyvalues(src / f"{name}.txt")
    params = {k[6:]: v for k, v in meta.items() if k.startswith("param.")}
    its = meta.get("iterations")
    iterations = np.array([int(x) for x in its.split(",")]) if its else None
    return Adjacency(io.read_matrix(src / f"{name}.mat"), meta["source"],
                     int(meta["p"]), params, iterations)
