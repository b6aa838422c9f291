"""Permeance statistics, bound constants and the sufficient conditions for
Requirement 1, plus a Monte-Carlo soundness sweep.

Deterministic conditions (``T1``, ``T4``, ``T6``) are evaluated on a
concrete dataset.  Probabilistic ones (``T2``, ``T3``, ``T5``, ``T7``) only
need the model parameters; ``T2`` also needs the coherence ``phi``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import linalg

from .directions import build_adjacency, MFC, IP_L1, IP_L2, TSC
from .exceptions import ComputationError, ParameterError
from .metrics import affinity_report, requirement_margin
from .synth import RngSpec, make_dataset

THEOREMS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7")
DETERMINISTIC = ("T1", "T4", "T6")
_PROBABILITY_FACTOR = {"T2": 5, "T3": 6, "T5": 6, "T7": 9}

_PERMEANCE_PURPOSE = 7


# --------------------------------------------------------------------------
# permeance statistics

@dataclass
class PermeanceStats:
    """Extreme values of ``||u^T M||_p^p`` over unit ``u``.

    ``exact`` is True for ``p = 2`` (singular values); ``p = 1`` values come
    from a multi-start local search and ``directions`` holds the maximizing
    or minimizing unit vectors that attain them.
    """

    delta_min: float
    delta_dot_max: float
    delta_bar_max: float
    p: int
    exact: bool
    directions: dict = field(default_factory=dict, repr=False)


def _sv(M):
    if M.size == 0:
        return np.zeros(0)
    return linalg.svdvals(M)


def _inf_l2(M):
    """``min_{||u||=1} ||u^T M||_2^2`` over ``u`` in ``R^{rows(M)}``."""
    k, n = M.shape
    if n < k:
        return 0.0
    return float(_sv(M)[k - 1] ** 2)


def _sup_l2(M):
    if M.size == 0:
        return 0.0
    return float(_sv(M)[0] ** 2)


def _l1(M, u):
    return float(np.abs(u @ M).sum())


def _sup_l1(M, restarts, iters, g):
    """Multi-start fixed-point ascent ``u <- normalize(M sign(M^T u))``.

    Each step cannot decrease ``||M^T u||_1``; it stops once the sign
    pattern repeats.
    """
    k = M.shape[0]
    if k == 0 or M.shape[1] == 0:
        return 0.0, np.zeros(k)
    starts = [linalg.svd(M, full_matrices=False)[0][:, 0]]
    starts += list(g.standard_normal((restarts, k)))
    best, best_u = -1.0, None
    for u in starts:
        u = u / np.linalg.norm(u)
        sgn = None
        for _ in range(iters):
            new = np.sign(u @ M)
            new[new == 0] = 1.0
            if sgn is not None and np.array_equal(new, sgn):
                break
            sgn = new
            v = M @ sgn
            nv = np.linalg.norm(v)
            if nv == 0:
                break
            u = v / nv
        val = _l1(M, u)
        if val > best:
            best, best_u = val, u
    return best, best_u


def _circle_min(M, B):
    """Exact minimum of ``||M^T u||_1`` over unit ``u`` in ``span(B)``, dim 2.

    On the circle the objective is piecewise sinusoidal with kinks where
    some column is orthogonal to ``u``; every local minimum sits on a kink.
    """
    P = M.T @ B                                   # n x 2
    keep = np.linalg.norm(P, axis=1) > 1e-14 * max(np.abs(P).max(), 1e-300)
    if not np.any(keep):
        return 0.0, B[:, 0]
    T = np.stack([-P[keep, 1], P[keep, 0]], axis=1)
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    vals = np.abs(P @ T.T).sum(axis=0)
    j = int(np.argmin(vals))
    u = B @ T[j]
    return float(vals[j]), u / np.linalg.norm(u)


def _snap_active(M, u, count):
    """Indices of ``count`` independent columns of ``M`` nearly orthogonal to ``u``."""
    cols = M / np.maximum(np.linalg.norm(M, axis=0), 1e-300)
    score = np.abs(u @ cols)
    _, _, piv = linalg.qr(cols * (1.0 / (score + 1e-12))[None, :],
                          mode="economic", pivoting=True)
    return piv[:count]


def _edge_descent(M, u, max_moves=100):
    """Move between vertices of ``{u : ||M^T u||_1 <= 1}`` while the
    normalized objective decreases.

    At a vertex ``k - 1`` columns are orthogonal to ``u``.  Releasing one
    of them leaves a two-dimensional subspace in which the exact circle
    minimum is found.
    """
    k = M.shape[0]
    val = _l1(M, u)
    for _ in range(max_moves):
        active = _snap_active(M, u, k - 1)
        best_val, best_u = val, None
        for j in range(k - 1):
            rest = np.delete(active, j)
            if rest.size:
                _, s, vt = linalg.svd(M[:, rest].T)
                B = vt[rest.size:].T
                if B.shape[1] != 2:
                    continue
            else:
                B = np.eye(k)
            cv, cu = _circle_min(M, B)
            if cv < best_val * (1 - 1e-12):
                best_val, best_u = cv, cu
        if best_u is None:
            break
        val, u = best_val, best_u
    return val, u


def _inf_l1(M, restarts, iters, g):
    """Multi-start local search for ``min_{||u||=1} ||M^T u||_1``.

    Projected subgradient steps bring each start near a local minimum,
    then vertex-to-vertex edge moves finish it exactly.  A rank-deficient
    ``M`` has a direction with value zero.
    """
    k, n = M.shape
    if k == 0:
        return 0.0, np.zeros(0)
    U, s, _ = linalg.svd(M, full_matrices=True)
    if n < k or s[-1] <= 1e-12 * max(s[0], 1e-300):
        return 0.0, U[:, -1]
    if k == 1:
        return float(np.abs(M).sum()), np.ones(1)
    starts = [U[:, -1]] + list(g.standard_normal((restarts, k)))
    best, best_u = np.inf, None
    step0 = 0.5 / math.sqrt(n)
    for u in starts:
        u = u / np.linalg.norm(u)
        for t in range(iters):
            gr = M @ np.sign(u @ M)
            gr -= (gr @ u) * u
            ng = np.linalg.norm(gr)
            if ng == 0:
                break
            u = u - step0 / math.sqrt(t + 1) * gr / ng
            u /= np.linalg.norm(u)
        if k == 2:
            val, u = _circle_min(M, np.eye(2))
        else:
            val, u = _edge_descent(M, u)
        if val < best:
            best, best_u = val, u
    return best, best_u


def permeance(ds, p, restarts=50, iters=200, seed=0):
    """Permeance statistics of a dataset.

    ``delta_min`` is the smallest ``||u^T D_j||_p^p`` over unit ``u`` in
    any cluster subspace, ``delta_dot_max`` the largest
    ``||u^T Udot_j^T D_j||_p^p`` and ``delta_bar_max`` the largest
    ``||u^T S^T D_j||_p^p`` (0 without an intersection).
    """
    if p not in (1, 2):
        raise ParameterError(f"p must be 1 or 2, got {p}")
    b = ds.bases
    inner = [b.U[j].T @ ds.cluster(j) for j in range(ds.m)]
    dots = [ds.dot_block(j) for j in range(ds.m)]
    bars = [ds.bar_block(j) for j in range(ds.m)] if ds.s > 0 else []
    if p == 2:
        return PermeanceStats(
            min(_inf_l2(M) for M in inner),
            max(_sup_l2(M) for M in dots),
            max((_sup_l2(M) for M in bars), default=0.0),
            2, True)
    g = RngSpec(0 if seed is None else seed).generator(_PERMEANCE_PURPOSE)
    mins = [_inf_l1(M, restarts, iters, g) for M in inner]
    dmax = [_sup_l1(M, restarts, iters, g) for M in dots]
    bmax = [_sup_l1(M, restarts, iters, g) for M in bars]
    jm = int(np.argmin([v for v, _ in mins]))
    jd = int(np.argmax([v for v, _ in dmax]))
    dirs = {"delta_min": (jm, mins[jm][1]), "delta_dot_max": (jd, dmax[jd][1])}
    bar = 0.0
    if bmax:
        jb = int(np.argmax([v for v, _ in bmax]))
        bar = bmax[jb][0]
        dirs["delta_bar_max"] = (jb, bmax[jb][1])
    return PermeanceStats(mins[jm][0], dmax[jd][0], bar, 1, False, dirs)


# --------------------------------------------------------------------------
# bound constants

def _log_term(M2, delta):
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return math.log(2.0 * M2 / delta)


def _check_xy(x, y, name):
    if not (0 <= x <= y and y > 0):
        raise ParameterError(f"{name} needs 0 <= x <= y and y > 0, got x={x}, y={y}")


def sigma_l(x, y, delta, M2):
    """Lower concentration factor for the fraction ``x / y``.

    Defined for ``0 <= x <= y``, ``y > 0``.  Since ``x <= y`` the
    denominator is at least ``(sqrt(x) - sqrt(L))^2 + L > 0``, so ``x = y``
    (no intersection) is allowed.
    """
    _check_xy(x, y, "sigma_l")
    L = _log_term(M2, delta)
    num = x - 2 * math.sqrt(x * L)
    den = y + 2 * math.sqrt((y - x) * L) + 2 * L - 2 * math.sqrt(x * L)
    return num / den


def sigma_u(x, y, delta, M2):
    """Upper concentration factor for the fraction ``x / y``; ``0 <= x <= y``."""
    _check_xy(x, y, "sigma_u")
    L = _log_term(M2, delta)
    num = x + 2 * math.sqrt(x * L) + 2 * L
    den = y + 2 * math.sqrt(x * L) + 2 * L - 2 * math.sqrt((y - x) * L)
    return num / den


def z_const(x, n, m, delta):
    if x < 1:
        raise ParameterError(f"dimension must be at least 1, got {x}")
    L = math.log(2.0 * n * m / delta)
    return 1 + 2 * math.sqrt(L / x) + 2 * L / x


def eta(x, n, m, delta):
    """Deviation of ``n / x`` allowed for the extreme singular values of an
    ``x``-dimensional Gaussian block."""
    if x < 1:
        raise ParameterError(f"dimension must be at least 1, got {x}")
    L = math.log(2.0 * x * m / delta)
    return max(4 * z_const(x, n, m, delta) / 3 * L,
               math.sqrt(4 * n * (x + 3) / x ** 2 * L))


def c_delta(M1, m, r, s, delta):
    if M1 < 2 or r <= s:
        raise ParameterError("c_delta needs M1 >= 2 and r > s")
    base = (M1 - 1) * (r - s)
    return 3 * max(1.0, math.sqrt(8 * M1 * math.pi / base),
                   math.sqrt(16 * M1 * math.log(m * r / delta) / base))


def vartheta(M1, m, r, s):
    return M1 - (s + (r - s) * (m - 1))


@dataclass
class BoundConstants:
    """Constants shared by the probabilistic conditions for one parameter set."""

    M1: int
    m: int
    n: int
    r: int
    s: int
    delta: float
    eta: dict
    z: dict
    c_delta: float
    vartheta: int

    @property
    def M2(self):
        return self.n * self.m

    def sigma_l(self, x, y):
        return sigma_l(x, y, self.delta, self.M2)

    def sigma_u(self, x, y):
        return sigma_u(x, y, self.delta, self.M2)

    @classmethod
    def build(cls, M1, m, n, r, s, delta):
        dims = sorted({d for d in (r, r - s, s) if d >= 1})
        return cls(M1, m, n, r, s, delta,
                   {d: eta(d, n, m, delta) for d in dims},
                   {d: z_const(d, n, m, delta) for d in dims},
                   c_delta(M1, m, r, s, delta), vartheta(M1, m, r, s))


# --------------------------------------------------------------------------
# geometric helpers

def compute_d_perp(ds, i):
    """``Udot_k beta_i / ||beta_i||^2``: feasible for ``c^T d_i = 1`` and
    orthogonal to the intersection."""
    if not 0 <= i < ds.M2:
        raise IndexError(f"column {i} out of range for M2={ds.M2}")
    Ud = ds.bases.Udot[ds.labels[i]]
    beta = Ud.T @ ds.D[:, i]
    nb = float(beta @ beta)
    if nb <= 1e-28 * max(float(ds.D[:, i] @ ds.D[:, i]), 1e-300):
        raise ComputationError(f"column {i} has no innovative component")
    return Ud @ beta / nb


@dataclass
class VecBasis:
    basis: np.ndarray
    min_singular: float
    rank: int
    degenerate: bool


def vec_basis(bases, i, tol=1e-10):
    """Orthonormal basis of the part of ``S_i`` outside the other subspaces.

    Projects ``U_i`` onto the orthogonal complement of the sum of the other
    cluster subspaces.  ``min_singular`` is the smallest singular value of
    ``basis^T Udot_i``; ``degenerate`` flags a residual rank below ``r - s``.
    """
    if not 0 <= i < bases.m:
        raise IndexError(f"cluster {i} out of range")
    others = np.hstack([bases.U[k] for k in range(bases.m) if k != i])
    Uo, so, _ = linalg.svd(others, full_matrices=False)
    P = Uo[:, so > tol * max(so[0], 1e-300)]
    R = bases.U[i] - P @ (P.T @ bases.U[i])
    Ur, sr, _ = linalg.svd(R, full_matrices=False)
    rank = int(np.count_nonzero(sr > tol))
    Vb = Ur[:, :rank]
    want = bases.r - bases.s
    if rank < want or want == 0:
        return VecBasis(Vb, 0.0, rank, True)
    msv = float(_sv(Vb.T @ bases.Udot[i])[want - 1])
    return VecBasis(Vb, msv, rank, False)


# --------------------------------------------------------------------------
# sufficient conditions

@dataclass
class TheoremReport:
    theorem_id: str
    lhs: float
    rhs: float
    holds: bool
    inputs: dict
    inapplicable: bool = False
    reason: str = ""
    requirement_holds: bool = None
    min_margin: float = None
    approximate: bool = False


def _ratios(ds, p):
    nd = np.linalg.norm(ds.D, axis=0)
    na = np.linalg.norm(ds.bases.S.T @ ds.D, axis=0) if ds.s else np.zeros(ds.M2)
    nb = np.array([np.linalg.norm(ds.bases.Udot[k].T @ ds.D[:, i])
                   for i, k in enumerate(ds.labels)])
    return (na / nd) ** p, (nb / nd) ** p


def _inapplicable(tid, inputs, reason):
    return TheoremReport(tid, float("nan"), float("nan"), False, inputs, True, reason)


def _coupling(kappa, m, coh):
    return kappa * (1.0 / (kappa + m - 1) + coh * (m - 1) / (kappa + m - 1))


def check_theorem(theorem_id, kappa, p=2, delta=0.01, ds=None, params=None,
                  perm=None, perm_options=None):
    """Evaluate one sufficient condition as ``lhs >= rhs``.

    ``ds`` is required for the deterministic conditions.  The probabilistic
    ones take ``params`` with keys ``M1, m, n, r, s`` (and ``phi`` for
    ``T2``); if only ``ds`` is given they are read from it.  Violated
    hypotheses give a report flagged ``inapplicable``.  ``perm`` reuses
    precomputed permeance statistics.
    """
    if theorem_id not in THEOREMS:
        raise ParameterError(f"unknown theorem {theorem_id!r}")
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if p not in (1, 2):
        raise ParameterError(f"p must be 1 or 2, got {p}")
    pr = dict(params or {})
    if ds is not None:
        pr.update(M1=ds.M1, m=ds.m, n=ds.n, r=ds.r, s=ds.s)
    missing = [k for k in ("M1", "m", "n", "r", "s") if k not in pr]
    if missing:
        raise ParameterError(f"missing parameters {missing}")
    M1, m, n, r, s = (int(pr[k]) for k in ("M1", "m", "n", "r", "s"))
    inputs = dict(M1=M1, m=m, n=n, r=r, s=s, kappa=float(kappa), p=p, delta=float(delta))

    if theorem_id in DETERMINISTIC:
        if ds is None:
            raise ParameterError(f"{theorem_id} needs a dataset")
        if perm is None:
            perm = permeance(ds, p, **(perm_options or {}))
        approx = not perm.exact
        if perm.delta_min <= 0:
            return TheoremReport(theorem_id, 0.0, float("inf"), False, inputs,
                                 reason="delta_min is zero", approximate=approx)
        ra, rb = _ratios(ds, p)
        phi = affinity_report(ds.bases).phi
        inputs["phi"] = phi
        if theorem_id == "T1":
            lhs = float(rb.min()) * perm.delta_min
            rhs = perm.delta_dot_max * _coupling(kappa, m, phi ** p)
        elif theorem_id == "T4":
            vb = [vec_basis(ds.bases, j) for j in range(m)]
            if any(v.degenerate for v in vb):
                return _inapplicable(theorem_id, inputs, "innovation assumption fails")
            lhs = float(rb.min()) * min(v.min_singular for v in vb) ** p
            rhs = kappa / (kappa + m - 1) * perm.delta_dot_max / perm.delta_min
        else:
            lhs = 1.0
            rhs = (kappa * float(ra.max()) * perm.delta_bar_max / perm.delta_min
                   + kappa * float(rb.max()) * phi ** p * perm.delta_dot_max / perm.delta_min)
        return TheoremReport(theorem_id, lhs, rhs, bool(lhs >= rhs), inputs,
                             approximate=approx)

    # probabilistic conditions: printed for p = 2 only
    if p != 2:
        return _inapplicable(theorem_id, inputs, "stated for p = 2 only")
    if theorem_id == "T5" and not M1 > s + (r - s) * m:
        return _inapplicable(theorem_id, inputs, "needs M1 > s + (r - s) m")
    if theorem_id == "T2":
        if "phi" in pr:
            phi = float(pr["phi"])
        elif ds is not None:
            phi = affinity_report(ds.bases).phi
        else:
            raise ParameterError("T2 needs phi or a dataset")
        inputs["phi"] = phi
    try:
        bc = BoundConstants.build(M1, m, n, r, s, delta)
    except ParameterError as exc:
        return _inapplicable(theorem_id, inputs, str(exc))
    inputs["probability"] = 1.0 - _PROBABILITY_FACTOR[theorem_id] * delta
    nr = n / r
    spread = nr + (r - s) / r * bc.eta[r - s]
    low = nr - bc.eta[r]
    coh = bc.c_delta * (r - s) ** 2 / M1
    if theorem_id == "T2":
        lhs = low * bc.sigma_l(r - s, r)
        rhs = _coupling(kappa, m, phi ** 2) * spread
    elif theorem_id == "T3":
        lhs = low * bc.sigma_l(r - s, r)
        rhs = _coupling(kappa, m, coh) * spread
    elif theorem_id == "T5":
        lhs = bc.sigma_l(r - s, r) * bc.sigma_l(bc.vartheta, M1)
        rhs = kappa / (kappa + m - 1) * spread / low if low > 0 else float("inf")
    else:
        # with s = 0 there is no intersection term
        first = 0.0
        if s > 0:
            first = kappa * bc.sigma_u(s, r) * (nr + s / r * bc.eta[s])
        lhs = low
        rhs = first + kappa * bc.sigma_u(r - s, r) * spread * coh
    return TheoremReport(theorem_id, float(lhs), float(rhs), bool(lhs >= rhs), inputs)


# --------------------------------------------------------------------------
# soundness sweep

ALGORITHM_FOR = {"T1": None, "T2": IP_L2, "T3": IP_L2, "T4": None, "T5": IP_L2,
                 "T6": TSC, "T7": TSC}


@dataclass
class SweepReport:
    reports: list
    violations: int
    checked: int

    def rows(self):
        return [report_row(r) for r in self.reports]


def report_row(rep):
    row = {"theorem_id": rep.theorem_id}
    for key in ("trial", "M1", "m", "n", "r", "s", "kappa", "p", "delta"):
        row[key] = rep.inputs.get(key, "")
    row.update(lhs=rep.lhs, rhs=rep.rhs, holds=int(rep.holds),
               inapplicable=int(rep.inapplicable),
               requirement_holds="" if rep.requirement_holds is None else int(rep.requirement_holds),
               min_margin="" if rep.min_margin is None else rep.min_margin)
    return row


REPORT_FIELDS = ["theorem_id", "trial", "M1", "m", "n", "r", "s", "kappa", "p", "delta",
                 "lhs", "rhs", "holds", "inapplicable", "requirement_holds", "min_margin"]


def write_reports_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
        w.writeheader()
        for rep in reports:
            row = report_row(rep)
            for k in ("lhs", "rhs", "min_margin", "kappa", "delta"):
                if isinstance(row[k], float):
                    row[k] = repr(row[k])
            w.writerow(row)


def _adjacency_for(theorem_id, ds, p, l1_params=None):
    source = ALGORITHM_FOR[theorem_id]
    if source is None:
        source = IP_L1 if p == 1 else MFC
    return build_adjacency(ds.D, source, l1_params)


def soundness_sweep(grid, trials, seed=0, normalize=False, delta=0.01, perm_options=None,
                    l1_params=None):
    """Draw datasets over ``grid`` and test every condition that holds.

    ``grid`` is a sequence of dicts with keys ``theorem, M1, m, n, r, s,
    kappa, p``.  For each trial the matching algorithm is run on the same
    data (MFC or l1 iPursuit for the iPursuit conditions, TSC for the TSC
    ones) and Requirement 1 is checked at the same ``kappa`` and ``p``.
    A violation is a holding condition whose requirement fails.
    """
    reports = []
    violations = checked = 0
    stream = 0
    for cell in grid:
        tid = cell["theorem"]
        for t in range(trials):
            rng = RngSpec(seed, stream)
            stream += 1
            ds = make_dataset(cell["M1"], cell["m"], cell["r"], cell["s"], cell["n"],
                              rng, normalize=normalize)
            rep = check_theorem(tid, cell["kappa"], cell["p"], delta, ds=ds,
                                perm_options=perm_options)
            rep.inputs["trial"] = t
            if rep.holds:
                adj = _adjacency_for(tid, ds, cell["p"], l1_params)
                margin = requirement_margin(adj, ds, cell["p"])
                rep.requirement_holds = margin.holds(cell["kappa"])
                rep.min_margin = margin.min_margin
                checked += 1
                violations += int(not rep.requirement_holds)
            reports.append(rep)
    return SweepReport(reports, violations, checked)
