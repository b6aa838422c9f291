"""Figure reproductions and the theorem sweep.

Each ``run_*`` returns a dict of tables (lists of row dicts keyed by CSV
column) and, when ``write`` is set, writes them as CSV plus an SVG chart
into ``cfg.out``.  Trials are drawn from independent ``(seed, stream)``
pairs derived from the cell and trial index, so results do not depend on
execution order.
"""
from __future__ import annotations

import csv
import itertools
from pathlib import Path

import numpy as np

from ..directions import build_adjacency
from ..graph import cluster_adjacency
from ..metrics import clustering_error, column_profile, kappa_prime
from ..synth import RngSpec, make_dataset
from ..theory import REPORT_FIELDS, report_row, soundness_sweep
from . import svgplot

STREAMS_PER_CELL = 1_000_000
_KAPPA_PURPOSE = 3


def kmeans_seed(seed, stream):
    """32-bit k-means seed derived from the trial's stream."""
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream), 2]).generate_state(1)[0])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


def _mean_by(rows, keys, value):
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row[value])
    out = []
    for key, vals in groups.items():
        arr = np.asarray(vals, dtype=float)
        rec = dict(zip(keys, key))
        rec["mean_" + value] = float(arr.mean())
        rec["std_" + value] = float(arr.std())
        rec["trials"] = arr.size
        out.append(rec)
    return out


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def clustering_errors(ds, algorithms, topk, seed):
    """Clustering error of each algorithm on one dataset."""
    res = {}
    for alg in algorithms:
        adj = build_adjacency(ds.D, alg)
        labels = cluster_adjacency(adj, ds.m, topk=topk, seed=seed).labels
        res[alg] = clustering_error(labels, ds.labels)
    return res


# --------------------------------------------------------------------------

def run_fig1(cfg, write=True):
    """Averaged adjacency column of cluster 0 and its separation ratio
    ``kappa'`` as ``m`` grows, for each algorithm."""
    M1, r, s, n = cfg.M1[0], cfg.r, cfg.s[0], cfg.n
    trials_rows, profile_rows = [], []
    for ci, m in enumerate(cfg.m):
        for t in range(cfg.trials):
            stream = ci * STREAMS_PER_CELL + t
            ds = make_dataset(M1, m, r, s, n, RngSpec(cfg.seed, stream), cfg.normalize)
            for alg in cfg.algorithms:
                adj = build_adjacency(ds.D, alg)
                trials_rows.append(dict(algorithm=alg, m=m, trial=t,
                                        kappa_prime=kappa_prime(adj, ds, 0)))
                if t == 0:
                    prof = column_profile(adj, ds, 0)
                    profile_rows.extend(dict(algorithm=alg, m=m, index=i, value=float(v))
                                        for i, v in enumerate(prof))
    summary = _mean_by(trials_rows, ("algorithm", "m"), "kappa_prime")
    tables = {"fig1_trials": trials_rows, "fig1_summary": summary,
              "fig1_profile": profile_rows}
    if write:
        out = _outdir(cfg)
        write_csv(out / "fig1_trials.csv", trials_rows, ["algorithm", "m", "trial", "kappa_prime"])
        write_csv(out / "fig1_summary.csv", summary,
                  ["algorithm", "m", "mean_kappa_prime", "std_kappa_prime", "trials"])
        write_csv(out / "fig1_profile.csv", profile_rows, ["algorithm", "m", "index", "value"])
        series = {a: ([r_["m"] for r_ in summary if r_["algorithm"] == a],
                      [r_["mean_kappa_prime"] for r_ in summary if r_["algorithm"] == a])
                  for a in cfg.algorithms}
        svgplot.line_chart(out / "fig1_kappa_prime.svg", series,
                           f"kappa' vs m (M1={M1}, r={r}, s={s}, n={n})", "m", "mean kappa'")
        for m in (cfg.m[0], cfg.m[-1]):
            prof = {a: ([p["index"] for p in profile_rows if p["algorithm"] == a and p["m"] == m],
                        [p["value"] for p in profile_rows if p["algorithm"] == a and p["m"] == m])
                    for a in cfg.algorithms}
            svgplot.line_chart(out / f"fig1_profile_m{m}.svg", prof,
                               f"mean column of cluster 1, m={m}", "row index", "value")
    return tables


def _error_sweep(cfg, cells, xname):
    rows = []
    for ci, cell in enumerate(cells):
        M1, m, s = cell
        for t in range(cfg.trials):
            stream = ci * STREAMS_PER_CELL + t
            ds = make_dataset(M1, m, cfg.r, s, cfg.n, RngSpec(cfg.seed, stream), cfg.normalize)
            errs = clustering_errors(ds, cfg.algorithms, cfg.topk, kmeans_seed(cfg.seed, stream))
            for alg, e in errs.items():
                rows.append(dict(algorithm=alg, M1=M1, m=m, s=s, trial=t, error=e))
    summary = _mean_by(rows, ("algorithm", "M1", "m", "s"), "error")
    return rows, summary


def run_fig2_m(cfg, write=True):
    """Clustering error versus the number of clusters for every ``M1``."""
    cells = [(M1, m, cfg.s[0]) for M1, m in itertools.product(cfg.M1, cfg.m)]
    rows, summary = _error_sweep(cfg, cells, "m")
    if write:
        out = _outdir(cfg)
        write_csv(out / "fig2_m_trials.csv", rows, ["algorithm", "M1", "m", "s", "trial", "error"])
        write_csv(out / "fig2_m_summary.csv", summary,
                  ["algorithm", "M1", "m", "s", "mean_error", "std_error", "trials"])
        for M1 in cfg.M1:
            series = {a: ([q["m"] for q in summary if q["algorithm"] == a and q["M1"] == M1],
                          [q["mean_error"] for q in summary if q["algorithm"] == a and q["M1"] == M1])
                      for a in cfg.algorithms}
            svgplot.line_chart(out / f"fig2_m_M1_{M1}.svg", series,
                               f"clustering error vs m (M1={M1})", "m", "clustering error")
    return {"fig2_m_trials": rows, "fig2_m_summary": summary}


def run_fig2_s(cfg, write=True):
    """Clustering error versus the intersection dimension."""
    cells = [(cfg.M1[0], cfg.m[0], s) for s in cfg.s]
    rows, summary = _error_sweep(cfg, cells, "s")
    if write:
        out = _outdir(cfg)
        write_csv(out / "fig2_s_trials.csv", rows, ["algorithm", "M1", "m", "s", "trial", "error"])
        write_csv(out / "fig2_s_summary.csv", summary,
                  ["algorithm", "M1", "m", "s", "mean_error", "std_error", "trials"])
        series = {a: ([q["s"] for q in summary if q["algorithm"] == a],
                      [q["mean_error"] for q in summary if q["algorithm"] == a])
                  for a in cfg.algorithms}
        svgplot.line_chart(out / "fig2_s.svg", series,
                           f"clustering error vs s (M1={cfg.M1[0]}, m={cfg.m[0]})", "s",
                           "clustering error")
    return {"fig2_s_trials": rows, "fig2_s_summary": summary}


def half_normal_adjacency(m, n, kappa, rng):
    """Half-normal entries with the cross-cluster part of every column
    rescaled so that ``kappa / (m - 1) * ||a_out||_1 = ||a_in||_1``."""
    g = rng.generator(_KAPPA_PURPOSE)
    M2 = m * n
    A = np.abs(g.standard_normal((M2, M2)))
    labels = np.repeat(np.arange(m), n)
    same = labels[:, None] == labels[None, :]
    inside = np.where(same, A, 0.0).sum(axis=0)
    outside = np.where(same, 0.0, A).sum(axis=0)
    factor = (m - 1) * inside / (kappa * outside)
    A = np.where(same, A, A * factor[None, :])
    return A, labels


def run_fig_kappa(cfg, write=True):
    """Spectral clustering error on synthetic adjacencies as ``kappa`` grows."""
    m, n = cfg.m[0], cfg.n
    rows = []
    for ci, kappa in enumerate(cfg.kappa):
        for t in range(cfg.trials):
            stream = ci * STREAMS_PER_CELL + t
            A, labels = half_normal_adjacency(m, n, kappa, RngSpec(cfg.seed, stream))
            pred = cluster_adjacency(A, m, topk=cfg.topk, seed=kmeans_seed(cfg.seed, stream)).labels
            rows.append(dict(kappa=float(kappa), trial=t, error=clustering_error(pred, labels)))
    summary = _mean_by(rows, ("kappa",), "error")
    if write:
        out = _outdir(cfg)
        write_csv(out / "fig_kappa_trials.csv", rows, ["kappa", "trial", "error"])
        write_csv(out / "fig_kappa_summary.csv", summary,
                  ["kappa", "mean_error", "std_error", "trials"])
        svgplot.line_chart(out / "fig_kappa.svg",
                           {"spectral clustering": ([q["kappa"] for q in summary],
                                                    [q["mean_error"] for q in summary])},
                           f"clustering error vs kappa (m={m}, n={n})", "kappa",
                           "clustering error")
    return {"fig_kappa_trials": rows, "fig_kappa_summary": summary}


def verify_grid(cfg):
    return [dict(theorem=tid, M1=M1, m=m, n=cfg.n, r=cfg.r, s=s, kappa=k, p=cfg.p)
            for tid in cfg.theorems
            for M1, m, s, k in itertools.product(cfg.M1, cfg.m, cfg.s, cfg.kappa)]


def run_verify(cfg, write=True):
    """Soundness sweep: every holding condition is checked against the
    requirement measured on the matching algorithm's adjacency."""
    grid = verify_grid(cfg)
    rep = soundness_sweep(grid, cfg.trials, seed=cfg.seed, normalize=cfg.normalize,
                          delta=cfg.delta)
    rows = [report_row(r) for r in rep.reports]
    summary = []
    for tid in cfg.theorems:
        sub = [r for r in rep.reports if r.theorem_id == tid]
        summary.append(dict(
            theorem_id=tid, instances=len(sub),
            inapplicable=sum(r.inapplicable for r in sub),
            holds=sum(r.holds for r in sub),
            checked=sum(r.requirement_holds is not None for r in sub),
            violations=sum(r.requirement_holds is False for r in sub)))
    if write:
        out = _outdir(cfg)
        write_csv(out / "verify.csv", rows, REPORT_FIELDS)
        write_csv(out / "verify_summary.csv", summary,
                  ["theorem_id", "instances", "inapplicable", "holds", "checked", "violations"])
    return {"verify": rows, "verify_summary": summary, "violations": rep.violations}


RUNNERS = {"fig1": run_fig1, "fig2-m": run_fig2_m, "fig2-s": run_fig2_s,
           "fig-kappa": run_fig_kappa, "verify": run_verify}
