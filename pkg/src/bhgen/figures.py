"""CSV data behind each simulation figure panel.

Panel groups (replicate counts at scale 1):
  fig2a/b   Z(t) e^{-alpha t} and G(t) e^{-alpha t}, 20 surviving paths
  fig3a/b/c ECDFs and scatter of w_z, w_g at 96 h (100 runs); 20 paths of w_z - w_g
  fig9a-d   mean normalised Z_i, G_i for both Malthus orderings (1000 runs each)
  fig10a-c  per-path scatter of Z2 vs G2, Z1 vs Z2, G1 vs G2 at 96 h, with Pearson r
  fig11a-d  ten estimator paths for type 2, one or 100 initial cells, p = 0.01
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .config import constants_for
from .ensemble import run_ensemble
from .estimator import normalized_point, slope_target
from .presets import single_type_spec, two_type_spec
from .stats import ecdf, mean_stderr, pearson

T_FINAL = 96.0
PATH_TIMES = [float(t) for t in np.arange(1.0, T_FINAL + 0.5, 1.0)]
GROUPS = ("fig2", "fig3", "fig9", "fig10", "fig11")


def _write(path: Path, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (format(v, ".10g") if isinstance(v, float) else v) for v in r])
    return str(path)


def _n(base: int, scale: float) -> int:
    return max(2, int(round(base * scale)))


def surviving_runs(spec, times, n: int, seed: int, jobs: int):
    """First ``n`` replicates (in stream order) with living cells at the final time."""
    out, start = [], 0
    while len(out) < n:
        batch = run_ensemble(spec, times, 2 * (n - len(out)) + 4, seed, jobs, first_index=start)
        start += len(batch)
        out.extend(tr for tr in batch if tr.snapshots and tr.snapshots[-1].total_Z() > 0)
    return out[:n]


def fig2(out: Path, scale, seed, jobs):
    spec = single_type_spec()
    consts = constants_for(spec)
    runs = surviving_runs(spec, PATH_TIMES, _n(20, scale), seed, jobs)
    za, gb = [], []
    for k, tr in enumerate(runs):
        for s in tr.snapshots:
            e = math.exp(-consts.alpha * s.t)
            za.append((k, s.t, s.Z[0] * e))
            gb.append((k, s.t, s.G[0] * e))
    return [_write(out / "fig2a.csv", ["path", "t", "Z_exp_minus_alpha_t"], za),
            _write(out / "fig2b.csv", ["path", "t", "G_exp_minus_alpha_t"], gb)]


def fig3(out: Path, scale, seed, jobs):
    spec = single_type_spec()
    consts = constants_for(spec)
    runs = [tr for tr in run_ensemble(spec, PATH_TIMES, _n(100, scale), seed, jobs)
            if tr.snapshots[-1].Z[0] > 0]
    pts = [normalized_point(tr.snapshots[-1], consts) for tr in runs]
    wz = [p.w_z for p in pts]
    wg = [p.w_g for p in pts]
    rows = []
    for name, xs in (("w_z", wz), ("w_g", wg)):
        f = ecdf(xs)
        rows.extend((name, float(x), float(r)) for x, r in zip(f.values, f.ranks))
    files = [_write(out / "fig3a.csv", ["series", "x", "ecdf"], rows),
             _write(out / "fig3b.csv", ["path", "w_z", "w_g"], [(k, a, b) for k, (a, b) in enumerate(zip(wz, wg))])]
    diff = []
    for k, tr in enumerate(runs[:_n(20, scale)]):
        for s in tr.snapshots:
            p = normalized_point(s, consts)
            diff.append((k, s.t, p.w_z - p.w_g))
    files.append(_write(out / "fig3c.csv", ["path", "t", "w_z_minus_w_g"], diff))
    return files


def _two_type_runs(ordering, scale, seed, jobs, times=PATH_TIMES):
    spec = two_type_spec(ordering)
    return spec, constants_for(spec), run_ensemble(spec, times, _n(1000, scale), seed, jobs)


def fig9_10(out: Path, scale, seed, jobs, want=("fig9", "fig10")):
    files = []
    means = {"fig9a": [], "fig9b": [], "fig9c": [], "fig9d": []}
    scatter = {"fig10a": [], "fig10b": [], "fig10c": []}
    corr = []
    for ordering, (pz, pg) in (("alpha1_less", ("fig9a", "fig9b")), ("alpha2_less", ("fig9c", "fig9d"))):
        _, consts, runs = _two_type_runs(ordering, scale, seed, jobs)
        for idx, t in enumerate(PATH_TIMES):
            for ctype in (1, 2):
                pts = [normalized_point(tr.snapshots[idx], consts, ctype) for tr in runs]
                mz, sz = mean_stderr([p.w_z for p in pts])
                mg, sg = mean_stderr([p.w_g for p in pts])
                means[pz].append((t, ctype, mz, sz))
                means[pg].append((t, ctype, mg, sg))
        alive = [tr for tr in runs if tr.snapshots[-1].Z[1] > 0]
        p1 = [normalized_point(tr.snapshots[-1], consts, 1) for tr in alive]
        p2 = [normalized_point(tr.snapshots[-1], consts, 2) for tr in alive]
        for a, b in zip(p1, p2):
            scatter["fig10a"].append((ordering, b.w_z, b.w_g))
            scatter["fig10b"].append((ordering, a.w_z, b.w_z))
            scatter["fig10c"].append((ordering, a.w_g, b.w_g))
        corr.append((ordering, "fig10a", pearson([b.w_z for b in p2], [b.w_g for b in p2])))
        corr.append((ordering, "fig10b", pearson([a.w_z for a in p1], [b.w_z for b in p2])))
        corr.append((ordering, "fig10c", pearson([a.w_g for a in p1], [b.w_g for b in p2])))
    if "fig9" in want:
        for name, rows in means.items():
            col = "w_z" if name in ("fig9a", "fig9c") else "w_g"
            files.append(_write(out / f"{name}.csv", ["t", "type", f"{col}_mean", f"{col}_stderr"], rows))
    if "fig10" in want:
        heads = {"fig10a": ["ordering", "w_z2", "w_g2"], "fig10b": ["ordering", "w_z1", "w_z2"],
                 "fig10c": ["ordering", "w_g1", "w_g2"]}
        for name, rows in scatter.items():
            files.append(_write(out / f"{name}.csv", heads[name], rows))
        files.append(_write(out / "fig10_pearson.csv", ["ordering", "panel", "pearson"], corr))
    return files


def fig11(out: Path, scale, seed, jobs, p: float = 1e-2):
    files = []
    panels = (("fig11a", "alpha1_less", 1), ("fig11b", "alpha1_less", 100),
              ("fig11c", "alpha2_less", 1), ("fig11d", "alpha2_less", 100))
    for name, ordering, n0 in panels:
        spec = two_type_spec(ordering, p_label_loss=p, initial_count=n0)
        consts = constants_for(spec)
        target = slope_target(consts, 2)
        runs = run_ensemble(spec, PATH_TIMES, _n(10, scale), seed, jobs)
        rows = []
        for k, tr in enumerate(runs):
            for s in tr.snapshots:
                pt = normalized_point(s, consts, 2, p)
                est = None if pt.label_est is None else pt.label_est * s.t
                rows.append((k, s.t, pt.avg_gen, est, target * s.t))
        files.append(_write(out / f"{name}.csv",
                            ["replicate", "t", "avg_gen", "label_estimate_of_avg_gen", "theory"], rows))
    return files


def write_all(out_dir, scale: float = 1.0, master_seed: int = 20190101, jobs: int = 1, only=None) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    only = set(only or GROUPS)
    unknown = only - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown figure groups {sorted(unknown)}")
    files = []
    if "fig2" in only:
        files += fig2(out, scale, master_seed, jobs)
    if "fig3" in only:
        files += fig3(out, scale, master_seed, jobs)
    if only & {"fig9", "fig10"}:
        files += fig9_10(out, scale, master_seed, jobs, want=tuple(only & {"fig9", "fig10"}))
    if "fig11" in only:
        files += fig11(out, scale, master_seed, jobs)
    return files
