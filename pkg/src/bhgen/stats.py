"""Ensemble statistics: ECDF, two-sample KS, Pearson, survival-conditioned summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import Constants, TwoTypeConstants
from .engine import Trajectory
from .estimator import SpecMismatchError, normalized_point


class EmptyInputError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ECDF:
    values: np.ndarray  # sorted samples

    def __call__(self, x):
        """Right-continuous F(x) = #{samples <= x} / n."""
        return np.searchsorted(self.values, x, side="right") / len(self.values)

    @property
    def ranks(self) -> np.ndarray:
        return np.arange(1, len(self.values) + 1) / len(self.values)


def ecdf(samples) -> ECDF:
    a = np.sort(np.asarray(samples, dtype=float))
    if a.size == 0:
        raise EmptyInputError("ECDF of an empty sample")
    return ECDF(a)


def ks_two_sample(a, b) -> float:
    """Exact sup-distance between the two ECDFs (merged sort, no binning)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptyInputError("KS statistic needs two nonempty samples")
    # both ECDFs only jump at pooled sample points
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("pearson needs paired samples of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = math.sqrt(float(np.dot(da, da)))
    sb = math.sqrt(float(np.dot(db, db)))
    if sa == 0 or sb == 0:
        raise DegenerateVarianceError("pearson correlation undefined for a constant sample")
    r = float(np.dot(da, db)) / (sa * sb)
    return max(-1.0, min(1.0, r))


def mean_stderr(x) -> tuple[float | None, float | None]:
    """Mean and sample-sd/sqrt(n); stderr is None for fewer than two values."""
    x = np.asarray([v for v in x if v is not None], dtype=float)
    if x.size == 0:
        return None, None
    m = float(np.mean(x))
    if x.size < 2:
        return m, None
    return m, float(np.std(x, ddof=1) / math.sqrt(x.size))


@dataclass
class EnsembleSummary:
    n_total: int
    n_surviving: int
    # rows keyed by (t, type, conditioning) -> {quantity: (mean, stderr)}
    table: dict = field(default_factory=dict)
    ks_wz_wg: dict = field(default_factory=dict)  # type -> KS at final time
    pearson_wz_wg: dict = field(default_factory=dict)  # type -> r at final time
    pearson_wz1_wz2: float | None = None
    pearson_wg1_wg2: float | None = None

    def rows(self):
        """Flat records for CSV output."""
        for (t, ctype, cond), q in sorted(self.table.items()):
            row = {"t": t, "type": ctype, "conditioning": cond}
            for name, (m, se) in q.items():
                row[f"{name}_mean"] = m
                row[f"{name}_stderr"] = se
            yield row


QUANTITIES = ("Z", "G", "w_z", "w_g", "avg_gen", "label_est")


def survivors(trajs: list[Trajectory], cell_type: int | None = None) -> list[Trajectory]:
    """Trajectories with living cells (of ``cell_type`` if given) at their final snapshot."""
    out = []
    for tr in trajs:
        if not tr.snapshots or tr.capped:
            continue
        last = tr.snapshots[-1]
        alive = last.total_Z() if cell_type is None else last.Z[cell_type - 1]
        if alive > 0:
            out.append(tr)
    return out


def final_prefactors(trajs: list[Trajectory], consts, cell_type: int = 1) -> tuple[np.ndarray, np.ndarray]:
    wz, wg = [], []
    for tr in trajs:
        pt = normalized_point(tr.snapshots[-1], consts, cell_type)
        wz.append(pt.w_z)
        wg.append(pt.w_g)
    return np.asarray(wz, dtype=float), np.asarray(wg, dtype=float)


def _safe(fn, *args):
    try:
        return fn(*args)
    except (ValueError, EmptyInputError, DegenerateVarianceError):
        return None


def summarize(trajs: list[Trajectory], consts: Constants | TwoTypeConstants,
              p: float | None = None) -> EnsembleSummary:
    """Per-time, per-type means/stderrs, plus final-time KS and correlations.

    Survival conditioning keeps trajectories with living cells at the final
    observation time.
    """
    if not trajs:
        raise EmptyInputError("no trajectories")
    hashes = {tr.spec_hash for tr in trajs}
    if len(hashes) != 1:
        raise SpecMismatchError(f"ensemble mixes specs {sorted(hashes)}")
    n_types = len(trajs[0].snapshots[0].Z) if trajs[0].snapshots else 1
    alive = survivors(trajs)
    summary = EnsembleSummary(n_total=len(trajs), n_surviving=len(alive))
    full = [tr for tr in trajs if not tr.capped]
    times = [s.t for s in full[0].snapshots] if full else []

    for cond, group in (("all", full), ("surviving", alive)):
        for idx, t in enumerate(times):
            for ctype in range(1, n_types + 1):
                cols = {q: [] for q in QUANTITIES}
                for tr in group:
                    s = tr.snapshots[idx]
                    pt = normalized_point(s, consts, ctype, p)
                    cols["Z"].append(s.Z[ctype - 1])
                    cols["G"].append(s.G[ctype - 1])
                    cols["w_z"].append(pt.w_z)
                    cols["w_g"].append(pt.w_g)
                    cols["avg_gen"].append(pt.avg_gen)
                    cols["label_est"].append(pt.label_est)
                summary.table[(t, ctype, cond)] = {q: mean_stderr(v) for q, v in cols.items()}

    for ctype in range(1, n_types + 1):
        alive_t = survivors(trajs, ctype)
        if len(alive_t) >= 2:
            wz, wg = final_prefactors(alive_t, consts, ctype)
            summary.ks_wz_wg[ctype] = _safe(ks_two_sample, wz, wg)
            summary.pearson_wz_wg[ctype] = _safe(pearson, wz, wg)
    if n_types == 2 and len(alive) >= 2:
        w1 = [normalized_point(tr.snapshots[-1], consts, 1) for tr in alive]
        w2 = [normalized_point(tr.snapshots[-1], consts, 2) for tr in alive]
        summary.pearson_wz1_wz2 = _safe(pearson, [a.w_z for a in w1], [b.w_z for b in w2])
        summary.pearson_wg1_wg2 = _safe(pearson, [a.w_g for a in w1], [b.w_g for b in w2])
    return summary
