"""Event-driven simulation of single- and two-type Bellman-Harris processes.

Cells sit in a min-heap keyed by (death_time, id). At death a cell draws
its offspring; a dividing cell that carries the label keeps it for all of
its children with probability 1 - p. Running per-type counters give each
snapshot in O(1).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .distributions import LifetimeDistribution, OffspringDistribution, RngStream

DEFAULT_POPULATION_CAP = 10_000_000
_BLOCK = 512


@dataclass(frozen=True)
class ProcessSpec:
    """Full parameterisation of a one- or two-type process.

    ``initial`` is a tuple of ``(cell_type, count, labeled)`` triples.
    """

    n_types: int
    lifetime: tuple[LifetimeDistribution, ...]
    offspring_type1: OffspringDistribution
    offspring_type2: OffspringDistribution | None = None
    p_label_loss: float = 0.0
    initial: tuple[tuple[int, int, bool], ...] = ((1, 1, True),)
    population_cap: int = DEFAULT_POPULATION_CAP

    def __post_init__(self):
        object.__setattr__(self, "lifetime", tuple(self.lifetime))
        object.__setattr__(self, "initial",
                           tuple((int(t), int(n), bool(lab)) for t, n, lab in self.initial))
        if self.n_types not in (1, 2):
            raise ValueError("n_types must be 1 or 2")
        if len(self.lifetime) != self.n_types:
            raise ValueError("need one lifetime distribution per type")
        if self.n_types == 1:
            if self.offspring_type1.is_pair:
                raise ValueError("single-type offspring law must be scalar")
            if self.offspring_type2 is not None:
                raise ValueError("offspring_type2 only applies to two-type processes")
        else:
            if not self.offspring_type1.is_pair:
                raise ValueError("type-1 offspring law of a two-type process must be pair-valued")
            if self.offspring_type2 is None or self.offspring_type2.is_pair:
                raise ValueError("two-type process needs a scalar type-2 offspring law")
        if not 0.0 <= self.p_label_loss <= 1.0:
            raise ValueError("p_label_loss must lie in [0, 1]")
        if not self.initial:
            raise ValueError("need at least one initial cell")
        for t, n, _ in self.initial:
            if t not in range(1, self.n_types + 1):
                raise ValueError(f"initial cell type {t} out of range")
            if n <= 0:
                raise ValueError("initial counts must be positive")
        if self.population_cap <= 0:
            raise ValueError("population_cap must be positive")

    @classmethod
    def single(cls, lifetime: LifetimeDistribution, offspring: OffspringDistribution,
               p_label_loss: float = 0.0, initial_count: int = 1, **kw) -> ProcessSpec:
        return cls(1, (lifetime,), offspring, None, p_label_loss,
                   ((1, initial_count, True),), **kw)

    @classmethod
    def two_type(cls, lifetime1, lifetime2, offspring1, offspring2,
                 p_label_loss: float = 0.0, initial_count: int = 1, **kw) -> ProcessSpec:
        return cls(2, (lifetime1, lifetime2), offspring1, offspring2, p_label_loss,
                   ((1, initial_count, True),), **kw)

    def initial_count(self, cell_type: int) -> int:
        return sum(n for t, n, _ in self.initial if t == cell_type)

    def to_dict(self) -> dict:
        return {
            "n_types": self.n_types,
            "lifetime": [d.to_dict() for d in self.lifetime],
            "offspring_type1": self.offspring_type1.to_dict(),
            "offspring_type2": None if self.offspring_type2 is None else self.offspring_type2.to_dict(),
            "p_label_loss": self.p_label_loss,
            "initial": [list(x) for x in self.initial],
            "population_cap": self.population_cap,
        }

    def digest(self, ignore_label: bool = False) -> str:
        """Content hash of the parameterisation.

        With ``ignore_label`` the label-loss probability is excluded, since
        it does not influence population dynamics.
        """
        d = self.to_dict()
        if ignore_label:
            d.pop("p_label_loss")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Cell:
    id: int
    cell_type: int
    generation: int
    labeled: bool
    birth_time: float
    death_time: float
    parent_id: int | None = None


@dataclass(frozen=True)
class Snapshot:
    """Per-type state at time ``t``; index 0 is type 1."""

    t: float
    Z: tuple[int, ...]
    G: tuple[int, ...]
    Zpos: tuple[int, ...]
    GB: tuple[int, ...]
    GD: tuple[int, ...]
    generations: tuple[Counter, ...] | None = None

    def total_Z(self) -> int:
        return sum(self.Z)


@dataclass
class Trajectory:
    spec_hash: str
    seed: tuple[int, int]
    snapshots: list[Snapshot]
    extinct: bool
    capped: bool
    cells: list[Cell] | None = field(default=None, repr=False)

    def at(self, t: float) -> Snapshot | None:
        for s in self.snapshots:
            if s.t == t:
                return s
        return None


class _Draws:
    """Block-buffered draws from one generator; order of consumption fixes the stream."""

    def __init__(self, sampler):
        self._sampler = sampler
        self._buf = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self._sampler(_BLOCK).tolist()
            self._i = 0
        x = self._buf[self._i]
        self._i += 1
        return x


def _check_times(observation_times) -> list[float]:
    times = [float(t) for t in observation_times]
    if not times:
        raise ValueError("observation_times must be nonempty")
    if any(t < 0 or not math.isfinite(t) for t in times):
        raise ValueError("observation times must be finite and nonnegative")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("observation times must be strictly increasing")
    return times


def simulate(spec: ProcessSpec, rng: RngStream, observation_times,
             keep_generations: bool = False, record_cells: bool = False) -> Trajectory:
    """Run one replicate and snapshot it at each observation time.

    Events at exactly an observation time are applied before the snapshot.
    If the living population exceeds ``spec.population_cap`` the run stops
    and later snapshots are omitted.
    """
    times = _check_times(observation_times)
    gen = rng.generator
    nt = spec.n_types
    life = [_Draws(lambda n, d=d: d.sample(gen, n)) for d in spec.lifetime]
    unif = _Draws(gen.random)
    label_unif = _Draws(rng.label_generator.random)
    p = spec.p_label_loss
    two = nt == 2
    off1 = spec.offspring_type1
    off2 = spec.offspring_type2
    cum1 = off1.cumulative.tolist()
    sup1 = off1.support
    cum2 = off2.cumulative.tolist() if two else None
    sup2 = off2.support if two else None

    Z = [0] * nt
    G = [0] * nt
    Zp = [0] * nt
    GB = [0] * nt
    GD = [0] * nt
    gens = [Counter() for _ in range(nt)] if keep_generations else None
    cells: list[Cell] | None = [] if record_cells else None
    parents: dict[int, tuple] = {}

    heap: list = []
    next_id = 0
    for ctype, count, labeled in spec.initial:
        for _ in range(count):
            d = life[ctype - 1].next()
            heap.append((d, next_id, ctype, 0, labeled))
            if record_cells:
                parents[next_id] = (None, 0.0)
            next_id += 1
            Z[ctype - 1] += 1
            if labeled:
                Zp[ctype - 1] += 1
            if keep_generations:
                gens[ctype - 1][(0, labeled)] += 1
    heapq.heapify(heap)
    living = len(heap)
    cap = spec.population_cap
    capped = living > cap

    def bisect(cum, u):
        i = 0
        while cum[i] <= u:
            i += 1
        return i

    snaps: list[Snapshot] = []
    heappop, heappush = heapq.heappop, heapq.heappush
    for t_obs in times:
        if capped:
            break
        while heap and heap[0][0] <= t_obs:
            death, cid, ctype, g, labeled = heappop(heap)
            i = ctype - 1
            Z[i] -= 1
            G[i] -= g
            GD[i] += g
            if labeled:
                Zp[i] -= 1
            if keep_generations:
                key = (g, labeled)
                gens[i][key] -= 1
                if not gens[i][key]:
                    del gens[i][key]
            if record_cells:
                par, born = parents.pop(cid)
                cells.append(Cell(cid, ctype, g, labeled, born, death, par))

            if two and ctype == 1:
                n1, n2 = sup1[bisect(cum1, unif.next())]
            elif two:
                n1, n2 = 0, sup2[bisect(cum2, unif.next())]
            else:
                n1, n2 = sup1[bisect(cum1, unif.next())], 0
            if n1 + n2 == 0:
                living -= 1
                continue
            child_label = labeled
            if labeled and p > 0.0:
                child_label = p < 1.0 and label_unif.next() >= p
            cg = g + 1
            for ctype_child, n in ((1, n1), (2, n2)):
                if not n:
                    continue
                j = ctype_child - 1
                lj = life[j]
                for _ in range(n):
                    heappush(heap, (death + lj.next(), next_id, ctype_child, cg, child_label))
                    if record_cells:
                        parents[next_id] = (cid, death)
                    next_id += 1
                Z[j] += n
                G[j] += n * cg
                GB[j] += n * cg
                if child_label:
                    Zp[j] += n
                if keep_generations:
                    gens[j][(cg, child_label)] += n
            living += n1 + n2 - 1
            if living > cap:
                capped = True
                break
        if capped:
            break
        snaps.append(Snapshot(
            t_obs, tuple(Z), tuple(G), tuple(Zp), tuple(GB), tuple(GD),
            tuple(Counter(c) for c in gens) if keep_generations else None,
        ))

    if record_cells:
        for death, cid, ctype, g, labeled in sorted(heap):
            par, born = parents[cid]
            cells.append(Cell(cid, ctype, g, labeled, born, death, par))
        cells.sort(key=lambda c: c.id)
    return Trajectory(
        spec_hash=spec.digest(),
        seed=(rng.master_seed, rng.stream_index),
        snapshots=snaps,
        extinct=(not capped) and sum(Z) == 0,
        capped=capped,
        cells=cells,
    )


def living_generations(snap: Snapshot, cell_type: int) -> list[int]:
    """Flat list of living-cell generations (requires ``keep_generations``)."""
    if snap.generations is None:
        raise ValueError("snapshot was recorded without generations")
    out = []
    for (g, _), n in sorted(snap.generations[cell_type - 1].items()):
        out.extend([g] * n)
    return out


def expected_label_fraction(snap: Snapshot, p: float, cell_type: int = 1) -> float:
    """E(Zpos / Z | tree): mean over living cells of (1 - p)^generation."""
    gens = living_generations(snap, cell_type)
    return expected_fraction_from_generations(gens, p)


def expected_fraction_from_generations(generations, p: float) -> float:
    g = np.asarray(list(generations), dtype=float)
    if g.size == 0:
        raise ValueError("empty population")
    if p == 0:
        return 1.0
    return float(np.mean(np.power(1.0 - p, g)))


def redelabel(cells: list[Cell], t: float, p: float, rng: RngStream, cell_type: int = 1) -> int:
    """Re-run label loss on a fixed recorded tree; return labeled cells alive at ``t``.

    All cells in ``cells`` are assumed to descend from labeled roots.
    """
    label: dict[int, bool] = {}
    keep: dict[int, bool] = {}
    u = rng.generator.random(len(cells))
    for idx, c in enumerate(cells):
        # a parent's label-loss test is shared by all of its children
        keep[c.id] = u[idx] >= p
    count = 0
    for c in cells:
        if c.parent_id is None:
            label[c.id] = True
        else:
            label[c.id] = label[c.parent_id] and keep[c.parent_id]
        if c.cell_type == cell_type and c.birth_time <= t < c.death_time and label[c.id]:
            count += 1
    return count
