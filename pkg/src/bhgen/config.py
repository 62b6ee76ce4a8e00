"""JSON run configuration. Unknown keys are rejected at every level."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import Constants, TwoTypeConstants, single_type_constants, two_type_constants
from .distributions import LifetimeDistribution, OffspringDistribution
from .engine import DEFAULT_POPULATION_CAP, ProcessSpec

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _parse_outcome(key):
    if isinstance(key, (list, tuple)):
        return tuple(int(x) for x in key)
    key = str(key).strip()
    if "," in key:
        return tuple(int(x) for x in key.strip("()[] ").split(","))
    return int(key)


def parse_offspring(d: dict, where: str) -> OffspringDistribution:
    """Offspring law from one of three forms.

    ``{"pmf": {"0": 0.2, "2": 0.8}}`` (pair outcomes as ``"1,1"``),
    ``{"support": [...], "probs": [...]}``, or the two-type shorthand
    ``{"total": <scalar law>, "p_type2": q}`` expanded binomially.
    """
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    try:
        if "pmf" in d:
            _reject_unknown(d, {"pmf"}, where)
            pmf = d["pmf"]
            return OffspringDistribution(tuple(_parse_outcome(k) for k in pmf),
                                         tuple(float(v) for v in pmf.values()))
        if "support" in d:
            _reject_unknown(d, {"support", "probs"}, where)
            return OffspringDistribution(tuple(_parse_outcome(k) for k in d["support"]),
                                         tuple(float(v) for v in d["probs"]))
        if "total" in d:
            _reject_unknown(d, {"total", "p_type2"}, where)
            total = parse_offspring(d["total"], where + ".total")
            return OffspringDistribution.binomial_split(total, float(d["p_type2"]))
    except (TypeError, KeyError) as e:
        raise ConfigError(f"{where}: malformed offspring law ({e})") from e
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e
    raise ConfigError(f"{where}: offspring law needs 'pmf', 'support'/'probs' or 'total'/'p_type2'")


def parse_process(d: dict) -> ProcessSpec:
    _reject_unknown(d, {"n_types", "lifetime", "offspring_type1", "offspring_type2",
                        "p_label_loss", "initial", "population_cap"}, "process")
    n_types = int(d.get("n_types", 1))
    lifetimes = d.get("lifetime")
    if isinstance(lifetimes, dict):
        lifetimes = [lifetimes] * n_types
    if not isinstance(lifetimes, list):
        raise ConfigError("process.lifetime must be an object or a list of objects")
    try:
        lifetimes = [LifetimeDistribution.from_dict(x) for x in lifetimes]
    except (ValueError, TypeError) as e:
        raise ConfigError(f"process.lifetime: {e}") from e
    if "offspring_type1" not in d:
        raise ConfigError("process.offspring_type1 is required")
    off1 = parse_offspring(d["offspring_type1"], "process.offspring_type1")
    off2 = None
    if d.get("offspring_type2") is not None:
        off2 = parse_offspring(d["offspring_type2"], "process.offspring_type2")
    initial = d.get("initial", [[1, 1, True]])
    try:
        return ProcessSpec(
            n_types=n_types,
            lifetime=tuple(lifetimes),
            offspring_type1=off1,
            offspring_type2=off2,
            p_label_loss=float(d.get("p_label_loss", 0.0)),
            initial=tuple(tuple(x) for x in initial),
            population_cap=int(d.get("population_cap", DEFAULT_POPULATION_CAP)),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(f"process: {e}") from e


@dataclass
class RunConfig:
    process: ProcessSpec
    observation_times: list[float]
    replicates: int = 1
    master_seed: int = 0
    p_sweep: list[float] | None = None
    outputs: str = "out"
    oracle_dt: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def t_max(self) -> float:
        return self.observation_times[-1]


def parse_times(obs) -> list[float]:
    if isinstance(obs, dict):
        _reject_unknown(obs, {"t_max", "n_points"}, "observation_times")
        t_max, n = float(obs["t_max"]), int(obs["n_points"])
        if n < 1 or t_max <= 0:
            raise ConfigError("observation_times grid needs t_max > 0 and n_points >= 1")
        return [float(x) for x in np.linspace(0.0, t_max, n + 1)[1:]]
    if not isinstance(obs, list) or not obs:
        raise ConfigError("observation_times must be a nonempty list or {t_max, n_points}")
    times = [float(x) for x in obs]
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise ConfigError("observation_times must be nonnegative and strictly increasing")
    return times


def load_config(source) -> RunConfig:
    """Parse a config from a path, a JSON string, or an already-decoded dict."""
    if isinstance(source, dict):
        d = source
    else:
        try:
            text = str(source)
            if not text.lstrip().startswith("{"):
                text = Path(source).read_text()
            d = json.loads(text)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from e
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(d, {"version", "process", "observation_times", "replicates", "master_seed",
                        "p_sweep", "outputs", "oracle"}, "config")
    if d.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config.version must be {CONFIG_VERSION}")
    if "process" not in d:
        raise ConfigError("config.process is required")
    oracle = d.get("oracle", {}) or {}
    _reject_unknown(oracle, {"dt"}, "config.oracle")
    replicates = int(d.get("replicates", 1))
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    seed = int(d.get("master_seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("master_seed must be a 64-bit unsigned integer")
    sweep = d.get("p_sweep")
    if sweep is not None:
        sweep = [float(p) for p in sweep]
        if not sweep or any(not 0 <= p <= 1 for p in sweep):
            raise ConfigError("p_sweep entries must lie in [0, 1]")
    return RunConfig(
        process=parse_process(d["process"]),
        observation_times=parse_times(d.get("observation_times", [96.0])),
        replicates=replicates,
        master_seed=seed,
        p_sweep=sweep,
        outputs=str(d.get("outputs", "out")),
        oracle_dt=None if oracle.get("dt") is None else float(oracle["dt"]),
        raw=d,
    )


def constants_for(spec: ProcessSpec) -> Constants | TwoTypeConstants:
    """Calibrated constants for a spec, tagged with its dynamics hash."""
    tag = spec.digest(ignore_label=True)
    n0 = spec.initial_count(1)
    if spec.n_types == 1:
        h, v = spec.offspring_type1.moments()
        return single_type_constants(h, v, spec.lifetime[0], n_initial=n0, spec_hash=tag)
    h1, h2 = spec.offspring_type1.moments()
    _, v1 = spec.offspring_type1.marginal(0).moments()
    mu, v2 = spec.offspring_type2.moments()
    return two_type_constants(spec.lifetime[0], spec.lifetime[1], h1, h2, v1, mu, v2,
                              n_initial=n0, spec_hash=tag)


def constants_from_table(table: dict) -> Constants | TwoTypeConstants:
    """Rebuild constants from the dict stored in an ensemble manifest."""
    t = {k: v for k, v in table.items() if not k.startswith("slope")}
    t = {k: (math.nan if v is None else v) for k, v in t.items()}
    if "alpha1" in t:
        t["spec_hash"] = table.get("spec_hash")
        return TwoTypeConstants(**t)
    t["spec_hash"] = table.get("spec_hash")
    return Constants(**t)
