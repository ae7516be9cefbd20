"""Deterministic computational models with cost accounting, plus built-in
benchmark problems used by the tests, demos, and CLI.

Costs are abstract work units declared per evaluation, never measured
time, so allocation decisions and reports are exactly reproducible.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import Dataset, Distribution, Family
from .exceptions import EvaluationError, InvalidParameterError

_EVAL_CHUNK = 65536


@dataclass(frozen=True)
class Model:
    """A pure map from input vectors to scalar outputs.

    ``fn`` receives an (n, input_dim) array and must return an (n,) array;
    identical inputs must produce identical outputs.
    """

    id: str
    fn: Callable[[np.ndarray], np.ndarray]
    cost_per_eval: float
    input_dim: int = 1

    def __post_init__(self):
        if self.cost_per_eval <= 0.0:
            raise InvalidParameterError("cost_per_eval must be positive")
        if self.input_dim < 1:
            raise InvalidParameterError("input_dim must be >= 1")


class CostLedger:
    """Per-model evaluation counts and accumulated work units.

    With ``track_wall_time`` the ledger also records measured evaluation
    seconds per model as a diagnostic; allocation decisions only ever read
    declared work units, so reports stay exactly reproducible.
    """

    def __init__(self, track_wall_time: bool = False):
        self.counts: dict[str, int] = {}
        self.work: dict[str, float] = {}
        self.track_wall_time = track_wall_time
        self.wall_time: dict[str, float] = {}

    def charge(self, model: Model, n: int, elapsed: float = 0.0) -> None:
        self.counts[model.id] = self.counts.get(model.id, 0) + n
        self.work[model.id] = self.work.get(model.id, 0.0) + n * model.cost_per_eval
        if self.track_wall_time:
            self.wall_time[model.id] = self.wall_time.get(model.id, 0.0) + elapsed

    def count(self, model_id: str) -> int:
        return self.counts.get(model_id, 0)

    def total(self) -> float:
        return float(sum(self.work.values()))

    def as_dict(self) -> dict:
        out = {
            "counts": dict(self.counts),
            "work": {k: float(v) for k, v in self.work.items()},
            "total": self.total(),
        }
        if self.track_wall_time:
            out["wall_time_s"] = {k: float(v) for k, v in self.wall_time.items()}
        return out


def evaluate(
    model: Model,
    inputs,
    ledger: CostLedger | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate a batch of input vectors, in input order.

    The ledger is charged len(inputs) * cost_per_eval.  A non-finite
    output aborts with the offending input rather than being dropped,
    since silently dropping samples biases every estimator built on top.
    Worker count never changes results: outputs land in a preallocated
    array by index and reductions happen later over the full array.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise InvalidParameterError(
            f"model '{model.id}' expects input_dim={model.input_dim}, got shape {x.shape}"
        )
    n = x.shape[0]
    started = time.perf_counter() if ledger is not None and ledger.track_wall_time else 0.0
    out = np.empty(n, dtype=np.float64)

    def run_chunk(lo: int, hi: int) -> None:
        y = np.asarray(model.fn(x[lo:hi]), dtype=np.float64)
        if y.shape != (hi - lo,):
            raise EvaluationError(
                f"model '{model.id}' returned shape {y.shape} for {hi - lo} inputs"
            )
        out[lo:hi] = y

    bounds = [(lo, min(lo + _EVAL_CHUNK, n)) for lo in range(0, n, _EVAL_CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_chunk(*b), bounds))
    else:
        for lo, hi in bounds:
            run_chunk(lo, hi)

    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        i = int(bad[0])
        raise EvaluationError(
            f"model '{model.id}' produced non-finite output at sample {i}",
            index=i,
            x=x[i].copy(),
        )
    if ledger is not None:
        elapsed = time.perf_counter() - started if ledger.track_wall_time else 0.0
        ledger.charge(model, n, elapsed)
    return out


@dataclass(frozen=True)
class LevelHierarchy:
    """Models of increasing accuracy and strictly increasing cost.

    ``input`` is the scalar distribution of each input coordinate (inputs
    are i.i.d. across a model's input_dim).  When dimensions differ across
    levels, ``coarsen`` maps a level-l input batch to the level-(l-1)
    batch driven by the same underlying randomness, which is what makes
    coupled corrections contract.
    """

    levels: tuple[Model, ...]
    input: Distribution
    coarsen: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise InvalidParameterError("hierarchy needs at least one level")
        costs = [m.cost_per_eval for m in levels]
        if any(b <= a for a, b in zip(costs, costs[1:])):
            raise InvalidParameterError("level costs must be strictly increasing")
        dims = {m.input_dim for m in levels}
        if len(dims) > 1 and self.coarsen is None:
            raise InvalidParameterError("levels with differing input_dim need a coarsen map")
        object.__setattr__(self, "levels", levels)

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    def coupled_cost(self, level: int) -> float:
        """Work units for one coupled sample at the given level."""
        c = self.levels[level].cost_per_eval
        if level > 0:
            c += self.levels[level - 1].cost_per_eval
        return c


@dataclass(frozen=True)
class FidelityEnsemble:
    """One high-fidelity model and its cheaper surrogates.

    All members share the same input space; the low-fidelity ordering is
    validated (and possibly pruned) from pilot statistics before use.
    """

    high: Model
    lows: tuple[Model, ...]

    def __post_init__(self):
        lows = tuple(self.lows)
        dims = {self.high.input_dim} | {m.input_dim for m in lows}
        if len(dims) > 1:
            raise InvalidParameterError("ensemble members must share input_dim")
        object.__setattr__(self, "lows", lows)

    @property
    def all_models(self) -> tuple[Model, ...]:
        return (self.high,) + self.lows


@dataclass(frozen=True)
class ProblemBundle:
    """A fully configured benchmark problem."""

    name: str
    input: Distribution | None
    kind: str  # "model" | "hierarchy" | "ensemble"
    model: Model | None = None
    hierarchy: LevelHierarchy | None = None
    ensemble: FidelityEnsemble | None = None
    truth: dict = field(default_factory=dict)
    dataset: Dataset | None = None


# Ten positive observations bundled for the small-data demo.
SMALLDATA_VALUES = (
    1.73, 3.42, 0.88, 2.15, 4.61, 1.02, 2.94, 1.48, 3.07, 0.67,
)


def _quadratic(params: dict) -> ProblemBundle:
    _reject_unknown(params, set(), "quadratic")
    model = Model("quadratic", lambda x: x[:, 0] ** 2, cost_per_eval=1.0)
    return ProblemBundle(
        name="quadratic",
        kind="model",
        model=model,
        input=Distribution(Family.NORMAL, (0.0, 1.0)),
        truth={"mean": 1.0, "variance": 2.0},
    )


def _gbm_euler(params: dict) -> ProblemBundle:
    _reject_unknown(params, {"s0", "r", "sigma", "T", "max_level"}, "gbm_euler")
    s0 = float(params.get("s0", 1.0))
    r = float(params.get("r", 0.05))
    sigma = float(params.get("sigma", 0.2))
    horizon = float(params.get("T", 1.0))
    max_level = int(params.get("max_level", 8))
    if s0 <= 0 or sigma < 0 or horizon <= 0 or max_level < 0:
        raise InvalidParameterError("gbm_euler needs s0>0, sigma>=0, T>0, max_level>=0")

    def make_level(level: int) -> Model:
        steps = 2**level
        dt = horizon / steps
        sqrt_dt = math.sqrt(dt)

        def fn(z: np.ndarray, _dt=dt, _sq=sqrt_dt, _steps=steps) -> np.ndarray:
            s = np.full(z.shape[0], s0)
            for j in range(_steps):
                s = s * (1.0 + r * _dt + sigma * _sq * z[:, j])
            return s

        return Model(f"gbm_l{level}", fn, cost_per_eval=float(steps), input_dim=steps)

    def coarsen(z: np.ndarray) -> np.ndarray:
        # Sum of two fine Brownian increments is one coarse increment;
        # in standardized units that is (z1 + z2) / sqrt(2).
        return (z[:, 0::2] + z[:, 1::2]) / math.sqrt(2.0)

    hierarchy = LevelHierarchy(
        levels=tuple(make_level(l) for l in range(max_level + 1)),
        input=Distribution(Family.NORMAL, (0.0, 1.0)),
        coarsen=coarsen,
    )
    return ProblemBundle(
        name="gbm_euler",
        kind="hierarchy",
        hierarchy=hierarchy,
        input=hierarchy.input,
        truth={"mean": s0 * math.exp(r * horizon)},
    )


def _poly_fidelity(params: dict) -> ProblemBundle:
    _reject_unknown(params, {"cost_hi", "cost_lo"}, "poly_fidelity")
    cost_hi = float(params.get("cost_hi", 1.0))
    cost_lo = [float(c) for c in params.get("cost_lo", (0.1, 0.02))]
    if len(cost_lo) > 2:
        raise InvalidParameterError("poly_fidelity has at most 2 low-fidelity members")

    high = Model(
        "poly_hi",
        lambda x: x[:, 0] + 0.1 * x[:, 0] ** 2 + 0.01 * np.sin(5.0 * x[:, 0]),
        cost_per_eval=cost_hi,
    )
    lows_all = [
        Model("poly_lo1", lambda x: x[:, 0] + 0.1 * x[:, 0] ** 2, cost_per_eval=cost_lo[0]),
    ]
    if len(cost_lo) > 1:
        lows_all.append(Model("poly_lo2", lambda x: x[:, 0], cost_per_eval=cost_lo[1]))
    ensemble = FidelityEnsemble(high=high, lows=tuple(lows_all))
    # Gaussian-moment truth: E[sin(aX)] = 0, E[X sin(aX)] = a exp(-a^2/2),
    # E[sin(aX)^2] = (1 - exp(-2a^2))/2 for X ~ N(0,1).
    a = 5.0
    exs = a * math.exp(-a * a / 2.0)
    var_s = 0.5 * (1.0 - math.exp(-2.0 * a * a))
    var_lo1 = 1.0 + 0.01 * 2.0  # Var[X + 0.1 X^2]
    cov_hi_lo1 = var_lo1 + 0.01 * exs
    var_hi = var_lo1 + 1e-4 * var_s + 2.0 * 0.01 * exs
    means = {"poly_hi": 0.1, "poly_lo1": 0.1, "poly_lo2": 0.0}
    rho1 = cov_hi_lo1 / math.sqrt(var_hi * var_lo1)
    rho2 = (1.0 + 0.01 * exs) / math.sqrt(var_hi)
    return ProblemBundle(
        name="poly_fidelity",
        kind="ensemble",
        ensemble=ensemble,
        input=Distribution(Family.NORMAL, (0.0, 1.0)),
        truth={
            "mean": 0.1,
            "variance": var_hi,
            "low_means": [means[m.id] for m in ensemble.lows],
            "rho": [rho1, rho2][: len(ensemble.lows)],
        },
    )


def _smalldata_demo(params: dict) -> ProblemBundle:
    _reject_unknown(params, set(), "smalldata_demo")
    model = Model("smalldata_exp", lambda x: np.exp(0.3 * x[:, 0]), cost_per_eval=1.0)
    return ProblemBundle(
        name="smalldata_demo",
        kind="model",
        model=model,
        input=None,
        dataset=Dataset(np.asarray(SMALLDATA_VALUES)),
    )


_BUILTINS = {
    "quadratic": _quadratic,
    "gbm_euler": _gbm_euler,
    "poly_fidelity": _poly_fidelity,
    "smalldata_demo": _smalldata_demo,
}


def _reject_unknown(params: dict, allowed: set, name: str) -> None:
    unknown = set(params) - allowed
    if unknown:
        raise InvalidParameterError(f"unknown {name} params: {sorted(unknown)}")


def builtin_problem(name: str, params: dict | None = None) -> ProblemBundle:
    """Look up a built-in benchmark problem by name."""
    if name not in _BUILTINS:
        raise InvalidParameterError(
            f"unknown problem '{name}'; available: {sorted(_BUILTINS)}"
        )
    return _BUILTINS[name](dict(params or {}))
