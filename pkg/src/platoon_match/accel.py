"""Array-backed solvers for the Monte Carlo hot loop.

The compiled ``_core`` extension is used when it was built; otherwise the
pure-Python ``_core_py`` twin is selected at import. Set
``PLATOON_MATCH_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os
from fractions import Fraction
from types import ModuleType
from typing import Mapping, Sequence

import numpy as np

from . import _core_py
from .distribution import ScoreState
from .equilibrium import DEFAULT_MAX_SWEEPS, IterationReport
from .market import (
    ON_CYCLE,
    MarketResult,
    MarketState,
    initial_sellers,
    pick_demotion,
    price_grid,
)
from .scenario import DepartureProfile, Scenario, feasible_departures, to_money

try:
    if os.environ.get("PLATOON_MATCH_PURE"):
        raise ImportError("pure-Python kernels requested")
    from . import _core as _compiled
except ImportError:
    _compiled = None

backend: ModuleType = _compiled if _compiled is not None else _core_py
BACKEND = "cython" if _compiled is not None else "python"

MODEL_CODES = {"even_out": 0, "score": 1, "cooperative": 2}


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        return backend
    if name == "python":
        return _core_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("the compiled _core extension is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


class DepartureArrays:
    """Flat arrays describing a scenario's departure game."""

    def __init__(self, scenario: Scenario, scores: Sequence | None = None):
        self.times = scenario.distinct_times
        index = {t: k for k, t in enumerate(self.times)}
        ptr = [0]
        opt_time: list[int] = []
        opt_pen: list[float] = []
        for v in scenario.vehicles:
            for t in feasible_departures(v.id, scenario):
                opt_time.append(index[t])
                opt_pen.append(float(v.penalty_rate * (t - v.default_departure)))
            ptr.append(len(opt_time))
        self.index = index
        self.opt_ptr = np.asarray(ptr, dtype=np.int64)
        self.opt_time = np.asarray(opt_time, dtype=np.int64)
        self.opt_pen = np.asarray(opt_pen, dtype=np.float64)
        self.rl = np.asarray([float(v.profit_leader) for v in scenario.vehicles])
        self.rf = np.asarray([float(v.profit_follower) for v in scenario.vehicles])
        self.beta = np.asarray([float(v.score_valuation) for v in scenario.vehicles])
        if scores is None:
            scores = [0.0] * scenario.n
        self.score = np.asarray([float(s) for s in scores], dtype=np.float64)

    def encode(self, profile: Sequence[int]) -> np.ndarray:
        return np.asarray([self.index[t] for t in profile], dtype=np.int64)

    def decode(self, arr: np.ndarray) -> DepartureProfile:
        return DepartureProfile(self.times[int(k)] for k in arr)


def solve_departures(
    scenario: Scenario,
    model: str,
    scores: Sequence | None = None,
    initial: Sequence[int] | None = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    trace: bool = False,
    backend_name: str | None = None,
) -> IterationReport:
    """Best-response sweeps from ``initial`` (default: everyone at their default)."""
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    code = MODEL_CODES[model]
    if model == "score":
        if scores is None:
            raise ValueError("the score game needs a ScoreState")
        scores = ScoreState(scores)
    core = get_backend(backend_name)
    arrays = DepartureArrays(scenario, scores)
    start = scenario.default_profile() if initial is None else initial
    prof = arrays.encode(start)
    seen = {prof.tobytes()}
    history = [tuple(arrays.decode(prof))] if trace else []
    n_times = len(arrays.times)
    for sweep in range(1, max_sweeps + 1):
        changed = core.departure_sweep(
            code, prof, arrays.opt_ptr, arrays.opt_time, arrays.opt_pen,
            arrays.rl, arrays.rf, arrays.beta, arrays.score, n_times,
        )
        if trace:
            history.append(tuple(arrays.decode(prof)))
        if not changed:
            return IterationReport(True, sweep, arrays.decode(prof), False, history)
        key = prof.tobytes()
        if key in seen:
            return IterationReport(False, sweep, arrays.decode(prof), True, history)
        seen.add(key)
    return IterationReport(False, max_sweeps, arrays.decode(prof), False, history)


def solve_market(
    scenario: Scenario,
    initial_prices: Mapping[int, Fraction] | None = None,
    grid: Sequence | None = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    on_cycle: str = "demote",
    backend_name: str | None = None,
) -> MarketResult:
    """Seller assignment with array kernels; same rules as ``market.assign_sellers``."""
    if on_cycle not in ON_CYCLE:
        raise ValueError(f"on_cycle must be one of {ON_CYCLE}")
    core = get_backend(backend_name)
    n = scenario.n
    exact_grid = tuple(sorted(to_money(p) for p in (grid or price_grid(scenario))))
    k = len(exact_grid)
    if k == 0:
        raise ValueError("empty price grid")
    grid_ptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
    grid_vals = np.tile(np.asarray([float(p) for p in exact_grid]), n)
    dstar = np.asarray(scenario.default_times, dtype=np.int64)
    latest = np.asarray([v.latest_departure for v in scenario.vehicles], dtype=np.int64)
    rate = np.asarray([float(v.penalty_rate) for v in scenario.vehicles])
    rf = np.asarray([float(v.profit_follower) for v in scenario.vehicles])
    rl = np.asarray([float(v.profit_leader) for v in scenario.vehicles])
    reach = ((dstar[None, :] >= dstar[:, None]) & (dstar[None, :] <= latest[:, None]))
    reach = np.ascontiguousarray(reach, dtype=np.uint8)
    gain = rf[:, None] - rate[:, None] * (dstar[None, :] - dstar[:, None])
    gain = np.ascontiguousarray(gain)
    order = np.asarray(sorted(range(n), key=lambda s: (dstar[s], s)), dtype=np.int64)

    # price_idx holds positions in grid_vals, not per-seller offsets
    sellers = initial_sellers(scenario)
    is_seller = np.zeros(n, dtype=np.uint8)
    price_idx = np.full(n, -1, dtype=np.int64)
    price = np.zeros(n)
    for i in sellers:
        is_seller[i - 1] = 1
        p = exact_grid[-1]
        if initial_prices and i in initial_prices:
            p = to_money(initial_prices[i])
        price_idx[i - 1] = grid_ptr[i - 1] + exact_grid.index(p)
        price[i - 1] = float(p)

    cycle = False
    total_sweeps = demotions = unsettled = 0
    rounds = []
    choice = np.full(n, -1, dtype=np.int64)
    while True:
        seen = {price_idx.tobytes()}
        settled = False
        for _ in range(max_sweeps):
            total_sweeps += 1
            if not core.market_sweep(is_seller, price, price_idx, grid_ptr, grid_vals,
                                     reach, gain, order, rl):
                settled = True
                break
            key = price_idx.tobytes()
            if key in seen:
                cycle = True
                break
            seen.add(key)
        unsettled += not settled
        core.buyer_choices(is_seller, price, reach, gain, order, choice)
        current = [i + 1 for i in range(n) if is_seller[i]]
        counts = dict.fromkeys(current, 0)
        for j in choice[choice >= 0]:
            counts[int(j) + 1] += 1
        utilities = {
            i: (scenario.vehicle(i).profit_leader
                + counts[i] * exact_grid[price_idx[i - 1] - grid_ptr[i - 1]]
                if counts[i] else Fraction(0))
            for i in current
        }
        rounds.append({"sellers": current, "settled": settled})
        demoted = pick_demotion(current, counts, utilities, settled or on_cycle == "continue")
        if demoted is None:
            break
        is_seller[demoted - 1] = 0
        price_idx[demoted - 1] = -1
        price[demoted - 1] = 0.0
        demotions += 1

    seller_ids = frozenset(current)
    prices = {i: exact_grid[price_idx[i - 1] - grid_ptr[i - 1]] for i in seller_ids}
    follow = {i: frozenset(j + 1 for j in range(n) if choice[j] == i - 1) for i in seller_ids}
    state = MarketState(seller_ids, frozenset(set(scenario.ids) - seller_ids), prices,
                        {i: exact_grid for i in scenario.ids})
    return MarketResult(seller_ids, prices, follow, state, settled, cycle,
                        total_sweeps, demotions, unsettled, rounds)
