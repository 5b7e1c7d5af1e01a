"""Monte Carlo comparison of the distribution models over fleet sizes."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import accel
from . import distribution as dist
from .equilibrium import DEFAULT_MAX_SWEEPS
from .market import outcome_from_result
from .scenario import Economics, Scenario, ScenarioConfig, generate_scenario, money_to_json

LOG = logging.getLogger(__name__)

MODELS = ("cooperative", "even_out", "score", "market", "spontaneous")
_MODEL_INDEX = {m: k for k, m in enumerate(MODELS)}

CSV_COLUMNS = (
    "model", "N", "mean_utility", "se_utility",
    "mean_follower_pct", "se_follower_pct", "nonconvergence_count",
)


@dataclass(frozen=True)
class SweepConfig:
    n_min: int = 1
    n_max: int = 29
    runs: int = 50
    seed: int = 0
    window: tuple[int, int] = (0, 30)
    max_delay: int = 10
    economics: Economics = field(default_factory=Economics)
    models: tuple[str, ...] = MODELS
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"bad N range {self.n_min}..{self.n_max}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        unknown = set(self.models) - set(MODELS)
        if unknown:
            raise ValueError(f"unknown models: {sorted(unknown)}")

    @property
    def n_values(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def scenario_config(self, n: int) -> ScenarioConfig:
        return ScenarioConfig(n, tuple(self.window), self.max_delay, self.economics)


def _derive(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


def scenario_seed(base: int, n: int, run: int) -> int:
    """Shared across models so that every model sees the same fleets."""
    return _derive(base, n, run)


def model_seed(base: int, model: str, n: int, run: int) -> int:
    return _derive(base, n, run, 1 + _MODEL_INDEX[model])


@dataclass
class RunMetrics:
    model: str
    n: int
    seed: int
    mean_utility: Fraction
    follower_pct: Fraction
    platoon_count: int
    solo_count: int
    follower_count: int
    converged: bool = True
    sweeps: int = 0
    cycle_detected: bool = False
    profile: tuple[int, ...] = ()
    utilities: list[Fraction] = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mean_utility"] = money_to_json(self.mean_utility)
        out["follower_pct"] = money_to_json(self.follower_pct)
        out["profile"] = list(self.profile)
        out["utilities"] = [money_to_json(u) for u in self.utilities]
        return out


def _platoon_stats(profile: Sequence[int]) -> tuple[int, int, int]:
    sizes = [len(m) for m in dist.groups(profile).values()]
    platoons = sum(1 for s in sizes if s > 1)
    solos = sum(1 for s in sizes if s == 1)
    return platoons, solos, sum(s - 1 for s in sizes if s > 1)


def run_once(
    model: str,
    scenario: Scenario,
    seed: int = 0,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    backend: str | None = None,
) -> RunMetrics:
    """Solve one scenario under one model and summarise the solution.

    ``seed`` only feeds the score model's initial scores.
    """
    n = scenario.n
    detail: dict = {}
    converged, sweeps, cycle = True, 0, False
    if model == "spontaneous":
        profile, utilities = dist.spontaneous_outcome(scenario)
        platoons, solos, followers = _platoon_stats(profile)
    elif model in ("even_out", "score", "cooperative"):
        scores = dist.ScoreState.random(n, seed) if model == "score" else None
        report = accel.solve_departures(scenario, model, scores, max_sweeps=max_sweeps,
                                        backend_name=backend)
        profile = report.profile
        converged, sweeps, cycle = report.converged, report.sweeps, report.cycle_detected
        if model == "even_out":
            utilities = [dist.utility_even_out(i, profile, scenario) for i in scenario.ids]
        elif model == "score":
            utilities = [dist.utility_score(i, profile, scores, scenario) for i in scenario.ids]
            detail["scores"] = [money_to_json(s) for s in scores]
            detail["leaders"] = dist.leader_assignment(profile, scenario, "score", scores).to_dict()
        else:
            utilities = dist.cooperative_profits(profile, scenario)
            detail["leaders"] = dist.leader_assignment(profile, scenario, "cooperative").to_dict()
        platoons, solos, followers = _platoon_stats(profile)
    elif model == "market":
        result = accel.solve_market(scenario, max_sweeps=max_sweeps, backend_name=backend)
        outcome = outcome_from_result(result, scenario)
        profile, utilities = outcome.profile, outcome.utilities
        converged, sweeps, cycle = result.converged, result.sweeps, result.cycle_detected
        followers = outcome.follower_count
        platoons = len(result.sellers)
        solos = n - followers - platoons
        detail["market"] = result.to_dict()
    else:
        raise ValueError(f"unknown model {model!r}")
    if not converged:
        LOG.warning("%s N=%d seed=%d did not converge (cycle=%s)", model, n, seed, cycle)
    return RunMetrics(
        model=model,
        n=n,
        seed=seed,
        mean_utility=sum(utilities, Fraction(0)) / n,
        follower_pct=Fraction(100 * followers, n),
        platoon_count=platoons,
        solo_count=solos,
        follower_count=followers,
        converged=converged,
        sweeps=sweeps,
        cycle_detected=cycle,
        profile=tuple(profile),
        utilities=list(utilities),
        detail=detail,
    )


def run_cell(config: SweepConfig, model: str, n: int, backend: str | None = None) -> list:
    """All runs of one (model, N) cell; failed runs come back as exception strings."""
    out = []
    for run in range(config.runs):
        scenario = generate_scenario(config.scenario_config(n), scenario_seed(config.seed, n, run))
        try:
            out.append(run_once(model, scenario, model_seed(config.seed, model, n, run),
                                config.max_sweeps, backend))
        except Exception as exc:
            LOG.exception("%s N=%d run %d failed", model, n, run)
            out.append(f"{type(exc).__name__}: {exc}")
    return out


@dataclass
class SweepRow:
    model: str
    n: int
    mean_utility: float
    se_utility: float
    mean_follower_pct: float
    se_follower_pct: float
    nonconvergence_count: int
    failure_count: int
    runs: int
    converged_mean_utility: float
    converged_mean_follower_pct: float


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def aggregate(model: str, n: int, runs: Iterable) -> SweepRow:
    runs = list(runs)
    ok = [r for r in runs if isinstance(r, RunMetrics)]
    good = [r for r in ok if r.converged]
    mu, se_u = _mean_se([float(r.mean_utility) for r in ok])
    mf, se_f = _mean_se([float(r.follower_pct) for r in ok])
    return SweepRow(
        model=model,
        n=n,
        mean_utility=mu,
        se_utility=se_u,
        mean_follower_pct=mf,
        se_follower_pct=se_f,
        nonconvergence_count=len(ok) - len(good),
        failure_count=len(runs) - len(ok),
        runs=len(runs),
        converged_mean_utility=_mean_se([float(r.mean_utility) for r in good])[0],
        converged_mean_follower_pct=_mean_se([float(r.follower_pct) for r in good])[0],
    )


def _cell_task(args):
    config, model, n, keep = args
    runs = run_cell(config, model, n)
    return aggregate(model, n, runs), (runs if keep else None)


def monte_carlo_sweep(config: SweepConfig, keep_runs: bool = False):
    """Aggregate rows for every (model, N) cell, ordered by model then N.

    With ``keep_runs`` the per-run results are returned alongside the rows.
    """
    tasks = [(config, m, n, keep_runs) for m in config.models for n in config.n_values]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    rows = [r for r, _ in results]
    if keep_runs:
        return rows, {(t[1], t[2]): runs for t, (_, runs) in zip(tasks, results)}
    return rows


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            r.model, r.n, _fmt(r.mean_utility), _fmt(r.se_utility),
            _fmt(r.mean_follower_pct), _fmt(r.se_follower_pct), r.nonconvergence_count,
        ])
    return buf.getvalue()
