"""``platoon-match`` command line: gen, solve, oracle and sweep.

Exit codes: 0 success, 1 usage or config error, 2 non-convergence or oracle
mismatch, 3 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from . import distribution as dist
from . import equilibrium as eq
from . import experiment as exp
from . import market as mk
from .plot import line_chart
from .scenario import Economics, Scenario, ScenarioConfig, ScenarioError, generate_scenario, money_to_json

LOG = logging.getLogger("platoon_match")

EXIT_OK, EXIT_USAGE, EXIT_QUALITY, EXIT_CAP = 0, 1, 2, 3

SOLVE_MODELS = ("even_out", "score", "cooperative", "market", "spontaneous")


class ConfigError(ValueError):
    pass


@dataclass
class FleetSection:
    n: int = 10
    window: tuple[int, int] = (0, 30)
    max_delay: int = 10
    scenario_file: str | None = None


@dataclass
class ModelSection:
    name: str = "even_out"
    max_sweeps: int = eq.DEFAULT_MAX_SWEEPS
    scores: list | None = None
    on_cycle: str = "demote"
    enumeration_cap: int = eq.ENUMERATION_CAP


@dataclass
class SweepSection:
    n_min: int = 1
    n_max: int = 29
    runs: int = 50
    models: tuple[str, ...] = exp.MODELS
    workers: int = 1


@dataclass
class CliConfig:
    command: str
    config_path: str | None = None
    seed: int = 0
    out: Path = Path(".")
    fmt: str = "csv"
    trace: bool = False
    plot: bool = False
    economics: Economics = field(default_factory=Economics)
    fleet: FleetSection = field(default_factory=FleetSection)
    model: ModelSection = field(default_factory=ModelSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    solution: str | None = None


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}' in config")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in config section '{name}': {exc}") from exc


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"economics", "fleet", "model", "sweep", "seed"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in config")
    return data


def parse_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError as exc:
        raise ConfigError(f"--n expects A..B, got {text!r}") from exc
    if not 1 <= lo <= hi:
        raise ConfigError(f"--n range {text!r} is empty or below 1")
    return lo, hi


def build_config(args: argparse.Namespace) -> CliConfig:
    data = load_config_file(args.config) if args.config else {}
    cfg = CliConfig(command=args.command, config_path=args.config)
    cfg.economics = _section(Economics, data.get("economics", {}), "economics")
    cfg.fleet = _section(FleetSection, data.get("fleet", {}), "fleet")
    cfg.model = _section(ModelSection, data.get("model", {}), "model")
    cfg.sweep = _section(SweepSection, data.get("sweep", {}), "sweep")
    seed = data.get("seed", 0)
    if args.seed is not None:
        seed = args.seed
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"'seed' must be a non-negative integer, got {seed!r}")
    cfg.seed = seed
    cfg.out = Path(args.out)
    cfg.fmt = args.format
    cfg.trace = args.trace
    cfg.plot = args.plot
    cfg.solution = getattr(args, "solution", None)
    if args.model:
        cfg.model.name = args.model
    if args.scenario:
        cfg.fleet.scenario_file = args.scenario
    if args.models:
        cfg.sweep.models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    if args.n:
        cfg.sweep.n_min, cfg.sweep.n_max = parse_range(args.n)
        cfg.fleet.n = cfg.sweep.n_min
    if args.runs is not None:
        cfg.sweep.runs = args.runs
    if cfg.command in ("solve", "oracle") and cfg.model.name not in SOLVE_MODELS:
        raise ConfigError(f"unknown model '{cfg.model.name}' (key model.name)")
    bad = set(cfg.sweep.models) - set(exp.MODELS)
    if bad:
        raise ConfigError(f"unknown models {sorted(bad)} (key sweep.models)")
    if cfg.model.on_cycle not in mk.ON_CYCLE:
        raise ConfigError(f"model.on_cycle must be one of {mk.ON_CYCLE}")
    return cfg


def load_scenario(cfg: CliConfig) -> Scenario:
    if cfg.fleet.scenario_file:
        try:
            with open(cfg.fleet.scenario_file) as fh:
                return Scenario.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot load scenario {cfg.fleet.scenario_file}: {exc}") from exc
    try:
        sc = ScenarioConfig(cfg.fleet.n, tuple(cfg.fleet.window), cfg.fleet.max_delay, cfg.economics)
    except ScenarioError as exc:
        raise ConfigError(f"bad fleet section: {exc}") from exc
    return generate_scenario(sc, cfg.seed)


def _scores(cfg: CliConfig, scenario: Scenario) -> dist.ScoreState:
    if cfg.model.scores is not None:
        if len(cfg.model.scores) != scenario.n:
            raise ConfigError("model.scores needs one score per vehicle")
        return dist.ScoreState(cfg.model.scores)
    return dist.ScoreState.random(scenario.n, exp.model_seed(cfg.seed, "score", scenario.n, 0))


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _money_list(values):
    return [money_to_json(Fraction(v)) for v in values]


def solve(cfg: CliConfig, scenario: Scenario) -> dict:
    """Solve one game exactly; returns the solution document."""
    model = cfg.model.name
    doc: dict = {"model": model, "scenario": scenario.to_dict()}
    if model == "spontaneous":
        profile, utilities = dist.spontaneous_outcome(scenario)
        report = eq.IterationReport(True, 0, tuple(profile))
        leaders = dist.LeaderAssignment({})
    elif model == "market":
        outcome = mk.market_outcome(scenario, max_sweeps=cfg.model.max_sweeps,
                                    on_cycle=cfg.model.on_cycle)
        profile, utilities, leaders = outcome.profile, outcome.utilities, outcome.leaders
        res = outcome.result
        report = eq.IterationReport(res.converged, res.sweeps, tuple(profile), res.cycle_detected)
        doc["market"] = res.to_dict()
    else:
        scores = _scores(cfg, scenario) if model == "score" else None
        game = eq.departure_game(scenario, model, scores)
        report = eq.best_response_iteration(game, scenario.default_profile(),
                                            cfg.model.max_sweeps, trace=cfg.trace)
        profile = report.profile
        if model == "even_out":
            utilities = [dist.utility_even_out(i, profile, scenario) for i in scenario.ids]
            leaders = dist.draw_even_out_leaders(profile, cfg.seed)
            doc["leaders_note"] = "uniform draw for reporting only"
        elif model == "score":
            utilities = [dist.utility_score(i, profile, scores, scenario) for i in scenario.ids]
            leaders = dist.leader_assignment(profile, scenario, "score", scores)
            doc["scores"] = _money_list(scores)
            doc["scores_after"] = _money_list(dist.apply_score_updates(profile, scores, scenario))
        else:
            utilities = dist.cooperative_profits(profile, scenario)
            leaders = dist.leader_assignment(profile, scenario, "cooperative")
            doc["cooperative_utility"] = money_to_json(sum(utilities, Fraction(0)))
    doc.update(
        profile=list(profile),
        leaders=leaders.to_dict(),
        utilities=_money_list(utilities),
        report=report.to_dict(),
    )
    return doc


def cmd_gen(cfg: CliConfig) -> int:
    scenario = load_scenario(cfg)
    _write_json(cfg.out / "scenario.json", scenario.to_dict())
    return EXIT_OK


def cmd_solve(cfg: CliConfig) -> int:
    scenario = load_scenario(cfg)
    doc = solve(cfg, scenario)
    _write_json(cfg.out / "solution.json", doc)
    if not doc["report"]["converged"]:
        LOG.error("%s did not converge", cfg.model.name)
        return EXIT_QUALITY
    return EXIT_OK


def _read_solution(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solution {path}: {exc}") from exc
    return data


def cmd_oracle(cfg: CliConfig) -> int:
    scenario = load_scenario(cfg)
    model = cfg.model.name
    cap = cfg.model.enumeration_cap
    doc: dict = {"model": model, "scenario": scenario.to_dict()}
    try:
        if model == "market":
            result = mk.assign_sellers(scenario, max_sweeps=cfg.model.max_sweeps,
                                       on_cycle=cfg.model.on_cycle)
            game = mk.market_game(result.state, scenario)
            found = eq.enumerate_equilibria(game, cap)
            doc["sellers"] = list(game.players)
            doc["equilibria"] = [_money_list(p) for p in found]
            members = {tuple(p) for p in found}
            key = "prices"
        else:
            game_model = "even_out" if model == "spontaneous" else model
            scores = _scores(cfg, scenario) if model == "score" else None
            if scores is not None:
                doc["scores"] = _money_list(scores)
            game = eq.departure_game(scenario, game_model, scores)
            if model == "spontaneous":
                found = [tuple(scenario.default_times)] if eq.is_nash(
                    scenario.default_times, game) else []
            else:
                found = eq.enumerate_equilibria(game, cap)
            doc["equilibria"] = [list(p) for p in found]
            members = {tuple(p) for p in found}
            key = "profile"
            if model == "cooperative":
                best, value = eq.social_optimum(scenario, cap)
                doc["social_optimum"] = {"profile": list(best), "value": money_to_json(value)}
    except eq.EnumerationCapExceeded as exc:
        LOG.error("%s", exc)
        _write_json(cfg.out / "equilibria.json", {**doc, "error": str(exc)})
        return EXIT_CAP
    status = EXIT_OK
    if cfg.solution:
        data = _read_solution(cfg.solution)
        if key == "prices" and key not in data and "market" in data:
            data = data["market"]
        if key not in data:
            raise ConfigError(f"solution file lacks '{key}'")
        if key == "prices":
            candidate = tuple(Fraction(str(data["prices"][str(i)])) for i in doc["sellers"])
        else:
            candidate = tuple(int(d) for d in data["profile"])
        ok = candidate in members
        doc["check"] = {"solution": cfg.solution, "member": ok}
        if not ok:
            LOG.error("solution %s is not a pure Nash equilibrium", list(candidate))
            status = EXIT_QUALITY
    _write_json(cfg.out / "equilibria.json", doc)
    return status


def _series(rows, attr):
    out: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        out.setdefault(r.model, []).append((r.n, getattr(r, attr)))
    return out


def cmd_sweep(cfg: CliConfig) -> int:
    s = cfg.sweep
    try:
        config = exp.SweepConfig(
            n_min=s.n_min, n_max=s.n_max, runs=s.runs, seed=cfg.seed,
            window=tuple(cfg.fleet.window), max_delay=cfg.fleet.max_delay,
            economics=cfg.economics, models=tuple(s.models),
            max_sweeps=cfg.model.max_sweeps, workers=s.workers,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.out}: {exc}") from exc
    result = exp.monte_carlo_sweep(config, keep_runs=cfg.trace)
    rows, runs = result if cfg.trace else (result, None)
    if cfg.fmt == "json":
        _write_json(cfg.out / "sweep.json", [vars(r) for r in rows])
    else:
        (cfg.out / "sweep.csv").write_text(exp.rows_to_csv(rows))
    if runs:
        for (model, n), records in runs.items():
            for k, rec in enumerate(records):
                payload = rec.to_dict() if isinstance(rec, exp.RunMetrics) else {"error": rec}
                _write_json(cfg.out / "runs" / f"{model}_N{n}_run{k}.json", payload)
    if cfg.plot:
        (cfg.out / "utility.svg").write_text(line_chart(
            _series(rows, "mean_utility"), "Average individual utility",
            "Number of vehicles N", "Utility [SEK]"))
        (cfg.out / "followers.svg").write_text(line_chart(
            _series(rows, "mean_follower_pct"), "Percentage of followers",
            "Number of vehicles N", "Followers [%]"))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "oracle": cmd_oracle, "sweep": cmd_sweep}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="platoon-match", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config with economics/fleet/model/sweep sections")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plot", action="store_true", help="sweep: also write SVG charts")
    p.add_argument("--trace", action="store_true", help="record per-run / per-sweep details")
    p.add_argument("--model", help="model for solve/oracle")
    p.add_argument("--models", help="comma-separated models for sweep")
    p.add_argument("--n", help="fleet size range A..B")
    p.add_argument("--runs", type=int, help="sweep: runs per cell")
    p.add_argument("--scenario", help="scenario JSON (as written by gen)")
    p.add_argument("--solution", help="oracle: solution JSON to check for membership")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, ScenarioError) as exc:
        print(f"platoon-match: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
