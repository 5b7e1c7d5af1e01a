"""Finite games, pure Nash equilibria, best-response iteration and brute-force oracles.

Profiles are tuples aligned with ``Game.players``. Utilities may return any
totally ordered numbers; the distribution models return exact fractions so
comparisons here are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

from . import distribution as dist
from .scenario import DepartureProfile, Scenario, feasible_departures

ENUMERATION_CAP = 10**6
DEFAULT_MAX_SWEEPS = 100

DEPARTURE_MODELS = ("even_out", "score", "cooperative")


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"{size} joint profiles exceeds the enumeration cap of {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class Game:
    players: tuple[int, ...]
    spaces: tuple[tuple[Hashable, ...], ...]
    utility: Callable[[int, tuple], object]

    def __post_init__(self):
        if len(self.players) != len(self.spaces):
            raise ValueError("one decision space per player required")
        for p, space in zip(self.players, self.spaces):
            if not space:
                raise ValueError(f"player {p} has an empty decision space")

    def index(self, player: int) -> int:
        return self.players.index(player)

    @property
    def profile_count(self) -> int:
        return math.prod(len(s) for s in self.spaces)


@dataclass
class IterationReport:
    converged: bool
    sweeps: int
    profile: tuple
    cycle_detected: bool = False
    trace: list[tuple] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "converged": self.converged,
            "sweeps": self.sweeps,
            "cycle_detected": self.cycle_detected,
            "profile": list(self.profile),
        }
        if self.trace:
            out["trace"] = [list(p) for p in self.trace]
        return out


def _with(profile: tuple, k: int, decision) -> tuple:
    return profile[:k] + (decision,) + profile[k + 1:]


def best_response(i: int, profile: Sequence, game: Game):
    """Utility-maximising decision of player ``i`` with the others held fixed.

    Ties keep the current decision when it is a maximiser, otherwise the
    earliest maximiser in the decision space's order.
    """
    k = game.index(i)
    profile = tuple(profile)
    space = game.spaces[k]
    values = [game.utility(i, _with(profile, k, d)) for d in space]
    best = max(values)
    current = profile[k]
    if current in space and values[space.index(current)] == best:
        return current
    return space[values.index(best)]


def is_nash(profile: Sequence, game: Game) -> bool:
    profile = tuple(profile)
    for k, i in enumerate(game.players):
        here = game.utility(i, profile)
        for d in game.spaces[k]:
            if d != profile[k] and game.utility(i, _with(profile, k, d)) > here:
                return False
    return True


def nash_violations(profile: Sequence, game: Game) -> list[tuple[int, object, object]]:
    """Every strictly profitable unilateral deviation as ``(player, decision, gain)``."""
    profile = tuple(profile)
    found = []
    for k, i in enumerate(game.players):
        here = game.utility(i, profile)
        for d in game.spaces[k]:
            gain = game.utility(i, _with(profile, k, d)) - here
            if gain > 0:
                found.append((i, d, gain))
    return found


def best_response_iteration(
    game: Game,
    initial: Sequence,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    trace: bool = False,
) -> IterationReport:
    """Sequential best-response sweeps in player order until nothing changes."""
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    profile = tuple(initial)
    seen = {profile}
    history = [profile] if trace else []
    for sweep in range(1, max_sweeps + 1):
        before = profile
        for k, i in enumerate(game.players):
            d = best_response(i, profile, game)
            if d != profile[k]:
                profile = _with(profile, k, d)
        if trace:
            history.append(profile)
        if profile == before:
            return IterationReport(True, sweep, profile, False, history)
        if profile in seen:
            return IterationReport(False, sweep, profile, True, history)
        seen.add(profile)
    return IterationReport(False, max_sweeps, profile, False, history)


def enumerate_equilibria(game: Game, cap: int = ENUMERATION_CAP) -> list[tuple]:
    """All pure Nash equilibria by exhaustive enumeration, in lexicographic order."""
    size = game.profile_count
    if size > cap:
        raise EnumerationCapExceeded(size, cap)
    return [p for p in itertools.product(*game.spaces) if is_nash(p, game)]


def departure_game(
    scenario: Scenario, model: str, scores: Sequence | None = None
) -> Game:
    """The departure-time game of ``even_out``, ``score`` or ``cooperative``."""
    spaces = tuple(feasible_departures(i, scenario) for i in scenario.ids)
    if model == "even_out":
        def utility(i, profile):
            return dist.utility_even_out(i, profile, scenario)
    elif model == "score":
        if scores is None:
            raise ValueError("the score game needs a ScoreState")
        scores = dist.ScoreState(scores)

        def utility(i, profile):
            return dist.utility_score(i, profile, scores, scenario)
    elif model == "cooperative":
        def utility(i, profile):
            return dist.utility_cooperative(profile, scenario)
    else:
        raise ValueError(f"unknown departure model {model!r}")
    return Game(tuple(scenario.ids), spaces, utility)


def social_optimum(
    scenario: Scenario, cap: int = ENUMERATION_CAP
) -> tuple[DepartureProfile, Fraction]:
    """Exhaustive maximiser of the cooperative utility; lexicographically first on ties."""
    spaces = [feasible_departures(i, scenario) for i in scenario.ids]
    size = math.prod(len(s) for s in spaces)
    if size > cap:
        raise EnumerationCapExceeded(size, cap)
    best_profile, best_value = None, None
    for profile in itertools.product(*spaces):
        value = dist.utility_cooperative(profile, scenario)
        if best_value is None or value > best_value:
            best_profile, best_value = profile, value
    return DepartureProfile(best_profile), best_value
