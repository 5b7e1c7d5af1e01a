"""Profit-distribution models: even out, score system, cooperative, spontaneous."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scenario import (
    DepartureProfile,
    Scenario,
    ScenarioError,
    Vehicle,
    group_at,
    groups,
    time_penalty,
    to_money,
)

# Nudge applied to the later of two colliding scores.
SCORE_EPSILON = Fraction(1, 10**9)


class ScoreState(tuple):
    """Per-vehicle scores, positionally ordered by vehicle id, pairwise distinct."""

    def __new__(cls, scores: Iterable):
        values = [to_money(s) for s in scores]
        seen: set[Fraction] = set()
        for k, s in enumerate(values):
            while s in seen:
                s += SCORE_EPSILON
            values[k] = s
            seen.add(s)
        return super().__new__(cls, values)

    def of(self, vid: int) -> Fraction:
        return self[vid - 1]

    @classmethod
    def random(cls, n: int, seed) -> "ScoreState":
        """I.i.d. uniform scores on [0, 1), redrawing any collision."""
        rng = np.random.default_rng(seed)
        values: list[float] = []
        while len(values) < n:
            s = float(rng.random())
            if s not in values:
                values.append(s)
        return cls(Fraction(s) for s in values)


@dataclass(frozen=True)
class LeaderAssignment:
    """Leader per occupied departure time holding more than one vehicle."""

    leaders: Mapping[int, int]

    def role(self, vid: int, profile: Sequence[int]) -> str:
        t = profile[vid - 1]
        if t not in self.leaders:
            return "solo"
        return "leader" if self.leaders[t] == vid else "follower"

    def to_dict(self) -> dict:
        return {str(t): vid for t, vid in sorted(self.leaders.items())}


def _check_size(n: int) -> None:
    if n <= 1:
        raise ScenarioError(f"platoon size must exceed 1, got {n}")


def transaction_profit_leader(vehicle: Vehicle, n: int, scenario: Scenario) -> Fraction:
    _check_size(n)
    surplus = scenario.standard_profit_follower - scenario.standard_profit_leader
    return vehicle.profit_leader + Fraction(n - 1, n) * surplus


def transaction_profit_follower(vehicle: Vehicle, n: int, scenario: Scenario) -> Fraction:
    _check_size(n)
    surplus = scenario.standard_profit_follower - scenario.standard_profit_leader
    return vehicle.profit_follower - Fraction(1, n) * surplus


def expected_profit(vehicle: Vehicle, n: int) -> Fraction:
    """Expected even-out profit in a platoon of ``n`` under a uniform leader draw."""
    _check_size(n)
    return Fraction(1, n) * vehicle.profit_leader + Fraction(n - 1, n) * vehicle.profit_follower


def utility_even_out(i: int, profile: Sequence[int], scenario: Scenario) -> Fraction:
    vehicle = scenario.vehicle(i)
    d = profile[i - 1]
    penalty = time_penalty(vehicle, d)
    n = sum(1 for x in profile if x == d)
    if n > 1:
        return expected_profit(vehicle, n) - penalty
    return -penalty


def score_leader(members: Iterable[int], scores: Sequence) -> int:
    members = list(members)
    if len(members) <= 1:
        raise ScenarioError("a leader needs a platoon of at least two vehicles")
    return min(members, key=lambda k: scores[k - 1])


def score_updates(n: int) -> tuple[Fraction, Fraction]:
    """Leader gain and follower loss magnitude for a platoon of ``n``."""
    _check_size(n)
    return Fraction(n - 1, n), Fraction(1, n)


def utility_score(
    i: int, profile: Sequence[int], scores: Sequence, scenario: Scenario
) -> Fraction:
    vehicle = scenario.vehicle(i)
    d = profile[i - 1]
    penalty = time_penalty(vehicle, d)
    members = group_at(profile, d)
    n = len(members)
    if n <= 1:
        return -penalty
    gain, loss = score_updates(n)
    if score_leader(members, scores) == i:
        return vehicle.profit_leader - penalty + vehicle.score_valuation * gain
    return vehicle.profit_follower - penalty - vehicle.score_valuation * loss


def apply_score_updates(
    profile: Sequence[int], scores: Sequence, scenario: Scenario
) -> ScoreState:
    scenario.validate_profile(profile)
    new = list(scores)
    for members in groups(profile).values():
        n = len(members)
        if n <= 1:
            continue
        gain, loss = score_updates(n)
        leader = score_leader(members, scores)
        for k in members:
            new[k - 1] = scores[k - 1] + gain if k == leader else scores[k - 1] - loss
    return ScoreState(new)


def _profit_gap(vehicle: Vehicle) -> Fraction:
    return vehicle.profit_follower - vehicle.profit_leader


def cooperative_leader(members: Iterable[int], scenario: Scenario) -> int:
    members = sorted(members)
    if len(members) <= 1:
        raise ScenarioError("a leader needs a platoon of at least two vehicles")
    return min(members, key=lambda k: (_profit_gap(scenario.vehicle(k)), k))


def cooperative_profits(profile: Sequence[int], scenario: Scenario) -> list[Fraction]:
    """Per-vehicle ``b_i - B_i`` under cooperative leader assignment."""
    out = []
    grouped = groups(profile)
    for vid, d in zip(scenario.ids, profile):
        vehicle = scenario.vehicle(vid)
        members = grouped[d]
        if len(members) <= 1:
            profit = Fraction(0)
        elif cooperative_leader(members, scenario) == vid:
            profit = vehicle.profit_leader
        else:
            profit = vehicle.profit_follower
        out.append(profit - time_penalty(vehicle, d))
    return out


def utility_cooperative(profile: Sequence[int], scenario: Scenario) -> Fraction:
    return sum(cooperative_profits(profile, scenario), Fraction(0))


def leader_assignment(
    profile: Sequence[int], scenario: Scenario, model: str, scores: Sequence | None = None
) -> LeaderAssignment:
    """Leaders for the score and cooperative models.

    Even-out leaders are random and only their distribution matters, so this
    returns no leaders for ``even_out``/``spontaneous``; use
    :func:`draw_even_out_leaders` for a realised draw.
    """
    leaders = {}
    for t, members in groups(profile).items():
        if len(members) <= 1:
            continue
        if model == "score":
            leaders[t] = score_leader(members, scores)
        elif model == "cooperative":
            leaders[t] = cooperative_leader(members, scenario)
    return LeaderAssignment(leaders)


def draw_even_out_leaders(profile: Sequence[int], seed) -> LeaderAssignment:
    """Reporting-only uniform leader draw; utilities never depend on it."""
    rng = np.random.default_rng(seed)
    leaders = {}
    for t, members in groups(profile).items():
        if len(members) > 1:
            leaders[t] = members[int(rng.integers(len(members)))]
    return LeaderAssignment(leaders)


def spontaneous_outcome(scenario: Scenario) -> tuple[DepartureProfile, list[Fraction]]:
    profile = scenario.default_profile()
    return profile, [utility_even_out(i, profile, scenario) for i in scenario.ids]


def follower_count(profile: Sequence[int]) -> int:
    """Followers when every platoon of ``n`` has exactly one leader."""
    return sum(len(m) - 1 for m in groups(profile).values() if len(m) > 1)
