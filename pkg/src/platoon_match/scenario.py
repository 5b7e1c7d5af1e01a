"""Vehicles, scenarios and departure-time decision spaces.

Money is carried as :class:`fractions.Fraction` so that utility identities
hold exactly; departure times are integer minutes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

LOG = logging.getLogger(__name__)

Money = Fraction


class ScenarioError(ValueError):
    """Raised when a scenario, vehicle or profile violates its domain."""


def to_money(value) -> Fraction:
    """Convert ints, decimal strings, ``"p/q"`` strings or floats to exact money.

    Floats go through ``repr`` so ``0.35`` becomes ``7/20`` rather than the
    nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ScenarioError(f"not a money value: {value!r}")
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"not a money value: {value!r}") from exc


def money_to_json(value: Fraction) -> int | float | str:
    """Exact JSON encoding: ints and finite decimals as numbers, else ``"p/q"``."""
    if value.denominator == 1:
        return value.numerator
    den = value.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den == 1 and abs(value) < 10**12:
        as_float = float(value)
        if Fraction(repr(as_float)) == value:
            return as_float
    return str(value)


@dataclass(frozen=True)
class Vehicle:
    id: int
    default_departure: int
    max_delay: int
    profit_leader: Fraction
    profit_follower: Fraction
    penalty_rate: Fraction = Fraction(10)
    score_valuation: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("profit_leader", "profit_follower", "penalty_rate", "score_valuation"):
            object.__setattr__(self, name, to_money(getattr(self, name)))
        if int(self.max_delay) != self.max_delay or self.max_delay < 0:
            raise ScenarioError(f"vehicle {self.id}: max_delay must be a non-negative integer")
        if int(self.default_departure) != self.default_departure:
            raise ScenarioError(f"vehicle {self.id}: default_departure must be an integer")
        if self.penalty_rate < 0:
            raise ScenarioError(f"vehicle {self.id}: penalty_rate must be >= 0")
        if self.profit_follower < self.profit_leader:
            LOG.warning(
                "vehicle %d: follower profit %s below leader profit %s",
                self.id, self.profit_follower, self.profit_leader,
            )

    @property
    def latest_departure(self) -> int:
        return self.default_departure + self.max_delay


class DepartureProfile(tuple):
    """One departure minute per vehicle, positionally ordered by vehicle id."""

    def __new__(cls, departures: Iterable[int]):
        return super().__new__(cls, (int(d) for d in departures))

    @property
    def departures(self) -> tuple[int, ...]:
        return tuple(self)

    def time_of(self, vid: int) -> int:
        return self[vid - 1]

    def replace(self, vid: int, departure: int) -> "DepartureProfile":
        values = list(self)
        values[vid - 1] = departure
        return DepartureProfile(values)


@dataclass(frozen=True)
class Scenario:
    vehicles: tuple[Vehicle, ...]
    standard_profit_leader: Fraction = Fraction(0)
    standard_profit_follower: Fraction = Fraction(105)

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "standard_profit_leader", to_money(self.standard_profit_leader))
        object.__setattr__(self, "standard_profit_follower", to_money(self.standard_profit_follower))
        ids = [v.id for v in self.vehicles]
        if ids != list(range(1, len(ids) + 1)):
            raise ScenarioError(f"vehicle ids must be 1..N in order, got {ids}")

    @property
    def n(self) -> int:
        return len(self.vehicles)

    @property
    def ids(self) -> range:
        return range(1, self.n + 1)

    @property
    def default_times(self) -> tuple[int, ...]:
        return tuple(v.default_departure for v in self.vehicles)

    @cached_property
    def distinct_times(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.default_times)))

    @cached_property
    def _feasible(self) -> tuple[tuple[int, ...], ...]:
        times = self.distinct_times
        return tuple(
            tuple(t for t in times if v.default_departure <= t <= v.latest_departure)
            for v in self.vehicles
        )

    def vehicle(self, vid: int) -> Vehicle:
        if not 1 <= vid <= self.n:
            raise ScenarioError(f"unknown vehicle id {vid}")
        return self.vehicles[vid - 1]

    def default_profile(self) -> DepartureProfile:
        return DepartureProfile(self.default_times)

    def validate_profile(self, profile: Sequence[int]) -> DepartureProfile:
        if len(profile) != self.n:
            raise ScenarioError(f"profile has {len(profile)} entries for {self.n} vehicles")
        for vid, d in zip(self.ids, profile):
            if d not in self._feasible[vid - 1]:
                raise ScenarioError(f"vehicle {vid} cannot depart at {d}")
        return DepartureProfile(profile)

    def to_dict(self) -> dict:
        return {
            "standard_profit_leader": money_to_json(self.standard_profit_leader),
            "standard_profit_follower": money_to_json(self.standard_profit_follower),
            "vehicles": [
                {
                    "id": v.id,
                    "default_departure": v.default_departure,
                    "max_delay": v.max_delay,
                    "profit_leader": money_to_json(v.profit_leader),
                    "profit_follower": money_to_json(v.profit_follower),
                    "penalty_rate": money_to_json(v.penalty_rate),
                    "score_valuation": money_to_json(v.score_valuation),
                }
                for v in self.vehicles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        allowed = {"standard_profit_leader", "standard_profit_follower", "vehicles"}
        unknown = set(data) - allowed
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        vehicle_keys = {f for f in Vehicle.__dataclass_fields__}
        vehicles = []
        for entry in data["vehicles"]:
            bad = set(entry) - vehicle_keys
            if bad:
                raise ScenarioError(f"unknown vehicle keys: {sorted(bad)}")
            vehicles.append(Vehicle(**entry))
        return cls(
            vehicles=tuple(vehicles),
            standard_profit_leader=data.get("standard_profit_leader", 0),
            standard_profit_follower=data.get("standard_profit_follower", 105),
        )


def feasible_departures(vehicle: Vehicle | int, scenario: Scenario) -> tuple[int, ...]:
    """Default times of the fleet inside ``[d*, d* + max_delay]``, ascending."""
    vid = vehicle.id if isinstance(vehicle, Vehicle) else vehicle
    scenario.vehicle(vid)
    return scenario._feasible[vid - 1]


def platoon_members(profile: Sequence[int], i: int, scenario: Scenario) -> frozenset[int]:
    """Vehicles departing at vehicle ``i``'s *default* time (possibly none)."""
    t = scenario.vehicle(i).default_departure
    return frozenset(k for k, d in zip(scenario.ids, profile) if d == t)


def group_at(profile: Sequence[int], t: int) -> list[int]:
    """Ids of the vehicles departing at minute ``t``."""
    return [k for k, d in enumerate(profile, start=1) if d == t]


def groups(profile: Sequence[int]) -> dict[int, list[int]]:
    """Occupied departure times mapped to their members (ascending ids)."""
    out: dict[int, list[int]] = {}
    for k, d in enumerate(profile, start=1):
        out.setdefault(d, []).append(k)
    return dict(sorted(out.items()))


def time_penalty(vehicle: Vehicle, departure: int) -> Fraction:
    if departure < vehicle.default_departure:
        raise ScenarioError(
            f"vehicle {vehicle.id} cannot depart at {departure}, before its default "
            f"{vehicle.default_departure}"
        )
    return vehicle.penalty_rate * (departure - vehicle.default_departure)


@dataclass(frozen=True)
class Economics:
    """Fuel-saving economics that fix the platooning profits."""

    distance_km: Fraction = Fraction(200)
    consumption_l_per_km: Fraction = Fraction(7, 20)
    fuel_price: Fraction = Fraction(15)
    follower_saving: Fraction = Fraction(1, 10)
    leader_saving: Fraction = Fraction(0)
    penalty_rate: Fraction = Fraction(10)
    beta_fraction: Fraction = Fraction(1, 4)
    price_fractions: tuple[Fraction, ...] = (
        Fraction(1, 5), Fraction(2, 5), Fraction(3, 5), Fraction(4, 5),
    )

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if name == "price_fractions":
                object.__setattr__(self, name, tuple(to_money(p) for p in self.price_fractions))
            else:
                object.__setattr__(self, name, to_money(getattr(self, name)))

    @property
    def fuel_cost(self) -> Fraction:
        return self.distance_km * self.consumption_l_per_km * self.fuel_price

    @property
    def profit_follower(self) -> Fraction:
        return self.fuel_cost * self.follower_saving

    @property
    def profit_leader(self) -> Fraction:
        return self.fuel_cost * self.leader_saving

    @property
    def score_valuation(self) -> Fraction:
        return self.profit_follower * self.beta_fraction

    def price_grid(self) -> tuple[Fraction, ...]:
        return tuple(sorted(f * self.profit_follower for f in self.price_fractions))


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    window: tuple[int, int] = (0, 30)
    max_delay: int = 10
    economics: Economics = field(default_factory=Economics)

    def __post_init__(self):
        if self.n < 1:
            raise ScenarioError("a scenario needs at least one vehicle")
        lo, hi = self.window
        if lo > hi:
            raise ScenarioError(f"bad departure window {self.window}")
        if self.max_delay < 0:
            raise ScenarioError("max_delay must be >= 0")


def generate_scenario(config: ScenarioConfig, seed) -> Scenario:
    """Draw a homogeneous fleet with i.i.d. uniform integer default departures."""
    rng = np.random.default_rng(seed)
    lo, hi = config.window
    defaults = rng.integers(lo, hi + 1, size=config.n)
    econ = config.economics
    vehicles = tuple(
        Vehicle(
            id=i + 1,
            default_departure=int(d),
            max_delay=config.max_delay,
            profit_leader=econ.profit_leader,
            profit_follower=econ.profit_follower,
            penalty_rate=econ.penalty_rate,
            score_valuation=econ.score_valuation,
        )
        for i, d in enumerate(defaults)
    )
    return Scenario(vehicles, econ.profit_leader, econ.profit_follower)


def make_scenario(
    defaults: Sequence[int],
    max_delay: int | Sequence[int] = 10,
    profit_leader=0,
    profit_follower=105,
    penalty_rate=10,
    score_valuation=Fraction(105, 4),
    standards: tuple | None = None,
) -> Scenario:
    """Build a homogeneous scenario from a list of default departures."""
    delays = [max_delay] * len(defaults) if isinstance(max_delay, int) else list(max_delay)
    vehicles = tuple(
        Vehicle(i + 1, int(d), int(delays[i]), profit_leader, profit_follower,
                penalty_rate, score_valuation)
        for i, d in enumerate(defaults)
    )
    std_l, std_f = standards if standards is not None else (profit_leader, profit_follower)
    return Scenario(vehicles, std_l, std_f)
