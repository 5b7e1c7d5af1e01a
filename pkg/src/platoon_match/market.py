"""Market distribution model: buyers follow the cheapest-net seller, sellers price.

Buyers are myopic and re-decide from scratch for every price vector; only
sellers are players in the pricing game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .equilibrium import DEFAULT_MAX_SWEEPS, Game
from .scenario import (
    DepartureProfile,
    Scenario,
    ScenarioError,
    money_to_json,
    time_penalty,
    to_money,
)
from .distribution import LeaderAssignment


@dataclass(frozen=True)
class MarketState:
    sellers: frozenset[int]
    buyers: frozenset[int]
    prices: Mapping[int, Fraction]
    price_grid: Mapping[int, tuple[Fraction, ...]]

    def validate(self, scenario: Scenario) -> None:
        if self.sellers & self.buyers or (self.sellers | self.buyers) != set(scenario.ids):
            raise ScenarioError("sellers and buyers must partition the fleet")
        times = [scenario.vehicle(i).default_departure for i in self.sellers]
        if len(set(times)) != len(times):
            raise ScenarioError("sellers must have distinct default departures")
        for i in self.sellers:
            if self.prices[i] not in self.price_grid[i]:
                raise ScenarioError(f"seller {i} price {self.prices[i]} is off its grid")

    def with_price(self, i: int, price: Fraction) -> "MarketState":
        return MarketState(self.sellers, self.buyers, {**self.prices, i: price}, self.price_grid)

    def seller_at(self, t: int, scenario: Scenario) -> int | None:
        for i in self.sellers:
            if scenario.vehicle(i).default_departure == t:
                return i
        return None


def price_grid(scenario: Scenario, fractions: Sequence = (
    Fraction(1, 5), Fraction(2, 5), Fraction(3, 5), Fraction(4, 5),
)) -> tuple[Fraction, ...]:
    """Sorted grid of fractions of the standard follower profit."""
    return tuple(sorted(to_money(f) * scenario.standard_profit_follower for f in fractions))


def initial_sellers(scenario: Scenario) -> frozenset[int]:
    """Lowest id per distinct default departure."""
    first: dict[int, int] = {}
    for v in scenario.vehicles:
        first.setdefault(v.default_departure, v.id)
    return frozenset(first.values())


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def buyer_options(j: int, market: MarketState, scenario: Scenario) -> tuple[int, ...]:
    _require(j in market.buyers, f"vehicle {j} is not a buyer")
    v = scenario.vehicle(j)
    times = {scenario.vehicle(i).default_departure for i in market.sellers}
    reach = {t for t in times if v.default_departure <= t <= v.latest_departure}
    return tuple(sorted(reach | {v.default_departure}))


def buyer_choice(j: int, market: MarketState, scenario: Scenario) -> tuple[int | None, Fraction]:
    """Seller followed by buyer ``j`` (``None`` = alone) and the buyer's profit.

    Ties favour departing alone, then the earliest seller time.
    """
    _require(j in market.buyers, f"vehicle {j} is not a buyer")
    v = scenario.vehicle(j)
    best_seller, best_value = None, Fraction(0)
    offers = sorted(
        (scenario.vehicle(i).default_departure, i) for i in market.sellers
    )
    for t, i in offers:
        if not v.default_departure <= t <= v.latest_departure:
            continue
        value = v.profit_follower - market.prices[i] - time_penalty(v, t)
        if value > best_value:
            best_seller, best_value = i, value
    return best_seller, best_value


def buyer_best_departure(j: int, market: MarketState, scenario: Scenario) -> int:
    seller, _ = buyer_choice(j, market, scenario)
    if seller is None:
        return scenario.vehicle(j).default_departure
    return scenario.vehicle(seller).default_departure


def all_followers(market: MarketState, scenario: Scenario) -> dict[int, frozenset[int]]:
    chosen: dict[int, set[int]] = {i: set() for i in market.sellers}
    for j in market.buyers:
        seller, _ = buyer_choice(j, market, scenario)
        if seller is not None:
            chosen[seller].add(j)
    return {i: frozenset(s) for i, s in chosen.items()}


def followers(i: int, market: MarketState, scenario: Scenario) -> frozenset[int]:
    _require(i in market.sellers, f"vehicle {i} is not a seller")
    return frozenset(j for j in market.buyers if buyer_choice(j, market, scenario)[0] == i)


def seller_utility(i: int, market: MarketState, scenario: Scenario) -> Fraction:
    count = len(followers(i, market, scenario))
    if count == 0:
        return Fraction(0)
    return scenario.vehicle(i).profit_leader + count * market.prices[i]


def seller_best_response(i: int, market: MarketState, scenario: Scenario) -> Fraction:
    """Revenue-maximising grid price; the lowest price wins ties."""
    _require(i in market.sellers, f"vehicle {i} is not a seller")
    grid = sorted(market.price_grid[i])
    _require(bool(grid), f"seller {i} has an empty price grid")
    best_price, best_value = None, None
    for p in grid:
        value = seller_utility(i, market.with_price(i, p), scenario)
        if best_value is None or value > best_value:
            best_price, best_value = p, value
    return best_price


def market_game(market: MarketState, scenario: Scenario) -> Game:
    """The sellers' pricing game at a fixed seller set, for equilibrium checks."""
    players = tuple(sorted(market.sellers))
    spaces = tuple(tuple(sorted(market.price_grid[i])) for i in players)

    def utility(i, prices):
        state = MarketState(market.sellers, market.buyers, dict(zip(players, prices)),
                            market.price_grid)
        return seller_utility(i, state, scenario)

    return Game(players, spaces, utility)


@dataclass
class MarketResult:
    sellers: frozenset[int]
    prices: dict[int, Fraction]
    followers: dict[int, frozenset[int]]
    state: MarketState
    converged: bool = True
    cycle_detected: bool = False
    sweeps: int = 0
    demotions: int = 0
    unsettled_rounds: int = 0
    rounds: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sellers": sorted(self.sellers),
            "prices": {str(i): money_to_json(p) for i, p in sorted(self.prices.items())},
            "followers": {str(i): sorted(f) for i, f in sorted(self.followers.items())},
            "converged": self.converged,
            "cycle_detected": self.cycle_detected,
            "sweeps": self.sweeps,
            "demotions": self.demotions,
            "unsettled_rounds": self.unsettled_rounds,
        }


ON_CYCLE = ("demote", "continue")


def pick_demotion(
    sellers, follower_counts: Mapping[int, int], utilities: Mapping[int, Fraction], settled: bool
) -> int | None:
    """Seller to turn into a buyer after a round of price sweeps.

    A follower-less seller (lowest id) when there is one. After a round that
    failed to settle, the seller with the smallest utility (lowest id on
    ties) otherwise.
    """
    idle = sorted(i for i in sellers if follower_counts[i] == 0)
    if idle:
        return idle[0]
    if settled or not sellers:
        return None
    return min(sellers, key=lambda i: (utilities[i], i))


def assign_sellers(
    scenario: Scenario,
    initial_prices: Mapping[int, Fraction] | None = None,
    grid: Sequence[Fraction] | Mapping[int, Sequence[Fraction]] | None = None,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    on_cycle: str = "demote",
) -> MarketResult:
    """Alternate seller price sweeps with demotion of follower-less sellers.

    Sellers start as the lowest id per distinct default time, priced at the
    top of their grid unless ``initial_prices`` says otherwise. Each round
    sweeps sellers in ascending id until prices are stable, then demotes the
    lowest-id seller without followers to buyer.

    The pricing game need not have a pure equilibrium. When a round cycles
    or hits ``max_sweeps``, ``on_cycle="demote"`` demotes a seller anyway
    (see :func:`pick_demotion`) so the final round always settles;
    ``"continue"`` applies the plain follower-less rule and may return
    unsettled prices.
    """
    if on_cycle not in ON_CYCLE:
        raise ValueError(f"on_cycle must be one of {ON_CYCLE}")
    if grid is None:
        grid = price_grid(scenario)
    if isinstance(grid, Mapping):
        grids = {i: tuple(sorted(to_money(p) for p in grid[i])) for i in scenario.ids}
    else:
        shared = tuple(sorted(to_money(p) for p in grid))
        grids = {i: shared for i in scenario.ids}
    sellers = set(initial_sellers(scenario))
    prices = {i: grids[i][-1] for i in sellers}
    if initial_prices:
        prices.update({i: to_money(p) for i, p in initial_prices.items() if i in sellers})

    cycle = False
    total_sweeps = demotions = unsettled = 0
    rounds = []
    while True:
        state = MarketState(frozenset(sellers), frozenset(set(scenario.ids) - sellers),
                            dict(prices), grids)
        order = sorted(sellers)
        seen = {tuple(state.prices[i] for i in order)}
        settled = False
        for _ in range(max_sweeps):
            total_sweeps += 1
            before = tuple(state.prices[i] for i in order)
            for i in order:
                p = seller_best_response(i, state, scenario)
                if p != state.prices[i]:
                    state = state.with_price(i, p)
            after = tuple(state.prices[i] for i in order)
            if after == before:
                settled = True
                break
            if after in seen:
                cycle = True
                break
            seen.add(after)
        unsettled += not settled
        prices = dict(state.prices)
        follow = all_followers(state, scenario)
        counts = {i: len(follow[i]) for i in sellers}
        utilities = {i: seller_utility(i, state, scenario) for i in sellers}
        rounds.append({"sellers": order, "settled": settled})
        demoted = pick_demotion(sellers, counts, utilities, settled or on_cycle == "continue")
        if demoted is None:
            break
        sellers.discard(demoted)
        prices.pop(demoted)
        demotions += 1

    return MarketResult(
        sellers=state.sellers,
        prices=dict(state.prices),
        followers=follow,
        state=state,
        converged=settled,
        cycle_detected=cycle,
        sweeps=total_sweeps,
        demotions=demotions,
        unsettled_rounds=unsettled,
        rounds=rounds,
    )


@dataclass
class MarketOutcome:
    profile: DepartureProfile
    utilities: list[Fraction]
    leaders: LeaderAssignment
    result: MarketResult

    @property
    def follower_count(self) -> int:
        return sum(len(f) for f in self.result.followers.values())


def market_outcome(scenario: Scenario, **kwargs) -> MarketOutcome:
    result = assign_sellers(scenario, **kwargs)
    return outcome_from_result(result, scenario)


def outcome_from_result(result: MarketResult, scenario: Scenario) -> MarketOutcome:
    state = result.state
    departures = list(scenario.default_times)
    utilities = [Fraction(0)] * scenario.n
    leaders = {}
    for i in state.sellers:
        f = result.followers[i]
        if f:
            leaders[scenario.vehicle(i).default_departure] = i
            utilities[i - 1] = scenario.vehicle(i).profit_leader + len(f) * state.prices[i]
    for j in state.buyers:
        seller, value = buyer_choice(j, state, scenario)
        if seller is not None:
            departures[j - 1] = scenario.vehicle(seller).default_departure
            utilities[j - 1] = value
    return MarketOutcome(DepartureProfile(departures), utilities, LeaderAssignment(leaders), result)
