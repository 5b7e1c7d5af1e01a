from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from platoon_match import equilibrium as eq
from platoon_match import market as mk
from platoon_match.scenario import ScenarioConfig, ScenarioError, generate_scenario, make_scenario

F = Fraction
GRID = (21, 42, 63, 84)


def state(scenario, prices):
    """Market with the given ``{seller: price}``; everyone else buys."""
    sellers = frozenset(prices)
    grid = {i: tuple(F(p) for p in GRID) for i in scenario.ids}
    return mk.MarketState(sellers, frozenset(set(scenario.ids) - sellers),
                          {i: F(p) for i, p in prices.items()}, grid)


@pytest.fixture
def three_sellers():
    # vehicle 1 buys (d*=5); sellers at 8, 12 and 20
    return make_scenario([5, 8, 12, 20])


def test_price_grid(pair):
    assert mk.price_grid(pair) == GRID


def test_buyer_options_examples(three_sellers):
    m = state(three_sellers, {2: 42, 3: 21, 4: 21})
    assert mk.buyer_options(1, m, three_sellers) == (5, 8, 12)
    far = make_scenario([0, 30])
    assert mk.buyer_options(1, state(far, {2: 21}), far) == (0,)
    shared = make_scenario([7, 7])
    assert mk.buyer_options(2, state(shared, {1: 21}), shared) == (7,)
    with pytest.raises(ScenarioError):
        mk.buyer_options(2, m, three_sellers)


def test_buyer_best_departure_examples(three_sellers):
    m = state(three_sellers, {2: 42, 3: 21, 4: 21})
    # 105-42-30 = 33 at 8, 105-21-70 = 14 at 12, 0 alone
    assert mk.buyer_choice(1, m, three_sellers) == (2, 33)
    assert mk.buyer_best_departure(1, m, three_sellers) == 8
    pricey = make_scenario([0, 9])
    assert mk.buyer_best_departure(1, state(pricey, {2: 21}), pricey) == 0
    same = make_scenario([4, 4])
    assert mk.buyer_best_departure(2, state(same, {1: 84}), same) == 4
    assert mk.buyer_choice(2, state(same, {1: 84}), same) == (1, 21)


def test_buyer_prefers_alone_on_zero_gain():
    sc = make_scenario([0, 0])
    m = mk.MarketState(frozenset({1}), frozenset({2}), {1: F(105)}, {1: (F(105),), 2: (F(105),)})
    assert mk.buyer_choice(2, m, sc) == (None, 0)


def test_buyer_tie_goes_to_earliest_seller():
    sc = make_scenario([0, 2, 4])
    # 105-42-20 = 43 and 105-21-40 = 44 -> seller 3; equalise with 105-22-40
    m = state(sc, {2: 42, 3: 21})
    assert mk.buyer_choice(1, m, sc)[0] == 3
    tie = mk.MarketState(frozenset({2, 3}), frozenset({1}), {2: F(42), 3: F(22)},
                         {i: (F(22), F(42)) for i in sc.ids})
    assert mk.buyer_choice(1, tie, sc) == (2, 43)
    assert sum(1 in mk.followers(i, tie, sc) for i in (2, 3)) == 1


def test_followers_examples():
    sc = make_scenario([0, 3])
    assert mk.followers(2, state(sc, {2: 42}), sc) == {1}
    rich = mk.MarketState(frozenset({2}), frozenset({1}), {2: F(105)},
                          {1: (F(105),), 2: (F(105),)})
    assert mk.followers(2, rich, sc) == frozenset()


def test_seller_utility_examples():
    sc = make_scenario([0, 0, 0])
    assert mk.seller_utility(1, state(sc, {1: 63}), sc) == 126
    lone = make_scenario([0, 20])
    assert mk.seller_utility(2, state(lone, {2: 21}), lone) == 0
    two = make_scenario([0, 0])
    assert mk.seller_utility(1, state(two, {1: 84}), two) == 84


def test_seller_best_response_examples():
    captive = make_scenario([0, 0])
    assert mk.seller_best_response(1, state(captive, {1: 21}), captive) == 84
    nobody = make_scenario([0, 25])
    assert mk.seller_best_response(1, state(nobody, {1: 63}), nobody) == 21
    both = make_scenario([0, 0, 0])
    s = state(both, {1: 21})
    assert mk.seller_best_response(1, s, both) == 84
    assert mk.seller_utility(1, s.with_price(1, F(84)), both) == 168


def test_seller_best_response_enumerates_grid():
    sc = make_scenario([0, 0, 3, 6])
    s = state(sc, {1: 42, 4: 21})
    best = mk.seller_best_response(1, s, sc)
    values = {p: mk.seller_utility(1, s.with_price(1, F(p)), sc) for p in GRID}
    top = max(values.values())
    assert best == min(p for p, v in values.items() if v == top)


def test_assign_sellers_examples():
    sc = make_scenario([0, 0])
    res = mk.assign_sellers(sc)
    assert res.sellers == {1} and res.prices == {1: 84} and res.followers == {1: {2}}
    solo = mk.assign_sellers(make_scenario([5]))
    assert solo.sellers == frozenset() and solo.demotions == 1


def test_assign_sellers_initial_prices():
    sc = make_scenario([0, 0])
    res = mk.assign_sellers(sc, initial_prices={1: 21})
    assert res.prices == {1: 84}


def test_market_outcome_composition(three_sellers):
    out = mk.market_outcome(three_sellers)
    res = out.result
    for i in res.sellers:
        assert out.profile[i - 1] == three_sellers.vehicle(i).default_departure
        assert out.utilities[i - 1] == len(res.followers[i]) * res.prices[i]
    nothing = make_scenario([0, 15, 30])
    empty = mk.market_outcome(nothing)
    assert empty.profile == (0, 15, 30) and empty.utilities == [0, 0, 0]


def test_on_cycle_validation(pair):
    with pytest.raises(ValueError):
        mk.assign_sellers(pair, on_cycle="ignore")


def check_market(result, scenario):
    st_ = result.state
    st_.validate(scenario)
    assert all(result.followers[i] for i in result.sellers)
    game = mk.market_game(st_, scenario)
    if result.converged:
        assert eq.is_nash(tuple(st_.prices[i] for i in game.players), game)
    for j in st_.buyers:
        _, value = mk.buyer_choice(j, st_, scenario)
        v = scenario.vehicle(j)
        for t in mk.buyer_options(j, st_, scenario):
            seller = st_.seller_at(t, scenario)
            alt = 0 if seller is None else v.profit_follower - st_.prices[seller] - v.penalty_rate * (t - v.default_departure)
            assert value >= alt
    assert result.demotions <= scenario.n


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(0, 10**6))
def test_assign_sellers_postconditions(n, seed):
    sc = generate_scenario(ScenarioConfig(n, window=(0, 15)), seed)
    result = mk.assign_sellers(sc)
    assert result.converged
    check_market(result, sc)
    out = mk.outcome_from_result(result, sc)
    roles = [0] * n
    for i in result.sellers:
        roles[i - 1] += 1
    for f in result.followers.values():
        for j in f:
            roles[j - 1] += 1
    assert max(roles) <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10**6))
def test_strict_mode_only_demotes_idle_sellers(n, seed):
    sc = generate_scenario(ScenarioConfig(n, window=(0, 15)), seed)
    strict = mk.assign_sellers(sc, on_cycle="continue")
    assert all(strict.followers[i] for i in strict.sellers)
    if strict.unsettled_rounds == 0:
        default = mk.assign_sellers(sc)
        assert (default.sellers, default.prices) == (strict.sellers, strict.prices)
