import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from platoon_match.scenario import (
    DepartureProfile,
    Economics,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    Vehicle,
    feasible_departures,
    generate_scenario,
    groups,
    make_scenario,
    money_to_json,
    platoon_members,
    time_penalty,
    to_money,
)


@pytest.mark.parametrize("defaults, vid, delay, expected", [
    ([0, 1, 15], 1, 10, (0, 1)),
    ([5, 6, 7], 1, 0, (5,)),
    ([0, 30], 2, 10, (30,)),
])
def test_feasible_departures_examples(defaults, vid, delay, expected):
    sc = make_scenario(defaults, max_delay=[delay if k + 1 == vid else 10 for k in range(len(defaults))])
    brute = tuple(sorted({t for t in defaults if defaults[vid - 1] <= t <= defaults[vid - 1] + delay}))
    assert feasible_departures(vid, sc) == expected == brute


def test_feasible_departures_unknown_vehicle(pair):
    with pytest.raises(ScenarioError):
        feasible_departures(3, pair)


def test_feasible_collapses_duplicates():
    sc = make_scenario([4, 4, 6])
    assert feasible_departures(1, sc) == (4, 6)


def test_platoon_members_examples():
    sc = make_scenario([0, 1, 5])
    profile = (1, 1, 5)
    assert platoon_members(profile, 2, sc) == {1, 2}
    assert platoon_members(profile, 1, sc) == frozenset()
    solo = make_scenario([7])
    assert platoon_members((7,), 1, solo) == {1}


def test_time_penalty_examples():
    v = Vehicle(1, 5, 10, 0, 105, penalty_rate=10)
    assert time_penalty(v, 5) == 0
    assert time_penalty(v, 12) == 70
    free = Vehicle(1, 5, 10, 0, 105, penalty_rate=0)
    assert time_penalty(free, 14) == 0
    with pytest.raises(ScenarioError):
        time_penalty(v, 4)


def test_generate_scenario_defaults():
    sc = generate_scenario(ScenarioConfig(12), seed=7)
    assert sc.n == 12
    assert all(v.profit_follower == 105 and v.profit_leader == 0 for v in sc.vehicles)
    assert all(v.score_valuation == Fraction(2625, 100) for v in sc.vehicles)
    assert all(v.penalty_rate == 10 and v.max_delay == 10 for v in sc.vehicles)
    assert all(0 <= t <= 30 for t in sc.default_times)
    assert (sc.standard_profit_leader, sc.standard_profit_follower) == (0, 105)


def test_generate_scenario_deterministic():
    cfg = ScenarioConfig(9)
    assert generate_scenario(cfg, 11) == generate_scenario(cfg, 11)
    assert generate_scenario(cfg, 11) != generate_scenario(cfg, 12)


def test_generate_scenario_rejects_empty_fleet():
    with pytest.raises(ScenarioError):
        ScenarioConfig(0)


def test_economics_profits_are_exact():
    econ = Economics()
    assert econ.profit_follower == 105
    assert econ.profit_leader == 0
    assert econ.price_grid() == (21, 42, 63, 84)
    assert Economics(consumption_l_per_km=0.35).profit_follower == 105


def test_scenario_ids_must_be_contiguous():
    with pytest.raises(ScenarioError):
        Scenario((Vehicle(2, 0, 10, 0, 105),))


def test_validate_profile(pair):
    assert pair.validate_profile((1, 1)) == DepartureProfile((1, 1))
    with pytest.raises(ScenarioError):
        pair.validate_profile((0, 0))
    with pytest.raises(ScenarioError):
        pair.validate_profile((1,))


def test_follower_below_leader_is_logged(caplog):
    Vehicle(1, 0, 10, profit_leader=50, profit_follower=10)
    assert "below leader profit" in caplog.text


def test_json_round_trip():
    sc = make_scenario([3, 8, 8], profit_leader=Fraction(1, 3), penalty_rate=Fraction(5, 2))
    text = json.dumps(sc.to_dict())
    assert Scenario.from_dict(json.loads(text)) == sc


def test_from_dict_rejects_unknown_keys():
    data = make_scenario([1]).to_dict()
    data["vehicles"][0]["colour"] = "red"
    with pytest.raises(ScenarioError, match="colour"):
        Scenario.from_dict(data)


@pytest.mark.parametrize("value, expected", [
    (Fraction(105), 105), (Fraction(105, 4), 26.25), (Fraction(1, 3), "1/3"),
])
def test_money_to_json(value, expected):
    assert money_to_json(value) == expected
    assert to_money(money_to_json(value)) == value


fleets = st.lists(st.integers(0, 30), min_size=1, max_size=8)


@given(fleets, st.integers(0, 12), st.data())
def test_feasible_invariants(defaults, delay, data):
    sc = make_scenario(defaults, max_delay=delay)
    vid = data.draw(st.integers(1, len(defaults)))
    opts = feasible_departures(vid, sc)
    d = defaults[vid - 1]
    assert d in opts
    assert list(opts) == sorted(set(opts))
    assert all(t in defaults and d <= t <= d + delay for t in opts)


@given(fleets, st.data())
def test_groups_partition_the_fleet(defaults, data):
    sc = make_scenario(defaults)
    profile = tuple(data.draw(st.sampled_from(feasible_departures(i, sc))) for i in sc.ids)
    grouped = groups(profile)
    members = sorted(k for m in grouped.values() for k in m)
    assert members == list(sc.ids)
    for t, m in grouped.items():
        assert all(profile[k - 1] == t for k in m)


@given(st.integers(0, 30), st.integers(0, 50), st.integers(0, 20), st.integers(0, 20))
def test_penalty_monotone(d0, rate, a, b):
    v = Vehicle(1, d0, 40, 0, 105, penalty_rate=rate)
    lo, hi = sorted((a, b))
    assert 0 <= time_penalty(v, d0 + lo) <= time_penalty(v, d0 + hi)
