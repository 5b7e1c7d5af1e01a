"""Platoon-matching games under competing profit-distribution models.

Vehicles at a common origin pick departure times; the even-out, score-system,
market and cooperative models decide who profits from platooning. The package
computes pure Nash equilibria by best-response dynamics, checks them against
brute force, and runs the Monte Carlo comparison of the models.
"""

from .scenario import (
    DepartureProfile,
    Economics,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    Vehicle,
    feasible_departures,
    generate_scenario,
    make_scenario,
    platoon_members,
    time_penalty,
)
from .distribution import (
    LeaderAssignment,
    ScoreState,
    apply_score_updates,
    cooperative_leader,
    score_leader,
    score_updates,
    spontaneous_outcome,
    transaction_profit_follower,
    transaction_profit_leader,
    utility_cooperative,
    utility_even_out,
    utility_score,
)
from .equilibrium import (
    Game,
    IterationReport,
    best_response,
    best_response_iteration,
    departure_game,
    enumerate_equilibria,
    is_nash,
    social_optimum,
)
from .market import MarketState, assign_sellers, market_outcome
from .experiment import RunMetrics, SweepConfig, monte_carlo_sweep, run_once
from .accel import BACKEND

__version__ = "0.1.0"
