"""Market mechanisms: profit allocation, sealed-bid auction, request trading.

Cooperative-game allocations work on a characteristic function over
platform coalitions.  The auction and trading procedures operate on live
platform state during a simulation epoch; they compute valuations by
re-solving small profit-maximizing assignment problems.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    EmptyCoalitionError,
    InvalidGammaError,
    NegativeInputError,
    NonpositiveStandaloneError,
    ZeroDenominatorError,
    ZeroWeightError,
)
from .model import PricingScheme, Request, Trip, Vehicle, trip_marginal_profit
from .network import RoadNetwork
from .rtv import Constraints, RouteCache, build_rtv_graph
from .solve import Assignment, AssignmentProblem, LinearProgram, solve_assignment, solve_lp

log = logging.getLogger(__name__)

MAX_PLAYERS = 12


# ---------------------------------------------------------------------------
# cooperative game
# ---------------------------------------------------------------------------

@dataclass
class CoalitionGame:
    """A transferable-utility game over at most MAX_PLAYERS platforms.

    ``values`` must define every non-empty coalition; the empty coalition
    is 0 by convention and may not be queried.
    """

    players: tuple[str, ...]
    values: dict[frozenset[str], float]

    def __post_init__(self) -> None:
        self.players = tuple(self.players)
        if not 1 <= len(self.players) <= MAX_PLAYERS:
            raise ValueError(f"player count must be in 1..{MAX_PLAYERS}")
        if len(set(self.players)) != len(self.players):
            raise ValueError("duplicate player id")
        self.values = {frozenset(k): v for k, v in self.values.items()}
        base = set(self.players)
        for size in range(1, len(self.players) + 1):
            for combo in itertools.combinations(sorted(base), size):
                if frozenset(combo) not in self.values:
                    raise ValueError(f"missing coalition value for {combo}")

    @property
    def n(self) -> int:
        return len(self.players)

    def value(self, coalition: Iterable[str]) -> float:
        s = frozenset(coalition)
        if not s:
            raise EmptyCoalitionError("the empty coalition has no value")
        if not s <= set(self.players):
            raise ValueError(f"unknown players {sorted(s - set(self.players))}")
        return self.values[s]

    def grand_value(self) -> float:
        return self.value(self.players)


@dataclass
class Allocation:
    """A payoff vector over the game's players."""

    amounts: dict[str, Fraction | float]

    def total(self):
        return sum(self.amounts.values())

    def as_floats(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.amounts.items()}


def shapley(game: CoalitionGame) -> Allocation:
    """Shapley value, computed exactly with rational arithmetic.

    Exact fractions keep the efficiency identity (payoffs summing to the
    grand coalition value) free of rounding error.
    """
    n = game.n
    amounts: dict[str, Fraction] = {}
    for player in game.players:
        others = [p for p in game.players if p != player]
        total = Fraction(0)
        for size in range(n):
            weight = Fraction(factorial(size) * factorial(n - size - 1), factorial(n))
            for combo in itertools.combinations(others, size):
                before = Fraction(game.value(combo)) if combo else Fraction(0)
                after = Fraction(game.value(combo + (player,)))
                total += weight * (after - before)
        amounts[player] = total
    return Allocation(amounts)


def in_core(game: CoalitionGame, allocation: Allocation, tol: float = 1e-6) -> bool:
    """Exhaustive core membership check: efficiency plus no blocking coalition."""
    xs = {p: float(allocation.amounts[p]) for p in game.players}
    if abs(sum(xs.values()) - float(game.grand_value())) > tol:
        return False
    for size in range(1, game.n):
        for combo in itertools.combinations(game.players, size):
            if sum(xs[p] for p in combo) < float(game.value(combo)) - tol:
                return False
    return True


def _core_rows(game: CoalitionGame, width: int, x_at: Mapping[str, int]):
    """Core constraints as LP rows over a variable layout with slot map x_at."""
    rows: list[tuple[np.ndarray, str, float]] = []
    for size in range(1, game.n):
        for combo in itertools.combinations(game.players, size):
            a = np.zeros(width)
            for p in combo:
                a[x_at[p]] = 1.0
            rows.append((a, ">=", float(game.value(combo))))
    a = np.zeros(width)
    for p in game.players:
        a[x_at[p]] = 1.0
    rows.append((a, "=", float(game.grand_value())))
    return rows


def epm_allocate(game: CoalitionGame) -> tuple[Allocation, float] | None:
    """Core allocation minimizing the spread of payoff-to-standalone ratios.

    Returns None when the core is empty.  Every standalone value must be
    strictly positive for the ratios to make sense.
    """
    singles = {p: float(game.value([p])) for p in game.players}
    bad = [p for p, v in singles.items() if v <= 0]
    if bad:
        raise NonpositiveStandaloneError(f"non-positive standalone value for {bad}")
    width = 1 + game.n
    x_at = {p: 1 + i for i, p in enumerate(game.players)}
    rows = []
    for i, j in itertools.permutations(game.players, 2):
        a = np.zeros(width)
        a[0] = 1.0
        a[x_at[i]] = -1.0 / singles[i]
        a[x_at[j]] = 1.0 / singles[j]
        rows.append((a, ">=", 0.0))
    rows.extend(_core_rows(game, width, x_at))
    res = solve_lp(LinearProgram(c=np.eye(width)[0], rows=rows))
    if res.status != "optimal":
        return None
    amounts = {p: float(res.x[x_at[p]]) for p in game.players}
    return Allocation(amounts), float(res.value)


def contribution_weights(
    costs: Mapping[str, float], revenues: Mapping[str, float]
) -> dict[str, float]:
    """Player weights mixing cost share and demand share.

    The cost coefficient is overall net revenue over total cost; the
    revenue coefficient is net revenue over profit, which coincides with
    net revenue here and therefore equals one (flagged in the log).
    """
    if set(costs) != set(revenues):
        raise ValueError("costs and revenues must cover the same players")
    total_cost = float(sum(costs.values()))
    total_revenue = float(sum(revenues.values()))
    net = total_revenue - total_cost
    if total_cost <= 0:
        raise ZeroDenominatorError("total cost must be positive")
    if net <= 0:
        raise ZeroDenominatorError("total net revenue must be positive")
    theta_cost = net / total_cost
    theta_revenue = net / net  # profit equals net revenue in this accounting
    if theta_revenue == 1.0:
        log.debug("revenue coefficient degenerates to 1; weights lean on demand share")
    denom = theta_cost * total_cost + theta_revenue * total_revenue
    if denom <= 0:
        raise ZeroDenominatorError("weight denominator must be positive")
    return {
        p: (theta_cost * float(costs[p]) + theta_revenue * float(revenues[p])) / denom
        for p in sorted(costs)
    }


def contribution_allocate(
    game: CoalitionGame, weights: Mapping[str, float]
) -> tuple[Allocation, float] | None:
    """Core allocation equalizing weighted gains over standalone values.

    Returns None when the core is empty.
    """
    missing = [p for p in game.players if p not in weights]
    if missing:
        raise ZeroWeightError(f"no weight for players {missing}")
    bad = [p for p in game.players if weights[p] <= 0]
    if bad:
        raise ZeroWeightError(f"non-positive weight for {bad}")
    singles = {p: float(game.value([p])) for p in game.players}
    width = 1 + game.n
    x_at = {p: 1 + i for i, p in enumerate(game.players)}
    rows = []
    for i, j in itertools.permutations(game.players, 2):
        a = np.zeros(width)
        a[0] = 1.0
        a[x_at[i]] = -1.0 / weights[i]
        a[x_at[j]] = 1.0 / weights[j]
        rhs = singles[j] / weights[j] - singles[i] / weights[i]
        rows.append((a, ">=", rhs))
    rows.extend(_core_rows(game, width, x_at))
    res = solve_lp(LinearProgram(c=np.eye(width)[0], rows=rows))
    if res.status != "optimal":
        return None
    amounts = {p: float(res.x[x_at[p]]) for p in game.players}
    return Allocation(amounts), float(res.value)


# ---------------------------------------------------------------------------
# sealed-bid auction
# ---------------------------------------------------------------------------

class Bid(NamedTuple):
    platform: str
    amount: int  # fixed-point money, non-negative


@dataclass(frozen=True)
class AuctionOutcome:
    winner: str
    winning_amount: int
    payment: int  # gamma times the second-highest bid, in fixed point


def run_single_item_auction(bids: list[Bid], gamma: float) -> AuctionOutcome | None:
    """Sealed-bid single-item auction with a discounted second-price payment.

    The highest bid wins, ties going to the lowest platform id; the winner
    pays gamma times the second-highest bid.  Returns None (no sale) when
    every bid is zero.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidGammaError(f"gamma must lie in [0, 1], got {gamma}")
    if not bids:
        return None
    for b in bids:
        if b.amount < 0:
            raise NegativeInputError(f"negative bid from {b.platform}")
    if all(b.amount == 0 for b in bids):
        return None
    top = max(b.amount for b in bids)
    tied = sorted(b.platform for b in bids if b.amount == top)
    winner_id = tied[0]
    rest = [b.amount for b in bids if b.platform != winner_id]
    second = max(rest) if rest else 0
    return AuctionOutcome(
        winner=winner_id, winning_amount=top, payment=round(gamma * second)
    )


# ---------------------------------------------------------------------------
# live-market valuation helpers
# ---------------------------------------------------------------------------

@dataclass
class MatchingContext:
    """Shared inputs for valuation subproblems within one epoch stage."""

    net: RoadNetwork
    constraints: Constraints
    scheme: PricingScheme
    now: float
    registry: Mapping[str, Request]
    route_cache: RouteCache = field(default_factory=dict)
    profit_cache: dict = field(default_factory=dict)


def optimal_profit(
    vehicles: list[Vehicle], requests: list[Request], ctx: MatchingContext
) -> int:
    """Best attainable marginal profit of serving the request pool.

    Exact profit-objective assignment over the pool and fleet; an empty
    pool or fleet is worth nothing.
    """
    if not vehicles or not requests:
        return 0
    key = (
        tuple(
            (v.id, v.position, tuple(v.schedule), tuple(sorted(v.onboard)),
             tuple(sorted(v.assigned)))
            for v in sorted(vehicles, key=lambda v: v.id)
        ),
        tuple(sorted(r.id for r in requests)),
    )
    if key in ctx.profit_cache:
        return ctx.profit_cache[key]
    graph = build_rtv_graph(
        requests, vehicles, ctx.net, ctx.now, ctx.constraints,
        cache=ctx.route_cache, registry=ctx.registry,
    )
    assignment = solve_assignment(
        AssignmentProblem(
            graph=graph, objective="max_profit", penalty=0.0,
            scheme=ctx.scheme, net=ctx.net,
        )
    )
    profit = -assignment.objective_micro // 1000
    ctx.profit_cache[key] = profit
    return profit


@dataclass
class PlatformState:
    """One platform's live fleet and unmatched request pool."""

    id: str
    vehicles: list[Vehicle]
    pool: list[Request]
    ctx: MatchingContext


def platform_valuation(state: PlatformState, request: Request) -> int:
    """How much adding the request to the pool is worth to the platform.

    Marginal optimal profit, clamped at zero; a request no vehicle can
    serve is worth nothing.
    """
    base = optimal_profit(state.vehicles, state.pool, state.ctx)
    extended = optimal_profit(state.vehicles, state.pool + [request], state.ctx)
    return max(0, extended - base)


# ---------------------------------------------------------------------------
# marketplace auction stage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuctionAward:
    epoch: int
    request: str
    platform: str
    payment: int


@dataclass
class MarketplaceResult:
    awards: list[AuctionAward]
    leftovers: list[str]  # request ids that found no buyer this epoch


def marketplace_epoch(
    pool: list[Request],
    platforms: list[PlatformState],
    gamma: float,
    rng: np.random.Generator,
    epoch: int = 0,
) -> MarketplaceResult:
    """Sequentially auction the broker's requests in random order.

    Earlier awards enter the winner's pool and therefore lower (or raise)
    its valuations for later items.  Requests nobody bids on stay with the
    broker for the next epoch.
    """
    ordered = sorted(pool, key=lambda r: r.id)
    perm = rng.permutation(len(ordered))
    states = sorted(platforms, key=lambda s: s.id)
    awards: list[AuctionAward] = []
    leftovers: list[str] = []
    for idx in perm:
        request = ordered[idx]
        bids = [Bid(s.id, platform_valuation(s, request)) for s in states]
        outcome = run_single_item_auction(bids, gamma)
        if outcome is None:
            leftovers.append(request.id)
            continue
        winner = next(s for s in states if s.id == outcome.winner)
        winner.pool.append(request)
        awards.append(
            AuctionAward(
                epoch=epoch,
                request=request.id,
                platform=outcome.winner,
                payment=outcome.payment,
            )
        )
    return MarketplaceResult(awards=awards, leftovers=sorted(leftovers))


# ---------------------------------------------------------------------------
# request trading
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TradeRecord:
    epoch: int
    request: str
    seller: str
    buyer: str
    info_price: int  # fixed-point payment from buyer to seller

    def __post_init__(self) -> None:
        if self.seller == self.buyer:
            raise ValueError("a platform cannot trade with itself")
        if self.info_price < 0:
            raise NegativeInputError("information price must be non-negative")


def _split_proportional(total: int, weights: list[int], tags: list[str]) -> list[int]:
    """Split an integer amount proportionally with largest-remainder rounding.

    Non-positive weights are clamped to zero beforehand; if nothing is
    left the split falls back to equal weights.  Ties go to the lower tag.
    """
    clamped = [max(0, w) for w in weights]
    if sum(clamped) == 0:
        clamped = [1] * len(weights)
    denom = sum(clamped)
    shares = [total * w // denom for w in clamped]
    remainders = [
        (-(total * clamped[i] % denom), tags[i], i) for i in range(len(clamped))
    ]
    leftover = total - sum(shares)
    for _, _, i in sorted(remainders):
        if leftover <= 0:
            break
        shares[i] += 1
        leftover -= 1
    return shares


def central_trading_epoch(
    unsatisfied: Mapping[str, list[Request]],
    idle_vehicles: Mapping[str, list[Vehicle]],
    gamma: float,
    ctx: MatchingContext,
    epoch: int = 0,
) -> tuple[list[TradeRecord], Assignment]:
    """Pool every platform's leftovers and re-assign for maximum profit.

    A platform whose vehicle serves another platform's request pays the
    seller gamma times its profit from that service; pooled rides split
    the payment in proportion to the profit of serving each request alone.
    The broker only passes payments through.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidGammaError(f"gamma must lie in [0, 1], got {gamma}")
    requests = sorted(
        (r for pool in unsatisfied.values() for r in pool), key=lambda r: r.id
    )
    vehicles = sorted(
        (v for fleet in idle_vehicles.values() for v in fleet), key=lambda v: v.id
    )
    empty = Assignment(chosen=[], unserved=[r.id for r in requests], objective_micro=0)
    if not requests or not vehicles:
        return [], empty
    graph = build_rtv_graph(
        requests, vehicles, ctx.net, ctx.now, ctx.constraints,
        cache=ctx.route_cache, registry=ctx.registry,
    )
    # No unserved penalty here: the trading stage only serves at a profit,
    # which also keeps every information price non-negative.
    assignment = solve_assignment(
        AssignmentProblem(
            graph=graph, objective="max_profit", penalty=0.0,
            scheme=ctx.scheme, net=ctx.net,
        )
    )
    platform_of_vehicle = {v.id: v.platform for v in vehicles}
    trades: list[TradeRecord] = []
    for trip in assignment.chosen:
        buyer = platform_of_vehicle[trip.vehicle]
        profit = trip_marginal_profit(ctx.scheme, trip, ctx.net)
        total_price = round(gamma * profit)
        standalone = [
            trip_marginal_profit(
                ctx.scheme, graph.tv_edges[((rid,), trip.vehicle)], ctx.net
            )
            for rid in trip.requests
        ]
        shares = _split_proportional(total_price, standalone, list(trip.requests))
        for rid, share in zip(trip.requests, shares):
            seller = ctx.registry[rid].platform
            if seller == buyer:
                continue
            trades.append(
                TradeRecord(
                    epoch=epoch,
                    request=rid,
                    seller=seller,
                    buyer=buyer,
                    info_price=share,
                )
            )
    return trades, assignment


@dataclass
class TradingState:
    """One platform's view during a bilateral round: full fleet, leftovers."""

    id: str
    vehicles: list[Vehicle]
    unsatisfied: list[Request]


def bilateral_trading_round(
    states: list[TradingState],
    gamma: float,
    rng: np.random.Generator,
    ctx: MatchingContext,
    epoch: int = 0,
) -> list[TradeRecord]:
    """One round of pairwise trading over every unordered platform pair.

    Pairs and the requests within each pair are visited in seeded random
    order.  The prospective buyer values a request against its whole
    fleet, committed vehicles included; any positive marginal profit
    triggers the trade at price gamma times that profit.  A request trades
    at most once per episode.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidGammaError(f"gamma must lie in [0, 1], got {gamma}")
    ordered = sorted(states, key=lambda s: s.id)
    pairs = list(itertools.combinations(range(len(ordered)), 2))
    trades: list[TradeRecord] = []
    for pair_idx in rng.permutation(len(pairs)):
        left, right = (ordered[k] for k in pairs[pair_idx])
        candidates = sorted(
            left.unsatisfied + right.unsatisfied, key=lambda r: r.id
        )
        for req_idx in rng.permutation(len(candidates)):
            request = candidates[req_idx]
            if request.traded or request.state != "waiting":
                continue
            if request.platform == left.id:
                seller, buyer = left, right
            elif request.platform == right.id:
                seller, buyer = right, left
            else:
                continue  # traded away by an earlier pair
            base = optimal_profit(buyer.vehicles, buyer.unsatisfied, ctx)
            extended = optimal_profit(
                buyer.vehicles, buyer.unsatisfied + [request], ctx
            )
            profit = extended - base
            if profit <= 0:
                continue
            request.platform = buyer.id
            request.traded = True
            seller.unsatisfied.remove(request)
            buyer.unsatisfied.append(request)
            trades.append(
                TradeRecord(
                    epoch=epoch,
                    request=request.id,
                    seller=seller.id,
                    buyer=buyer.id,
                    info_price=round(gamma * profit),
                )
            )
    return trades
