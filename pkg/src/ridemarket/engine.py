"""Time-stepped market simulation: admission, matching, movement, billing.

An episode advances in fixed decision intervals.  Each epoch expires stale
requests, admits newly released ones, runs the market structure's
mechanism and matching stage, then moves every vehicle along its
committed route.  The loop continues past the demand horizon until all
requests are served or expired and every vehicle is idle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .errors import ValidationError
from .mechanisms import (
    Allocation,
    AuctionAward,
    CoalitionGame,
    MatchingContext,
    PlatformState,
    TradeRecord,
    TradingState,
    bilateral_trading_round,
    central_trading_epoch,
    contribution_allocate,
    contribution_weights,
    epm_allocate,
    in_core,
    marketplace_epoch,
    shapley,
    MAX_PLAYERS,
)
from .model import (
    ASSIGNED,
    EXPIRED,
    ONBOARD,
    PICKUP,
    SERVED,
    WAITING,
    PricingScheme,
    Request,
    Vehicle,
    driver_pay,
    miles,
    rider_fare,
    to_dollars,
)
from .network import RoadNetwork
from .rtv import (
    Constraints,
    MarketStructure,
    RouteCache,
    apply_market_structure,
    build_rtv_graph,
)
from .seeding import substream
from .solve import OBJECTIVES, Assignment, AssignmentProblem, solve_assignment

_EPS = 1e-9


@dataclass(frozen=True)
class PlatformSpec:
    """Fleet description for one platform; positions default to random."""

    id: str
    fleet: int
    positions: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.fleet < 0:
            raise ValidationError(f"platform {self.id}: negative fleet")
        if self.positions is not None:
            object.__setattr__(self, "positions", tuple(self.positions))
            if len(self.positions) != self.fleet:
                raise ValidationError(
                    f"platform {self.id}: {len(self.positions)} positions "
                    f"for fleet of {self.fleet}"
                )


@dataclass
class Scenario:
    """Everything needed to run one episode."""

    net: RoadNetwork
    requests: list[Request]
    platforms: list[PlatformSpec]
    structure: MarketStructure = field(default_factory=lambda: MarketStructure("single"))
    constraints: Constraints = field(default_factory=Constraints)
    pricing: PricingScheme = field(default_factory=PricingScheme)
    seed: int = 0
    horizon_s: float = 0.0
    objective: str = "min_delay_penalty"
    name: str = "scenario"
    compute_allocations: bool = True

    def __post_init__(self) -> None:
        ids = [p.id for p in self.platforms]
        if not ids:
            raise ValidationError("at least one platform is required")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate platform id")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"unknown objective {self.objective!r}")
        known = set(ids)
        rids = set()
        latest = 0.0
        for r in self.requests:
            if r.id in rids:
                raise ValidationError(f"duplicate request id {r.id!r}")
            rids.add(r.id)
            if r.platform and r.platform not in known:
                raise ValidationError(
                    f"request {r.id}: unknown platform {r.platform!r}"
                )
            for node in (r.origin, r.destination):
                if node not in self.net.node_set():
                    raise ValidationError(f"request {r.id}: unknown node {node!r}")
            latest = max(latest, r.request_time)
        if self.horizon_s <= 0:
            self.horizon_s = latest
        elif self.horizon_s + _EPS < latest:
            raise ValidationError("horizon ends before the last request arrives")
        if self.structure.alliance:
            stray = set(self.structure.alliance) - known
            if stray:
                raise ValidationError(f"alliance names unknown platforms {sorted(stray)}")
        for spec in self.platforms:
            for node in spec.positions or ():
                if node not in self.net.node_set():
                    raise ValidationError(
                        f"platform {spec.id}: unknown position {node!r}"
                    )


def resolve_scenario(scenario: Scenario) -> tuple[list[Request], list[Vehicle]]:
    """Materialize the episode's starting state from the scenario.

    Returns fresh request copies (with direct-trip values recomputed and
    untagged demand split round-robin after a seeded shuffle) and the
    initial fleet (explicit positions, or uniform draws from the placement
    stream, taken per platform in sorted id order).
    """
    net = scenario.net
    requests = [
        replace(
            r,
            direct_distance=net.distance(r.origin, r.destination),
            direct_duration=net.travel_time(r.origin, r.destination),
            state=WAITING,
            pickup_time=None,
            origin_platform=r.platform,
            assigned_vehicle=None,
            pickup_deadline=None,
            served_time=None,
            fare_paid=None,
            traded=False,
        )
        for r in sorted(scenario.requests, key=lambda r: r.id)
    ]
    pids = sorted(p.id for p in scenario.platforms)
    untagged = [r for r in requests if not r.platform]
    if untagged:
        rng = substream(scenario.seed, "demand_split")
        order = rng.permutation(len(untagged))
        for slot, idx in enumerate(order):
            pid = pids[slot % len(pids)]
            untagged[idx].platform = pid
            untagged[idx].origin_platform = pid
    requests.sort(key=lambda r: (r.request_time, r.id))

    rng = substream(scenario.seed, "placement")
    nodes = scenario.net.nodes
    vehicles: list[Vehicle] = []
    for spec in sorted(scenario.platforms, key=lambda p: p.id):
        if spec.positions is not None:
            positions = list(spec.positions)
        else:
            draws = rng.integers(0, len(nodes), size=spec.fleet)
            positions = [nodes[int(i)] for i in draws]
        for k, pos in enumerate(positions):
            vehicles.append(
                Vehicle(id=f"{spec.id}-{k:03d}", platform=spec.id, position=pos)
            )
    return requests, vehicles


@dataclass
class PlatformMetrics:
    """Per-platform episode totals; money in fixed point."""

    revenue: int = 0
    driver_cost: int = 0
    info_paid: int = 0
    info_received: int = 0
    trips: int = 0
    vehicles_used: int = 0
    contributed_fares: int = 0

    @property
    def profit(self) -> int:
        return self.revenue - self.driver_cost - self.info_paid + self.info_received


@dataclass
class EpisodeMetrics:
    """Episode outcome; money in fixed point, distances in miles."""

    scenario: str
    structure: str
    objective: str
    seed: int
    n_requests: int
    served: int
    expired: int
    total_vmt_miles: float
    pct_unsatisfied: float
    avg_wait_s: float
    total_trips: int
    n_trades: int
    total_fares: int
    total_driver_pay: int
    total_profit: int
    broker_balance: int
    per_platform: dict[str, PlatformMetrics]
    trade_log: list[TradeRecord] = field(default_factory=list)
    auction_log: list[AuctionAward] = field(default_factory=list)
    allocations: dict | None = None
    coalition_values: dict[str, int] | None = None


@dataclass
class _Run:
    """One continuous service run: idle to schedule-empty."""

    started: float
    distance: float = 0.0
    riders: set[str] = field(default_factory=set)


class _Simulation:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.net = scenario.net
        self.constraints = scenario.constraints
        self.scheme = scenario.pricing
        self.kind = scenario.structure.kind
        self.requests, self.vehicles = resolve_scenario(scenario)
        self.registry = {r.id: r for r in self.requests}
        self.veh_by_id = {v.id: v for v in self.vehicles}
        self.pids = sorted(p.id for p in scenario.platforms)
        self.ledgers = {pid: PlatformMetrics() for pid in self.pids}
        self.used_vehicles: dict[str, set[str]] = {pid: set() for pid in self.pids}
        self.runs: dict[str, _Run | None] = {v.id: None for v in self.vehicles}
        self.broker_pool: set[str] = set()
        self.broker_balance = 0
        self.trade_log: list[TradeRecord] = []
        self.auction_log: list[AuctionAward] = []
        self.auction_rng = substream(scenario.seed, "auction_order")
        self.trading_rng = substream(scenario.seed, "trading_order")
        self.admitted: list[Request] = []

    # -- lifecycle stages ---------------------------------------------------

    def _expire(self, now: float) -> None:
        limit = self.constraints.max_wait_s
        for r in self.admitted:
            if r.state == WAITING and now - r.request_time > limit + _EPS:
                r.set_state(EXPIRED)
                self.broker_pool.discard(r.id)

    def _admit(self, now: float, cursor: int) -> int:
        while (
            cursor < len(self.requests)
            and self.requests[cursor].request_time <= now + _EPS
        ):
            r = self.requests[cursor]
            self.admitted.append(r)
            if self.kind == "marketplace":
                self.broker_pool.add(r.id)
            cursor += 1
        return cursor

    def _solve(self, graph, objective: str | None = None) -> Assignment:
        return solve_assignment(
            AssignmentProblem(
                graph=graph,
                objective=objective or self.sc.objective,
                penalty=self.constraints.unserved_penalty,
                scheme=self.scheme,
                net=self.net,
            )
        )

    def _commit(self, assignment: Assignment, now: float) -> None:
        for trip in assignment.chosen:
            vehicle = self.veh_by_id[trip.vehicle]
            if self.runs[vehicle.id] is None:
                self.runs[vehicle.id] = _Run(started=now)
            vehicle.schedule = list(trip.route)
            for rid in trip.requests:
                req = self.registry[rid]
                req.set_state(ASSIGNED)
                req.assigned_vehicle = vehicle.id
                req.pickup_deadline = min(
                    req.request_time + self.constraints.max_wait_s,
                    now + self.constraints.max_pickup_s,
                )
                vehicle.assigned.add(rid)

    def _waiting(self) -> list[Request]:
        return sorted(
            (r for r in self.admitted if r.state == WAITING), key=lambda r: r.id
        )

    def _match(self, pool: list[Request], structure: MarketStructure, now: float,
               cache: RouteCache) -> Assignment | None:
        if not pool:
            return None
        graph = build_rtv_graph(
            pool, self.vehicles, self.net, now, self.constraints,
            cache=cache, registry=self.registry,
        )
        filtered = apply_market_structure(
            graph,
            structure,
            {r.id: r.platform for r in pool},
            {v.id: v.platform for v in self.vehicles},
        )
        assignment = self._solve(filtered)
        self._commit(assignment, now)
        return assignment

    def _stage(self, now: float, epoch: int) -> None:
        waiting = self._waiting()
        if not waiting:
            return
        cache: RouteCache = RouteCache()
        if self.kind in ("single", "segmented", "cooperative"):
            self._match(waiting, self.sc.structure, now, cache)
            return
        ctx = MatchingContext(
            net=self.net,
            constraints=self.constraints,
            scheme=self.scheme,
            now=now,
            registry=self.registry,
            route_cache=cache,
        )
        segmented = MarketStructure("segmented")
        if self.kind == "marketplace":
            pool = [r for r in waiting if r.id in self.broker_pool]
            states = [
                PlatformState(
                    id=pid,
                    vehicles=[v for v in self.vehicles if v.platform == pid],
                    pool=[
                        r for r in waiting
                        if r.id not in self.broker_pool and r.platform == pid
                    ],
                    ctx=ctx,
                )
                for pid in self.pids
            ]
            result = marketplace_epoch(
                pool, states, self.constraints.gamma, self.auction_rng, epoch
            )
            for award in result.awards:
                req = self.registry[award.request]
                req.platform = award.platform
                self.broker_pool.discard(req.id)
                self.ledgers[award.platform].info_paid += award.payment
                self.broker_balance += award.payment
            self.auction_log.extend(result.awards)
            owned = [r for r in self._waiting() if r.id not in self.broker_pool]
            self._match(owned, segmented, now, cache)
            return

        # trading structures: platform-local matching first
        self._match(waiting, segmented, now, cache)
        unsatisfied = [r for r in waiting if r.state == WAITING]
        if not unsatisfied:
            return
        if self.kind == "central":
            idle = [v for v in self.vehicles if v.idle]
            trades, assignment = central_trading_epoch(
                {pid: [r for r in unsatisfied if r.platform == pid]
                 for pid in self.pids},
                {pid: [v for v in idle if v.platform == pid] for pid in self.pids},
                self.constraints.gamma,
                ctx,
                epoch,
            )
            for trade in trades:
                self.ledgers[trade.buyer].info_paid += trade.info_price
                self.ledgers[trade.seller].info_received += trade.info_price
                req = self.registry[trade.request]
                req.platform = trade.buyer
                req.traded = True
            self.trade_log.extend(trades)
            self._commit(assignment, now)
        else:  # bilateral
            states = [
                TradingState(
                    id=pid,
                    vehicles=[v for v in self.vehicles if v.platform == pid],
                    unsatisfied=[r for r in unsatisfied if r.platform == pid],
                )
                for pid in self.pids
            ]
            trades = bilateral_trading_round(
                states, self.constraints.gamma, self.trading_rng, ctx, epoch
            )
            for trade in trades:
                self.ledgers[trade.buyer].info_paid += trade.info_price
                self.ledgers[trade.seller].info_received += trade.info_price
            self.trade_log.extend(trades)
            if trades:
                self._match(self._waiting(), segmented, now, cache)

    # -- movement and billing ----------------------------------------------

    def _execute_stop(self, vehicle: Vehicle, when: float) -> None:
        stop = vehicle.schedule.pop(0)
        req = self.registry[stop.request]
        run = self.runs[vehicle.id]
        if stop.kind == PICKUP:
            req.set_state(ONBOARD)
            req.pickup_time = when
            vehicle.assigned.discard(req.id)
            vehicle.onboard.add(req.id)
        else:
            req.set_state(SERVED)
            req.served_time = when
            vehicle.onboard.discard(req.id)
        run.riders.add(req.id)
        if not vehicle.schedule:
            self._finish_run(vehicle)

    def _finish_run(self, vehicle: Vehicle) -> None:
        run = self.runs[vehicle.id]
        self.runs[vehicle.id] = None
        cost = driver_pay(self.scheme, run.distance, run.distance / self.net.speed)
        ledger = self.ledgers[vehicle.platform]
        ledger.driver_cost += cost
        ledger.trips += 1
        self.used_vehicles[vehicle.platform].add(vehicle.id)
        shared = len(run.riders) >= 2
        for rid in sorted(run.riders):
            req = self.registry[rid]
            fare = rider_fare(
                self.scheme, shared, req.direct_distance, req.direct_duration
            )
            req.fare_paid = fare
            ledger.revenue += fare
            self.ledgers[req.origin_platform].contributed_fares += fare

    def _advance(self, now: float, dt: float) -> None:
        speed = self.net.speed
        for vehicle in self.vehicles:
            budget = speed * dt
            while vehicle.schedule:
                target = vehicle.schedule[0].node
                if vehicle.position == target:
                    self._execute_stop(vehicle, now + dt - budget / speed)
                    continue
                if budget <= _EPS:
                    break
                hop = self.net.path(vehicle.position, target)[1]
                leg = self.net.distance(vehicle.position, hop)
                vehicle.odometer += leg
                run = self.runs[vehicle.id]
                run.distance += leg
                vehicle.position = hop
                # An interval ending mid-edge snaps the vehicle to the
                # edge's head node; the full edge length still counts.
                budget = max(0.0, budget - leg) if leg <= budget + _EPS else 0.0

    # -- main loop ----------------------------------------------------------

    def run(self) -> EpisodeMetrics:
        dt = self.constraints.interval_s
        horizon = self.sc.horizon_s
        max_epochs = int((horizon + self.constraints.max_wait_s) / dt) + 10000
        now = 0.0
        cursor = 0
        for epoch in range(max_epochs):
            self._expire(now)
            cursor = self._admit(now, cursor)
            self._stage(now, epoch)
            drained = (
                cursor == len(self.requests)
                and all(r.state in (SERVED, EXPIRED) for r in self.requests)
                and all(v.idle for v in self.vehicles)
            )
            if drained:
                break
            self._advance(now, dt)
            now += dt
        else:
            raise RuntimeError("simulation failed to drain; check the scenario")
        return self._metrics()

    def _metrics(self) -> EpisodeMetrics:
        for pid in self.pids:
            self.ledgers[pid].vehicles_used = len(self.used_vehicles[pid])
        served = [r for r in self.requests if r.state == SERVED]
        expired = sum(1 for r in self.requests if r.state == EXPIRED)
        waits = [r.pickup_time - r.request_time for r in served]
        n = len(self.requests)
        return EpisodeMetrics(
            scenario=self.sc.name,
            structure=self.kind,
            objective=self.sc.objective,
            seed=self.sc.seed,
            n_requests=n,
            served=len(served),
            expired=expired,
            total_vmt_miles=miles(sum(v.odometer for v in self.vehicles)),
            pct_unsatisfied=100.0 * expired / n if n else 0.0,
            avg_wait_s=sum(waits) / len(waits) if waits else 0.0,
            total_trips=sum(l.trips for l in self.ledgers.values()),
            n_trades=len(self.trade_log),
            total_fares=sum(l.revenue for l in self.ledgers.values()),
            total_driver_pay=sum(l.driver_cost for l in self.ledgers.values()),
            total_profit=sum(l.profit for l in self.ledgers.values()),
            broker_balance=self.broker_balance,
            per_platform=dict(self.ledgers),
            trade_log=list(self.trade_log),
            auction_log=list(self.auction_log),
        )


@dataclass
class EpisodeState:
    """Metrics of a finished episode plus the final entity states.

    ``requests`` and ``vehicles`` are keyed by id and reflect the state at
    the end of the horizon, so callers can audit individual outcomes (who
    served a traded request, where each vehicle ended up) beyond the
    aggregate metrics.
    """

    metrics: EpisodeMetrics
    requests: dict[str, Request]
    vehicles: dict[str, Vehicle]


def run_detailed(scenario: Scenario) -> EpisodeState:
    """Simulate one episode and return metrics with final entity states."""
    sim = _Simulation(scenario)
    metrics = sim.run()
    if scenario.structure.kind == "cooperative" and scenario.compute_allocations:
        _attach_allocations(scenario, metrics)
    return EpisodeState(metrics=metrics, requests=sim.registry, vehicles=sim.veh_by_id)


def run(scenario: Scenario) -> EpisodeMetrics:
    """Simulate one episode and return its metrics.

    The scenario is not mutated; repeated runs with the same seed produce
    identical results.  Cooperative scenarios also carry profit
    allocations unless ``compute_allocations`` is off.
    """
    return run_detailed(scenario).metrics


def characteristic_value(scenario: Scenario, coalition) -> int:
    """Joint profit (fixed point) of the coalition operating alone.

    The coalition's fleets and customers are lifted out of the full
    scenario, keeping the resolved vehicle placements and demand split,
    and re-simulated as a single pooled market.
    """
    members = sorted(set(coalition))
    known = {p.id for p in scenario.platforms}
    if not members:
        raise ValidationError("coalition must be non-empty")
    stray = set(members) - known
    if stray:
        raise ValidationError(f"coalition names unknown platforms {sorted(stray)}")
    requests, vehicles = resolve_scenario(scenario)
    specs = []
    for pid in members:
        positions = tuple(v.position for v in vehicles if v.platform == pid)
        specs.append(PlatformSpec(id=pid, fleet=len(positions), positions=positions))
    sub = Scenario(
        net=scenario.net,
        requests=[r for r in requests if r.platform in set(members)],
        platforms=specs,
        structure=MarketStructure("single"),
        constraints=scenario.constraints,
        pricing=scenario.pricing,
        seed=scenario.seed,
        horizon_s=scenario.horizon_s,
        objective=scenario.objective,
        name=f"{scenario.name}:{'+'.join(members)}",
        compute_allocations=False,
    )
    metrics = run(sub)
    return metrics.total_fares - metrics.total_driver_pay


def build_coalition_game(scenario: Scenario) -> CoalitionGame:
    """Characteristic function over the alliance via re-simulation."""
    members = sorted(
        scenario.structure.alliance or {p.id for p in scenario.platforms}
    )
    if len(members) > MAX_PLAYERS:
        raise ValidationError(f"alliance larger than {MAX_PLAYERS} platforms")
    values = {}
    for size in range(1, len(members) + 1):
        for combo in itertools.combinations(members, size):
            values[frozenset(combo)] = characteristic_value(scenario, combo)
    return CoalitionGame(players=tuple(members), values=values)


def _allocation_dollars(allocation: Allocation) -> dict[str, float]:
    return {p: to_dollars(round(float(v), 6)) for p, v in allocation.amounts.items()}


def _attach_allocations(scenario: Scenario, metrics: EpisodeMetrics) -> None:
    game = build_coalition_game(scenario)
    metrics.coalition_values = {
        ",".join(sorted(k)): v for k, v in game.values.items()
    }
    shap = shapley(game)
    allocations: dict = {
        "shapley": _allocation_dollars(shap),
        "shapley_in_core": in_core(game, shap),
    }
    try:
        outcome = epm_allocate(game)
    except Exception as exc:
        allocations["epm"] = {"status": "undefined", "reason": str(exc)}
    else:
        if outcome is None:
            allocations["epm"] = {"status": "core_empty"}
        else:
            alloc, alpha = outcome
            allocations["epm"] = {
                "status": "ok",
                "amounts": _allocation_dollars(alloc),
                "alpha": alpha,
            }
    try:
        weights = contribution_weights(
            {p: float(metrics.per_platform[p].driver_cost) for p in game.players},
            {p: float(metrics.per_platform[p].contributed_fares) for p in game.players},
        )
        outcome = contribution_allocate(game, weights)
    except Exception as exc:
        allocations["contribution"] = {"status": "undefined", "reason": str(exc)}
    else:
        if outcome is None:
            allocations["contribution"] = {"status": "core_empty"}
        else:
            alloc, beta = outcome
            allocations["contribution"] = {
                "status": "ok",
                "amounts": _allocation_dollars(alloc),
                "beta": beta,
                "weights": weights,
            }
    metrics.allocations = allocations
