"""File formats: scenario bundles, request tables, results, games, logs.

A scenario is a JSON document pointing at a request CSV; paths inside the
document resolve relative to the document's directory.  Parsing is
strict: unknown keys are rejected rather than ignored, so a misspelled
parameter ("gama") fails loudly instead of silently running defaults.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .engine import EpisodeMetrics, PlatformMetrics, PlatformSpec, Scenario
from .errors import (
    OutputError,
    ScenarioParseError,
    UnknownKeyError,
    ValidationError,
)
from .mechanisms import AuctionAward, CoalitionGame, TradeRecord
from .model import PricingScheme, Request, dollars, to_dollars
from .network import RoadNetwork, load_network, make_grid
from .rtv import Constraints, MarketStructure

REQUEST_HEADER = ["id", "request_time_s", "origin_node", "dest_node", "platform"]

_TOP_KEYS = {
    "name", "seed", "horizon_s", "objective", "network", "requests",
    "platforms", "structure", "constraints", "pricing", "allocations",
}
_GRID_KEYS = {"rows", "cols", "edge_len_m", "speed_mps"}
_FILE_NET_KEYS = {"path", "speed_mps"}
_PLATFORM_KEYS = {"id", "fleet", "positions"}
_STRUCTURE_KEYS = {"kind", "alliance"}
_CONSTRAINT_KEYS = {
    "detour_factor", "max_wait_s", "max_pickup_s",
    "unserved_penalty", "gamma", "interval_s",
}
_PRICING_KEYS = {
    "ded_base", "ded_per_mile", "ded_per_min", "ded_min_fare",
    "shr_base", "shr_per_mile", "shr_per_min", "shr_min_fare",
    "pay_per_mile", "pay_per_min",
}
_GAME_KEYS = {"players", "v", "costs", "revenues"}


def _check_keys(obj: Mapping, allowed: set, where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ValidationError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise UnknownKeyError(f"{where}: unknown key(s) {unknown}")


def _need(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise ValidationError(f"{where}: missing required key {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# requests
# ---------------------------------------------------------------------------

def load_requests(path: str | Path) -> list[Request]:
    """Read a request table; the platform column may be left blank."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read request file {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0] != REQUEST_HEADER:
        raise ScenarioParseError(
            f"{path}: first line must be {','.join(REQUEST_HEADER)}"
        )
    requests = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(REQUEST_HEADER):
            raise ScenarioParseError(
                f"{path}:{lineno}: expected {len(REQUEST_HEADER)} fields, got {len(row)}"
            )
        rid, time_s, origin, dest, platform = (f.strip() for f in row)
        if not rid:
            raise ScenarioParseError(f"{path}:{lineno}: empty request id")
        try:
            when = float(time_s)
        except ValueError:
            raise ScenarioParseError(
                f"{path}:{lineno}: bad request time {time_s!r}"
            ) from None
        try:
            requests.append(
                Request(
                    id=rid, origin=origin, destination=dest,
                    request_time=when, platform=platform,
                )
            )
        except Exception as exc:
            raise ScenarioParseError(f"{path}:{lineno}: {exc}") from exc
    return requests


def write_requests(requests: list[Request], path: str | Path) -> None:
    lines = [",".join(REQUEST_HEADER)]
    for r in sorted(requests, key=lambda r: (r.request_time, r.id)):
        time_s = f"{r.request_time:g}"
        lines.append(f"{r.id},{time_s},{r.origin},{r.destination},{r.platform}")
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scenario documents
# ---------------------------------------------------------------------------

def _load_net(doc, base: Path) -> RoadNetwork:
    if "grid" in (doc or {}):
        _check_keys(doc, {"grid"}, "network")
        grid = doc["grid"]
        _check_keys(grid, _GRID_KEYS, "network.grid")
        return make_grid(
            rows=int(_need(grid, "rows", "network.grid")),
            cols=int(_need(grid, "cols", "network.grid")),
            edge_len=float(grid.get("edge_len_m", 200.0)),
            speed=float(grid.get("speed_mps", 10.0)),
        )
    _check_keys(doc, _FILE_NET_KEYS, "network")
    rel = _need(doc, "path", "network")
    return load_network(base / rel, speed=float(doc.get("speed_mps", 10.0)))


def load_scenario(path: str | Path) -> Scenario:
    """Parse a scenario document and its request table into a Scenario."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON: {exc}") from exc
    _check_keys(doc, _TOP_KEYS, "scenario")
    base = path.parent

    net = _load_net(_need(doc, "network", "scenario"), base)

    req_ref = _need(doc, "requests", "scenario")
    if not isinstance(req_ref, str):
        raise ValidationError("scenario.requests: expected a CSV path")
    requests = load_requests(base / req_ref)

    platforms = []
    for i, spec in enumerate(_need(doc, "platforms", "scenario")):
        where = f"platforms[{i}]"
        _check_keys(spec, _PLATFORM_KEYS, where)
        positions = spec.get("positions")
        platforms.append(
            PlatformSpec(
                id=str(_need(spec, "id", where)),
                fleet=int(_need(spec, "fleet", where)),
                positions=tuple(str(n) for n in positions) if positions else None,
            )
        )

    structure = MarketStructure("single")
    if "structure" in doc:
        _check_keys(doc["structure"], _STRUCTURE_KEYS, "structure")
        alliance = doc["structure"].get("alliance")
        try:
            structure = MarketStructure(
                kind=str(_need(doc["structure"], "kind", "structure")),
                alliance=frozenset(str(p) for p in alliance) if alliance else None,
            )
        except ValueError as exc:
            raise ValidationError(f"structure: {exc}") from exc

    kwargs = {}
    if "constraints" in doc:
        _check_keys(doc["constraints"], _CONSTRAINT_KEYS, "constraints")
        kwargs = {k: float(v) for k, v in doc["constraints"].items()}
    try:
        constraints = Constraints(**kwargs)
    except ValueError as exc:
        raise ValidationError(f"constraints: {exc}") from exc

    pricing = PricingScheme()
    if "pricing" in doc:
        _check_keys(doc["pricing"], _PRICING_KEYS, "pricing")
        try:
            pricing = PricingScheme.from_dollars(
                **{k: float(v) for k, v in doc["pricing"].items()}
            )
        except Exception as exc:
            raise ValidationError(f"pricing: {exc}") from exc

    return Scenario(
        net=net,
        requests=requests,
        platforms=platforms,
        structure=structure,
        constraints=constraints,
        pricing=pricing,
        seed=int(doc.get("seed", 0)),
        horizon_s=float(doc.get("horizon_s", 0.0)),
        objective=str(doc.get("objective", "min_delay_penalty")),
        name=str(doc.get("name", path.stem)),
        compute_allocations=bool(doc.get("allocations", True)),
    )


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

def _trade_dict(t: TradeRecord) -> dict:
    return {
        "epoch": t.epoch, "request": t.request, "seller": t.seller,
        "buyer": t.buyer, "info_price": to_dollars(t.info_price),
    }


def _award_dict(a: AuctionAward) -> dict:
    return {
        "epoch": a.epoch, "request": a.request,
        "platform": a.platform, "payment": to_dollars(a.payment),
    }


def metrics_to_dict(m: EpisodeMetrics) -> dict:
    """JSON-ready view of one episode; money rendered in dollars."""
    return {
        "scenario": m.scenario,
        "structure": m.structure,
        "objective": m.objective,
        "seed": m.seed,
        "n_requests": m.n_requests,
        "served": m.served,
        "expired": m.expired,
        "total_vmt_miles": m.total_vmt_miles,
        "pct_unsatisfied": m.pct_unsatisfied,
        "avg_wait_s": m.avg_wait_s,
        "total_trips": m.total_trips,
        "n_trades": m.n_trades,
        "total_fares": to_dollars(m.total_fares),
        "total_driver_pay": to_dollars(m.total_driver_pay),
        "total_profit": to_dollars(m.total_profit),
        "broker_balance": to_dollars(m.broker_balance),
        "platforms": {
            pid: {
                "revenue": to_dollars(p.revenue),
                "driver_cost": to_dollars(p.driver_cost),
                "info_paid": to_dollars(p.info_paid),
                "info_received": to_dollars(p.info_received),
                "profit": to_dollars(p.profit),
                "trips": p.trips,
                "vehicles_used": p.vehicles_used,
                "contributed_fares": to_dollars(p.contributed_fares),
            }
            for pid, p in sorted(m.per_platform.items())
        },
        "trades": [_trade_dict(t) for t in m.trade_log],
        "auctions": [_award_dict(a) for a in m.auction_log],
        "allocations": m.allocations,
        "coalition_values": (
            {k: to_dollars(v) for k, v in sorted(m.coalition_values.items())}
            if m.coalition_values is not None else None
        ),
    }


def metrics_from_dict(doc: Mapping) -> EpisodeMetrics:
    """Inverse of metrics_to_dict, restoring fixed-point money."""
    platforms = {
        pid: PlatformMetrics(
            revenue=dollars(p["revenue"]),
            driver_cost=dollars(p["driver_cost"]),
            info_paid=dollars(p["info_paid"]),
            info_received=dollars(p["info_received"]),
            trips=int(p["trips"]),
            vehicles_used=int(p["vehicles_used"]),
            contributed_fares=dollars(p["contributed_fares"]),
        )
        for pid, p in doc["platforms"].items()
    }
    trades = [
        TradeRecord(
            epoch=int(t["epoch"]), request=t["request"], seller=t["seller"],
            buyer=t["buyer"], info_price=dollars(t["info_price"]),
        )
        for t in doc.get("trades", [])
    ]
    awards = [
        AuctionAward(
            epoch=int(a["epoch"]), request=a["request"],
            platform=a["platform"], payment=dollars(a["payment"]),
        )
        for a in doc.get("auctions", [])
    ]
    values = doc.get("coalition_values")
    return EpisodeMetrics(
        scenario=doc["scenario"],
        structure=doc["structure"],
        objective=doc["objective"],
        seed=int(doc["seed"]),
        n_requests=int(doc["n_requests"]),
        served=int(doc["served"]),
        expired=int(doc["expired"]),
        total_vmt_miles=float(doc["total_vmt_miles"]),
        pct_unsatisfied=float(doc["pct_unsatisfied"]),
        avg_wait_s=float(doc["avg_wait_s"]),
        total_trips=int(doc["total_trips"]),
        n_trades=int(doc["n_trades"]),
        total_fares=dollars(doc["total_fares"]),
        total_driver_pay=dollars(doc["total_driver_pay"]),
        total_profit=dollars(doc["total_profit"]),
        broker_balance=dollars(doc["broker_balance"]),
        per_platform=platforms,
        trade_log=trades,
        auction_log=awards,
        allocations=doc.get("allocations"),
        coalition_values=(
            {k: dollars(v) for k, v in values.items()} if values is not None else None
        ),
    )


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_results(
    results: EpisodeMetrics | list[EpisodeMetrics],
    path: str | Path,
    fmt: str = "json",
) -> None:
    """Persist episode metrics as JSON (round-trippable) or summary CSV."""
    many = results if isinstance(results, list) else [results]
    if fmt == "json":
        payload = [metrics_to_dict(m) for m in many]
        doc = payload if isinstance(results, list) else payload[0]
        _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        _write_text(path, _results_csv(many))
    else:
        raise OutputError(f"unknown results format {fmt!r}")


def _results_csv(many: list[EpisodeMetrics]) -> str:
    pids = sorted({pid for m in many for pid in m.per_platform})
    header = [
        "scenario", "structure", "objective", "seed", "n_requests", "served",
        "expired", "total_vmt_miles", "pct_unsatisfied", "avg_wait_s",
        "total_trips", "n_trades", "total_fares", "total_driver_pay",
        "total_profit", "broker_balance",
    ] + [f"profit:{pid}" for pid in pids]
    lines = [",".join(header)]
    for m in many:
        row = [
            m.scenario, m.structure, m.objective, str(m.seed),
            str(m.n_requests), str(m.served), str(m.expired),
            f"{m.total_vmt_miles:.6f}", f"{m.pct_unsatisfied:.4f}",
            f"{m.avg_wait_s:.4f}", str(m.total_trips), str(m.n_trades),
            f"{to_dollars(m.total_fares):.4f}",
            f"{to_dollars(m.total_driver_pay):.4f}",
            f"{to_dollars(m.total_profit):.4f}",
            f"{to_dollars(m.broker_balance):.4f}",
        ]
        for pid in pids:
            p = m.per_platform.get(pid)
            row.append(f"{to_dollars(p.profit):.4f}" if p else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def read_results(path: str | Path) -> EpisodeMetrics | list[EpisodeMetrics]:
    """Read back JSON results written by write_results."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioParseError(f"cannot read results {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(doc, list):
        return [metrics_from_dict(d) for d in doc]
    return metrics_from_dict(doc)


def write_trade_log(trades: list[TradeRecord], path: str | Path) -> None:
    """Trade log CSV with one row per executed trade."""
    lines = ["epoch,request,seller,buyer,info_price"]
    for t in trades:
        lines.append(
            f"{t.epoch},{t.request},{t.seller},{t.buyer},{to_dollars(t.info_price):.4f}"
        )
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# coalition game files
# ---------------------------------------------------------------------------

def _coalition_key(players) -> str:
    return ",".join(sorted(players))


def read_game(path: str | Path) -> tuple[CoalitionGame, dict | None, dict | None]:
    """Read a characteristic-function file, plus optional costs/revenues."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioParseError(f"cannot read game {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON: {exc}") from exc
    _check_keys(doc, _GAME_KEYS, "game")
    players = [str(p) for p in _need(doc, "players", "game")]
    raw = _need(doc, "v", "game")
    values = {}
    for key, val in raw.items():
        members = [p.strip() for p in key.split(",") if p.strip()]
        if key != _coalition_key(members):
            raise ValidationError(
                f"game.v: key {key!r} must list members sorted and comma-joined"
            )
        values[frozenset(members)] = float(val)
    try:
        game = CoalitionGame(players=tuple(players), values=values)
    except Exception as exc:
        raise ValidationError(f"game: {exc}") from exc

    def _table(name):
        if name not in doc:
            return None
        table = {str(k): float(v) for k, v in doc[name].items()}
        if set(table) != set(players):
            raise ValidationError(f"game.{name}: must cover exactly the players")
        return table

    return game, _table("costs"), _table("revenues")


def write_game(
    game: CoalitionGame,
    path: str | Path,
    costs: Mapping[str, float] | None = None,
    revenues: Mapping[str, float] | None = None,
) -> None:
    doc = {
        "players": sorted(game.players),
        "v": {
            _coalition_key(k): float(v)
            for k, v in sorted(game.values.items(), key=lambda kv: _coalition_key(kv[0]))
        },
    }
    if costs is not None:
        doc["costs"] = {k: float(v) for k, v in sorted(costs.items())}
    if revenues is not None:
        doc["revenues"] = {k: float(v) for k, v in sorted(revenues.items())}
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# scenario generation
# ---------------------------------------------------------------------------

def gen_scenario(
    out_dir: str | Path,
    *,
    rows: int = 6,
    cols: int = 6,
    edge_len_m: float = 200.0,
    speed_mps: float = 10.0,
    n_requests: int = 20,
    n_platforms: int = 2,
    fleet: int = 3,
    horizon_s: float = 600.0,
    seed: int = 0,
    structure: str = "segmented",
    name: str | None = None,
) -> Path:
    """Write a random grid scenario bundle and return the document path.

    Origins and destinations are distinct uniform nodes; request times are
    uniform integer seconds in [0, horizon].  The platform column is left
    blank so episode seeding controls the demand split.
    """
    if n_requests < 1:
        raise ValidationError("need at least one request")
    if not 1 <= n_platforms <= 26:
        raise ValidationError("platform count must be in 1..26")
    if horizon_s <= 0:
        raise ValidationError("horizon must be positive")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    net = make_grid(rows, cols, edge_len=edge_len_m, speed=speed_mps)
    rng = np.random.default_rng(seed)
    width = len(str(max(n_requests - 1, 0)))
    requests = []
    for i in range(n_requests):
        origin = net.nodes[int(rng.integers(len(net.nodes)))]
        dest = origin
        while dest == origin:
            dest = net.nodes[int(rng.integers(len(net.nodes)))]
        when = float(rng.integers(0, int(horizon_s) + 1))
        requests.append(
            Request(
                id=f"r{i:0{width}d}", origin=origin, destination=dest,
                request_time=when, platform="",
            )
        )
    write_requests(requests, out / "requests.csv")
    doc = {
        "name": name or out.name,
        "seed": seed,
        "horizon_s": horizon_s,
        "network": {
            "grid": {
                "rows": rows, "cols": cols,
                "edge_len_m": edge_len_m, "speed_mps": speed_mps,
            }
        },
        "requests": "requests.csv",
        "platforms": [
            {"id": chr(ord("A") + k), "fleet": fleet} for k in range(n_platforms)
        ],
        "structure": {"kind": structure},
    }
    path = out / "scenario.json"
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
