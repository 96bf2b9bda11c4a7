"""Run the same demand under all six market structures and compare.

Two platforms share a city; platform A attracts most of the demand but
holds only a third of the fleet.  Pooling and trading both relieve the
imbalance, each with a different footprint in miles, service rate and
money flows.
"""
import numpy as np

from ridemarket import (
    Constraints,
    MarketStructure,
    PlatformSpec,
    PricingScheme,
    Request,
    Scenario,
    STRUCTURE_KINDS,
    make_grid,
    run,
    to_dollars,
)


def build_scenario(net, kind: str) -> Scenario:
    rng = np.random.default_rng(42)
    nodes = sorted(net.node_set())
    requests = []
    for i in range(40):
        o, d = rng.choice(nodes, size=2, replace=False)
        requests.append(Request(
            id=f"r{i:02d}", origin=o, destination=d,
            request_time=float(rng.integers(0, 1200)),
            platform="A" if i % 10 < 7 else "B"))
    alliance = frozenset({"A", "B"}) if kind == "cooperative" else frozenset()
    return Scenario(
        net=net,
        requests=requests,
        platforms=[PlatformSpec("A", 4), PlatformSpec("B", 8)],
        structure=MarketStructure(kind=kind, alliance=alliance),
        constraints=Constraints(),
        pricing=PricingScheme(),
        seed=7,
        horizon_s=1200.0,
        objective="min_vmt_penalty",
        name="comparison",
        compute_allocations=False,
    )


def main() -> None:
    net = make_grid(6, 6, edge_len=400.0, speed=8.0)
    header = (f"{'structure':<12s} {'served':>6s} {'unsat%':>6s} {'vmt mi':>7s} "
              f"{'trips':>5s} {'trades':>6s} {'profit $':>9s} {'broker $':>9s}")
    print(header)
    print("-" * len(header))
    for kind in sorted(STRUCTURE_KINDS):
        m = run(build_scenario(net, kind))
        print(f"{kind:<12s} {m.served:>6d} {m.pct_unsatisfied:>6.1f} "
              f"{m.total_vmt_miles:>7.2f} {m.total_trips:>5d} {m.n_trades:>6d} "
              f"{to_dollars(m.total_profit):>9.2f} {to_dollars(m.broker_balance):>9.2f}")

    print("\nper-platform view under segmented vs bilateral trading:")
    for kind in ("segmented", "bilateral"):
        m = run(build_scenario(net, kind))
        for pid in sorted(m.per_platform):
            p = m.per_platform[pid]
            print(f"  {kind:<10s} {pid}: trips {p.trips:>2d}, "
                  f"vehicles used {p.vehicles_used}, "
                  f"profit {to_dollars(p.profit):>7.2f}, "
                  f"info paid {to_dollars(p.info_paid):.2f}, "
                  f"info received {to_dollars(p.info_received):.2f}")


if __name__ == "__main__":
    main()
