"""Follow requests as they change hands between platforms.

A starved platform holds demand it cannot serve.  Bilateral trading lets
platform pairs sell requests at a fraction of the buyer's service profit;
central trading routes every transfer through a broker who nets zero; the
open marketplace auctions each unassigned request to the platform that
values it most, with the broker keeping the discounted second price.
"""
import numpy as np

from ridemarket import (
    Bid,
    Constraints,
    MarketStructure,
    PlatformSpec,
    PricingScheme,
    Request,
    Scenario,
    make_grid,
    run,
    run_single_item_auction,
    to_dollars,
)


def build_scenario(net, kind: str) -> Scenario:
    rng = np.random.default_rng(19)
    nodes = sorted(net.node_set())
    requests = []
    for i in range(24):
        o, d = rng.choice(nodes, size=2, replace=False)
        requests.append(Request(
            id=f"r{i:02d}", origin=o, destination=d,
            request_time=float(rng.integers(0, 600)),
            platform="A" if i % 4 < 3 else "B"))
    return Scenario(
        net=net,
        requests=requests,
        platforms=[PlatformSpec("A", 2), PlatformSpec("B", 5)],
        structure=MarketStructure(kind=kind),
        constraints=Constraints(),
        pricing=PricingScheme(),
        seed=2,
        horizon_s=600.0,
        name="trading",
        compute_allocations=False,
    )


def main() -> None:
    net = make_grid(6, 6, edge_len=400.0, speed=8.0)

    print("platform A holds 3/4 of the demand with 2 of 7 vehicles\n")
    for kind in ("segmented", "bilateral", "central", "marketplace"):
        m = run(build_scenario(net, kind))
        print(f"{kind}: served {m.served}/{m.n_requests}, "
              f"trades {m.n_trades}, auctions {len(m.auction_log)}, "
              f"broker {to_dollars(m.broker_balance):.2f}")
        for t in m.trade_log:
            print(f"  epoch {t.epoch}: {t.seller} sells {t.request} to {t.buyer} "
                  f"for {to_dollars(t.info_price):.2f}")
        for a in m.auction_log:
            print(f"  epoch {a.epoch}: {a.platform} wins {a.request} "
                  f"paying {to_dollars(a.payment):.2f}")
        print()

    print("sealed-bid auction mechanics (gamma = 0.1):")
    bids = [Bid("A", 5000), Bid("B", 3000), Bid("C", 4400)]
    outcome = run_single_item_auction(bids, gamma=0.1)
    quoted = ", ".join(f"{b.platform}={to_dollars(b.amount):.2f}" for b in bids)
    print(f"  bids {quoted}")
    print(f"  winner {outcome.winner} pays {to_dollars(outcome.payment):.2f} "
          f"(a tenth of the runner-up bid)")
    print(f"  no sale when nobody values the item: "
          f"{run_single_item_auction([Bid('A', 0), Bid('B', 0)], 0.1)}")


if __name__ == "__main__":
    main()
