"""Split the profit of a platform alliance with cooperative game tools.

Runs a cooperative episode, rebuilds the coalition value table by
re-simulating every sub-coalition, and compares three allocation rules:
the Shapley value, the equal-relative-profit core allocation, and the
weighted-contribution core allocation.  Ends with a classic three-player
game where complementary goods make one player capture most of the value.
"""
from fractions import Fraction

import numpy as np

from ridemarket import (
    CoalitionGame,
    Constraints,
    MarketStructure,
    PlatformSpec,
    PricingScheme,
    Request,
    Scenario,
    build_coalition_game,
    contribution_allocate,
    contribution_weights,
    epm_allocate,
    in_core,
    make_grid,
    run,
    shapley,
    to_dollars,
)


def build_scenario(net) -> Scenario:
    rng = np.random.default_rng(11)
    nodes = sorted(net.node_set())
    requests = []
    for i in range(30):
        o, d = rng.choice(nodes, size=2, replace=False)
        requests.append(Request(
            id=f"r{i:02d}", origin=o, destination=d,
            request_time=float(rng.integers(0, 900)),
            platform=["A", "B", "C"][i % 3]))
    return Scenario(
        net=net,
        requests=requests,
        platforms=[PlatformSpec("A", 3), PlatformSpec("B", 3), PlatformSpec("C", 2)],
        structure=MarketStructure(kind="cooperative", alliance=frozenset("ABC")),
        constraints=Constraints(),
        pricing=PricingScheme(),
        seed=3,
        horizon_s=900.0,
        name="alliance",
        compute_allocations=False,
    )


def show(label: str, amounts: dict) -> None:
    parts = ", ".join(f"{p}={float(amounts[p]):.2f}" for p in sorted(amounts))
    print(f"  {label:<24s} {parts}")


def main() -> None:
    net = make_grid(6, 6, edge_len=400.0, speed=8.0)
    scenario = build_scenario(net)
    metrics = run(scenario)
    print(f"alliance episode: served {metrics.served}/{metrics.n_requests}, "
          f"joint profit {to_dollars(metrics.total_profit):.2f}")

    game = build_coalition_game(scenario)
    print("\ncoalition values (dollars):")
    for coalition in sorted(game.values, key=lambda s: (len(s), sorted(s))):
        print(f"  v({','.join(sorted(coalition))}) = {game.values[coalition] / 1000:.2f}")

    dollars_game = CoalitionGame(
        players=game.players,
        values={s: v / 1000 for s, v in game.values.items()})

    print("\nallocations:")
    phi = shapley(dollars_game)
    show("Shapley", phi.amounts)
    print(f"    in core: {in_core(dollars_game, phi)}")

    epm = epm_allocate(dollars_game)
    if epm is None:
        print("  equal-relative-profit: core is empty")
    else:
        alloc, alpha = epm
        show(f"equal relative (a={alpha:.4f})", alloc.amounts)

    singles = {p: dollars_game.value([p]) for p in dollars_game.players}
    weights = contribution_weights(
        costs={p: max(singles[p], 1.0) for p in dollars_game.players},
        revenues={p: 2 * max(singles[p], 1.0) for p in dollars_game.players})
    contrib = contribution_allocate(dollars_game, weights)
    if contrib is None:
        print("  weighted contribution: core is empty")
    else:
        alloc, beta = contrib
        show(f"contribution (b={beta:.4f})", alloc.amounts)

    print("\nglove market: one left glove meets two right gloves")
    gloves = CoalitionGame(players=("L", "R1", "R2"), values={
        frozenset({"L"}): 0.0, frozenset({"R1"}): 0.0, frozenset({"R2"}): 0.0,
        frozenset({"L", "R1"}): 1.0, frozenset({"L", "R2"}): 1.0,
        frozenset({"R1", "R2"}): 0.0, frozenset({"L", "R1", "R2"}): 1.0})
    phi = shapley(gloves)
    exact = {p: Fraction(v) for p, v in phi.amounts.items()}
    print(f"  Shapley: L={exact['L']}, R1={exact['R1']}, R2={exact['R2']}")
    print("  scarcity pays: the left glove holds two thirds of the surplus")


if __name__ == "__main__":
    main()
