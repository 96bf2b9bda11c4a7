"""Command-line interface: subcommands, seeding precedence, exit codes."""
import json

import pytest

from ridemarket.cli import SEED_ENV, main
from ridemarket.io import gen_scenario, read_results
from ridemarket.mechanisms import CoalitionGame
from ridemarket.io import write_game


@pytest.fixture()
def bundle(tmp_path):
    return gen_scenario(tmp_path / "demo", n_requests=8, n_platforms=2,
                        fleet=2, seed=5, structure="segmented")


def test_simulate_to_stdout(bundle, capsys):
    assert main(["simulate", "--scenario", str(bundle)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["structure"] == "segmented"
    assert doc["n_requests"] == 8


def test_simulate_to_file_with_structure_override(bundle, tmp_path):
    out = tmp_path / "res.json"
    rc = main(["simulate", "--scenario", str(bundle), "--structure", "central",
               "--out", str(out)])
    assert rc == 0
    m = read_results(out)
    assert m.structure == "central"


def test_simulate_writes_trade_log(bundle, tmp_path):
    log = tmp_path / "trades.csv"
    rc = main(["simulate", "--scenario", str(bundle), "--structure", "bilateral",
               "--trade-log", str(log)])
    assert rc == 0
    assert log.read_text().splitlines()[0] == "epoch,request,seller,buyer,info_price"


def test_seed_precedence_flag_beats_env(bundle, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "111")
    assert main(["simulate", "--scenario", str(bundle), "--seed", "222"]) == 0
    by_flag = json.loads(capsys.readouterr().out)
    assert by_flag["seed"] == 222
    assert main(["simulate", "--scenario", str(bundle)]) == 0
    by_env = json.loads(capsys.readouterr().out)
    assert by_env["seed"] == 111


def test_bad_env_seed_is_a_clean_error(bundle, monkeypatch, capsys):
    monkeypatch.setenv(SEED_ENV, "eleven")
    assert main(["simulate", "--scenario", str(bundle)]) == 1
    assert "error:" in capsys.readouterr().err


def test_compare_runs_all_structures(bundle, tmp_path):
    out = tmp_path / "cmp.csv"
    rc = main(["compare", "--scenario", str(bundle), "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 7  # header + one row per structure
    kinds = {line.split(",")[1] for line in lines[1:]}
    assert kinds == {"single", "segmented", "cooperative", "bilateral",
                     "central", "marketplace"}


def test_compare_subset_of_structures(bundle, capsys):
    rc = main(["compare", "--scenario", str(bundle),
               "--structures", "single,segmented", "--format", "json"])
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["structure"] for r in rows] == ["single", "segmented"]


def test_allocate_game_file(tmp_path, capsys):
    game = CoalitionGame(
        players=("A", "B"),
        values={frozenset({"A"}): 10.0, frozenset({"B"}): 20.0,
                frozenset({"A", "B"}): 36.0},
    )
    path = tmp_path / "game.json"
    write_game(game, path)
    assert main(["allocate", "--game", str(path), "--method", "shapley"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["amounts"]["A"] == pytest.approx(13.0)
    assert doc["amounts"]["B"] == pytest.approx(23.0)
    assert main(["allocate", "--game", str(path), "--method", "epm"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["amounts"]["A"] == pytest.approx(12.0, abs=1e-9)
    assert doc["amounts"]["B"] == pytest.approx(24.0, abs=1e-9)


def test_auction_command(capsys):
    assert main(["auction", "--bids", "5,3,0"]) == 0
    assert capsys.readouterr().out.strip() == "winner=0 payment=0.3000"
    assert main(["auction", "--bids", "0,0"]) == 0
    assert capsys.readouterr().out.strip() == "no_sale"
    assert main(["auction", "--bids", "2,4", "--gamma", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "winner=1 payment=1.0000"


def test_gen_scenario_command(tmp_path, capsys):
    out = tmp_path / "fresh"
    rc = main(["gen-scenario", "--out", str(out), "--requests", "5",
               "--platforms", "3", "--seed", "9"])
    assert rc == 0
    assert (out / "scenario.json").exists()
    assert (out / "requests.csv").exists()


def test_missing_scenario_is_exit_one(tmp_path, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])  # --scenario is required
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
