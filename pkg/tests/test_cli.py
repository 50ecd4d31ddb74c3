import json

import pandas as pd
import pytest

from rko_route.__main__ import EXIT_OK, EXIT_VALIDATION, main
from rko_route.utils.instances import load_instance

SMALL_BRKGA = {"population_size": 20, "num_generations": 5}


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.csv"
    assert main(["--seed", "3", "gen", "--seams", "5", "--dims", "2", "1", "1", "1",
                 "--feasibility", "1.0", "--out", str(path)]) == EXIT_OK
    return path


def write(path, data):
    path.write_text(json.dumps(data))
    return path


def test_gen_writes_a_loadable_instance(instance_file):
    instance = load_instance(instance_file)
    assert instance.n_seams == 5
    assert instance.dim_sizes == (2, 1, 1, 1)


def test_downsample(instance_file, tmp_path):
    out = tmp_path / "small.csv"
    assert main(["--seed", "1", "downsample", "--instance", str(instance_file), "--keep", "3",
                 "--out", str(out)]) == EXIT_OK
    assert load_instance(out).n_seams == 3


def test_solve_greedy_writes_tour_and_trace(instance_file, tmp_path):
    out = tmp_path / "greedy"
    assert main(["solve", "--instance", str(instance_file), "--solver", "greedy", "--shots", "20",
                 "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "tour.json").read_text())
    assert report["solver"] == "greedy"
    assert sorted(node[0] for node in report["nodes"]) == [1, 2, 3, 4, 5]
    trace = pd.read_csv(out / "trace.csv")
    assert trace["cost"].iloc[-1] == pytest.approx(report["cost"])
    assert len(pd.read_csv(out / "history.csv")) == 20


def test_solve_from_generator_flags(tmp_path):
    out = tmp_path / "generated"
    assert main(["--seed", "2", "solve", "--seams", "4", "--dims", "1", "1", "1", "1", "--solver", "greedy",
                 "--shots", "5", "--out", str(out)]) == EXIT_OK
    assert len(json.loads((out / "tour.json").read_text())["nodes"]) == 4


def test_same_seed_same_tour(instance_file, tmp_path):
    params = write(tmp_path / "brkga.json", SMALL_BRKGA)
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--seed", "7", "solve", "--instance", str(instance_file), "--params", str(params),
                     "--out", str(out)]) == EXIT_OK
        reports.append(json.loads((out / "tour.json").read_text()))
    assert reports[0]["nodes"] == reports[1]["nodes"]
    assert reports[0]["seed"] == 7


def test_warmstarted_brkga_starts_at_the_pool_best(instance_file, tmp_path):
    pool = tmp_path / "pool.json"
    assert main(["solve", "--instance", str(instance_file), "--solver", "greedy", "--shots", "50",
                 "--out", str(tmp_path / "greedy"), "--pool-out", str(pool), "--pool-size", "10"]) == EXIT_OK
    assert len(json.loads(pool.read_text())) == 10
    greedy_cost = json.loads((tmp_path / "greedy" / "tour.json").read_text())["cost"]

    params = write(tmp_path / "brkga.json", SMALL_BRKGA)
    out = tmp_path / "brkga"
    assert main(["solve", "--instance", str(instance_file), "--params", str(params), "--warmstart", str(pool),
                 "--out", str(out)]) == EXIT_OK
    trace = pd.read_csv(out / "trace.csv")
    assert trace["cost"].iloc[0] <= greedy_cost + 1e-9


def test_relink_between_two_tours(instance_file, tmp_path):
    for name, solver in (("a", "greedy"), ("b", "da")):
        args = ["--seed", "4", "solve", "--instance", str(instance_file), "--solver", solver,
                "--out", str(tmp_path / name)]
        if solver == "greedy":
            args += ["--shots", "10"]
        else:
            args += ["--params", str(write(tmp_path / "da.json", {"maxiter": 20, "local_search_budget": 2}))]
        assert main(args) == EXIT_OK
    costs = [json.loads((tmp_path / n / "tour.json").read_text())["cost"] for n in ("a", "b")]

    out = tmp_path / "relinked"
    assert main(["relink", "--instance", str(instance_file), "--tours", str(tmp_path / "a" / "tour.json"),
                 str(tmp_path / "b" / "tour.json"), "--grid", "11", "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "tour.json").read_text())
    assert report["cost"] <= min(costs) + 1e-9
    assert len(report["attributes"]["costs"]) == 11


def test_relink_rejects_tours_from_another_instance(instance_file, tmp_path):
    other = tmp_path / "other.csv"
    assert main(["--seed", "99", "gen", "--seams", "5", "--dims", "2", "1", "1", "1", "--out", str(other)]) == EXIT_OK
    assert main(["solve", "--instance", str(other), "--solver", "greedy", "--shots", "5",
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    tour = str(tmp_path / "o" / "tour.json")
    assert main(["relink", "--instance", str(instance_file), "--tours", tour, tour]) == EXIT_VALIDATION


def test_qubo_estimate(capsys):
    assert main(["qubo", "estimate", "--seams", "50", "--tools", "3", "--config", "10", "--position", "3"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "450000 qubits (over cap 50000)"


def test_qubo_build_and_brute_force(tmp_path):
    toy = tmp_path / "toy.csv"
    assert main(["gen", "--seams", "2", "--dims", "1", "1", "1", "1", "--feasibility", "1.0",
                 "--out", str(toy)]) == EXIT_OK
    assert main(["qubo", "build", "--instance", str(toy), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "qubo.txt").read_text().splitlines()[0] == "4"

    out = tmp_path / "brute"
    assert main(["qubo", "brute", "--instance", str(toy), "--qubo", str(tmp_path / "qubo.txt"),
                 "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "tour.json").read_text())
    assert report["cost_mode"] == "cyclic"
    assert report["feasible"]


def test_qubo_build_over_cap_fails(instance_file, tmp_path):
    assert main(["qubo", "build", "--instance", str(instance_file), "--max-vars", "10",
                 "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_ttt_writes_cdf(instance_file, tmp_path):
    assert main(["ttt", "--instance", str(instance_file), "--solver", "greedy",
                 "--params", str(write(tmp_path / "greedy.json", {"shots": 10})),
                 "--targets", "1e9", "--shots", "3", "--out", str(tmp_path)]) == EXIT_OK
    ttt = pd.read_csv(tmp_path / "ttt.csv")
    assert list(ttt["prob"]) == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_sweep_then_table(tmp_path):
    folder = tmp_path / "instances"
    for seed in ("1", "2"):
        assert main(["--seed", seed, "gen", "--seams", "4", "--dims", "2", "1", "1", "1",
                     "--out", str(folder / f"s{seed}.csv")]) == EXIT_OK
    specs = write(tmp_path / "specs.json", [
        {"solver": "greedy", "params": {"shots": 20}},
        {"solver": "brkga", "params": SMALL_BRKGA},
    ])
    assert main(["sweep", "--instances", str(folder), "--specs", str(specs), "--seeds", "0", "1",
                 "--out", str(tmp_path)]) == EXIT_OK
    sweep = pd.read_csv(tmp_path / "sweep.csv")
    assert len(sweep) == 8
    assert set(sweep["solver"]) == {"greedy", "brkga"}

    assert main(["table", "--sweep", str(tmp_path / "sweep.csv"), "--out", str(tmp_path)]) == EXIT_OK
    table = (tmp_path / "table.md").read_text().splitlines()
    assert table[0] == "| Instance | greedy | brkga | Δ | Δ% |"
    assert len(table) == 4


def test_tune_writes_best_params(instance_file, tmp_path):
    out = tmp_path / "best.json"
    assert main(["tune", "--instance", str(instance_file), "--trials", "2",
                 "--set", "num_generations=3", "population_size=20", "--out", str(out)]) == EXIT_OK
    best = json.loads(out.read_text())
    assert best["num_generations"] == 3
    assert best["population_size"] == 20


def test_missing_instance_file(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "missing.csv"), "--solver", "greedy"]) == EXIT_VALIDATION


def test_invalid_params_file(instance_file, tmp_path):
    params = write(tmp_path / "bad.json", {"population_size": 1})
    assert main(["solve", "--instance", str(instance_file), "--params", str(params),
                 "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_shots_only_for_greedy(instance_file, tmp_path):
    assert main(["solve", "--instance", str(instance_file), "--shots", "5", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_workers_from_environment(monkeypatch, instance_file, tmp_path):
    monkeypatch.setenv("RKO_ROUTE_WORKERS", "2")
    assert main(["solve", "--instance", str(instance_file), "--solver", "greedy", "--shots", "8",
                 "--out", str(tmp_path)]) == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["solve", "--solver", "bogus"],
    ["qubo", "estimate", "--seams", "5"],
    [],
])
def test_usage_errors_are_validation_failures(argv):
    assert main(argv) == EXIT_VALIDATION


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "usage" in capsys.readouterr().out
