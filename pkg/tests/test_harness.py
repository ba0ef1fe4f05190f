"""Grid files, generators, bundled fixtures, and the experiment driver."""

import json
import math

import numpy as np
import pytest

from gridtop.errors import DomainError, ParseError, StructureError
from gridtop.fixtures import fixture_path, load_fixture
from gridtop.harness import (
    add_open_lines,
    generate_random_grid,
    parse_grid,
    plan_from_dict,
    random_spanning_forest,
    read_samples,
    run_experiment,
    simulate_voltage,
    write_error_csv,
    write_grid,
    write_samples,
)
from gridtop.harness.experiment import write_gnuplot_script, write_trial_csv
from gridtop.learner import LearnerConfig, reconstruct
from gridtop.moments import default_model

from conftest import chain_grid


# -- grid files -----------------------------------------------------------------


MINIMAL = {
    "meta": {"name": "mini"},
    "nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}],
    "edges": [{"from": 0, "to": 1, "r": 0.1, "x": 0.2, "closed": True}],
}


def test_parse_minimal_two_node_grid():
    grid, forest = parse_grid(MINIMAL)
    assert grid.n_substations == 1 and grid.n_loads == 1
    assert forest is not None and forest.closed_edges == (0,)
    assert grid.name == "mini"


def test_parse_without_closed_keys_declares_no_forest():
    doc = json.loads(json.dumps(MINIMAL))
    del doc["edges"][0]["closed"]
    grid, forest = parse_grid(doc)
    assert forest is None


def test_parse_rejects_closed_cycle():
    doc = {
        "nodes": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}, {"id": 2, "kind": "load"}],
        "edges": [
            {"from": 0, "to": 1, "r": 0.1, "x": 0.1, "closed": True},
            {"from": 1, "to": 2, "r": 0.1, "x": 0.1, "closed": True},
            {"from": 2, "to": 0, "r": 0.1, "x": 0.1, "closed": True},
        ],
    }
    with pytest.raises(StructureError, match="cycle"):
        parse_grid(doc)


def test_parse_reports_json_syntax_location(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n "nodes": [,]\n}\n')
    with pytest.raises(ParseError) as excinfo:
        parse_grid(path)
    assert "broken.json:2" in str(excinfo.value)


def test_parse_reports_schema_path(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["edges"][0]["r"] = "fast"
    with pytest.raises(ParseError, match=r"edges\[0\]"):
        parse_grid(doc)
    doc2 = json.loads(json.dumps(MINIMAL))
    del doc2["nodes"][0]["kind"]
    with pytest.raises(ParseError, match=r"nodes\[0\].*kind"):
        parse_grid(doc2)


def test_parse_missing_file():
    with pytest.raises(ParseError, match="file not found"):
        parse_grid("no/such/grid.json")


def test_grid_file_round_trip(tmp_path):
    grid, forest = generate_random_grid(9, 2, 4, n_tie_lines=2, seed=5, name="rt")
    path = tmp_path / "rt.json"
    write_grid(path, grid, forest)
    grid2, forest2 = parse_grid(path)
    assert grid2 == grid
    assert forest2.closed_edges == forest.closed_edges
    path2 = tmp_path / "rt2.json"
    write_grid(path2, grid2, forest2)
    assert path.read_text() == path2.read_text()


# -- generator ------------------------------------------------------------------


def test_generator_purely_radial_when_no_extras():
    grid, forest = generate_random_grid(6, 1, 0, seed=3)
    assert len(grid.edges) == len(forest.closed_edges) == 6


def test_generator_extra_impedances_within_operational_range():
    grid, forest = generate_random_grid(20, 2, 15, n_tie_lines=2, seed=9)
    closed = set(forest.closed_edges)
    r_ops = [grid.edges[ei].r for ei in closed]
    x_ops = [grid.edges[ei].x for ei in closed]
    for i, e in enumerate(grid.edges):
        if i in closed:
            continue
        assert min(r_ops) <= e.r <= max(r_ops)
        assert min(x_ops) <= e.x <= max(x_ops)


def test_generator_deterministic_and_seed_sensitive():
    g1, f1 = generate_random_grid(12, 3, 6, n_tie_lines=2, seed=42)
    g2, f2 = generate_random_grid(12, 3, 6, n_tie_lines=2, seed=42)
    g3, _ = generate_random_grid(12, 3, 6, n_tie_lines=2, seed=43)
    assert g1 == g2 and f1.closed_edges == f2.closed_edges
    assert g1 != g3


def test_generator_rejects_infeasible_parameters():
    with pytest.raises(DomainError):
        generate_random_grid(2, 3, 0)  # fewer loads than substations
    with pytest.raises(DomainError):
        generate_random_grid(4, 3, 0, n_tie_lines=1)  # cannot connect 3 trees
    with pytest.raises(DomainError):
        generate_random_grid(2, 1, 50)  # more lines than node pairs


def test_generator_every_tree_gets_a_load():
    grid, forest = generate_random_grid(11, 4, 8, n_tie_lines=3, seed=1)
    for k in range(forest.n_trees):
        members = [n for n, t in forest.tree_of.items() if t == k]
        assert any(not grid.is_substation(n) for n in members)


def test_add_open_lines_preserves_forest_and_ranges():
    grid, forest = generate_random_grid(8, 2, 3, n_tie_lines=1, seed=4)
    grid2, forest2 = add_open_lines(grid, forest, 10, seed=12)
    assert len(grid2.edges) == len(grid.edges) + 10
    assert forest2.closed_edges == forest.closed_edges
    r_ops = [grid.edges[ei].r for ei in forest.closed_edges]
    for e in grid2.edges[len(grid.edges):]:
        assert min(r_ops) <= e.r <= max(r_ops)


def test_random_spanning_forest_is_base_constrained():
    grid, _ = generate_random_grid(15, 3, 10, n_tie_lines=2, seed=8)
    forest = random_spanning_forest(grid, seed=2)
    assert len(forest.closed_edges) == grid.n_loads
    assert forest.n_trees == 3


# -- fixtures ---------------------------------------------------------------------


@pytest.mark.parametrize("name,loads,subs,ties,extras", [
    ("bus_13_3", 13, 3, 3, 10),
    ("bus_29_1", 29, 1, 1, 20),
    ("bus_83_11", 83, 11, 13, 30),
])
def test_fixture_conforms_to_published_counts(name, loads, subs, ties, extras):
    grid, forest = load_fixture(name)
    assert grid.n_loads == loads
    assert grid.n_substations == subs
    assert len(forest.closed_edges) == loads
    open_edges = [e for i, e in enumerate(grid.edges) if i not in set(forest.closed_edges)]
    assert sum(1 for e in open_edges if e.switchable) == ties
    assert sum(1 for e in open_edges if not e.switchable) == extras


def test_fixture_round_trip(tmp_path):
    grid, forest = load_fixture("bus_13_3")
    path = tmp_path / "again.json"
    write_grid(path, grid, forest)
    grid2, forest2 = parse_grid(path)
    assert grid2 == grid
    assert forest2.closed_edges == forest.closed_edges
    assert path.read_text() == fixture_path("bus_13_3").read_text()


# -- sample files -------------------------------------------------------------------


def test_sample_csv_round_trip_is_exact(tmp_path):
    grid, forest = chain_grid(5, seed=3)
    model = default_model(forest)
    samples = simulate_voltage(forest, model, 64, seed=21)
    path = tmp_path / "samples.csv"
    write_samples(path, samples)
    back = read_samples(path)
    assert back.nodes == samples.nodes
    np.testing.assert_array_equal(back.eps, samples.eps)


def test_file_pipeline_equals_in_memory_pipeline(tmp_path):
    grid, forest = load_fixture("bus_13_3")
    model = default_model(forest)
    samples = simulate_voltage(forest, model, 600, seed=5)
    config = LearnerConfig(tau=0.1)
    in_memory = reconstruct(samples, model, grid, config, truth=forest)
    path = tmp_path / "samples.csv"
    write_samples(path, samples)
    from_file = reconstruct(read_samples(path), model, grid, config, truth=forest)
    assert from_file.learned_edges == in_memory.learned_edges
    assert from_file.relative_error == in_memory.relative_error
    assert from_file.trace == in_memory.trace


def test_read_samples_reports_bad_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n0.1,0.2\n0.3\n")
    with pytest.raises(ParseError, match="bad.csv:3"):
        read_samples(path)


# -- experiment driver -----------------------------------------------------------


def _tiny_plan(**overrides):
    doc = {
        "grid": "bus_13_3",
        "sample_counts": [50, 100],
        "taus": [0.1],
        "trials": 3,
        "seed": 99,
    }
    doc.update(overrides)
    return plan_from_dict(doc)


def test_plan_parses_inf_sentinel():
    plan = _tiny_plan(sample_counts=["inf", 100])
    assert math.isinf(plan.sample_counts[0])
    assert plan.sample_counts[1] == 100


def test_plan_validation():
    with pytest.raises(DomainError):
        _tiny_plan(trials=0)
    with pytest.raises(DomainError):
        _tiny_plan(sample_counts=[])
    with pytest.raises(DomainError):
        _tiny_plan(sample_counts=[0])
    with pytest.raises(ParseError):
        plan_from_dict({"grid": "bus_13_3", "taus": [0.1], "trials": 1})


def test_analytic_sentinel_recovers_exactly():
    plan = _tiny_plan(sample_counts=["inf"], taus=[1e-6], trials=2)
    result = run_experiment(plan)
    assert result.failures == 0
    for row in result.rows:
        assert row["mean_error"] == 0.0
        assert row["std_error"] == 0.0


def test_experiment_rows_cover_grid_points_in_order():
    plan = _tiny_plan(sample_counts=[50, 100], taus=[0.2, 0.1], trials=2)
    result = run_experiment(plan)
    got = [(row["m"], row["tau"]) for row in result.rows]
    assert got == [(50, 0.2), (50, 0.1), (100, 0.2), (100, 0.1)]
    assert all(row["trials"] == 2 for row in result.rows)


def test_experiment_csv_determinism(tmp_path):
    plan = _tiny_plan()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_error_csv(p1, run_experiment(plan))
    write_error_csv(p2, run_experiment(plan))
    assert p1.read_bytes() == p2.read_bytes()


def test_experiment_verbose_and_gnuplot_outputs(tmp_path):
    plan = _tiny_plan(trials=2)
    result = run_experiment(plan)
    csv_path = tmp_path / "out.csv"
    write_error_csv(csv_path, result)
    write_trial_csv(tmp_path / "out.trials.csv", result)
    write_gnuplot_script(tmp_path / "out.gnuplot", csv_path, result)
    header = csv_path.read_text().splitlines()[0]
    assert header == "grid,variant,m,tau,trials,mean_error,std_error"
    trials_lines = (tmp_path / "out.trials.csv").read_text().splitlines()
    assert trials_lines[0] == "grid,variant,m,tau,trial,error,note"
    assert len(trials_lines) == 1 + 2 * 2 * 1  # trials x counts x taus
    assert "plot" in (tmp_path / "out.gnuplot").read_text()


def test_experiment_timing_column_is_opt_in(tmp_path):
    plan = _tiny_plan(trials=1, sample_counts=[20])
    result = run_experiment(plan, include_timing=True)
    path = tmp_path / "t.csv"
    write_error_csv(path, result, include_timing=True)
    assert path.read_text().splitlines()[0].endswith(",seconds")


def test_experiment_generator_grid_and_forest_overrides():
    plan = _tiny_plan(grid={"generator": {"n_loads": 6, "k_subs": 1, "n_extra_lines": 2}},
                      sample_counts=[40], trials=2)
    result = run_experiment(plan)
    assert result.failures == 0
    plan2 = _tiny_plan(grid={"generator": {"n_loads": 6, "k_subs": 1, "n_extra_lines": 2}},
                       forest={"random_seed": 4}, sample_counts=[40], trials=1)
    assert run_experiment(plan2).failures == 0


def test_distflow_engine_simulation_close_to_lc():
    grid, forest = chain_grid(4, seed=6)
    model = default_model(forest)
    lc = simulate_voltage(forest, model, 20, seed=9, engine="lc")
    df = simulate_voltage(forest, model, 20, seed=9, engine="distflow")
    assert df.theta is None
    # same seed draws the same injections; the engines differ only by losses
    gap = np.max(np.abs(df.eps - lc.eps))
    assert 0 < gap < 1e-3


def test_analytic_sentinel_requires_lc_engine():
    plan = _tiny_plan(sample_counts=["inf"], trials=1, engine="distflow")
    result = run_experiment(plan)
    assert result.failures == plan.trials
    assert math.isnan(result.rows[0]["mean_error"])


def test_experiment_seed_falls_back_to_env(monkeypatch, tmp_path):
    plan = _tiny_plan(seed=None, sample_counts=[30], trials=2)
    monkeypatch.setenv("GRIDTOP_SEED", "123")
    r1 = run_experiment(plan)
    r2 = run_experiment(plan)
    monkeypatch.setenv("GRIDTOP_SEED", "124")
    r3 = run_experiment(plan)
    assert r1.rows == r2.rows
    assert r1.rows != r3.rows
