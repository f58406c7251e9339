import json

import pytest
from hypothesis import given, settings, strategies as st

from agct import corpus
from agct.cli import _ratios, main
from agct.concolic import Strategy, concolic_test
from agct.driver import (EXIT_BUDGET, EXIT_DONE, EXIT_STALL, BudgetConfig,
                         coverage_report, crabs_run, load_suite, ratio_sweep, replay,
                         serialize_suite)
from agct.ir import enumerate_branches, parse_program

from conftest import random_program

EQ7 = "var x; var y = 0; x = input(); if (x == 7) { y = 1; } else { y = 2; }"


def test_replay_examples(motivating):
    r = replay(motivating, [10] * 30)
    assert "7#0" in r.covered and "4#1" in r.covered and "4#0" not in r.covered
    assert r.path[-2:] == ["7#0", "8#0"] and not r.capped
    p = parse_program(EQ7)
    assert replay(p, [0]).covered == {"3#1"}
    assert replay(p, [7]).covered == {"3#0"}


def test_replay_pads_missing_inputs(motivating):
    r = replay(motivating, [10] * 3)
    assert len(r.inputs) == 30 and r.inputs[:3] == (10, 10, 10)
    assert all(-1000 <= v <= 1000 for v in r.inputs)
    assert replay(motivating, [10] * 3).inputs == r.inputs


@pytest.mark.parametrize("suite", [[], [()], [(1, -2, 3)], [(0,), (5, 5)]])
def test_suite_round_trip(suite, motivating):
    assert load_suite(serialize_suite(suite)) == suite
    assert load_suite(serialize_suite(suite, motivating)) == suite


def test_suite_file_lists_covered_branches(motivating):
    rows = json.loads(serialize_suite([[10] * 30], motivating))
    assert "7#0" in rows[0]["covers"]


@pytest.mark.parametrize("text", ["{", '{"inputs": [1]}', '[{"inputs": [1.5]}]', '[{"inputs": "x"}]',
                                  '[{"inputs": [true]}]'])
def test_malformed_suite_rejected(text):
    with pytest.raises(ValueError):
        load_suite(text)


def test_budget_validation():
    with pytest.raises(ValueError):
        BudgetConfig(100, 0, 0)
    with pytest.raises(ValueError):
        BudgetConfig(0, 1, 1)
    with pytest.raises(ValueError):
        BudgetConfig(100, 200, 0)
    assert BudgetConfig.split(1000, 0.8, 500) == BudgetConfig(1000, 400, 100)
    assert BudgetConfig.split(1000, 0.0, 500) == BudgetConfig(1000, 0, 500)


def test_report_fields_and_empty_denominator():
    p = parse_program("var x = 1; x = x + 1;")
    rep = crabs_run(p, None, BudgetConfig(100, 50, 50))
    assert rep.exit_code == EXIT_DONE and rep.ratio == 1.0
    assert rep.ratio_text == "0/0 (100.0%)"
    d = json.loads(rep.to_json())
    for k in ("branches", "covered", "unreachable", "ratio", "iterations", "coverage",
              "exit_code", "fuel_spent", "tests"):
        assert k in d


def test_coverage_report_replays(motivating):
    rep = coverage_report(motivating, [[10] * 30, [0] * 30])
    assert set(rep.covered) == enumerate_branches(motivating)
    assert rep.ratio == 1.0


@pytest.mark.parametrize("kind", ["dfs", "cfg"])
def test_baseline_equals_plain_concolic(motivating, kind):
    strat = Strategy(kind, seed=4)
    total = 3_000
    rep = crabs_run(motivating, None, BudgetConfig(total, total, 0), strat, baseline=True)
    res = concolic_test(motivating, enumerate_branches(motivating), total, strat)
    assert set(rep.suite) == {replay(motivating, t).inputs for t in res.suite}
    assert set(rep.covered) == enumerate_branches(motivating) - res.remaining
    assert rep.reachable == 6 and rep.exit_code in (EXIT_BUDGET, EXIT_STALL)


def test_zero_mc_budget_runs_concolic_only(motivating):
    strat = Strategy("dfs")
    rep = crabs_run(motivating, None, BudgetConfig(2_000, 2_000, 0), strat)
    res = concolic_test(motivating, enumerate_branches(motivating), 2_000, strat)
    assert set(rep.covered) == enumerate_branches(motivating) - res.remaining
    assert all(it.mc_fuel == 0 for it in rep.iterations)


def test_motivating_settles_all_branches(motivating):
    rep = crabs_run(motivating, None, BudgetConfig(150_000, 20_000, 5_000))
    assert rep.exit_code == EXIT_DONE and set(rep.covered) == enumerate_branches(motivating)
    assert rep.artifacts and rep.iterations[0].predicates > 0
    covered = set()
    for t in rep.suite:
        covered |= replay(motivating, t).covered
    assert covered == set(rep.covered)


def test_unreach_reports_library_goal():
    p = corpus.load("unreach")
    rep = crabs_run(p, None, BudgetConfig(150_000, 20_000, 5_000))
    assert rep.unreachable == ["14#0"] and rep.exit_code == EXIT_DONE
    assert rep.ratio_text.startswith("9/9")


@given(st.integers(0, 2_000))
@settings(max_examples=20, deadline=None)
def test_coverage_monotone_and_disjoint(seed):
    p = random_program(seed)
    rep = crabs_run(p, None, BudgetConfig(3_000, 300, 200), Strategy("cfg", seed=seed))
    assert not set(rep.covered) & set(rep.unreachable)
    assert set(rep.covered) | set(rep.unreachable) <= enumerate_branches(p)
    spent = [it.fuel_spent for it in rep.iterations]
    assert spent == sorted(spent) and rep.fuel_spent <= 3_000
    union = set()
    for it in rep.iterations:
        assert not set(it.new_covered) & union
        union |= set(it.new_covered)
    assert union == set(rep.covered)
    if rep.exit_code == EXIT_DONE:
        assert set(rep.covered) | set(rep.unreachable) == enumerate_branches(p)


def test_unreachable_goals_are_unreachable_by_enumeration():
    p = parse_program("var x; var y = 0; x = input(); y = x * x; if (y < 0) { y = 1; }"
                      " if (x > 5 && x < 3) { y = 2; }")
    rep = crabs_run(p, None, BudgetConfig(5_000, 500, 500))
    for v in range(-30, 31):
        assert not set(replay(p, [v]).covered) & set(rep.unreachable)


def test_goals_must_be_branches(motivating):
    with pytest.raises(ValueError):
        crabs_run(motivating, {"3#0"})


def test_ratio_sweep_rows(motivating):
    rows = ratio_sweep(corpus.load("motivating", bound=5), total=4_000, per_iteration=400)
    assert [r.ratio for r in rows] == [1.0, 0.8, 0.5, 0.2, 0.0]
    assert all(r.denominator >= r.covered for r in rows)


def test_ratio_parsing():
    assert _ratios("80/20,50/50") == [0.8, 0.5]
    assert _ratios("100, 0.2") == [1.0, 0.2]


def test_cli_run_and_outputs(tmp_path, capsys):
    src = tmp_path / "eq.imp"
    src.write_text(EQ7)
    code = main(["run", str(src), "--budget-total", "1000", "--budget-concolic", "100",
                 "--budget-mc", "100", "--report", str(tmp_path / "r.json"),
                 "--suite", str(tmp_path / "s.json"), "--dump-arg", str(tmp_path / "a"),
                 "--dump-monitor", str(tmp_path / "m")])
    assert code == EXIT_DONE
    assert "coverage 2/2" in capsys.readouterr().out
    assert json.loads((tmp_path / "r.json").read_text())["exit_code"] == 0
    assert load_suite((tmp_path / "s.json").read_text())


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.imp"
    bad.write_text("var x; x = ;")
    assert main(["run", str(bad)]) == 3
    assert main(["run", str(tmp_path / "missing.imp")]) == 3
    assert main(["run", "corpus:nope"]) == 3
    assert main(["run", "corpus:motivating", "--budget-concolic", "0", "--budget-mc", "0"]) == 3
    assert "error" in capsys.readouterr().err


def test_cli_budget_exit(capsys):
    code = main(["run", "corpus:motivating", "--budget-total", "200", "--budget-concolic", "100",
                 "--budget-mc", "0", "--strategy", "dfs"])
    assert code in (EXIT_BUDGET, EXIT_STALL)


def test_cli_ratio_sweep(capsys, tmp_path):
    out = tmp_path / "sweep.json"
    assert main(["run", "corpus:motivating", "--budget-total", "2000", "--budget-concolic", "150",
                 "--budget-mc", "50", "--ratio-sweep", "100/0,50/50", "--report", str(out)]) == 0
    assert len(json.loads(out.read_text())) == 2
    assert capsys.readouterr().out.count("ratio") == 2
