import csv
import json

import numpy as np
import pytest

from bopref.acquisition import SgaConfig
from bopref.bench import (
    SuiteConfig,
    aggregate,
    build_run_config,
    final_utilities,
    plot_data,
    run_suite,
    sign_test_greater,
    write_outputs,
)
from bopref.errors import ContractError
from bopref.loop import GpSettings

TINY = dict(
    gp=GpSettings(hyper_samples=1, map_restarts=2, nm_maxiter=30),
    acq=SgaConfig(restarts=2, steps=8, grad_samples=8, ranking_samples=64,
                  ts_probes=16, ts_pattern_iters=3),
    theta_samples=8,
)


def tiny_suite(**kw):
    base = dict(
        problems=("dtlz1a",), policies=("random",), replications=1,
        num_evaluations=2, **TINY,
    )
    base.update(kw)
    return SuiteConfig(**base)


class TestSuiteRuns:
    def test_row_accounting(self, tmp_path):
        outcomes = run_suite(tiny_suite(), seed_base=1)
        write_outputs(outcomes, tmp_path)
        with open(tmp_path / "dtlz1a" / "runs.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * (6 + 1) + 2
        assert rows[0]["problem"] == "dtlz1a"
        assert {r["policy"] for r in rows} == {"random"}
        header = list(rows[0].keys())
        assert header[:3] == ["problem", "replication", "n"]
        assert header[3:9] == [f"x{i}" for i in range(6)]
        assert header[9:11] == ["f0", "f1"]
        assert header[11:] == ["true_utility", "log_regret", "policy", "seed"]

    def test_byte_identical_outputs_for_same_seed(self, tmp_path):
        suite = tiny_suite(policies=("random", "ei-uu"), replications=2)
        for d in ("a", "b"):
            outcomes = run_suite(suite, seed_base=9)
            write_outputs(outcomes, tmp_path / d)
        for rel in ("dtlz1a/runs.csv", "dtlz1a/runs.jsonl", "manifest.json"):
            assert (tmp_path / "a" / rel).read_bytes() == (
                tmp_path / "b" / rel
            ).read_bytes()

    def test_theta_true_shared_across_policies(self):
        suite = tiny_suite(policies=("random", "ei-uu"))
        c_random = build_run_config(suite, "dtlz1a", "random", 0, 4)
        c_ei = build_run_config(suite, "dtlz1a", "ei-uu", 0, 4)
        assert np.array_equal(c_random.theta_true, c_ei.theta_true)
        assert c_random.seeds.evaluation == c_ei.seeds.evaluation
        c_other_rep = build_run_config(suite, "dtlz1a", "random", 1, 4)
        assert not np.array_equal(c_random.theta_true, c_other_rep.theta_true)

    def test_failures_recorded_not_raised(self, tmp_path, monkeypatch):
        import bopref.bench as bench_mod

        calls = {"n": 0}
        real_run = bench_mod.run

        def sometimes_broken(config, dm=None, evaluator=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("boom")
            return real_run(config, dm=dm, evaluator=evaluator)

        monkeypatch.setattr(bench_mod, "run", sometimes_broken)
        outcomes = run_suite(tiny_suite(replications=2), seed_base=2)
        manifest = write_outputs(outcomes, tmp_path)
        assert manifest["completed"] == 1
        assert len(manifest["failures"]) == 1
        assert "boom" in manifest["failures"][0]["error"]


class TestAggregation:
    def test_aggregate_and_plotdata(self, tmp_path):
        suite = tiny_suite(policies=("random",), replications=3)
        outcomes = run_suite(suite, seed_base=3)
        write_outputs(outcomes, tmp_path)
        results = tmp_path / "results.csv"
        rows = aggregate(tmp_path, results)
        ns = sorted({int(r["n"]) for r in rows})
        assert ns == list(range(16))
        for r in rows:
            assert r["problem"] == "dtlz1a"
            assert float(r["utility_q25"]) <= float(r["utility_median"]) <= float(
                r["utility_q75"]
            )
            assert r["count"] == 3

        curves_path = tmp_path / "curves.json"
        curves = plot_data(results, curves_path)
        pol = curves["problems"]["dtlz1a"]["policies"]["random"]
        assert pol["n"] == list(range(16))
        assert len(pol["utility_median"]) == 16
        assert json.loads(curves_path.read_text())["version"] == 1

    def test_aggregate_empty_dir_rejected(self, tmp_path):
        with pytest.raises(ContractError):
            aggregate(tmp_path, tmp_path / "out.csv")


class TestSignTest:
    def test_known_binomial_tail(self):
        a = np.arange(10, dtype=float)
        b = a - 1.0
        assert sign_test_greater(a, b) == pytest.approx(0.5**10)
        assert sign_test_greater(b, a) == 1.0

    def test_ties_dropped(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([1.0, 1.0, 1.0, 1.0])
        # one tie, three wins
        assert sign_test_greater(a, b) == pytest.approx(0.5**3)

    def test_final_utilities_ordered_by_replication(self):
        suite = tiny_suite(replications=3)
        outcomes = run_suite(suite, seed_base=8)
        vals = final_utilities(outcomes, "dtlz1a", "random")
        assert vals.shape == (3,)


class TestSuiteConfig:
    def test_from_dict_defaults(self):
        suite = SuiteConfig.from_dict({"num_evaluations": 5, "replications": 2})
        assert suite.policies == ("ei-uu", "random")
        assert suite.replications == 2

    def test_unknown_problem_rejected(self):
        with pytest.raises(ContractError):
            SuiteConfig.from_dict(
                {"num_evaluations": 5, "problems": ["nope"], "replications": 1}
            )
