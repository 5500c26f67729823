import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bopref.acquisition import SgaConfig
from bopref.errors import ContractError, RunAbortedError
from bopref.loop import (
    ExperimentConfig,
    GpSettings,
    Seeds,
    pareto_front,
    performance,
    refresh_theta,
    run,
)
from bopref.preference import PreferenceRecord

FAST_GP = GpSettings(hyper_samples=1, map_restarts=2, nm_maxiter=40)
FAST_ACQ = SgaConfig(restarts=2, steps=12, grad_samples=8, ranking_samples=64,
                     ts_probes=32, ts_pattern_iters=4)


def fast_config(**kw):
    base = dict(
        policy="random",
        num_evaluations=2,
        problem="dtlz1a",
        seeds=Seeds(5, 6, 7),
        theta_true=[0.4],
        gp=FAST_GP,
        acq=FAST_ACQ,
        theta_samples=16,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestParetoFront:
    def test_full_domination(self):
        assert pareto_front([[1.0, 1.0], [0.0, 0.0]]) == [0]

    def test_incomparable_pair(self):
        assert pareto_front([[1.0, 0.0], [0.0, 1.0]]) == [0, 1]

    def test_empty(self):
        assert pareto_front([]) == []

    def test_random_vectors_match_bruteforce(self, rng):
        Y = rng.normal(0, 1, (200, 3))
        got = pareto_front(Y)
        oracle = []
        for i in range(len(Y)):
            dominated = False
            for j in range(len(Y)):
                if i != j and all(Y[j] >= Y[i]) and any(Y[j] > Y[i]):
                    dominated = True
                    break
            if not dominated:
                oracle.append(i)
        assert got == oracle

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(
        st.lists(
            st.lists(st.integers(min_value=-3, max_value=3), min_size=2, max_size=2),
            min_size=1,
            max_size=12,
        )
    )
    def test_front_members_are_mutually_nondominated(self, vecs):
        Y = np.asarray(vecs, dtype=float)
        front = pareto_front(Y)
        assert front  # at least one maximal element always exists
        for a in front:
            for b in front:
                if a != b:
                    assert not (all(Y[b] >= Y[a]) and any(Y[b] > Y[a]))


class TestConfig:
    def test_problem_fills_box_and_defaults(self):
        cfg = fast_config()
        assert cfg.dim == 6
        assert cfg.num_attributes == 2
        assert cfg.effective_init_count == 14
        assert cfg.utility["family"] == "linear"

    def test_rejects_bad_box(self):
        with pytest.raises(ContractError):
            ExperimentConfig(
                policy="random", num_evaluations=1,
                lower=[1.0], upper=[0.0], num_attributes=1,
                utility={"family": "linear"},
                theta_prior={"kind": "uniform_box", "lower": [0], "upper": [1]},
            )

    def test_rejects_unknown_policy(self):
        with pytest.raises(ContractError):
            fast_config(policy="simulated-annealing")

    def test_round_trips_through_dict(self):
        cfg = fast_config(policy="ei-uu", num_evaluations=3)
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again.to_dict() == cfg.to_dict()


class TestRun:
    def test_zero_iterations_only_initialization(self):
        rec = run(fast_config(num_evaluations=0))
        assert len(rec.rows) == 14  # 2 * (6 + 1)
        assert rec.preferences == []
        assert rec.pareto_indices == pareto_front([r.y for r in rec.rows])

    def test_deterministic_records(self):
        a = run(fast_config(num_evaluations=3))
        b = run(fast_config(num_evaluations=3))
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )

    def test_one_preference_per_iteration_and_in_box(self):
        cfg = fast_config(policy="ei-uu", num_evaluations=3)
        rec = run(cfg)
        assert len(rec.preferences) == 3
        assert [p.m for p in rec.preferences] == [1, 2, 3]
        assert len(rec.rows) == 14 + 3
        for r in rec.rows:
            assert np.all(r.x >= cfg.lower) and np.all(r.x <= cfg.upper)

    def test_trace_is_running_maximum(self):
        rec = run(fast_config(num_evaluations=4))
        trace = np.asarray(rec.true_utility_trace)
        assert np.all(np.diff(trace) >= 0)
        fam = rec.config.build_family()
        first = fam.value(rec.rows[0].y, [0.4])
        assert trace[0] == pytest.approx(first)

    def test_ts_policy_runs(self):
        rec = run(fast_config(policy="ts-uu", num_evaluations=2))
        assert len(rec.rows) == 16

    def test_aborts_with_partial_record_on_evaluator_failure(self):
        calls = {"n": 0}

        def flaky(x):
            calls["n"] += 1
            if calls["n"] > 15:
                raise RuntimeError("simulator crashed")
            from bopref.problems import get_problem

            return get_problem("dtlz1a").evaluate(x)

        with pytest.raises(RunAbortedError) as exc_info:
            run(fast_config(policy="random", num_evaluations=5), evaluator=flaky)
        partial = exc_info.value.partial_record
        assert partial is not None
        assert len(partial.rows) == 15
        assert len(partial.preferences) == 2

    def test_finds_known_one_dimensional_optimum(self):
        # single-attribute problem with a known maximizer at 0.3
        hits = 0
        for rep in range(20):
            cfg = ExperimentConfig(
                policy="ei-uu",
                num_evaluations=15,
                lower=[0.0],
                upper=[1.0],
                num_attributes=1,
                utility={"family": "linear"},
                theta_prior={"kind": "finite", "points": [[1.0]]},
                theta_true=[1.0],
                seeds=Seeds(100 + rep, 200 + rep, 300 + rep),
                gp=GpSettings(hyper_samples=1, map_restarts=3, nm_maxiter=60),
                acq=SgaConfig(restarts=3, steps=40, grad_samples=8,
                              ranking_samples=128),
                theta_samples=4,
            )
            rec = run(cfg, evaluator=lambda x: [-((x[0] - 0.3) ** 2)])
            best = rec.rows[int(np.argmax([r.y[0] for r in rec.rows]))]
            hits += abs(best.x[0] - 0.3) <= 0.05
        assert hits >= 18


class TestNplPolicies:
    def test_npl_keeps_prior_distribution(self):
        cfg = fast_config(policy="ei-uu-npl", num_evaluations=1)
        fam = cfg.build_family()
        prior = cfg.build_prior()
        records = [
            PreferenceRecord(m=1, y=np.array([1.0, 0.0]), y_other=np.array([0.0, 1.0]), a=1)
        ]
        with_records = refresh_theta(cfg, records, fam, prior, 5)
        without = refresh_theta(cfg, [], fam, prior, 5)
        assert np.array_equal(with_records.samples, without.samples)
        assert with_records.source == "prior"

    def test_learning_policy_uses_records(self):
        cfg = fast_config(policy="ei-uu", num_evaluations=1)
        fam = cfg.build_family()
        prior = cfg.build_prior()
        records = [
            PreferenceRecord(m=1, y=np.array([1.0, 0.0]), y_other=np.array([0.0, 1.0]), a=1)
        ]
        post = refresh_theta(cfg, records, fam, prior, 5)
        assert np.all(post.samples[:, 0] > 0.5)


class TestPerformance:
    def test_requires_theta_true(self):
        rec = run(fast_config(num_evaluations=0, theta_true=None, policy="random"),
                  dm=lambda y, yp, m: 0)
        with pytest.raises(ContractError):
            performance(rec, None)

    def test_log_regret_against_known_optimum(self):
        cfg = fast_config(num_evaluations=2, theta_true=[0.3])
        rec = run(cfg)
        trace, log_regret = performance(rec, [0.3], u_star=-0.5 * 0.3)
        assert log_regret is not None
        gaps = (-0.5 * 0.3) - np.asarray(trace)
        np.testing.assert_allclose(
            log_regret, np.log10(np.maximum(gaps, 1e-12)), atol=1e-12
        )

    def test_dtlz1a_linear_optimum_formula(self):
        # the best tradeoff on the attribute segment y1 + y2 = -0.5
        from bopref.problems import get_problem, utility_optimum
        from bopref.utility import LinearUtility

        prob = get_problem("dtlz1a")
        fam = LinearUtility(2, tradeoff=True)
        for t in (0.0, 0.2, 0.5, 0.77, 1.0):
            assert utility_optimum(prob, fam, [t]) == pytest.approx(
                -0.5 * min(t, 1.0 - t), abs=1e-12
            )
