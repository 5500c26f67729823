"""Benchmark harness: replicated simulated-DM runs over the built-in test
problems, flat CSV/JSON emission, aggregation, and plot-ready curves.

Replications are paired across policies: replication r of every policy
shares the same simulated decision-maker parameter and the same initial
designs, so per-replication policy comparisons are common-random-number
comparisons. All outputs are byte-deterministic given the base seed
(per-iteration wall times are kept out of the serialized outputs for that
reason; pass ``include_timing`` to get them in run JSON dicts).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .acquisition import SgaConfig
from .errors import ContractError
from .loop import ExperimentConfig, GpSettings, RunRecord, Seeds, run
from .preference import LikelihoodSpec
from .problems import PROBLEM_IDS, get_problem
from .utility import prior_from_config

_SEED_SPAN = 2**31 - 1


@dataclass(frozen=True)
class SuiteConfig:
    """What to run: problems x policies x replications, plus overrides."""

    problems: tuple
    policies: tuple
    replications: int
    num_evaluations: int
    init_count: int | None = None
    theta_samples: int = 64
    gp: GpSettings = field(default_factory=GpSettings)
    acq: SgaConfig = field(default_factory=SgaConfig)
    likelihood: LikelihoodSpec = field(default_factory=LikelihoodSpec)

    def __post_init__(self):
        if self.replications < 1:
            raise ContractError("need at least one replication")
        for p in self.problems:
            get_problem(p)

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteConfig":
        gp = data.get("gp") or {}
        acq = data.get("acq") or {}
        lk = data.get("likelihood") or {}
        return cls(
            problems=tuple(data.get("problems") or PROBLEM_IDS),
            policies=tuple(data.get("policies") or ("ei-uu", "random")),
            replications=int(data.get("replications", 1)),
            num_evaluations=int(data["num_evaluations"]),
            init_count=data.get("init_count"),
            theta_samples=int(data.get("theta_samples", 64)),
            gp=GpSettings(**gp),
            acq=SgaConfig(**acq),
            likelihood=LikelihoodSpec(
                kind=lk.get("kind", "exact"), scale=float(lk.get("scale", 0.1))
            ),
        )


def _rep_seeds(seed_base: int, problem: str, rep: int) -> tuple[int, int, int, int]:
    """Four stable sub-seeds per (problem, replication): evaluation, dm,
    policy, and the simulated decision-maker's parameter draw.

    The first two and the parameter seed are shared across policies so the
    comparison is paired; the policy seed differs per replication only.
    """
    ss = np.random.SeedSequence([seed_base, abs(hash_problem(problem)), rep])
    vals = ss.generate_state(4)
    return tuple(int(v % _SEED_SPAN) for v in vals)


def hash_problem(problem: str) -> int:
    return int.from_bytes(problem.encode()[:8].ljust(8, b"\0"), "big") % _SEED_SPAN


def build_run_config(
    suite: SuiteConfig, problem_id: str, policy: str, rep: int, seed_base: int
) -> ExperimentConfig:
    problem = get_problem(problem_id)
    s_eval, s_dm, s_pol, s_theta = _rep_seeds(seed_base, problem_id, rep)
    prior = prior_from_config(problem.default_prior)
    theta_true = prior.sample(np.random.default_rng([s_theta, 9]), 1)[0]
    gp = suite.gp
    if policy.startswith("ts-uu"):
        # Thompson selection draws a single hyperparameter member
        gp = replace(gp, hyper_samples=1)
    return ExperimentConfig(
        policy=policy,
        num_evaluations=suite.num_evaluations,
        problem=problem_id,
        init_count=suite.init_count,
        likelihood=suite.likelihood,
        seeds=Seeds(evaluation=s_eval, dm=s_dm, policy=s_pol),
        theta_true=theta_true,
        gp=gp,
        acq=suite.acq,
        theta_samples=suite.theta_samples,
    )


@dataclass
class RunOutcome:
    problem: str
    policy: str
    replication: int
    seed: int
    record: RunRecord | None = None
    error: str | None = None


def _execute(args) -> RunOutcome:
    suite, problem_id, policy, rep, seed_base = args
    config = build_run_config(suite, problem_id, policy, rep, seed_base)
    try:
        record = run(config)
        return RunOutcome(problem_id, policy, rep, config.seeds.policy, record=record)
    except Exception as exc:  # suite keeps going; failure lands in the manifest
        return RunOutcome(
            problem_id, policy, rep, config.seeds.policy, error=f"{type(exc).__name__}: {exc}"
        )


def run_suite(
    suite: SuiteConfig, seed_base: int = 0, parallel: int = 1, progress=None
) -> list[RunOutcome]:
    """Run every (problem, policy, replication) cell; failures are recorded
    and do not stop the suite. Output order is deterministic.
    """
    jobs = [
        (suite, problem, policy, rep, seed_base)
        for problem in suite.problems
        for policy in suite.policies
        for rep in range(suite.replications)
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(_execute, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_execute(job))
            if progress:
                progress(outcomes[-1])
    return outcomes


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def run_csv_rows(outcome: RunOutcome) -> list[list]:
    record = outcome.record
    trace = record.true_utility_trace
    regret = record.log_regret_trace
    rows = []
    for r in record.rows:
        rows.append(
            [outcome.problem, outcome.replication, r.n]
            + [_fmt(v) for v in r.x]
            + [_fmt(v) for v in r.y]
            + [
                _fmt(trace[r.n]) if trace is not None else "",
                _fmt(regret[r.n]) if regret is not None else "",
                outcome.policy,
                outcome.seed,
            ]
        )
    return rows


def write_outputs(outcomes: list[RunOutcome], out_dir) -> dict:
    """Write per-problem flat CSVs plus a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_problem: dict[str, list[RunOutcome]] = {}
    failures = []
    for oc in outcomes:
        if oc.error is not None:
            failures.append(
                {
                    "problem": oc.problem,
                    "policy": oc.policy,
                    "replication": oc.replication,
                    "error": oc.error,
                }
            )
            continue
        by_problem.setdefault(oc.problem, []).append(oc)

    for problem, ocs in by_problem.items():
        prob = get_problem(problem)
        d, k = prob.dim, prob.num_attributes
        header = (
            ["problem", "replication", "n"]
            + [f"x{i}" for i in range(d)]
            + [f"f{j}" for j in range(k)]
            + ["true_utility", "log_regret", "policy", "seed"]
        )
        pdir = out / problem
        pdir.mkdir(exist_ok=True)
        with open(pdir / "runs.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for oc in ocs:
                w.writerows(run_csv_rows(oc))
        with open(pdir / "runs.jsonl", "w") as fh:
            for oc in ocs:
                record = {
                    "problem": oc.problem,
                    "policy": oc.policy,
                    "replication": oc.replication,
                    **oc.record.to_json_dict(),
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    manifest = {
        "problems": sorted(by_problem),
        "completed": sum(len(v) for v in by_problem.values()),
        "failures": failures,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def aggregate(in_dir, out_path) -> list[dict]:
    """Reduce raw run CSVs to per-(problem, policy, n) statistics."""
    rows = []
    for csv_path in sorted(Path(in_dir).glob("*/runs.csv")):
        with open(csv_path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append(rec)
    if not rows:
        raise ContractError(f"no runs.csv files under {in_dir}")

    groups: dict[tuple, dict[str, list]] = {}
    for rec in rows:
        key = (rec["problem"], rec["policy"], int(rec["n"]))
        g = groups.setdefault(key, {"utility": [], "log_regret": []})
        if rec["true_utility"]:
            g["utility"].append(float(rec["true_utility"]))
        if rec["log_regret"]:
            g["log_regret"].append(float(rec["log_regret"]))

    out_rows = []
    for (problem, policy, n) in sorted(groups):
        g = groups[(problem, policy, n)]
        row = {"problem": problem, "policy": policy, "n": n}
        for name in ("utility", "log_regret"):
            vals = np.asarray(g[name])
            if vals.size:
                row[f"{name}_mean"] = _fmt(np.mean(vals))
                row[f"{name}_median"] = _fmt(np.median(vals))
                row[f"{name}_q25"] = _fmt(np.quantile(vals, 0.25))
                row[f"{name}_q75"] = _fmt(np.quantile(vals, 0.75))
            else:
                for stat in ("mean", "median", "q25", "q75"):
                    row[f"{name}_{stat}"] = ""
        row["count"] = max(len(g["utility"]), len(g["log_regret"]))
        out_rows.append(row)

    fieldnames = list(out_rows[0].keys())
    with open(out_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(out_rows)
    return out_rows


def plot_data(results_path, out_path) -> dict:
    """Convert aggregated results into per-policy traces ready to plot."""
    with open(results_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ContractError(f"{results_path} holds no aggregated rows")
    curves: dict = {"version": 1, "problems": {}}
    for rec in rows:
        prob = curves["problems"].setdefault(rec["problem"], {"policies": {}})
        pol = prob["policies"].setdefault(
            rec["policy"],
            {"n": [], "utility_median": [], "utility_q25": [], "utility_q75": [],
             "log_regret_median": []},
        )
        pol["n"].append(int(rec["n"]))
        pol["utility_median"].append(_opt_float(rec["utility_median"]))
        pol["utility_q25"].append(_opt_float(rec["utility_q25"]))
        pol["utility_q75"].append(_opt_float(rec["utility_q75"]))
        pol["log_regret_median"].append(_opt_float(rec["log_regret_median"]))
    with open(out_path, "w") as fh:
        json.dump(curves, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return curves


def _opt_float(s):
    return float(s) if s else None


def final_utilities(outcomes: list[RunOutcome], problem: str, policy: str) -> np.ndarray:
    """Final-iteration true utility per replication, ordered by replication."""
    picked = sorted(
        (oc for oc in outcomes
         if oc.problem == problem and oc.policy == policy and oc.record is not None),
        key=lambda oc: oc.replication,
    )
    return np.array([oc.record.true_utility_trace[-1] for oc in picked])


def sign_test_greater(a: np.ndarray, b: np.ndarray) -> float:
    """One-sided sign test p-value for median(a - b) > 0, ties dropped."""
    diffs = np.asarray(a) - np.asarray(b)
    wins = int(np.sum(diffs > 0))
    trials = int(np.sum(diffs != 0))
    if trials == 0:
        return 1.0
    # P(X >= wins) for X ~ Binomial(trials, 1/2)
    return float(
        sum(math.comb(trials, t) for t in range(wins, trials + 1)) * 0.5**trials
    )
