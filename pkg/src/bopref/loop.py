"""The optimization loop: initial designs, interleaved preference queries
and model-guided evaluations, and performance accounting.

Every post-initialization evaluation is preceded by exactly one pairwise
preference query on previously evaluated designs. Policies ending in
``-npl`` skip preference learning and keep the parameter distribution at
its prior; the ``random`` policy picks designs uniformly. Runs are
deterministic given the three seeds (evaluation, dm, policy) and a
deterministic evaluation function.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    SgaConfig,
    make_context,
    maximize_acquisition,
    ts_uu_select,
)
from .errors import ContractError, RunAbortedError
from .gp import condition, fit_gp
from .preference import (
    LikelihoodSpec,
    PreferenceRecord,
    ThetaPosterior,
    posterior_sample,
    respond,
    select_query_pair,
)
from .problems import get_problem, utility_optimum
from .utility import family_from_config, prior_from_config

POLICIES = ("ei-uu", "ts-uu", "ei-uu-npl", "ts-uu-npl", "random")

REGRET_FLOOR = 1e-12


@dataclass(frozen=True)
class Seeds:
    evaluation: int = 0
    dm: int = 1
    policy: int = 2

    def __post_init__(self):
        for name in ("evaluation", "dm", "policy"):
            if getattr(self, name) < 0:
                raise ContractError("seeds must be nonnegative integers")


@dataclass(frozen=True)
class GpSettings:
    hyper_samples: int = 10
    map_restarts: int = 16
    nm_maxiter: int = 250
    refit_period: int = 1
    jitter_scale: float = 1e-8

    def __post_init__(self):
        if self.hyper_samples < 1 or self.refit_period < 1:
            raise ContractError("GP settings must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one optimization run.

    ``problem`` may name a built-in test problem (box and attribute count
    are then filled from it) or be None with an explicit box for external
    evaluation functions. ``theta_true`` configures a simulated
    decision-maker; live sessions leave it unset.
    """

    policy: str
    num_evaluations: int
    problem: str | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    num_attributes: int | None = None
    utility: dict = field(default_factory=dict)
    theta_prior: dict = field(default_factory=dict)
    likelihood: LikelihoodSpec = field(default_factory=LikelihoodSpec)
    init_count: int | None = None
    seeds: Seeds = field(default_factory=Seeds)
    theta_true: np.ndarray | None = None
    gp: GpSettings = field(default_factory=GpSettings)
    acq: SgaConfig = field(default_factory=SgaConfig)
    theta_samples: int = 64
    utility_optimum_value: float | None = None
    attribute_labels: tuple | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ContractError(f"unknown policy {self.policy!r}")
        if self.num_evaluations < 0:
            raise ContractError("num_evaluations must be >= 0")
        if self.theta_samples < 1:
            raise ContractError("theta_samples must be >= 1")
        if self.problem is not None:
            prob = get_problem(self.problem)
            object.__setattr__(self, "lower", prob.lower)
            object.__setattr__(self, "upper", prob.upper)
            object.__setattr__(self, "num_attributes", prob.num_attributes)
            if not self.utility:
                object.__setattr__(self, "utility", prob.default_utility)
            if not self.theta_prior:
                object.__setattr__(self, "theta_prior", prob.default_prior)
        if self.lower is None or self.upper is None or self.num_attributes is None:
            raise ContractError("need a problem id or an explicit box and k")
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape or np.any(lower >= upper):
            raise ContractError("design box must satisfy lower < upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.theta_true is not None:
            object.__setattr__(
                self, "theta_true", np.asarray(self.theta_true, dtype=float).ravel()
            )
        if self.init_count is not None and self.init_count < 2:
            raise ContractError("init_count must be >= 2")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def effective_init_count(self) -> int:
        return self.init_count if self.init_count is not None else 2 * (self.dim + 1)

    @property
    def learns_preferences(self) -> bool:
        return not self.policy.endswith("-npl")

    def build_family(self):
        return family_from_config(self.utility, self.num_attributes)

    def build_prior(self):
        return prior_from_config(self.theta_prior)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "num_evaluations": self.num_evaluations,
            "problem": self.problem,
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "num_attributes": int(self.num_attributes),
            "utility": self.utility,
            "theta_prior": self.theta_prior,
            "likelihood": {"kind": self.likelihood.kind, "scale": self.likelihood.scale},
            "init_count": self.init_count,
            "seeds": {
                "evaluation": self.seeds.evaluation,
                "dm": self.seeds.dm,
                "policy": self.seeds.policy,
            },
            "theta_true": None
            if self.theta_true is None
            else [float(v) for v in self.theta_true],
            "gp": {
                "hyper_samples": self.gp.hyper_samples,
                "map_restarts": self.gp.map_restarts,
                "nm_maxiter": self.gp.nm_maxiter,
                "refit_period": self.gp.refit_period,
                "jitter_scale": self.gp.jitter_scale,
            },
            "acq": {
                "restarts": self.acq.restarts,
                "steps": self.acq.steps,
                "step_a": self.acq.step_a,
                "step_b": self.acq.step_b,
                "grad_samples": self.acq.grad_samples,
                "ranking_samples": self.acq.ranking_samples,
                "ts_probes": self.acq.ts_probes,
                "ts_pattern_iters": self.acq.ts_pattern_iters,
            },
            "theta_samples": self.theta_samples,
            "utility_optimum_value": self.utility_optimum_value,
            "attribute_labels": list(self.attribute_labels)
            if self.attribute_labels
            else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        seeds = data.get("seeds") or {}
        gp = data.get("gp") or {}
        acq = data.get("acq") or {}
        lk = data.get("likelihood") or {}
        labels = data.get("attribute_labels")
        return cls(
            policy=str(data["policy"]).lower(),
            num_evaluations=int(data["num_evaluations"]),
            problem=data.get("problem"),
            lower=data.get("lower"),
            upper=data.get("upper"),
            num_attributes=data.get("num_attributes"),
            utility=data.get("utility") or {},
            theta_prior=data.get("theta_prior") or {},
            likelihood=LikelihoodSpec(
                kind=lk.get("kind", "exact"), scale=float(lk.get("scale", 0.1))
            ),
            init_count=data.get("init_count"),
            seeds=Seeds(
                evaluation=int(seeds.get("evaluation", 0)),
                dm=int(seeds.get("dm", 1)),
                policy=int(seeds.get("policy", 2)),
            ),
            theta_true=data.get("theta_true"),
            gp=GpSettings(
                hyper_samples=int(gp.get("hyper_samples", 10)),
                map_restarts=int(gp.get("map_restarts", 16)),
                nm_maxiter=int(gp.get("nm_maxiter", 250)),
                refit_period=int(gp.get("refit_period", 1)),
                jitter_scale=float(gp.get("jitter_scale", 1e-8)),
            ),
            acq=SgaConfig(
                restarts=int(acq.get("restarts", 10)),
                steps=int(acq.get("steps", 120)),
                step_a=acq.get("step_a"),
                step_b=float(acq.get("step_b", 10.0)),
                grad_samples=int(acq.get("grad_samples", 32)),
                ranking_samples=int(acq.get("ranking_samples", 2048)),
                ts_probes=int(acq.get("ts_probes", 512)),
                ts_pattern_iters=int(acq.get("ts_pattern_iters", 20)),
            ),
            theta_samples=int(data.get("theta_samples", 64)),
            utility_optimum_value=data.get("utility_optimum_value"),
            attribute_labels=tuple(labels) if labels else None,
        )


@dataclass
class IterationRow:
    n: int
    x: np.ndarray
    y: np.ndarray
    acq_value: float | None = None
    wall_time: float = 0.0


@dataclass
class RunRecord:
    """Everything a run produced, serializable for analysis."""

    config: ExperimentConfig
    rows: list
    preferences: list
    posterior_summaries: list
    pareto_indices: list
    true_utility_trace: list | None = None
    log_regret_trace: list | None = None

    @property
    def designs(self) -> np.ndarray:
        return np.array([r.x for r in self.rows])

    @property
    def attributes(self) -> np.ndarray:
        return np.array([r.y for r in self.rows])

    def to_json_dict(self, include_timing: bool = False) -> dict:
        rows = []
        for r in self.rows:
            row = {
                "n": r.n,
                "x": [float(v) for v in r.x],
                "y": [float(v) for v in r.y],
                "acq_value": None if r.acq_value is None else float(r.acq_value),
            }
            if include_timing:
                row["wall_time"] = float(r.wall_time)
            rows.append(row)
        return {
            "config": self.config.to_dict(),
            "rows": rows,
            "preferences": [
                {
                    "m": p.m,
                    "y": [float(v) for v in p.y],
                    "y_other": [float(v) for v in p.y_other],
                    "a": p.a,
                }
                for p in self.preferences
            ],
            "posterior_summaries": self.posterior_summaries,
            "pareto_indices": list(self.pareto_indices),
            "true_utility_trace": self.true_utility_trace,
            "log_regret_trace": self.log_regret_trace,
        }


def pareto_front(Y) -> list[int]:
    """Indices of attribute vectors not dominated under maximization.

    A vector is dominated when another is >= in every coordinate and > in
    at least one. Order-stable; empty input yields an empty list.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.size == 0:
        return []
    Y = np.atleast_2d(Y)
    n = Y.shape[0]
    keep = []
    for i in range(n):
        ge = np.all(Y >= Y[i], axis=1)
        gt = np.any(Y > Y[i], axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    return keep


def _derive(seed: int, *tags) -> list:
    return [int(seed), *tags]


def draw_initial_designs(lower, upper, count: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(lower, upper, size=(count, len(lower)))


def refresh_theta(config: ExperimentConfig, records, fam, prior, iteration: int,
                  *, strict_indifference: bool = True) -> ThetaPosterior:
    """Parameter posterior for the given iteration (prior draws for -npl)."""
    effective = records if config.learns_preferences else []
    return posterior_sample(
        prior,
        effective,
        fam,
        config.likelihood,
        num_samples=config.theta_samples,
        seed=_derive(config.seeds.policy, 3, iteration),
        strict_indifference=strict_indifference,
    )


def refit_models(config: ExperimentConfig, X, Y, iteration: int):
    return fit_gp(
        X,
        Y,
        config.lower,
        config.upper,
        hyper_samples=config.gp.hyper_samples,
        seed=_derive(config.seeds.policy, 4, iteration),
        map_restarts=config.gp.map_restarts,
        nm_maxiter=config.gp.nm_maxiter,
        jitter_scale=config.gp.jitter_scale,
    )


def select_next(config: ExperimentConfig, gp_state, thetas, fam, Y, iteration: int):
    """Pick the next design under the configured policy.

    Returns (x, acquisition_value_or_None).
    """
    if config.policy == "random":
        rng = np.random.default_rng(_derive(config.seeds.policy, 5, iteration))
        return rng.uniform(config.lower, config.upper), None
    ctx = make_context(gp_state, thetas, fam, Y, config.lower, config.upper)
    if config.policy.startswith("ei-uu"):
        x, diag = maximize_acquisition(
            ctx, config.acq, _derive(config.seeds.policy, 5, iteration)
        )
        return x, diag.value
    x, diag = ts_uu_select(ctx, config.acq, _derive(config.seeds.policy, 5, iteration))
    return x, diag.utility


def performance(record: RunRecord, theta_true, fam=None, u_star=None):
    """Running best true utility per evaluation, and log10 regret when the
    problem's optimal utility is known.
    """
    if theta_true is None:
        raise ContractError("true utility trace needs theta_true")
    fam = fam or record.config.build_family()
    vals = fam.value_batch(record.attributes, theta_true)
    trace = np.maximum.accumulate(vals)
    if u_star is None:
        u_star = record.config.utility_optimum_value
    log_regret = None
    if u_star is not None:
        log_regret = np.log10(np.maximum(u_star - trace, REGRET_FLOOR))
    return trace, log_regret


def run(config: ExperimentConfig, dm=None, evaluator=None) -> RunRecord:
    """Execute one full optimization run.

    ``evaluator`` maps a design vector to its attribute vector; defaults to
    the configured built-in problem. ``dm`` maps (y, y_other, m) to a
    response in {-1, 0, 1}; defaults to a simulated decision-maker using
    ``config.theta_true`` under the configured response likelihood.
    Raises :class:`RunAbortedError` (carrying the partial record) when the
    evaluation channel fails.
    """
    fam = config.build_family()
    prior = config.build_prior()

    if evaluator is None:
        if config.problem is None:
            raise ContractError("no evaluator and no built-in problem configured")
        problem = get_problem(config.problem)
        evaluator = problem.evaluate
    if dm is None:
        if config.theta_true is None:
            raise ContractError("simulated runs need theta_true (or pass dm=...)")
        theta_true = fam.validate_theta(config.theta_true)

        def dm(y, y_other, m):
            return respond(
                y, y_other, theta_true, fam, config.likelihood,
                seed=_derive(config.seeds.dm, 2, m),
            )

    init = config.effective_init_count
    X_init = draw_initial_designs(
        config.lower, config.upper, init, _derive(config.seeds.evaluation, 0)
    )

    rows: list[IterationRow] = []
    preferences: list[PreferenceRecord] = []
    summaries: list[dict] = []

    def evaluate_at(x, n, acq_value):
        t0 = time.perf_counter()
        try:
            y = np.asarray(evaluator(x), dtype=float).ravel()
        except Exception as exc:
            raise RunAbortedError(
                f"evaluation failed at n={n}: {exc}",
                partial_record=_partial(config, rows, preferences, summaries),
            ) from exc
        if y.shape[0] != config.num_attributes or not np.all(np.isfinite(y)):
            raise RunAbortedError(
                f"evaluation at n={n} returned invalid attributes",
                partial_record=_partial(config, rows, preferences, summaries),
            )
        rows.append(
            IterationRow(n=n, x=np.asarray(x, dtype=float).ravel(), y=y,
                         acq_value=acq_value, wall_time=time.perf_counter() - t0)
        )

    for n, x in enumerate(X_init):
        evaluate_at(x, n, None)

    hypers = None
    for it in range(config.num_evaluations):
        m = it + 1
        attrs = [r.y for r in rows]
        i, j = select_query_pair(attrs, _derive(config.seeds.dm, 1, m))
        a = int(dm(attrs[i], attrs[j], m))
        preferences.append(PreferenceRecord(m=m, y=attrs[i], y_other=attrs[j], a=a))

        thetas = refresh_theta(config, preferences, fam, prior, m)
        summaries.append(thetas.summary())

        if config.policy == "random":
            x_next, acq_value = select_next(config, None, thetas, fam, None, m)
        else:
            X = np.array([r.x for r in rows])
            Y = np.array([r.y for r in rows])
            if hypers is None or it % config.gp.refit_period == 0:
                gp_state = refit_models(config, X, Y, m)
                hypers = gp_state.hypers
            else:
                gp_state = condition(X, Y, hypers)
            x_next, acq_value = select_next(config, gp_state, thetas, fam, Y, m)

        evaluate_at(x_next, len(rows), acq_value)

    record = RunRecord(
        config=config,
        rows=rows,
        preferences=preferences,
        posterior_summaries=summaries,
        pareto_indices=pareto_front([r.y for r in rows]),
    )
    if config.theta_true is not None:
        u_star = config.utility_optimum_value
        if u_star is None and config.problem is not None:
            u_star = utility_optimum(
                get_problem(config.problem), fam, config.theta_true
            )
        trace, log_regret = performance(record, config.theta_true, fam, u_star)
        record.true_utility_trace = [float(v) for v in trace]
        record.log_regret_trace = (
            None if log_regret is None else [float(v) for v in log_regret]
        )
    return record


def _partial(config, rows, preferences, summaries) -> RunRecord:
    return RunRecord(
        config=config,
        rows=list(rows),
        preferences=list(preferences),
        posterior_summaries=list(summaries),
        pareto_indices=pareto_front([r.y for r in rows]) if rows else [],
    )
