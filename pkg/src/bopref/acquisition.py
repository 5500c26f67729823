"""Acquisition policies for selecting the next design to evaluate when the
decision-maker's utility parameters are uncertain.

Two policies are implemented. The expected-improvement policy scores a
candidate by the expected positive utility gain over the best evaluated
design, averaged over both the GP posterior on the attributes and the
sampled posterior on the utility parameters; it is estimated by Monte
Carlo in general, with closed forms for linear and threshold utilities,
and maximized by multi-start projected stochastic gradient ascent using a
pathwise (reparameterized) gradient estimator. The Thompson-style policy
draws one utility parameter and one lazily sampled posterior path of the
attribute function and optimizes their composition directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .errors import BoundaryError, ContractError
from .gp import (
    GPState,
    SamplePath,
    posterior,
    posterior_with_gradients,
)
from .preference import ThetaPosterior
from .utility import LinearUtility, ThresholdUtility, UtilityFamily


@dataclass(frozen=True)
class SgaConfig:
    """Budgets for acquisition maximization and Thompson selection.

    Stochastic gradient steps use the schedule step_a / (step_b + t),
    projected onto the design box; ``step_a`` defaults to 0.6 times the box
    width per dimension.
    """

    restarts: int = 10
    steps: int = 120
    step_a: float | None = None
    step_b: float = 10.0
    grad_samples: int = 32
    ranking_samples: int = 2048
    ts_probes: int = 512
    ts_pattern_iters: int = 20

    def __post_init__(self):
        if self.restarts < 1 or self.steps < 1 or self.grad_samples < 1:
            raise ContractError("SGA counts must be >= 1")
        if self.ranking_samples < 1:
            raise ContractError("ranking_samples must be >= 1")
        if self.step_a is not None and not self.step_a > 0:
            raise ContractError("step_a must be positive")


@dataclass(frozen=True)
class AcquisitionContext:
    """Everything a policy needs: GP state, utility-parameter samples, the
    per-sample incumbent utilities over evaluated designs, and the box.

    ``incumbents[s]`` is exactly max_i U(attrs_i; theta_s); for threshold
    utilities it is -inf when no evaluated design is feasible for that
    parameter, and ``objective_floor`` (the minimum observed first
    attribute) anchors the incumbent-free improvement.
    """

    gp: GPState
    thetas: np.ndarray
    fam: UtilityFamily
    incumbents: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    evaluated_attrs: np.ndarray
    objective_floor: float

    @property
    def num_theta(self) -> int:
        return self.thetas.shape[0]


def make_context(
    gp: GPState,
    thetas: ThetaPosterior | np.ndarray,
    fam: UtilityFamily,
    evaluated_attrs,
    lower,
    upper,
) -> AcquisitionContext:
    """Assemble a context, recomputing incumbents from the evaluated set."""
    samples = thetas.samples if isinstance(thetas, ThetaPosterior) else np.asarray(thetas)
    samples = np.atleast_2d(samples)
    attrs = np.atleast_2d(np.asarray(evaluated_attrs, dtype=float))
    incumbents = np.array(
        [float(np.max(fam.value_batch(attrs, t))) for t in samples]
    )
    return AcquisitionContext(
        gp=gp,
        thetas=samples,
        fam=fam,
        incumbents=incumbents,
        lower=np.asarray(lower, dtype=float).ravel(),
        upper=np.asarray(upper, dtype=float).ravel(),
        evaluated_attrs=attrs,
        objective_floor=float(np.min(attrs[:, 0])),
    )


# ---------------------------------------------------------------------------
# Monte Carlo estimator and gradient
# ---------------------------------------------------------------------------


def _improvements(Y, theta, incumbent, ctx) -> np.ndarray:
    """Positive-part utility improvements of sampled attribute rows."""
    if np.isneginf(incumbent):
        # no feasible incumbent for this theta (threshold family): reward
        # feasible draws by their headroom over the observed objective floor
        feas = Y[:, 1] >= theta[0]
        return np.where(feas, np.maximum(Y[:, 0] - ctx.objective_floor, 0.0), 0.0)
    vals = ctx.fam.value_batch(Y, theta)
    return np.maximum(vals - incumbent, 0.0)


def ei_uu_mc(x, ctx: AcquisitionContext, num_samples: int, seed) -> tuple[float, float]:
    """Monte Carlo estimate of the expected utility improvement at x.

    Parameter samples are cycled (stratified) across the Monte Carlo draws
    and the GP hyperparameter ensemble is averaged. Returns (estimate,
    standard error); the standard error treats each parameter stratum as a
    block. The same seed reproduces the same draw sequence regardless of x,
    so estimates at different points are coherently comparable.
    """
    if num_samples < 1:
        raise ContractError("num_samples must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    S = ctx.num_theta
    H = ctx.gp.ensemble_size
    k = ctx.gp.num_outputs
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((num_samples, k))
    idx = np.arange(num_samples) % S

    alpha = np.zeros(num_samples)
    for h in range(H):
        mean, var, std = posterior(x, ctx.gp, h)
        Y = mean[None, :] + std[None, :] * Z
        for s in range(S):
            rows = idx == s
            if not np.any(rows):
                continue
            alpha[rows] += _improvements(Y[rows], ctx.thetas[s], ctx.incumbents[s], ctx)
    alpha /= H

    estimate = float(np.mean(alpha))
    if num_samples >= 2 * S and S > 1:
        block_var = 0.0
        for s in range(S):
            rows = alpha[idx == s]
            n_s = rows.shape[0]
            block_var += (n_s / num_samples) ** 2 * float(np.var(rows, ddof=1)) / n_s
        se = math.sqrt(block_var)
    elif num_samples >= 2:
        se = float(np.std(alpha, ddof=1)) / math.sqrt(num_samples)
    else:
        se = float("inf")
    return estimate, se


def ei_uu_grad_estimate(x, ctx: AcquisitionContext, num_samples: int, seed) -> np.ndarray:
    """Unbiased pathwise estimate of the gradient of the expected utility
    improvement at an interior point.

    Each draw contributes zero when the sampled utility does not improve on
    the incumbent, and otherwise the chain-rule gradient through the
    posterior mean and (diagonal) posterior standard deviation. Uses the
    same draw sequence as :func:`ei_uu_mc` for a given seed, so
    common-random-number finite differences of the value estimator agree
    with this estimator.
    """
    if num_samples < 1:
        raise ContractError("num_samples must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    S = ctx.num_theta
    H = ctx.gp.ensemble_size
    k = ctx.gp.num_outputs
    d = x.shape[0]
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((num_samples, k))
    idx = np.arange(num_samples) % S

    total = np.zeros(d)
    for h in range(H):
        mean, var, dmean, dvar = posterior_with_gradients(x, ctx.gp, h)
        std = np.sqrt(var)
        with np.errstate(divide="ignore", invalid="ignore"):
            dstd = np.where(var[:, None] > 0.0, dvar / (2.0 * std[:, None]), 0.0)
        Y = mean[None, :] + std[None, :] * Z
        for s in range(S):
            rows = np.where(idx == s)[0]
            if rows.size == 0:
                continue
            theta = ctx.thetas[s]
            inc = ctx.incumbents[s]
            Ys = Y[rows]
            Zs = Z[rows]
            if np.isneginf(inc):
                improving = (Ys[:, 1] >= theta[0]) & (Ys[:, 0] > ctx.objective_floor)
                if np.any(improving):
                    m = int(np.sum(improving))
                    total += m * dmean[0] + np.sum(Zs[improving, 0]) * dstd[0]
            else:
                vals = ctx.fam.value_batch(Ys, theta)
                improving = vals > inc
                if np.any(improving):
                    G = ctx.fam.grad_batch(Ys[improving], theta)
                    total += G.sum(axis=0) @ dmean
                    total += (G * Zs[improving]).sum(axis=0) @ dstd
    return total / (H * num_samples)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def linear_improvement_value(mean, var, weights, incumbents) -> float:
    """Closed-form expected improvement for linear utilities, averaged over
    weight rows, from diagonal posterior moments at a single point.
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    inc = np.asarray(incumbents, dtype=float)
    delta = W @ mean - inc
    sigma = np.sqrt(np.maximum((W * W) @ var, 0.0))
    out = np.maximum(delta, 0.0)
    pos = sigma > 0.0
    if np.any(pos):
        zeta = delta[pos] / sigma[pos]
        out[pos] = delta[pos] * norm.cdf(zeta) + sigma[pos] * norm.pdf(zeta)
    return float(np.mean(out))


def ei_uu_linear(x, ctx: AcquisitionContext) -> float:
    """Exact expected utility improvement for the linear family, averaged
    over parameter samples and the GP hyperparameter ensemble.
    """
    fam = _require_linear(ctx)
    x = np.asarray(x, dtype=float).ravel()
    W = fam.weight_matrix(ctx.thetas)
    vals = []
    for h in range(ctx.gp.ensemble_size):
        mean, var, _ = posterior(x, ctx.gp, h)
        vals.append(linear_improvement_value(mean, var, W, ctx.incumbents))
    return float(np.mean(vals))


def ei_uu_linear_grad(x, ctx: AcquisitionContext) -> np.ndarray:
    """Exact gradient of :func:`ei_uu_linear` at an interior point.

    Raises :class:`BoundaryError` if any parameter sample sees zero
    posterior spread at x (the closed form is not differentiable there).
    """
    fam = _require_linear(ctx)
    x = np.asarray(x, dtype=float).ravel()
    W = fam.weight_matrix(ctx.thetas)
    total = np.zeros(x.shape[0])
    for h in range(ctx.gp.ensemble_size):
        mean, var, dmean, dvar = posterior_with_gradients(x, ctx.gp, h)
        delta = W @ mean - ctx.incumbents
        sig2 = (W * W) @ var
        if np.any(sig2 <= 0.0):
            raise BoundaryError(
                "zero posterior spread for a parameter sample; gradient undefined"
            )
        sigma = np.sqrt(sig2)
        zeta = delta / sigma
        term1 = norm.cdf(zeta)[:, None] * (W @ dmean)
        term2 = (norm.pdf(zeta) / (2.0 * sigma))[:, None] * ((W * W) @ dvar)
        total += np.mean(term1 + term2, axis=0)
    return total / ctx.gp.ensemble_size


def _scalar_ei(mu, sigma, best) -> np.ndarray:
    """Standard expected improvement of N(mu, sigma^2) over ``best``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    best = np.asarray(best, dtype=float)
    delta = mu - best
    out = np.maximum(delta, 0.0)
    pos = sigma > 0.0
    if np.any(pos):
        z = delta[pos] / sigma[pos]
        out[pos] = delta[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return out


def ei_uu_threshold(x, ctx: AcquisitionContext) -> float:
    """Closed-form expected utility improvement for the threshold family.

    Per parameter sample: expected improvement on the first attribute over
    the best feasible evaluated value, times the posterior probability that
    the second attribute clears the threshold. When no evaluated design is
    feasible for a sample, the minimum observed first attribute replaces
    the incumbent so the term stays finite and feasibility-seeking.
    """
    if not isinstance(ctx.fam, ThresholdUtility):
        raise ContractError("ei_uu_threshold requires the threshold family")
    x = np.asarray(x, dtype=float).ravel()
    th = ctx.thetas[:, 0]
    no_inc = np.isneginf(ctx.incumbents)
    best = np.where(no_inc, ctx.objective_floor, ctx.incumbents)
    vals = []
    for h in range(ctx.gp.ensemble_size):
        mean, var, std = posterior(x, ctx.gp, h)
        if std[1] > 0.0:
            pof = norm.cdf((mean[1] - th) / std[1])
        else:
            pof = (mean[1] >= th).astype(float)
        ei = _scalar_ei(np.full_like(th, mean[0]), np.full_like(th, std[0]), best)
        vals.append(float(np.mean(pof * ei)))
    return float(np.mean(vals))


def _require_linear(ctx) -> LinearUtility:
    if not isinstance(ctx.fam, LinearUtility):
        raise ContractError("operation requires the linear utility family")
    return ctx.fam


# ---------------------------------------------------------------------------
# Maximization
# ---------------------------------------------------------------------------


@dataclass
class MaximizeDiagnostics:
    value: float
    flat: bool = False
    candidates: int = 0
    starts: list = field(default_factory=list)


def _closed_form(ctx) -> str | None:
    if isinstance(ctx.fam, LinearUtility):
        return "linear"
    if isinstance(ctx.fam, ThresholdUtility):
        return "threshold"
    return None


def _rank_value(x, ctx, cfg, seed) -> float:
    form = _closed_form(ctx)
    if form == "linear":
        return ei_uu_linear(x, ctx)
    if form == "threshold":
        return ei_uu_threshold(x, ctx)
    return ei_uu_mc(x, ctx, cfg.ranking_samples, seed)[0]


def _grad(x, ctx, cfg, seed) -> np.ndarray:
    if isinstance(ctx.fam, LinearUtility):
        try:
            return ei_uu_linear_grad(x, ctx)
        except BoundaryError:
            return np.zeros_like(np.asarray(x, dtype=float))
    return ei_uu_grad_estimate(x, ctx, cfg.grad_samples, seed)


def _best_evaluated(ctx) -> np.ndarray:
    """Evaluated design whose attributes score best on average over the
    parameter samples (threshold infeasibility treated as very poor).
    """
    scores = np.zeros(ctx.evaluated_attrs.shape[0])
    for t in ctx.thetas:
        v = ctx.fam.value_batch(ctx.evaluated_attrs, t)
        scores += np.where(np.isfinite(v), v, -1e30)
    return ctx.gp.train_inputs[int(np.argmax(scores))]


def maximize_acquisition(
    ctx: AcquisitionContext, cfg: SgaConfig, seed
) -> tuple[np.ndarray, MaximizeDiagnostics]:
    """Maximize the expected-improvement acquisition over the design box.

    Runs ``cfg.restarts`` projected stochastic-gradient ascents (exact
    gradients for the linear family) from Latin-hypercube starts plus a
    small perturbation of the best evaluated design, then ranks the final
    iterates together with every start under one shared high-precision
    evaluation seed and returns the argmax. If every ranked value is zero
    the acquisition is flat and a uniform point is returned with the
    ``flat`` diagnostic set. Deterministic given the seed.
    """
    lower, upper = ctx.lower, ctx.upper
    d = lower.shape[0]
    width = upper - lower
    step_a = np.full(d, cfg.step_a) if cfg.step_a is not None else 0.6 * width

    n_lhs = max(cfg.restarts - 1, 1)
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(_seq(seed, 1)))
    starts = [lower + width * row for row in sampler.random(n_lhs)]
    if ctx.evaluated_attrs.shape[0] and cfg.restarts > 1:
        rng = np.random.default_rng(_seq(seed, 2))
        jitter = 0.01 * width * rng.standard_normal(d)
        starts.append(np.clip(_best_evaluated(ctx) + jitter, lower, upper))

    finals = []
    for r, x0 in enumerate(starts):
        x = x0.copy()
        for t in range(1, cfg.steps + 1):
            g = _grad(x, ctx, cfg, _seq(seed, 3, r, t))
            if not np.all(np.isfinite(g)):
                continue
            x = np.clip(x + step_a / (cfg.step_b + t) * g, lower, upper)
        finals.append(x)

    candidates = finals + starts
    rank_seed = _seq(seed, 4)
    values = [_rank_value(c, ctx, cfg, rank_seed) for c in candidates]
    best = int(np.argmax(values))
    if values[best] <= 0.0:
        rng = np.random.default_rng(_seq(seed, 5))
        x = rng.uniform(lower, upper)
        return x, MaximizeDiagnostics(
            value=0.0, flat=True, candidates=len(candidates), starts=starts
        )
    return candidates[best], MaximizeDiagnostics(
        value=float(values[best]), flat=False, candidates=len(candidates),
        starts=starts,
    )


def _seq(seed, *tags) -> list:
    if isinstance(seed, (list, tuple)):
        return [*seed, *tags]
    return [int(seed), *tags]


# ---------------------------------------------------------------------------
# Thompson-style selection
# ---------------------------------------------------------------------------


@dataclass
class ThompsonDiagnostics:
    utility: float
    theta_index: int
    member: int
    queries: int


def ts_uu_select(
    ctx: AcquisitionContext, cfg: SgaConfig, seed
) -> tuple[np.ndarray, ThompsonDiagnostics]:
    """Select the next design by optimizing one joint posterior draw.

    Draws one utility-parameter sample and one GP hyperparameter member,
    then maximizes the sampled utility of a lazily sampled posterior path:
    a scrambled-Sobol probe stage followed by coordinate pattern search
    with a shrinking step, all conditioning the same path record.
    Deterministic given the seed.
    """
    rng = np.random.default_rng(_seq(seed, 0))
    s = int(rng.integers(ctx.num_theta))
    member = int(rng.integers(ctx.gp.ensemble_size))
    theta = ctx.thetas[s]
    path = SamplePath(ctx.gp, member=member, seed=_seq(seed, 1))

    lower, upper = ctx.lower, ctx.upper
    d = lower.shape[0]
    width = upper - lower

    def score(pt) -> float:
        v = ctx.fam.value(path.value(pt), theta)
        return v if np.isfinite(v) else -np.inf

    sobol = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(_seq(seed, 2)))
    with warnings.catch_warnings():
        # arbitrary probe budgets are fine here; balance is irrelevant
        warnings.simplefilter("ignore", UserWarning)
        probes = lower + width * sobol.random(cfg.ts_probes)
    best_x = probes[0].copy()
    best_v = -np.inf
    queries = 0
    for pt in probes:
        v = score(pt)
        queries += 1
        if v > best_v:
            best_v = v
            best_x = pt.copy()

    step = 0.10 * width
    for _ in range(cfg.ts_pattern_iters):
        improved = False
        for i in range(d):
            for sign in (1.0, -1.0):
                cand = best_x.copy()
                cand[i] = float(np.clip(cand[i] + sign * step[i], lower[i], upper[i]))
                if np.array_equal(cand, best_x):
                    continue
                v = score(cand)
                queries += 1
                if v > best_v:
                    best_v = v
                    best_x = cand
                    improved = True
        if not improved:
            step *= 0.5
    return best_x, ThompsonDiagnostics(
        utility=float(best_v), theta_index=s, member=member, queries=queries
    )
