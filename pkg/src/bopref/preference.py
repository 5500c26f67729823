"""Pairwise preference elicitation and posterior sampling over utility
parameters.

Responses compare two attribute vectors: a = 1 prefers the first, a = -1
the second, a = 0 is indifference. The parameter posterior is represented
purely by samples: rejection sampling under the exact (noise-free)
response likelihood, self-normalized importance sampling under probit or
logit likelihoods, and exact renormalization for finite-support priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ContractError, NotReadyError
from .utility import FiniteUniformPrior, ThetaPrior, UtilityFamily

TIE_EPS = 1e-12

REJECTION_BUDGET = 10**6
MIN_ACCEPT_RATE = 1e-4


@dataclass(frozen=True)
class PreferenceRecord:
    """One answered pairwise query (interaction index m)."""

    m: int
    y: np.ndarray
    y_other: np.ndarray
    a: int

    def __post_init__(self):
        if self.a not in (-1, 0, 1):
            raise ContractError("response must be one of -1, 0, 1")
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "y_other", np.asarray(self.y_other, dtype=float))


@dataclass(frozen=True)
class LikelihoodSpec:
    """Response model: exact sign, or probit/logit with a noise scale."""

    kind: str = "exact"
    scale: float = 0.1

    def __post_init__(self):
        if self.kind not in ("exact", "probit", "logit"):
            raise ContractError(f"unknown likelihood kind: {self.kind!r}")
        if self.kind != "exact" and not self.scale > 0:
            raise ContractError("likelihood scale must be positive")


@dataclass
class PosteriorDiagnostics:
    acceptance_rate: float = 1.0
    fallback: bool = False
    draws_used: int = 0
    effective_sample_size: float | None = None


@dataclass(frozen=True)
class ThetaPosterior:
    """Sampled representation of the utility-parameter posterior."""

    samples: np.ndarray
    source: str
    diagnostics: PosteriorDiagnostics = field(default_factory=PosteriorDiagnostics)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    def summary(self) -> dict:
        """Per-coordinate mean and quantiles, plus sampler diagnostics."""
        qs = np.quantile(self.samples, [0.05, 0.25, 0.5, 0.75, 0.95], axis=0)
        return {
            "mean": [float(v) for v in np.mean(self.samples, axis=0)],
            "q05": [float(v) for v in qs[0]],
            "q25": [float(v) for v in qs[1]],
            "q50": [float(v) for v in qs[2]],
            "q75": [float(v) for v in qs[3]],
            "q95": [float(v) for v in qs[4]],
            "source": self.source,
            "fallback": self.diagnostics.fallback,
            "acceptance_rate": self.diagnostics.acceptance_rate,
        }


def respond(y, y_other, theta_true, fam: UtilityFamily, model: LikelihoodSpec, seed=0) -> int:
    """Simulated decision-maker response for one offered pair.

    Exact model: the sign of the utility difference, 0 on (numerical) ties.
    Probit/logit: a is +1 with probability Phi(delta/scale) (resp. the
    logistic cdf), never 0.
    """
    delta = fam.value(y, theta_true) - fam.value(y_other, theta_true)
    if model.kind == "exact":
        if np.isnan(delta) or abs(delta) <= TIE_EPS:
            return 0
        return 1 if delta > 0 else -1
    rng = np.random.default_rng(seed)
    z = delta / model.scale
    p_up = float(norm.cdf(z)) if model.kind == "probit" else 1.0 / (1.0 + math.exp(-np.clip(z, -700, 700)))
    return 1 if rng.uniform() < p_up else -1


def _deltas(thetas, record: PreferenceRecord, fam: UtilityFamily) -> np.ndarray:
    u = fam.value_theta_batch(record.y, thetas)
    v = fam.value_theta_batch(record.y_other, thetas)
    with np.errstate(invalid="ignore"):
        d = u - v
    # -inf minus -inf (both infeasible) is an exact tie
    d[np.isnan(d)] = 0.0
    return d


def _exact_mask(thetas, records, fam, strict_indifference) -> np.ndarray:
    mask = np.ones(thetas.shape[0], dtype=bool)
    for rec in records:
        d = _deltas(thetas, rec, fam)
        if rec.a == 1:
            mask &= d > TIE_EPS
        elif rec.a == -1:
            mask &= d < -TIE_EPS
        elif strict_indifference:
            mask &= np.abs(d) <= TIE_EPS
    return mask


def _log_likelihood(thetas, records, fam, model: LikelihoodSpec) -> np.ndarray:
    logw = np.zeros(thetas.shape[0])
    for rec in records:
        if rec.a == 0:
            continue
        z = rec.a * _deltas(thetas, rec, fam) / model.scale
        if model.kind == "probit":
            logw += norm.logcdf(z)
        else:
            logw += -np.logaddexp(0.0, -z)
    return logw


def _fallback_scale(prior, records, fam, rng) -> float:
    probe = prior.sample(rng, 512)
    meds = []
    for rec in records:
        d = np.abs(_deltas(probe, rec, fam))
        d = d[np.isfinite(d)]
        if d.size:
            meds.append(float(np.median(d)))
    base = float(np.median(meds)) if meds else 1.0
    return max(0.1 * base, 1e-6)


def posterior_sample(
    prior: ThetaPrior,
    records,
    fam: UtilityFamily,
    model: LikelihoodSpec,
    num_samples: int = 64,
    seed=0,
    *,
    strict_indifference: bool = True,
) -> ThetaPosterior:
    """Draw an equally weighted sample of size ``num_samples`` from the
    parameter posterior given the preference records.

    Exact likelihood keeps only parameters that reproduce every recorded
    response; if that eliminates (nearly) everything -- inconsistent or
    noisy answers -- the sampler falls back to a tempered logit likelihood
    and flags it in the diagnostics. ``strict_indifference=False`` treats
    a = 0 records as carrying no information, which suits live human
    sessions where exact utility ties cannot be expected.

    Deterministic given (prior, records, seed).
    """
    if num_samples < 1:
        raise ContractError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    records = list(records)
    if not records:
        return ThetaPosterior(samples=prior.sample(rng, num_samples), source="prior")

    if model.kind == "exact":
        if isinstance(prior, FiniteUniformPrior):
            pts = prior.points
            mask = _exact_mask(pts, records, fam, strict_indifference)
            if np.any(mask):
                kept = pts[mask]
                idx = rng.integers(0, kept.shape[0], size=num_samples)
                diag = PosteriorDiagnostics(
                    acceptance_rate=float(np.mean(mask)), draws_used=pts.shape[0]
                )
                return ThetaPosterior(kept[idx], "conditioned", diag)
            return _importance_posterior(
                prior, records, fam, None, num_samples, rng, fallback=True
            )

        accepted = []
        taken = 0
        batch = max(4 * num_samples, 1024)
        while taken < REJECTION_BUDGET:
            cand = prior.sample(rng, min(batch, REJECTION_BUDGET - taken))
            taken += cand.shape[0]
            keep = cand[_exact_mask(cand, records, fam, strict_indifference)]
            if keep.size:
                accepted.append(keep)
            count = sum(a.shape[0] for a in accepted)
            if count >= num_samples:
                samples = np.concatenate(accepted)[:num_samples]
                diag = PosteriorDiagnostics(
                    acceptance_rate=count / taken, draws_used=taken
                )
                return ThetaPosterior(samples, "conditioned", diag)
        count = sum(a.shape[0] for a in accepted)
        rate = count / taken
        if count and rate >= MIN_ACCEPT_RATE:
            # enough mass but a large requested sample: bootstrap the accepted set
            pool = np.concatenate(accepted)
            idx = rng.integers(0, pool.shape[0], size=num_samples)
            diag = PosteriorDiagnostics(acceptance_rate=rate, draws_used=taken)
            return ThetaPosterior(pool[idx], "conditioned", diag)
        return _importance_posterior(
            prior, records, fam, None, num_samples, rng, fallback=True
        )

    return _importance_posterior(prior, records, fam, model, num_samples, rng)


def _importance_posterior(
    prior, records, fam, model, num_samples, rng, fallback=False
) -> ThetaPosterior:
    if model is None or model.kind == "exact":
        model = LikelihoodSpec("logit", _fallback_scale(prior, records, fam, rng))
    proposals = max(16 * num_samples, 4096)
    if isinstance(prior, FiniteUniformPrior):
        cand = prior.points
    else:
        cand = prior.sample(rng, proposals)
    logw = _log_likelihood(cand, records, fam, model)
    logw -= np.max(logw)
    w = np.exp(logw)
    total = float(np.sum(w))
    if not np.isfinite(total) or total <= 0:
        w = np.ones(cand.shape[0])
        total = float(cand.shape[0])
    p = w / total
    ess = 1.0 / float(np.sum(p * p))
    idx = rng.choice(cand.shape[0], size=num_samples, p=p)
    diag = PosteriorDiagnostics(
        acceptance_rate=ess / cand.shape[0],
        fallback=fallback,
        draws_used=cand.shape[0],
        effective_sample_size=ess,
    )
    return ThetaPosterior(cand[idx], "conditioned", diag)


def select_query_pair(attributes, seed) -> tuple[int, int]:
    """Pick the next comparison pair uniformly over distinct index pairs of
    previously evaluated designs. Returns (i, j), i != j.
    """
    n = len(attributes)
    if n < 2:
        raise NotReadyError("need at least 2 evaluated designs to pose a query")
    rng = np.random.default_rng(seed)
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    return i, j
