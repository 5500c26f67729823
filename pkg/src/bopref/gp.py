"""Gaussian process regression for vector-valued black-box functions.

Each attribute output is modeled by an independent single-output GP with a
constant mean and an anisotropic (per-dimension lengthscale) Matern-5/2
kernel. Observations are noise-free; a small diagonal jitter keeps the
Cholesky factorization stable. Hyperparameters are inferred under
log-normal/normal priors, either as a single MAP point or as an ensemble
of posterior samples drawn by coordinate slice sampling around the MAP.

The model state is immutable once conditioned, so it can be shared freely
between workers. Sequentially consistent draws of the posterior (for
Thompson-style selection) go through :class:`SamplePath`, which conditions
lazily on every value it has produced so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import ContractError

_SQRT5 = math.sqrt(5.0)
_LOG2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelHyperparams:
    """Hyperparameters of one output's GP: ARD Matern-5/2 plus constant mean.

    ``jitter`` is the absolute value added to the training-kernel diagonal.
    """

    lengthscales: np.ndarray
    signal_variance: float
    constant_mean: float
    jitter: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if not np.all(ls > 0):
            raise ContractError("lengthscales must be positive")
        if not self.signal_variance > 0:
            raise ContractError("signal_variance must be positive")
        if self.jitter < 0:
            raise ContractError("jitter must be nonnegative")


def matern52(x, x_other, hyper: KernelHyperparams) -> float:
    """Matern-5/2 covariance between two points under ``hyper``.

    Symmetric in its point arguments. Raises :class:`ContractError` on a
    dimension mismatch.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_other = np.asarray(x_other, dtype=float).ravel()
    if x.shape != x_other.shape:
        raise ContractError(
            f"point dimensions differ: {x.shape[0]} vs {x_other.shape[0]}"
        )
    if x.shape[0] != hyper.lengthscales.shape[0]:
        raise ContractError("point dimension does not match lengthscales")
    r = math.sqrt(float(np.sum(((x - x_other) / hyper.lengthscales) ** 2)))
    u = _SQRT5 * r
    return float(hyper.signal_variance * (1.0 + u + u * u / 3.0) * math.exp(-u))


def kernel_matrix(X, X_other, hyper: KernelHyperparams) -> np.ndarray:
    """Cross-covariance matrix between two point sets (rows are points)."""
    Xs = np.asarray(X, dtype=float) / hyper.lengthscales
    Ys = np.asarray(X_other, dtype=float) / hyper.lengthscales
    r2 = cdist(Xs, Ys, "sqeuclidean")
    u = _SQRT5 * np.sqrt(np.maximum(r2, 0.0))
    return hyper.signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)


def _kernel_row(x, X, hyper: KernelHyperparams) -> np.ndarray:
    """Covariances k(x, X_i) for a single query point (cheap path)."""
    diff = (X - x[None, :]) / hyper.lengthscales
    r2 = np.einsum("ij,ij->i", diff, diff)
    u = _SQRT5 * np.sqrt(r2)
    return hyper.signal_variance * (1.0 + u + u * u / 3.0) * np.exp(-u)


def kernel_grad_first(x, X_other, hyper: KernelHyperparams) -> np.ndarray:
    """Gradient of k(x, x_i) with respect to x, for every row x_i.

    Returns an (m, d) array. The Matern-5/2 kernel is twice differentiable,
    so the gradient is well defined (and zero) at x == x_i.
    """
    x = np.asarray(x, dtype=float).ravel()
    X_other = np.asarray(X_other, dtype=float)
    diff = x[None, :] - X_other
    scaled = diff / hyper.lengthscales
    r = np.sqrt(np.maximum(np.sum(scaled * scaled, axis=1), 0.0))
    u = _SQRT5 * r
    coef = -hyper.signal_variance * (5.0 / 3.0) * (1.0 + u) * np.exp(-u)
    return coef[:, None] * diff / (hyper.lengthscales**2)


# ---------------------------------------------------------------------------
# Hyperparameter priors and fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperPrior:
    """Prior over (log lengthscales, log signal variance, constant mean).

    Log-normal on lengthscales and signal variance, normal on the mean.
    ``ls_log_median`` has one entry per design dimension.
    """

    ls_log_median: np.ndarray
    sv_log_median: float
    mean_loc: float
    mean_scale: float
    ls_log_sd: float = 1.0
    sv_log_sd: float = 1.0
    degenerate: bool = False

    @classmethod
    def from_data(cls, lower, upper, targets) -> "HyperPrior":
        """Default prior: lengthscale medians at a quarter of the box width,
        signal-variance median at the target variance, mean centered at the
        target mean. Constant targets get a floor-clamped variance median
        and are flagged degenerate.
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        targets = np.asarray(targets, dtype=float)
        widths = upper - lower
        if np.any(widths <= 0):
            raise ContractError("design box must have positive widths")
        var = float(np.var(targets))
        degenerate = var < 1e-12
        sv_median = max(var, 1e-6)
        mean_scale = max(2.0 * float(np.std(targets)), 1e-3)
        return cls(
            ls_log_median=np.log(0.25 * widths),
            sv_log_median=math.log(sv_median),
            mean_loc=float(np.mean(targets)),
            mean_scale=mean_scale,
            degenerate=degenerate,
        )

    @property
    def dim(self) -> int:
        return self.ls_log_median.shape[0]

    def log_density(self, z: np.ndarray) -> float:
        """Log prior density of the packed vector [log ls, log sv, mean]."""
        d = self.dim
        t = 0.0
        t += -0.5 * float(
            np.sum(((z[:d] - self.ls_log_median) / self.ls_log_sd) ** 2)
        )
        t += -0.5 * ((z[d] - self.sv_log_median) / self.sv_log_sd) ** 2
        t += -0.5 * ((z[d + 1] - self.mean_loc) / self.mean_scale) ** 2
        return t

    def sample_packed(self, rng: np.random.Generator) -> np.ndarray:
        d = self.dim
        z = np.empty(d + 2)
        z[:d] = rng.normal(self.ls_log_median, self.ls_log_sd)
        z[d] = rng.normal(self.sv_log_median, self.sv_log_sd)
        z[d + 1] = rng.normal(self.mean_loc, self.mean_scale)
        return z

    def packed_median(self) -> np.ndarray:
        return np.concatenate(
            [self.ls_log_median, [self.sv_log_median, self.mean_loc]]
        )


@dataclass(frozen=True)
class FitDiagnostics:
    degenerate: bool
    map_log_posterior: float
    restarts: int


def _unpack(z: np.ndarray, d: int, jitter_scale: float) -> KernelHyperparams:
    sv = math.exp(min(float(z[d]), 40.0))
    return KernelHyperparams(
        lengthscales=np.exp(np.clip(z[:d], -30.0, 30.0)),
        signal_variance=sv,
        constant_mean=float(z[d + 1]),
        jitter=jitter_scale * sv,
    )


def log_marginal_likelihood(X, y, hyper: KernelHyperparams) -> float:
    """Exact log marginal likelihood of noise-free data under ``hyper``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    K = kernel_matrix(X, X, hyper)
    K[np.diag_indices_from(K)] += hyper.jitter
    try:
        L = _cholesky(K, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return -np.inf
    r = y - hyper.constant_mean
    v = solve_triangular(L, r, lower=True, check_finite=False)
    return float(
        -0.5 * np.dot(v, v) - np.sum(np.log(np.diag(L))) - 0.5 * n * _LOG2PI
    )


def _log_posterior(z, X, y, prior: HyperPrior, jitter_scale: float) -> float:
    if not np.all(np.isfinite(z)) or np.any(np.abs(z[: prior.dim + 1]) > 35.0):
        return -np.inf
    hyper = _unpack(z, prior.dim, jitter_scale)
    lml = log_marginal_likelihood(X, y, hyper)
    if not np.isfinite(lml):
        return -np.inf
    return lml + prior.log_density(z)


def _make_log_posterior(X, y, prior: HyperPrior, jitter_scale: float):
    """Closure over precomputed pairwise differences; same value as
    :func:`_log_posterior` but much cheaper to evaluate repeatedly.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2
    const = -0.5 * n * _LOG2PI
    diag = np.diag_indices(n)

    def logpost(z: np.ndarray) -> float:
        if not np.all(np.isfinite(z)) or np.any(np.abs(z[: d + 1]) > 35.0):
            return -np.inf
        inv_ls2 = np.exp(-2.0 * z[:d])
        sv = math.exp(z[d])
        u = _SQRT5 * np.sqrt(diff2 @ inv_ls2)
        K = sv * (1.0 + u + u * u / 3.0) * np.exp(-u)
        K[diag] += jitter_scale * sv
        try:
            L = _cholesky(K, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return -np.inf
        r = y - z[d + 1]
        v = solve_triangular(L, r, lower=True, check_finite=False)
        lml = -0.5 * float(v @ v) - float(np.sum(np.log(np.diag(L)))) + const
        return lml + prior.log_density(z)

    return logpost


def _slice_sweep(z, logpost, fn, rng, widths, max_steps=32):
    """One sweep of univariate stepping-out slice sampling over coordinates."""
    z = z.copy()
    for i in range(z.shape[0]):
        level = logpost + math.log(rng.uniform(1e-300, 1.0))
        w = widths[i]
        lo = z[i] - w * rng.uniform()
        hi = lo + w
        steps = max_steps
        while steps > 0 and fn(_with(z, i, lo)) > level:
            lo -= w
            steps -= 1
        steps = max_steps
        while steps > 0 and fn(_with(z, i, hi)) > level:
            hi += w
            steps -= 1
        while True:
            cand = rng.uniform(lo, hi)
            cand_lp = fn(_with(z, i, cand))
            if cand_lp > level:
                z[i] = cand
                logpost = cand_lp
                break
            if cand < z[i]:
                lo = cand
            else:
                hi = cand
            if hi - lo < 1e-12:
                break
    return z, logpost


def _with(z, i, v):
    out = z.copy()
    out[i] = v
    return out


def fit_hyperparameters(
    X,
    y,
    prior: HyperPrior,
    num_samples: int = 10,
    *,
    seed=0,
    map_restarts: int = 16,
    nm_maxiter: int = 250,
    jitter_scale: float = 1e-8,
    slice_burn: int = 4,
    slice_thin: int = 2,
) -> tuple[list[KernelHyperparams], FitDiagnostics]:
    """Fit one output's hyperparameters from noise-free data.

    ``num_samples == 1`` returns the MAP setting found by multi-start
    Nelder-Mead over the packed log parameters; larger counts return that
    many slice-sampling draws from the hyperparameter posterior, started at
    the MAP. Deterministic given ``seed``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 2:
        raise ContractError("need at least 2 training points")
    if num_samples < 1:
        raise ContractError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    fn = _make_log_posterior(X, y, prior, jitter_scale)
    neg = lambda z: -fn(z)

    best_z, best_lp = None, -np.inf
    for r in range(max(map_restarts, 1)):
        z0 = prior.packed_median() if r == 0 else prior.sample_packed(rng)
        res = minimize(
            neg,
            z0,
            method="Nelder-Mead",
            options={"maxiter": nm_maxiter, "xatol": 1e-3, "fatol": 1e-4},
        )
        if -res.fun > best_lp:
            best_lp = -res.fun
            best_z = res.x
    if best_z is None or not np.isfinite(best_lp):
        best_z = prior.packed_median()
        best_lp = fn(best_z)

    diag = FitDiagnostics(
        degenerate=prior.degenerate,
        map_log_posterior=float(best_lp),
        restarts=map_restarts,
    )
    if num_samples == 1:
        return [_unpack(best_z, prior.dim, jitter_scale)], diag

    widths = np.concatenate(
        [
            np.full(prior.dim, prior.ls_log_sd),
            [prior.sv_log_sd, max(prior.mean_scale, 1e-3)],
        ]
    )
    z, lp = best_z.copy(), best_lp
    for _ in range(slice_burn):
        z, lp = _slice_sweep(z, lp, fn, rng, widths)
    draws = []
    while len(draws) < num_samples:
        for _ in range(slice_thin):
            z, lp = _slice_sweep(z, lp, fn, rng, widths)
        draws.append(_unpack(z, prior.dim, jitter_scale))
    return draws, diag


# ---------------------------------------------------------------------------
# Conditioning and posterior queries
# ---------------------------------------------------------------------------


class Posterior(NamedTuple):
    """Per-output posterior moments at one point (diagonal across outputs)."""

    mean: np.ndarray
    var: np.ndarray
    std: np.ndarray


def _chol_with_jitter(K: np.ndarray, base_jitter: float):
    """Cholesky of K + jitter*I, doubling the jitter up to 6 times."""
    jitter = base_jitter
    for attempt in range(7):
        try:
            Kj = K.copy()
            Kj[np.diag_indices_from(Kj)] += jitter
            return _cholesky(Kj, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            jitter = max(jitter * 2.0, 1e-300)
            if attempt == 0 and base_jitter == 0.0:
                jitter = 1e-12 * float(np.max(np.diag(K)))
    raise np.linalg.LinAlgError(
        "training kernel matrix not positive definite after jitter escalation"
    )


@dataclass(frozen=True)
class GPState:
    """Immutable conditioned multi-output GP.

    ``hypers[j]`` is the hyperparameter ensemble for output j; all outputs
    share the same training inputs and ensemble size. ``chols`` and
    ``weights`` hold, per output and ensemble member, the lower Cholesky
    factor of the jittered training kernel and the solve of that factor
    pair against the centered targets.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    hypers: tuple
    chols: np.ndarray
    weights: np.ndarray

    @property
    def num_train(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def num_outputs(self) -> int:
        return self.train_targets.shape[1]

    @property
    def ensemble_size(self) -> int:
        return len(self.hypers[0])


def condition(X, Y, hypers: Sequence[Sequence[KernelHyperparams]]) -> GPState:
    """Condition k independent GPs on shared inputs X and targets Y (n, k).

    ``hypers`` must provide an equal-length ensemble per output. The jitter
    actually used (after any escalation) is written back into the stored
    hyperparameters so downstream algebra stays self-consistent.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, k = Y.shape
    if X.shape[0] != n:
        raise ContractError("inputs and targets disagree on point count")
    if len(hypers) != k:
        raise ContractError("need one hyperparameter ensemble per output")
    H = len(hypers[0])
    if any(len(ens) != H for ens in hypers):
        raise ContractError("ensemble sizes differ across outputs")

    chols = np.empty((k, H, n, n))
    weights = np.empty((k, H, n))
    stored = []
    for j in range(k):
        members = []
        for h, hyper in enumerate(hypers[j]):
            K = kernel_matrix(X, X, hyper)
            L, used = _chol_with_jitter(K, hyper.jitter)
            if used != hyper.jitter:
                hyper = replace(hyper, jitter=used)
            r = Y[:, j] - hyper.constant_mean
            v = solve_triangular(L, r, lower=True, check_finite=False)
            alpha = solve_triangular(L.T, v, lower=False, check_finite=False)
            chols[j, h] = L
            weights[j, h] = alpha
            members.append(hyper)
        stored.append(tuple(members))
    return GPState(
        train_inputs=X,
        train_targets=Y,
        hypers=tuple(stored),
        chols=chols,
        weights=weights,
    )


def fit_gp(
    X,
    Y,
    lower,
    upper,
    *,
    hyper_samples: int = 10,
    seed=0,
    map_restarts: int = 16,
    nm_maxiter: int = 250,
    jitter_scale: float = 1e-8,
) -> GPState:
    """Fit hyperparameters for every output and condition on the data."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    ensembles = []
    for j in range(Y.shape[1]):
        prior = HyperPrior.from_data(lower, upper, Y[:, j])
        ens, _ = fit_hyperparameters(
            X,
            Y[:, j],
            prior,
            hyper_samples,
            seed=_derive(seed, j),
            map_restarts=map_restarts,
            nm_maxiter=nm_maxiter,
            jitter_scale=jitter_scale,
        )
        ensembles.append(ens)
    return condition(X, Y, ensembles)


def _derive(seed, *tags) -> list:
    if isinstance(seed, (list, tuple)):
        return [*seed, *tags]
    return [int(seed), *tags]


def posterior(x, state: GPState, member: int = 0) -> Posterior:
    """Posterior mean/variance per output at one point for one member.

    Outputs are independent, so the cross-output covariance is diagonal;
    ``var`` holds its diagonal and ``std`` the elementwise square root.
    """
    x = np.asarray(x, dtype=float).ravel()
    mean = np.empty(state.num_outputs)
    var = np.empty(state.num_outputs)
    for j in range(state.num_outputs):
        hyper = state.hypers[j][member]
        kv = _kernel_row(x, state.train_inputs, hyper)
        mean[j] = hyper.constant_mean + kv @ state.weights[j, member]
        v = solve_triangular(
            state.chols[j, member], kv, lower=True, check_finite=False
        )
        var[j] = max(hyper.signal_variance - float(v @ v), 0.0)
    return Posterior(mean=mean, var=var, std=np.sqrt(var))


def posterior_batch(Xq, state: GPState, member: int = 0):
    """Vectorized posterior moments at many points: (m, k) means and vars."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    m = Xq.shape[0]
    means = np.empty((m, state.num_outputs))
    variances = np.empty((m, state.num_outputs))
    for j in range(state.num_outputs):
        hyper = state.hypers[j][member]
        Kx = kernel_matrix(Xq, state.train_inputs, hyper)
        means[:, j] = hyper.constant_mean + Kx @ state.weights[j, member]
        V = solve_triangular(
            state.chols[j, member], Kx.T, lower=True, check_finite=False
        )
        variances[:, j] = np.maximum(
            hyper.signal_variance - np.sum(V * V, axis=0), 0.0
        )
    return means, variances


def _is_training_point(x, state: GPState) -> bool:
    return bool(np.any(np.all(state.train_inputs == x[None, :], axis=1)))


def posterior_gradients(x, state: GPState, member: int = 0):
    """Gradients of posterior mean and variance with respect to x.

    Returns (k, d) arrays (dmean, dvar). The variance gradient is defined
    as zero at training inputs and wherever the clamped variance is zero,
    matching the one-sided limit along the variance floor.
    """
    x = np.asarray(x, dtype=float).ravel()
    k, d = state.num_outputs, state.dim
    dmean = np.empty((k, d))
    dvar = np.empty((k, d))
    at_train = _is_training_point(x, state)
    for j in range(k):
        hyper = state.hypers[j][member]
        kv = _kernel_row(x, state.train_inputs, hyper)
        dk = kernel_grad_first(x, state.train_inputs, hyper)
        dmean[j] = dk.T @ state.weights[j, member]
        L = state.chols[j, member]
        v = solve_triangular(L, kv, lower=True, check_finite=False)
        variance = hyper.signal_variance - float(v @ v)
        if at_train or variance <= 0.0:
            dvar[j] = 0.0
        else:
            w2 = solve_triangular(L.T, v, lower=False, check_finite=False)
            dvar[j] = -2.0 * (dk.T @ w2)
    return dmean, dvar


def posterior_with_gradients(x, state: GPState, member: int = 0):
    """Moments plus gradients in one pass: (mean, var, dmean, dvar)."""
    x = np.asarray(x, dtype=float).ravel()
    k, d = state.num_outputs, state.dim
    mean = np.empty(k)
    var = np.empty(k)
    dmean = np.empty((k, d))
    dvar = np.empty((k, d))
    at_train = _is_training_point(x, state)
    for j in range(k):
        hyper = state.hypers[j][member]
        kv = _kernel_row(x, state.train_inputs, hyper)
        dk = kernel_grad_first(x, state.train_inputs, hyper)
        mean[j] = hyper.constant_mean + kv @ state.weights[j, member]
        dmean[j] = dk.T @ state.weights[j, member]
        L = state.chols[j, member]
        v = solve_triangular(L, kv, lower=True, check_finite=False)
        raw = hyper.signal_variance - float(v @ v)
        var[j] = max(raw, 0.0)
        if at_train or raw <= 0.0:
            dvar[j] = 0.0
        else:
            w2 = solve_triangular(L.T, v, lower=False, check_finite=False)
            dvar[j] = -2.0 * (dk.T @ w2)
    return mean, var, dmean, dvar


# ---------------------------------------------------------------------------
# Lazy posterior paths
# ---------------------------------------------------------------------------


class SamplePath:
    """One self-consistent draw from the posterior, sampled lazily.

    Every queried point is conditioned on the real training data plus all
    previously sampled (point, value) pairs of this path, then appended to
    the path. Repeating a query returns the stored value exactly; querying
    a real training input returns the observed target exactly. Single
    writer per path.
    """

    def __init__(self, state: GPState, member: int = 0, seed=0):
        self.state = state
        self.member = member
        self._rng = np.random.default_rng(seed)
        n = state.num_train
        k = state.num_outputs
        cap = n + 64
        self._size = n
        self._ls = []
        self._vs = []
        for j in range(k):
            L = np.zeros((cap, cap))
            L[:n, :n] = state.chols[j, member]
            self._ls.append(L)
            hyper = state.hypers[j][member]
            v = solve_triangular(
                state.chols[j, member],
                state.train_targets[:, j] - hyper.constant_mean,
                lower=True,
                check_finite=False,
            )
            vv = np.zeros(cap)
            vv[:n] = v
            self._vs.append(vv)
        self._xs = np.zeros((cap, state.dim))
        self._xs[:n] = state.train_inputs
        self.fantasy_points: list[np.ndarray] = []
        self.fantasy_values: list[np.ndarray] = []

    def _grow(self):
        cap = self._xs.shape[0]
        if self._size < cap:
            return
        new_cap = cap * 2
        xs = np.zeros((new_cap, self.state.dim))
        xs[:cap] = self._xs
        self._xs = xs
        for j in range(self.state.num_outputs):
            L = np.zeros((new_cap, new_cap))
            L[:cap, :cap] = self._ls[j]
            self._ls[j] = L
            v = np.zeros(new_cap)
            v[:cap] = self._vs[j]
            self._vs[j] = v

    def moments(self, x):
        """Predictive mean and variance at x given the path so far."""
        x = np.asarray(x, dtype=float).ravel()
        t = self._size
        k = self.state.num_outputs
        mean = np.empty(k)
        var = np.empty(k)
        for j in range(k):
            hyper = self.state.hypers[j][self.member]
            kv = _kernel_row(x, self._xs[:t], hyper)
            u = solve_triangular(
                self._ls[j][:t, :t], kv, lower=True, check_finite=False
            )
            mean[j] = hyper.constant_mean + u @ self._vs[j][:t]
            var[j] = max(hyper.signal_variance - float(u @ u), 0.0)
        return mean, var

    def value(self, x) -> np.ndarray:
        """Sample (or recall) the path's function value at x."""
        x = np.asarray(x, dtype=float).ravel()
        train = self.state.train_inputs
        hit = np.where(np.all(train == x[None, :], axis=1))[0]
        if hit.size:
            return self.state.train_targets[hit[0]].copy()
        for xp, val in zip(self.fantasy_points, self.fantasy_values):
            if np.array_equal(xp, x):
                return val.copy()

        t = self._size
        k = self.state.num_outputs
        z = self._rng.standard_normal(k)
        value = np.empty(k)
        self._grow()
        for j in range(k):
            hyper = self.state.hypers[j][self.member]
            kv = _kernel_row(x, self._xs[:t], hyper)
            L = self._ls[j]
            u = solve_triangular(L[:t, :t], kv, lower=True, check_finite=False)
            mean = hyper.constant_mean + u @ self._vs[j][:t]
            var = max(hyper.signal_variance - float(u @ u), 0.0)
            value[j] = mean + math.sqrt(var) * z[j]
            diag = math.sqrt(
                max(hyper.signal_variance + hyper.jitter - float(u @ u), 1e-12)
            )
            L[t, :t] = u
            L[t, t] = diag
            self._vs[j][t] = (value[j] - mean) / diag
        self._xs[self._size] = x
        self._size += 1
        self.fantasy_points.append(x.copy())
        self.fantasy_values.append(value.copy())
        return value.copy()
