"""Parametric utility families over attribute vectors, and priors over
their parameters.

A family maps an attribute vector y (length k) and a parameter vector
theta to a scalar utility. All families expose scalar and batched value
evaluation, the gradient with respect to y, and parameter validation.
Batched forms come in both directions: many attribute vectors against one
theta (Monte Carlo acquisition) and one attribute vector against many
thetas (preference posteriors).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, ContractError

INFEASIBLE = -np.inf
_EXP_CLIP = 700.0


def _as_vec(y, k, name="y"):
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != k:
        raise ContractError(f"{name} must have length {k}, got {y.shape[0]}")
    return y


class UtilityFamily:
    """Base interface; concrete families implement the _raw hooks."""

    kind: str = ""
    num_attributes: int = 0
    theta_dim: int = 0

    def validate_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape[0] != self.theta_dim:
            raise ContractError(
                f"theta must have length {self.theta_dim}, got {theta.shape[0]}"
            )
        if not np.all(np.isfinite(theta)):
            raise ContractError("theta must be finite")
        self._check_theta(theta)
        return theta

    def _check_theta(self, theta):
        pass

    def value(self, y, theta) -> float:
        y = _as_vec(y, self.num_attributes)
        theta = self.validate_theta(theta)
        return float(self.value_batch(y[None, :], theta)[0])

    def value_batch(self, Y, theta) -> np.ndarray:
        """Utilities of the rows of Y (m, k) under a single theta."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        theta = self.validate_theta(theta)
        return self._values(Y, theta)

    def value_theta_batch(self, y, thetas) -> np.ndarray:
        """Utilities of one attribute vector under every row of thetas."""
        y = _as_vec(y, self.num_attributes)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return self._values_over_thetas(y, thetas)

    def grad_y(self, y, theta) -> np.ndarray:
        y = _as_vec(y, self.num_attributes)
        theta = self.validate_theta(theta)
        return self._grads(y[None, :], theta)[0]

    def grad_batch(self, Y, theta) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        theta = self.validate_theta(theta)
        return self._grads(Y, theta)

    def to_config(self) -> dict:
        return {"family": self.kind}


@dataclass(frozen=True)
class LinearUtility(UtilityFamily):
    """Weighted sum of attributes.

    With ``tradeoff=True`` (two attributes only) theta is the single weight
    t and the attribute weights are (t, 1 - t); otherwise theta is the full
    weight vector.
    """

    num_attributes: int
    tradeoff: bool = False
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        if self.tradeoff and self.num_attributes != 2:
            raise ContractError("tradeoff parameterization requires k = 2")

    @property
    def theta_dim(self) -> int:
        return 1 if self.tradeoff else self.num_attributes

    def weight_vector(self, theta) -> np.ndarray:
        theta = self.validate_theta(theta)
        if self.tradeoff:
            return np.array([theta[0], 1.0 - theta[0]])
        return theta

    def weight_matrix(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.tradeoff:
            return np.column_stack([thetas[:, 0], 1.0 - thetas[:, 0]])
        return thetas

    def _values(self, Y, theta):
        return Y @ self.weight_vector(theta)

    def _values_over_thetas(self, y, thetas):
        return self.weight_matrix(thetas) @ y

    def _grads(self, Y, theta):
        return np.tile(self.weight_vector(theta), (Y.shape[0], 1))

    def to_config(self):
        return {"family": "linear", "tradeoff": self.tradeoff}


@dataclass(frozen=True)
class QuadraticUtility(UtilityFamily):
    """Negative squared distance to an ideal attribute vector theta."""

    num_attributes: int
    kind: str = field(default="quadratic", init=False)

    @property
    def theta_dim(self) -> int:
        return self.num_attributes

    def _values(self, Y, theta):
        diff = Y - theta
        return -np.sum(diff * diff, axis=1)

    def _values_over_thetas(self, y, thetas):
        diff = thetas - y
        return -np.sum(diff * diff, axis=1)

    def _grads(self, Y, theta):
        return -2.0 * (Y - theta)


@dataclass(frozen=True)
class ExponentialUtility(UtilityFamily):
    """Constant-absolute-risk-aversion utility averaged over attributes.

    value = (1/k) * sum_j (1 - exp(-theta * y_j)) / theta with scalar
    theta > 0. Evaluated through expm1 so small theta*y does not cancel;
    as theta -> 0+ the value tends to the attribute mean.
    """

    num_attributes: int
    kind: str = field(default="exponential", init=False)
    theta_dim: int = field(default=1, init=False)

    def _check_theta(self, theta):
        if theta[0] <= 0:
            raise ContractError("exponential utility requires theta > 0")

    def _values(self, Y, theta):
        t = theta[0]
        e = -np.expm1(np.clip(-t * Y, -_EXP_CLIP, _EXP_CLIP)) / t
        return np.mean(e, axis=1)

    def _values_over_thetas(self, y, thetas):
        t = thetas[:, 0:1]
        e = -np.expm1(np.clip(-t * y[None, :], -_EXP_CLIP, _EXP_CLIP)) / t
        return np.mean(e, axis=1)

    def _grads(self, Y, theta):
        t = theta[0]
        return np.exp(np.clip(-t * Y, -_EXP_CLIP, _EXP_CLIP)) / self.num_attributes


@dataclass(frozen=True)
class ThresholdUtility(UtilityFamily):
    """First attribute as objective, second as a hard feasibility floor.

    value = y_1 when theta <= y_2, otherwise the distinguished infeasible
    value (-inf), which orders below every real. The gradient is defined
    only strictly inside the feasible region, where it is (1, 0).
    """

    num_attributes: int = field(default=2, init=False)
    theta_dim: int = field(default=1, init=False)
    kind: str = field(default="threshold", init=False)

    def feasible(self, y, theta) -> bool:
        y = _as_vec(y, 2)
        theta = self.validate_theta(theta)
        return bool(y[1] >= theta[0])

    def _values(self, Y, theta):
        return np.where(Y[:, 1] >= theta[0], Y[:, 0], INFEASIBLE)

    def _values_over_thetas(self, y, thetas):
        return np.where(thetas[:, 0] <= y[1], y[0], INFEASIBLE)

    def grad_y(self, y, theta) -> np.ndarray:
        y = _as_vec(y, 2)
        theta = self.validate_theta(theta)
        if y[1] == theta[0]:
            raise BoundaryError(
                "gradient undefined on the feasibility boundary y_2 = theta"
            )
        if y[1] < theta[0]:
            raise ContractError("gradient undefined for infeasible attributes")
        return np.array([1.0, 0.0])

    def _grads(self, Y, theta):
        g = np.zeros_like(Y)
        g[Y[:, 1] >= theta[0], 0] = 1.0
        return g


@dataclass(frozen=True)
class SoftmaxLinearUtility(UtilityFamily):
    """Weights applied to the softmax shares of the attributes.

    value = sum_j theta_j * exp(y_j) / sum_i exp(y_i), computed with
    max-subtraction so large attribute magnitudes do not overflow.
    """

    num_attributes: int
    kind: str = field(default="softmax_linear", init=False)

    @property
    def theta_dim(self) -> int:
        return self.num_attributes

    @staticmethod
    def _softmax(Y):
        shifted = Y - np.max(Y, axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=1, keepdims=True)

    def _values(self, Y, theta):
        return self._softmax(Y) @ theta

    def _values_over_thetas(self, y, thetas):
        return thetas @ self._softmax(y[None, :])[0]

    def _grads(self, Y, theta):
        p = self._softmax(Y)
        dot = p @ theta
        return p * (theta[None, :] - dot[:, None])


# ---------------------------------------------------------------------------
# Parameter priors
# ---------------------------------------------------------------------------


class ThetaPrior:
    """Base interface: sampling and support membership."""

    kind: str = ""
    dim: int = 0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def contains(self, theta) -> bool:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformBoxPrior(ThetaPrior):
    """Independent uniforms on a box."""

    lower: np.ndarray
    upper: np.ndarray
    kind: str = field(default="uniform_box", init=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ContractError("prior box must satisfy lower < upper")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        return theta.shape[0] == self.dim and bool(
            np.all(theta >= self.lower) and np.all(theta <= self.upper)
        )

    def to_config(self):
        return {
            "kind": "uniform_box",
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass(frozen=True)
class FiniteUniformPrior(ThetaPrior):
    """Equal mass on an explicit list of parameter vectors."""

    points: np.ndarray
    kind: str = field(default="finite", init=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ContractError("finite prior needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def sample(self, rng, size):
        idx = rng.integers(0, self.points.shape[0], size=size)
        return self.points[idx]

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        return bool(np.any(np.all(self.points == theta[None, :], axis=1)))

    def to_config(self):
        return {"kind": "finite", "points": self.points.tolist()}


@dataclass(frozen=True)
class OrderedSimplexPrior(ThetaPrior):
    """Uniform over descending nonnegative weights that sum to one.

    A uniform simplex draw (normalized exponentials) sorted descending is
    uniform on the ordered region by exchange symmetry.
    """

    dim: int
    kind: str = field(default="ordered_simplex", init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError("simplex dimension must be >= 1")

    def sample(self, rng, size):
        e = rng.standard_exponential(size=(size, self.dim))
        e /= np.sum(e, axis=1, keepdims=True)
        return -np.sort(-e, axis=1)

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape[0] != self.dim:
            return False
        return bool(
            np.all(theta >= -1e-12)
            and np.all(np.diff(theta) <= 1e-12)
            and abs(float(np.sum(theta)) - 1.0) <= 1e-9
        )

    def to_config(self):
        return {"kind": "ordered_simplex", "dim": self.dim}


def prior_sample(prior: ThetaPrior, seed) -> np.ndarray:
    """One draw from a parameter prior, deterministic given the seed."""
    return prior.sample(np.random.default_rng(seed), 1)[0]


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

_FAMILIES = {
    "linear": LinearUtility,
    "quadratic": QuadraticUtility,
    "exponential": ExponentialUtility,
    "threshold": ThresholdUtility,
    "softmax_linear": SoftmaxLinearUtility,
}


def family_from_config(cfg: dict, num_attributes: int) -> UtilityFamily:
    kind = cfg.get("family")
    if kind not in _FAMILIES:
        raise ContractError(f"unknown utility family: {kind!r}")
    if kind == "linear":
        return LinearUtility(num_attributes, tradeoff=bool(cfg.get("tradeoff", False)))
    if kind == "threshold":
        if num_attributes != 2:
            raise ContractError("threshold utility requires k = 2")
        return ThresholdUtility()
    return _FAMILIES[kind](num_attributes)


def prior_from_config(cfg: dict) -> ThetaPrior:
    kind = cfg.get("kind")
    if kind == "uniform_box":
        return UniformBoxPrior(np.asarray(cfg["lower"]), np.asarray(cfg["upper"]))
    if kind == "finite":
        return FiniteUniformPrior(np.asarray(cfg["points"]))
    if kind == "ordered_simplex":
        return OrderedSimplexPrior(int(cfg["dim"]))
    raise ContractError(f"unknown theta prior kind: {kind!r}")
