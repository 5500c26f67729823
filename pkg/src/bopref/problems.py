"""Synthetic multi-attribute test problems with known structure.

All attributes are maximized. Each problem carries its design box, a
default utility family and parameter prior used by the benchmark harness,
and, where available, the exact best attainable utility for a given
parameter (otherwise a cached quasi-random search estimate is used).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ContractError
from .utility import (
    LinearUtility,
    QuadraticUtility,
    ThetaPrior,
    UtilityFamily,
)

_OPTIMUM_PROBES = 2**20


@dataclass(frozen=True)
class TestProblem:
    id: str
    dim: int
    num_attributes: int
    lower: np.ndarray
    upper: np.ndarray
    _evaluate: Callable[[np.ndarray], np.ndarray]
    default_utility: dict
    default_prior: dict

    def evaluate(self, x) -> np.ndarray:
        """Attribute vector at a single in-box design point."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ContractError(f"{self.id} expects {self.dim}-dimensional designs")
        if np.any(x < self.lower - 1e-12) or np.any(x > self.upper + 1e-12):
            raise ContractError(f"design outside the {self.id} box")
        return self._evaluate(np.atleast_2d(x))[0]

    def evaluate_batch(self, X) -> np.ndarray:
        return self._evaluate(np.atleast_2d(np.asarray(X, dtype=float)))

    def build_family(self) -> UtilityFamily:
        from .utility import family_from_config

        return family_from_config(self.default_utility, self.num_attributes)

    def build_prior(self) -> ThetaPrior:
        from .utility import prior_from_config

        return prior_from_config(self.default_prior)


def _dtlz1a(X: np.ndarray) -> np.ndarray:
    g = 100.0 * (
        5.0
        + np.sum(
            (X[:, 1:] - 0.5) ** 2 - np.cos(2.0 * math.pi * (X[:, 1:] - 0.5)), axis=1
        )
    )
    f1 = -0.5 * X[:, 0] * (1.0 + g)
    f2 = -0.5 * (1.0 - X[:, 0]) * (1.0 + g)
    return np.column_stack([f1, f2])


def _dtlz2(X: np.ndarray, squared_g: bool) -> np.ndarray:
    if squared_g:
        g = np.sum((X[:, 3:5] - 0.5) ** 2, axis=1)
    else:
        g = np.sum(X[:, 3:5] - 0.5, axis=1)
    c = np.cos(0.5 * math.pi * X)
    s = np.sin(0.5 * math.pi * X)
    amp = 1.0 + g
    f1 = -amp * c[:, 0] * c[:, 1] * c[:, 2]
    f2 = -amp * c[:, 0] * c[:, 1] * s[:, 2]
    f3 = -amp * c[:, 0] * s[:, 1]
    f4 = -amp * s[:, 0]
    return np.column_stack([f1, f2, f3, f4])


def _vlmop3(X: np.ndarray) -> np.ndarray:
    sq = X[:, 0] ** 2 + X[:, 1] ** 2
    f1 = -0.5 * sq - np.sin(sq)
    f2 = (
        -((3.0 * X[:, 0] - 2.0 * X[:, 1] + 4.0) ** 2) / 8.0
        - ((X[:, 0] - X[:, 1] + 1.0) ** 2) / 27.0
        - 15.0
    )
    f3 = -1.0 / (sq + 1.0) + 1.1 * np.exp(-sq)
    return np.column_stack([f1, f2, f3])


def dtlz2_anchor_points(squared_g: bool = True) -> np.ndarray:
    """The 8 ideal attribute vectors used as the quadratic-utility prior:
    images of x_i in {(i-1)/3, i/3} for i <= 3 with x_4 = x_5 = 0.5.
    """
    pts = []
    for i1 in (0.0, 1.0 / 3.0):
        for i2 in (1.0 / 3.0, 2.0 / 3.0):
            for i3 in (2.0 / 3.0, 1.0):
                pts.append([i1, i2, i3, 0.5, 0.5])
    return _dtlz2(np.asarray(pts), squared_g)


def _problem_dtlz1a() -> TestProblem:
    return TestProblem(
        id="dtlz1a",
        dim=6,
        num_attributes=2,
        lower=np.zeros(6),
        upper=np.ones(6),
        _evaluate=_dtlz1a,
        default_utility={"family": "linear", "tradeoff": True},
        default_prior={"kind": "uniform_box", "lower": [0.0], "upper": [1.0]},
    )


def _problem_dtlz2(squared_g: bool) -> TestProblem:
    return TestProblem(
        id="dtlz2" if squared_g else "dtlz2-printed",
        dim=5,
        num_attributes=4,
        lower=np.zeros(5),
        upper=np.ones(5),
        _evaluate=lambda X: _dtlz2(X, squared_g),
        default_utility={"family": "quadratic"},
        default_prior={
            "kind": "finite",
            "points": dtlz2_anchor_points(squared_g).tolist(),
        },
    )


def _problem_vlmop3() -> TestProblem:
    return TestProblem(
        id="vlmop3",
        dim=2,
        num_attributes=3,
        lower=np.full(2, -3.0),
        upper=np.full(2, 3.0),
        _evaluate=_vlmop3,
        default_utility={"family": "exponential"},
        default_prior={"kind": "uniform_box", "lower": [0.1], "upper": [0.5]},
    )


_REGISTRY = {
    "dtlz1a": _problem_dtlz1a,
    "dtlz2": lambda: _problem_dtlz2(True),
    "dtlz2-printed": lambda: _problem_dtlz2(False),
    "vlmop3": _problem_vlmop3,
}

PROBLEM_IDS = tuple(sorted(_REGISTRY))


def get_problem(problem_id: str) -> TestProblem:
    try:
        return _REGISTRY[problem_id]()
    except KeyError:
        raise ContractError(f"unknown problem id: {problem_id!r}") from None


_attr_grid_cache: dict[str, np.ndarray] = {}


def _attribute_grid(problem: TestProblem) -> np.ndarray:
    if problem.id not in _attr_grid_cache:
        sobol = qmc.Sobol(d=problem.dim, scramble=True, seed=20177)
        X = problem.lower + (problem.upper - problem.lower) * sobol.random(
            _OPTIMUM_PROBES
        )
        _attr_grid_cache[problem.id] = problem.evaluate_batch(X)
    return _attr_grid_cache[problem.id]


def utility_optimum(problem: TestProblem, fam: UtilityFamily, theta) -> float:
    """Best attainable utility on the problem for the given parameter.

    Exact where the geometry allows it; otherwise the maximum over a large
    cached scrambled-Sobol probe of the design box (a slight underestimate,
    adequate for regret reporting).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if (
        problem.id == "dtlz1a"
        and isinstance(fam, LinearUtility)
        and fam.tradeoff
    ):
        # best point on the attribute segment y1 + y2 = -0.5
        t = float(theta[0])
        return -0.5 * min(t, 1.0 - t)
    if problem.id in ("dtlz2", "dtlz2-printed") and isinstance(fam, QuadraticUtility):
        anchors = dtlz2_anchor_points(problem.id == "dtlz2")
        if any(np.allclose(theta, a, atol=1e-12) for a in anchors):
            return 0.0
    Y = _attribute_grid(problem)
    vals = fam.value_batch(Y, theta)
    return float(np.max(vals[np.isfinite(vals)]))
