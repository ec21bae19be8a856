"""Projected gradient descent with worst-case iteration certificates.

For a convex objective with L-Lipschitz gradient minimized over a convex set
of diameter D with step size alpha <= 1/L, the iterate after k steps is
within D^2 / (2 alpha k) of optimal. Inverting that bound gives the number
of iterations that certifies a target suboptimality, which is what the
digital twins report to the network manager as their compute requirement.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt
from typing import Callable

import numpy as np

from .core import InfeasibleSetError

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False

# Pulls a certificate count sitting a few ulps above an integer back down
# before ceil; real fractional parts are never this small.
_CEIL_GUARD = 1.0 - 4e-12
# Relative slack when checking alpha <= 1/L, so alpha computed as 1/L passes.
_STEP_SLACK = 1.0 + 1e-9


class SolverError(RuntimeError):
    """Iterates became non-finite or the solve could not proceed."""


def project_box(x, lower, upper) -> np.ndarray:
    """Euclidean projection onto the box {lower <= y <= upper}."""
    x = np.asarray(x, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    if np.any(lower > upper):
        raise InfeasibleSetError("box has lower > upper")
    return np.clip(x, lower, upper)


def project_capped_simplex(x, lower, capacity: float) -> np.ndarray:
    """Euclidean projection onto {y >= lower, sum(y) <= capacity}.

    Shifts to z = x - lower, then projects z onto {w >= 0, sum(w) <= budget}
    where budget = capacity - sum(lower). When clamping at zero already fits
    the budget that clamp is the projection; otherwise the active-sum face is
    found by the sort-and-threshold rule in O(n log n).
    """
    x = np.asarray(x, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape).astype(float)
    budget = float(capacity) - float(lower.sum())
    if budget < -1e-9:
        raise InfeasibleSetError(
            f"lower bounds sum exceeds capacity by {-budget:g}")
    budget = max(budget, 0.0)
    z = x - lower
    w = np.maximum(z, 0.0)
    if w.sum() <= budget:
        return lower + w
    if budget == 0.0:
        return lower.copy()
    u = np.sort(z)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    thetas = (css - budget) / ks
    k = int(np.nonzero(u > thetas)[0].max()) + 1
    theta = (css[k - 1] - budget) / k
    return lower + np.maximum(z - theta, 0.0)


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box constraint set."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape:
            raise InfeasibleSetError("box bound shapes differ")
        if np.any(lower > upper):
            raise InfeasibleSetError("box has lower > upper")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class CappedSimplexSet:
    """Constraint set {y >= lower, sum(y) <= capacity}."""

    lower: np.ndarray
    capacity: float

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        if float(lower.sum()) > float(self.capacity) + 1e-9:
            raise InfeasibleSetError("lower bounds sum exceeds capacity")
        lower.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "capacity", float(self.capacity))

    def project(self, x) -> np.ndarray:
        return project_capped_simplex(x, self.lower, self.capacity)

    def diameter(self) -> float:
        # vertices are lower and lower + budget * e_i; the farthest pair are
        # two distinct spikes (distance budget * sqrt(2)) once n >= 2
        budget = max(self.capacity - float(self.lower.sum()), 0.0)
        if self.lower.size >= 2:
            return budget * sqrt(2.0)
        return budget

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol)
                    and float(x.sum()) <= self.capacity + tol)


@dataclass(frozen=True)
class SmoothConvexProblem:
    """Objective/gradient pair with a known gradient Lipschitz constant,
    minimized over an attached feasible set."""

    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_l: float
    feasible_set: "BoxSet | CappedSimplexSet"

    def __post_init__(self):
        if not self.lipschitz_l > 0:
            raise ValueError("lipschitz_l must be positive")


@dataclass(frozen=True)
class PGAConfig:
    """Stopping policy for pga_solve.

    tolerance_delta None runs a predefined fixed number of iterations
    (max_iterations) instead of stopping at a certificate count.
    """

    step_alpha: float
    max_iterations: int = 100_000
    tolerance_delta: float | None = None
    stall_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.step_alpha > 0:
            raise ValueError("step_alpha must be positive")
        if self.tolerance_delta is not None and not self.tolerance_delta > 0:
            raise ValueError("tolerance_delta must be positive when given")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stall_tolerance < 0:
            raise ValueError("stall_tolerance must be >= 0")


@dataclass(frozen=True)
class PGAResult:
    x: np.ndarray
    iterations: int
    objective_trace: np.ndarray   # length iterations + 1, trace[0] = f(x0)
    stop_reason: str              # "certificate" | "stall" | "max_iterations"


def iterations_for_delta(diameter: float, step_alpha: float, delta: float) -> int:
    """Iterations certifying suboptimality <= delta: ceil(D^2 / (2 alpha delta)).

    Never less than 1. The guard factor keeps counts that are an integer up
    to float rounding from ceiling one step too high.
    """
    if diameter < 0:
        raise ValueError("diameter must be nonnegative")
    if not step_alpha > 0:
        raise ValueError("step_alpha must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    raw = diameter * diameter / (2.0 * step_alpha * delta)
    return max(int(ceil(raw * _CEIL_GUARD)), 1)


def pga_solve(problem: SmoothConvexProblem, x0, config: PGAConfig) -> PGAResult:
    """Run x <- project(x - alpha * grad f(x)) until a stop condition fires.

    Stops at the first of: the certificate count implied by tolerance_delta
    over the set diameter, an iterate stall below stall_tolerance in the inf
    norm, or max_iterations. With step_alpha <= 1/L (enforced here) the
    objective trace is non-increasing.
    """
    feasible_set = problem.feasible_set
    alpha = config.step_alpha
    if alpha > _STEP_SLACK / problem.lipschitz_l:
        raise ValueError(
            f"step_alpha {alpha:g} exceeds 1/L = {1.0 / problem.lipschitz_l:g}")
    certificate = None
    if config.tolerance_delta is not None:
        certificate = iterations_for_delta(
            feasible_set.diameter(), alpha, config.tolerance_delta)

    x = feasible_set.project(np.atleast_1d(np.asarray(x0, dtype=float)))
    trace = [float(problem.objective(x))]
    stop_reason = "max_iterations"
    iterations = 0
    for k in range(1, config.max_iterations + 1):
        x_new = feasible_set.project(x - alpha * problem.gradient(x))
        if not np.all(np.isfinite(x_new)):
            raise SolverError(f"non-finite iterate at iteration {k}")
        trace.append(float(problem.objective(x_new)))
        step_inf = float(np.max(np.abs(x_new - x)))
        x = x_new
        iterations = k
        if certificate is not None and k >= certificate:
            stop_reason = "certificate"
            break
        if step_inf < config.stall_tolerance:
            stop_reason = "stall"
            break
    return PGAResult(x=x, iterations=iterations,
                     objective_trace=np.asarray(trace),
                     stop_reason=stop_reason)


# ---------------------------------------------------------------------------
# Specialized kernel for the network manager's allocation subproblem:
#
#   min_a  w * ||a - target||^2
#          + w * rho * sum max(soft_lower - a, 0)^2
#          + w * rho * sum max(dev_floor - a, 0)^2
#   s.t.   a >= 0, sum(a) <= capacity
#
# The hinge penalties make the gradient Lipschitz constant 2w(1 + 2 rho);
# with rho around 1e3 the solve needs tens of thousands of cheap iterations,
# so the loop is compiled with numba (python fallback kept for testing).
# ---------------------------------------------------------------------------

def hinge_quadratic_objective(a, target, soft_lower, dev_floor,
                              weight: float, rho: float) -> float:
    a = np.asarray(a, dtype=float)
    track = np.sum((a - target) ** 2)
    low_gap = np.maximum(soft_lower - a, 0.0)
    dev_gap = np.maximum(dev_floor - a, 0.0)
    return float(weight * (track + rho * np.sum(low_gap ** 2)
                           + rho * np.sum(dev_gap ** 2)))


def hinge_quadratic_gradient(a, target, soft_lower, dev_floor,
                             weight: float, rho: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    g = 2.0 * weight * (a - target)
    g -= 2.0 * weight * rho * np.maximum(soft_lower - a, 0.0)
    g -= 2.0 * weight * rho * np.maximum(dev_floor - a, 0.0)
    return g


def hinge_quadratic_lipschitz(weight: float, rho: float) -> float:
    # tracking curvature 2w plus 2w*rho from each of the two hinges
    return 2.0 * weight * (1.0 + 2.0 * rho)


def _hinge_descent_loop(x, target, soft_lower, dev_floor, weight, rho,
                        capacity, alpha, max_iter, stall_tol):
    # single-source loop: compiled by numba when available, plain python
    # otherwise, so both paths execute identical arithmetic
    n = x.shape[0]
    two_w = 2.0 * weight
    pen = 2.0 * weight * rho
    y = np.empty(n)
    used = 0
    for it in range(max_iter):
        for i in range(n):
            g = two_w * (x[i] - target[i])
            low_gap = soft_lower[i] - x[i]
            if low_gap > 0.0:
                g -= pen * low_gap
            dev_gap = dev_floor[i] - x[i]
            if dev_gap > 0.0:
                g -= pen * dev_gap
            y[i] = x[i] - alpha * g
        # project y onto {v >= 0, sum(v) <= capacity}
        s = 0.0
        for i in range(n):
            if y[i] > 0.0:
                s += y[i]
        theta = 0.0
        if s > capacity:
            u = np.sort(y)
            css = 0.0
            for j in range(n - 1, -1, -1):
                css += u[j]
                t = (css - capacity) / (n - j)
                if u[j] > t:
                    theta = t
                else:
                    break
        dmax = 0.0
        for i in range(n):
            v = y[i] - theta
            if v < 0.0:
                v = 0.0
            d = v - x[i]
            if d < 0.0:
                d = -d
            if d > dmax:
                dmax = d
            x[i] = v
        used = it + 1
        if dmax < stall_tol:
            break
    return x, used


if HAVE_NUMBA:
    _hinge_descent_jit = njit(cache=True)(_hinge_descent_loop)
else:  # pragma: no cover
    _hinge_descent_jit = _hinge_descent_loop


def hinge_quadratic_solve(x0, target, soft_lower, dev_floor, weight: float,
                          rho: float, capacity: float,
                          step_alpha: float | None = None,
                          max_iterations: int = 200_000,
                          stall_tolerance: float = 1e-10,
                          use_jit: bool = True):
    """Minimize the hinge-penalized tracking objective over the capped simplex.

    Returns (a, iterations_used). step_alpha defaults to 1/L and may not
    exceed it.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    target = np.broadcast_to(np.asarray(target, dtype=float), x0.shape)
    soft_lower = np.broadcast_to(np.asarray(soft_lower, dtype=float), x0.shape)
    dev_floor = np.broadcast_to(np.asarray(dev_floor, dtype=float), x0.shape)
    lipschitz = hinge_quadratic_lipschitz(weight, rho)
    if step_alpha is None:
        step_alpha = 1.0 / lipschitz
    elif step_alpha > _STEP_SLACK / lipschitz:
        raise ValueError("step_alpha exceeds 1/L for the penalized objective")
    x = project_capped_simplex(x0, np.zeros_like(x0), capacity)
    loop = _hinge_descent_jit if (use_jit and HAVE_NUMBA) else _hinge_descent_loop
    x, used = loop(x.copy(), np.ascontiguousarray(target),
                   np.ascontiguousarray(soft_lower),
                   np.ascontiguousarray(dev_floor),
                   float(weight), float(rho), float(capacity),
                   float(step_alpha), int(max_iterations),
                   float(stall_tolerance))
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite iterate in allocation solve")
    return x, int(used)
