"""Bound-constrained limited-memory quasi-Newton minimization.

Projected L-BFGS: the two-loop recursion runs on the variables that are not
held at a bound, the trial point is projected back into the box and accepted
by Armijo backtracking along the projected path. An optional cap on the
infinity norm of each step keeps the iterates from jumping across
near-linear stretches of a nonsmooth objective.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np


class OptimizerError(RuntimeError):
    pass


@dataclass
class BoxSpec:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("box bounds must satisfy lower <= upper")

    @property
    def pinned(self) -> np.ndarray:
        return self.lower == self.upper

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass
class SolveReport:
    iterations: int
    evaluations: int
    objective: float
    projected_gradient: float
    reason: str

    @property
    def converged(self) -> bool:
        return self.reason == "converged"


def projected_gradient(x, grad, box: BoxSpec) -> np.ndarray:
    return box.project(x - grad) - x


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        q += (a - rho * (y @ q)) * s
    return q


def minimize(objective: Callable[[np.ndarray], tuple[float, np.ndarray]], x0, box: BoxSpec,
             tol: float = 1e-6, max_evals: int = 500, history: int = 10,
             max_step: float | None = None, armijo: float = 1e-4):
    """Minimize ``objective`` (returning value and gradient) inside ``box``.

    Returns ``(x, SolveReport)``. Stops when the infinity norm of the
    projected gradient is at most ``tol``, after ``max_evals`` evaluations, or
    when no descent step can be found. ``max_step`` bounds the infinity norm
    of every trial step.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_step is not None and max_step <= 0:
        raise ValueError("max_step must be positive")
    n_eval = 0

    def evaluate(x):
        nonlocal n_eval
        n_eval += 1
        f, g = objective(x)
        g = np.array(g, dtype=float)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise OptimizerError(f"non-finite objective or gradient at evaluation {n_eval}")
        g[box.pinned] = 0.0
        return float(f), g

    x = box.project(np.asarray(x0, dtype=float))
    f, g = evaluate(x)
    pairs: deque = deque(maxlen=history)
    it = 0
    reason = "max_evals"
    while True:
        pg = float(np.abs(projected_gradient(x, g, box)).max(initial=0.0))
        if pg <= tol:
            reason = "converged"
            break
        if n_eval >= max_evals:
            break
        # variables held at a bound by the gradient are frozen for this step
        held = box.pinned | ((x <= box.lower) & (g > 0)) | ((x >= box.upper) & (g < 0))
        free = ~held
        d = np.zeros_like(x)
        d[free] = -_two_loop(g[free], [(s[free], y[free], 1.0 / (s[free] @ y[free]))
                                      for s, y in pairs if s[free] @ y[free] > 0])
        if not g @ d < 0:
            pairs.clear()
            d = np.where(free, -g, 0.0)
        step_norm = np.abs(d).max()
        if not pairs:
            # first step or after a reset: unit move of the largest component
            d /= step_norm
            step_norm = 1.0
        if max_step is not None and step_norm > max_step:
            d *= max_step / step_norm
        t = 1.0
        accepted = False
        while n_eval < max_evals:
            x_new = box.project(x + t * d)
            dx = x_new - x
            if not np.any(dx):
                break
            f_new, g_new = evaluate(x_new)
            if f_new <= f + armijo * (g @ dx):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if pairs and n_eval < max_evals:
                pairs.clear()
                continue
            reason = "max_evals" if n_eval >= max_evals else "stalled: no descent along projected path"
            break
        s, y = dx, g_new - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y))
        x, f, g = x_new, f_new, g_new
        it += 1
    pg = float(np.abs(projected_gradient(x, g, box)).max(initial=0.0))
    return x, SolveReport(it, n_eval, f, pg, reason)
