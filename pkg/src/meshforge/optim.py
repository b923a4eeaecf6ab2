"""Unconstrained smooth minimization: L-BFGS with a strong Wolfe line search.

The objective is any callable ``f(x) -> (value, gradient)`` on flat real
vectors. The solver is deterministic; stochastic mini-batching is the
caller's business (start a fresh :func:`minimize` whenever the objective
changes so no stale curvature pairs survive).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np


class ObjectiveEval(NamedTuple):
    value: float
    gradient: np.ndarray


class NonFiniteObjectiveError(FloatingPointError):
    def __init__(self, x, value):
        super().__init__(f"objective returned a non-finite value or gradient (value={value})")
        self.x = np.array(x, copy=True)


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "lbfgs"  # "lbfgs" or "gradient-descent"
    memory: int = 10
    max_iterations: int = 100
    gradient_tolerance: float = 1e-8
    # stop when an iteration lowers f by less than this fraction of |f|
    value_tolerance: float = 1e-10
    initial_step: float = 1.0
    c1: float = 1e-4
    c2: float = 0.9
    max_linesearch: int = 40

    def __post_init__(self):
        if self.algorithm not in ("lbfgs", "gradient-descent"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.memory < 0 or self.max_iterations < 1:
            raise ValueError("memory must be >= 0 and max_iterations >= 1")

    @property
    def effective_memory(self) -> int:
        return 0 if self.algorithm == "gradient-descent" else self.memory


@dataclass
class OptTrace:
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    status: str = "running"
    n_evals: int = 0

    def __len__(self):
        return len(self.values)

    def record(self, value, grad_norm):
        self.values.append(float(value))
        self.grad_norms.append(float(grad_norm))


class _Counted:
    def __init__(self, fun, trace):
        self.fun = fun
        self.trace = trace

    def __call__(self, x):
        self.trace.n_evals += 1
        f, g = self.fun(x)
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            raise NonFiniteObjectiveError(x, f)
        return f, g


def _two_loop(g, pairs, gamma):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    r = gamma * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return -r


def _cubic_min(a, fa, da, b, fb, db):
    # minimizer of the cubic through (a, fa, da), (b, fb, db); None if undefined
    d1 = da + db - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    den = db - da + 2 * d2
    if den == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / den


def _zoom(phi, f0, dg0, lo, hi, c1, c2, max_iter):
    # lo/hi are (step, value, slope); lo always satisfies sufficient decrease
    for _ in range(max_iter):
        a_lo, f_lo, d_lo = lo
        a_hi, f_hi, d_hi = hi
        width = a_hi - a_lo
        a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        left, right = sorted((a_lo + 0.1 * width, a_hi - 0.1 * width))
        if a is None or not (left <= a <= right):
            a = 0.5 * (a_lo + a_hi)
        fa, ga, da = phi(a)
        if fa > f0 + c1 * a * dg0 or fa >= f_lo:
            hi = (a, fa, da)
        else:
            if abs(da) <= -c2 * dg0:
                return a, fa, ga, True
            if da * (a_hi - a_lo) >= 0:
                hi = lo
            lo = (a, fa, da)
        if abs(hi[0] - lo[0]) <= 1e-16 * max(1.0, abs(lo[0])):
            break
    return None, None, None, False


def line_search(fun, x, f0, g0, d, a_init, c1=1e-4, c2=0.9, max_iter=40):
    """Strong Wolfe line search along ``d``.

    Returns ``(step, f, g)``. If the Wolfe conditions cannot be met, the best
    sufficient-decrease point found is returned instead, or ``step=None``
    when no decrease was possible.
    """
    dg0 = float(g0 @ d)
    cache = {}

    def phi(a):
        f, g = fun(x + a * d)
        cache[a] = (f, g)
        return f, g, float(g @ d)

    prev = (0.0, f0, dg0)
    a = a_init
    best = None
    for i in range(max_iter):
        fa, ga, da = phi(a)
        if fa > f0 + c1 * a * dg0 or (i > 0 and fa >= prev[1]):
            s, fs, gs, ok = _zoom(phi, f0, dg0, prev, (a, fa, da), c1, c2, max_iter)
            if ok:
                return s, fs, gs
            break
        if abs(da) <= -c2 * dg0:
            return a, fa, ga
        if da >= 0:
            s, fs, gs, ok = _zoom(phi, f0, dg0, (a, fa, da), prev, c1, c2, max_iter)
            if ok:
                return s, fs, gs
            break
        prev = (a, fa, da)
        a *= 2.0
    # fall back to the lowest sufficient-decrease point seen
    for s, (fs, gs) in cache.items():
        if fs <= f0 + c1 * s * dg0 and fs < f0 and (best is None or fs < best[1]):
            best = (s, fs, gs)
    if best is None:
        return None, f0, g0
    return best


def minimize(objective: Callable, x0, config: OptimizerConfig = OptimizerConfig()):
    """Minimize ``objective`` from ``x0``.

    Stops when the gradient 2-norm drops to ``gradient_tolerance``, when an
    iteration improves f by less than ``value_tolerance * |f|``, after
    ``max_iterations`` iterations, or when the line search cannot decrease
    the objective; ``trace.status`` says which. Returns ``(x, trace)``.
    """
    trace = OptTrace()
    fun = _Counted(objective, trace)
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    gnorm = float(np.linalg.norm(g))
    trace.record(f, gnorm)
    m = config.effective_memory
    pairs: deque = deque(maxlen=max(m, 1))
    gamma = 1.0
    prev_step_slope = None

    for it in range(config.max_iterations):
        if gnorm <= config.gradient_tolerance:
            trace.status = "converged"
            return x, trace
        if m > 0 and pairs:
            d = _two_loop(g, pairs, gamma)
            a0 = 1.0
        else:
            d = -g
            if prev_step_slope is None:
                a0 = min(1.0, 1.0 / gnorm) * config.initial_step
            else:
                a0 = prev_step_slope / float(g @ d)
        dg = float(g @ d)
        if dg >= 0:
            # lost descent (numerical); restart from steepest descent
            pairs.clear()
            d = -g
            dg = -gnorm ** 2
            a0 = min(1.0, config.initial_step / gnorm)
        step, f_new, g_new = line_search(
            fun, x, f, g, d, a0, config.c1, config.c2, config.max_linesearch
        )
        if step is None:
            trace.status = "line_search_failed"
            return x, trace
        s = step * d
        y = g_new - g
        prev_step_slope = step * dg
        x = x + s
        f_old, f, g = f, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        trace.record(f, gnorm)
        if f_old - f <= config.value_tolerance * max(abs(f_old), abs(f)):
            trace.status = "converged" if gnorm <= config.gradient_tolerance else "stalled"
            return x, trace
        if m > 0:
            sy = float(s @ y)
            if sy > 1e-12 * float(y @ y) and sy > 0:
                pairs.append((s, y, 1.0 / sy))
                gamma = sy / float(y @ y)
    trace.status = "converged" if gnorm <= config.gradient_tolerance else "max_iterations"
    return x, trace
