"""Full-batch BFGS with a strong-Wolfe interpolating line search.

The line search follows the bracket-then-zoom scheme of Nocedal & Wright
(Algorithms 3.5/3.6), using cubic interpolation with a quadratic and then
bisection fallback.  The initial trial step of each iteration assumes the
first-order decrease matches the previous iteration's.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 1000
    f_tol: float = 1e-6
    g_tol: float = 1e-6
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_evals: int = 50
    # dense inverse Hessian up to this many parameters, L-BFGS beyond
    lbfgs_threshold: int = 5000
    lbfgs_memory: int = 20

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.f_tol <= 0 or self.g_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 0 or self.max_line_search_evals < 1:
            raise ValueError("iteration budgets must be positive")


ALPHA_MIN, ALPHA_MAX = 1e-10, 1e10
CURVATURE_EPS = 1e-10


def initial_step(prev_first_order_decrease: Optional[float], current_directional_derivative: float) -> float:
    """Trial step that reproduces the previous iteration's first-order decrease.

    ``prev_first_order_decrease`` is ``alpha_{k-1} * g_{k-1}.p_{k-1}`` (None on
    the first iteration, which starts from 1).
    """
    if prev_first_order_decrease is None:
        return 1.0
    if current_directional_derivative >= 0:
        raise ValueError("current direction is not a descent direction")
    alpha = prev_first_order_decrease / current_directional_derivative
    if not math.isfinite(alpha):
        return 1.0
    return min(max(alpha, ALPHA_MIN), ALPHA_MAX)


class LineSearchResult(NamedTuple):
    alpha: float
    f: float
    df: float
    payload: object
    n_evals: int
    success: bool


def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if not math.isfinite(disc) or disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    x = b - (b - a) * (db + d2 - d1) / denom
    return x if math.isfinite(x) else None


def _quad_min(a, fa, da, b, fb):
    h = b - a
    c = (fb - fa - da * h) / (h * h)
    if not math.isfinite(c) or c <= 0:
        return None
    x = a - da / (2.0 * c)
    return x if math.isfinite(x) else None


def _interpolate(lo, hi, margin=0.1):
    """Trial point strictly inside (lo, hi): cubic, else quadratic, else midpoint."""
    a, fa, da = lo
    b, fb, db = hi
    left, right = min(a, b), max(a, b)
    width = right - left
    inside = lambda x: x is not None and left + margin * width <= x <= right - margin * width
    x = _cubic_min(a, fa, da, b, fb, db) if math.isfinite(fb) and math.isfinite(db) else None
    if inside(x):
        return x
    x = _quad_min(a, fa, da, b, fb) if math.isfinite(fb) else None
    if inside(x):
        return x
    return 0.5 * (a + b)


def line_search(
    phi: Callable[[float], tuple],
    f0: float,
    df0: float,
    alpha_init: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 50,
    alpha_max: float = ALPHA_MAX,
) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions along a ray.

    ``phi(alpha)`` returns ``(value, directional_derivative, payload)``; the
    payload of the accepted point is handed back so callers can reuse the
    gradient.  On budget exhaustion the lowest point seen is returned with
    ``success=False``.
    """
    if not df0 < 0:
        raise ValueError("line search needs a descent direction (df0 < 0)")
    evals = 0
    best = LineSearchResult(0.0, f0, df0, None, 0, False)

    def probe(alpha):
        nonlocal evals, best
        evals += 1
        f, df, payload = phi(alpha)
        f = float(f) if f is not None and math.isfinite(f) else math.inf
        df = float(df) if df is not None and math.isfinite(df) else math.nan
        if f < best.f:
            best = LineSearchResult(alpha, f, df, payload, evals, False)
        return f, df, payload

    armijo = lambda alpha, f: f <= f0 + c1 * alpha * df0
    curvature = lambda df: abs(df) <= -c2 * df0

    def zoom(lo, hi):
        # lo/hi are (alpha, f, df); lo satisfies sufficient decrease with f_lo <= f_hi
        while evals < max_evals:
            alpha = _interpolate(lo, hi)
            if alpha == lo[0] or alpha == hi[0]:
                break
            f, df, payload = probe(alpha)
            if not armijo(alpha, f) or f >= lo[1]:
                hi = (alpha, f, df)
            else:
                if curvature(df):
                    return LineSearchResult(alpha, f, df, payload, evals, True)
                if df * (hi[0] - lo[0]) >= 0:
                    hi = lo
                lo = (alpha, f, df)
        return best._replace(n_evals=evals, success=False)

    prev = (0.0, f0, df0)
    alpha = min(max(alpha_init, ALPHA_MIN), alpha_max)
    first = True
    while evals < max_evals:
        f, df, payload = probe(alpha)
        cur = (alpha, f, df)
        if not armijo(alpha, f) or (not first and f >= prev[1]):
            return zoom(prev, cur)
        if curvature(df):
            return LineSearchResult(alpha, f, df, payload, evals, True)
        if df >= 0:
            return zoom(cur, prev)
        if alpha >= alpha_max:
            break
        lo_b = alpha + 1.01 * (alpha - prev[0])
        hi_b = min(10.0 * alpha, alpha_max)
        trial = _cubic_min(prev[0], prev[1], prev[2], alpha, f, df)
        if trial is None or not math.isfinite(trial):
            trial = hi_b
        prev, alpha, first = cur, min(max(trial, lo_b), hi_b), False
    return best._replace(n_evals=evals, success=False)


@dataclass
class TraceRow:
    iteration: int
    f: float
    grad_inf_norm: float
    alpha: float
    line_search_evals: int
    armijo_ok: bool = True
    curvature_ok: bool = True
    note: str = ""


@dataclass
class MinimizeResult:
    x: np.ndarray
    f: float
    grad: np.ndarray
    reason: str
    iterations: int
    n_evals: int
    trace: list = field(default_factory=list)

    def write_trace_csv(self, path) -> None:
        write_trace_csv(self.trace, path)


TRACE_FIELDS = ["iteration", "f", "grad_inf_norm", "alpha", "line_search_evals", "armijo_ok", "curvature_ok", "note"]


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for row in trace:
            w.writerow([getattr(row, k) if not isinstance(getattr(row, k), float) else repr(getattr(row, k)) for k in TRACE_FIELDS])


class _LBFGSMemory:
    def __init__(self, m):
        self.m = m
        self.pairs = []
        self.gamma = 1.0

    def apply(self, g):
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        r = self.gamma * q
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * (y @ r)
            r += s * (a - b)
        return r

    def update(self, s, y, sy):
        self.pairs.append((s, y, 1.0 / sy))
        if len(self.pairs) > self.m:
            self.pairs.pop(0)
        self.gamma = sy / (y @ y)

    def reset(self):
        self.pairs.clear()
        self.gamma = 1.0


def minimize(
    objective: Callable[[np.ndarray], tuple],
    x0,
    cfg: OptimizerConfig = OptimizerConfig(),
    callback: Optional[Callable[[int, np.ndarray, float], None]] = None,
) -> MinimizeResult:
    """Minimize ``objective(x) -> (value, gradient)`` with BFGS.

    Stops when the gradient infinity norm drops below ``g_tol``, when an
    accepted step changes the objective by less than ``f_tol``, after
    ``max_iterations`` steps, or when the line search fails (the best
    point found is kept).
    """
    x = np.array(x0, dtype=np.float64)
    n = x.size
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at the starting point")
    n_evals = 1
    dense = n <= cfg.lbfgs_threshold
    H = np.eye(n) if dense else None
    mem = None if dense else _LBFGSMemory(cfg.lbfgs_memory)
    scaled = False

    trace = [TraceRow(0, f, float(np.max(np.abs(g))), 0.0, 0)]
    prev_decrease = None
    reason = "max_iterations"
    it = 0
    while True:
        if np.max(np.abs(g)) < cfg.g_tol:
            reason = "g_tol"
            break
        if it >= cfg.max_iterations:
            reason = "max_iterations"
            break
        p = -(H @ g) if dense else -mem.apply(g)
        dd = float(g @ p)
        note = ""
        if not dd < 0 or not math.isfinite(dd):
            # lost descent; restart from steepest descent
            if dense:
                H = np.eye(n)
            else:
                mem.reset()
            scaled = False
            p, dd, note = -g, -float(g @ g), "reset"
            prev_decrease = None
        alpha0 = initial_step(prev_decrease, dd)

        def phi(alpha, _x=x, _p=p):
            try:
                fa, ga = objective(_x + alpha * _p)
            except FloatingPointError:
                return math.inf, math.nan, None
            ga = np.asarray(ga, dtype=np.float64)
            return float(fa), float(ga @ _p), ga

        ls = line_search(phi, f, dd, alpha0, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_line_search_evals)
        n_evals += ls.n_evals
        if ls.payload is None or not ls.f < f:
            reason = "line_search_failed"
            trace.append(TraceRow(it + 1, f, float(np.max(np.abs(g))), 0.0, ls.n_evals, False, False, "no decrease"))
            break
        alpha = ls.alpha
        s = alpha * p
        x_new, f_new, g_new = x + s, ls.f, ls.payload
        y = g_new - g
        sy = float(s @ y)
        if sy > CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            if dense:
                if not scaled:
                    H = np.eye(n) * (sy / float(y @ y))
                    scaled = True
                rho = 1.0 / sy
                Hy = H @ y
                H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
            else:
                mem.update(s, y, sy)
        else:
            note = (note + " " if note else "") + "skip-update"
        armijo_ok = f_new <= f + cfg.wolfe_c1 * alpha * dd
        curv_ok = abs(float(g_new @ p)) <= cfg.wolfe_c2 * abs(dd)
        if not ls.success:
            note = (note + " " if note else "") + "line-search-budget"
        it += 1
        trace.append(TraceRow(it, f_new, float(np.max(np.abs(g_new))), alpha, ls.n_evals, bool(armijo_ok), bool(curv_ok), note))
        delta = f - f_new
        prev_decrease = alpha * dd
        x, f, g = x_new, f_new, g_new
        if callback is not None:
            callback(it, x, f)
        if not ls.success:
            reason = "line_search_failed"
            break
        if abs(delta) < cfg.f_tol:
            reason = "f_tol"
            break
    result = MinimizeResult(x, f, g, reason, it, n_evals, trace)
    result.inverse_hessian = H
    return result
