"""Lookback-window optimization: Sharpe objective and Powell search.

Powell's conjugate-direction method with golden-section line minimization
works on a continuous relaxation of the integer lookback (the objective
rounds before evaluating). Because a rounded objective is piecewise
constant and can stall a line search, small integer ranges are verified by
exhaustive sweep afterwards, so the reported best lookback is the true
integer argmax whenever the range allows it. Ties break toward the
smaller lookback.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import OptimizationError, SharpeUndefinedError

logger = logging.getLogger(__name__)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_PENALTY = 1e18
EXHAUSTIVE_LIMIT = 32


def sharpe_ratio(excess_returns) -> float:
    """Mean over sample standard deviation of a monthly excess-return series.

    Not annualized. Raises SharpeUndefinedError for fewer than two
    observations or zero variance.
    """
    arr = np.asarray(excess_returns, dtype=float)
    if arr.size < 2:
        raise SharpeUndefinedError(f"need >= 2 observations, got {arr.size}")
    std = arr.std(ddof=1)
    if not np.isfinite(std) or std <= 0.0:
        raise SharpeUndefinedError("zero-variance return series")
    return float(arr.mean() / std)


def golden_section_minimize(f, lo: float, hi: float, xtol: float = 1e-6,
                            max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for a minimum of f on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass
class PowellOutcome:
    x: np.ndarray
    fun: float
    n_iter: int
    n_evals: int
    converged: bool


def _line_interval(x: np.ndarray, direction: np.ndarray, bounds) -> tuple[float, float]:
    """Step range [alpha_lo, alpha_hi] keeping x + alpha*direction in the box."""
    alpha_lo, alpha_hi = -np.inf, np.inf
    for xi, di, (lo, hi) in zip(x, direction, bounds):
        if di == 0.0:
            continue
        a, b = (lo - xi) / di, (hi - xi) / di
        if a > b:
            a, b = b, a
        alpha_lo = max(alpha_lo, a)
        alpha_hi = min(alpha_hi, b)
    if not np.isfinite(alpha_lo) or not np.isfinite(alpha_hi):
        return 0.0, 0.0
    return alpha_lo, alpha_hi


def powell_minimize(objective, start, bounds, ftol: float = 1e-8,
                    xtol: float = 1e-6, maxiter: int = 100) -> PowellOutcome:
    """Minimize a function of a real vector inside box bounds.

    Sweeps a direction set with golden-section line minimization clamped
    to the box, replaces the direction of largest single-sweep decrease
    with the sweep displacement when the standard extrapolation test says
    so, and stops when a sweep's fractional improvement drops below ftol.
    Only strictly improving line-search steps are taken, so a flat
    objective returns the start point after one sweep.
    """
    x = np.asarray(start, dtype=float).copy()
    n = x.size
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if len(bounds) != n:
        raise OptimizationError("one (lo, hi) bound pair per dimension required")
    x = np.clip(x, [b[0] for b in bounds], [b[1] for b in bounds])

    evals = 0

    def f(point):
        nonlocal evals
        evals += 1
        return float(objective(np.asarray(point, dtype=float)))

    fx = f(x)
    if not np.isfinite(fx):
        raise OptimizationError(f"objective is non-finite at start {x!r}")

    directions = [np.eye(n)[i] for i in range(n)]
    converged = False
    iteration = 0
    for iteration in range(1, maxiter + 1):
        x_sweep_start = x.copy()
        f_start = fx
        biggest_drop = 0.0
        biggest_idx = 0
        for i, direction in enumerate(directions):
            alpha_lo, alpha_hi = _line_interval(x, direction, bounds)
            if alpha_hi - alpha_lo <= 0.0:
                continue
            alpha, f_alpha = golden_section_minimize(
                lambda a: f(x + a * direction), alpha_lo, alpha_hi, xtol=xtol)
            if f_alpha < fx:
                if fx - f_alpha > biggest_drop:
                    biggest_drop = fx - f_alpha
                    biggest_idx = i
                x = x + alpha * direction
                fx = f_alpha

        if 2.0 * (f_start - fx) <= ftol * (abs(f_start) + abs(fx)) + 1e-20:
            converged = True
            break

        displacement = x - x_sweep_start
        if np.any(displacement != 0.0):
            extrapolated = np.clip(2.0 * x - x_sweep_start,
                                   [b[0] for b in bounds], [b[1] for b in bounds])
            f_ext = f(extrapolated)
            if f_ext < f_start:
                t = (2.0 * (f_start - 2.0 * fx + f_ext)
                     * (f_start - fx - biggest_drop) ** 2
                     - biggest_drop * (f_start - f_ext) ** 2)
                if t < 0.0:
                    directions[biggest_idx] = displacement / np.linalg.norm(displacement)
                    alpha_lo, alpha_hi = _line_interval(x, directions[biggest_idx], bounds)
                    if alpha_hi - alpha_lo > 0.0:
                        alpha, f_alpha = golden_section_minimize(
                            lambda a: f(x + a * directions[biggest_idx]),
                            alpha_lo, alpha_hi, xtol=xtol)
                        if f_alpha < fx:
                            x = x + alpha * directions[biggest_idx]
                            fx = f_alpha

    return PowellOutcome(x=x, fun=fx, n_iter=iteration, n_evals=evals, converged=converged)


@dataclass
class OptimizationResult:
    """Outcome of the lookback search with its full evaluation trace."""

    best_L: int
    best_sharpe: float
    evaluations: list
    converged: bool

    def as_dict(self) -> dict:
        return {"best_L": self.best_L, "best_sharpe": self.best_sharpe,
                "converged": self.converged,
                "evaluations": [{"L": int(L), "sharpe": s} for L, s in self.evaluations]}


def optimize_lookback(objective, bounds: tuple = (1, 24), ftol: float = 1e-8,
                      xtol: float = 1e-6, maxiter: int = 100,
                      exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> OptimizationResult:
    """Maximize training Sharpe over integer lookbacks in [L_min, L_max].

    `objective` maps an integer lookback to its training-period Sharpe and
    may raise SharpeUndefinedError for lookbacks it cannot evaluate. The
    Powell pass minimizes the negated Sharpe of the rounded argument; for
    ranges of at most `exhaustive_limit` integers every lookback is then
    evaluated outright, making the reported argmax exact. Ties go to the
    smaller lookback.
    """
    l_min, l_max = int(bounds[0]), int(bounds[1])
    if l_min < 1 or l_max < l_min:
        raise OptimizationError(f"invalid lookback bounds [{l_min}, {l_max}]")

    cache: dict[int, float | None] = {}

    def evaluate(L: int) -> float | None:
        if L not in cache:
            try:
                cache[L] = float(objective(L))
            except SharpeUndefinedError as exc:
                logger.warning("lookback %d: Sharpe undefined (%s)", L, exc)
                cache[L] = None
        return cache[L]

    converged = True
    if l_max > l_min:
        def negated(xvec) -> float:
            val = evaluate(int(round(float(xvec[0]))))
            return _PENALTY if val is None else -val

        start = np.array([0.5 * (l_min + l_max)])
        outcome = powell_minimize(negated, start, [(l_min, l_max)],
                                  ftol=ftol, xtol=xtol, maxiter=maxiter)
        converged = outcome.converged

    if l_max - l_min + 1 <= exhaustive_limit:
        for L in range(l_min, l_max + 1):
            evaluate(L)
    else:
        evaluate(l_min)
        evaluate(l_max)

    defined = {L: s for L, s in cache.items() if s is not None}
    if not defined:
        raise OptimizationError("Sharpe undefined for every candidate lookback")
    best_sharpe = max(defined.values())
    best_L = min(L for L, s in defined.items() if s == best_sharpe)
    evaluations = sorted(defined.items())
    logger.info("lookback search: best L=%d with training Sharpe %.6f", best_L, best_sharpe)
    return OptimizationResult(best_L=best_L, best_sharpe=best_sharpe,
                              evaluations=evaluations, converged=converged)
