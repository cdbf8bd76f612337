"""Measurement schedules: uniform intervals and greedy per-step optimisation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import Spectrum, propagator
from .engine import CERTAIN_THRESHOLD, evolve, initial_state, project_failure, \
    success_amplitude_curve
from .exceptions import SuccessCertain
from .protocol import Schedule, resolve_representation

INVPHI = (math.sqrt(5) - 1) / 2
FLAT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    window: tuple  # (t_min, t_max)
    steps: int
    grid_points: int = 256
    refine_tolerance: float = 1e-8

    def __post_init__(self):
        t_min, t_max = map(float, self.window)
        if not 0 < t_min < t_max:
            raise ValueError(f"window must satisfy 0 < t_min < t_max, got {self.window}")
        if self.grid_points < 16:
            raise ValueError("grid_points must be at least 16")
        if not 0 < self.refine_tolerance < t_max - t_min:
            raise ValueError("refine_tolerance must be positive and smaller than the window")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "window", (t_min, t_max))

    @classmethod
    def default_for(cls, s: Spectrum, steps, grid_points=256, refine_tolerance=1e-8,
                    max_coupling=None):
        """Window ``(0, 2 N / J_max]``, about one traversal of the chain.

        ``J_max`` defaults to the largest off-diagonal element of the sector
        matrix; the lower end is one grid spacing above zero.
        """
        if max_coupling is None:
            h = s.reconstruct()
            max_coupling = float(np.max(np.abs(h - np.diag(np.diag(h)))))
        t_max = 2 * s.dim / max_coupling
        return cls((t_max / grid_points, t_max), steps, grid_points, refine_tolerance)

    def grid(self):
        return np.linspace(*self.window, self.grid_points)


def uniform(tau, q):
    if not tau > 0:
        raise ValueError("tau must be positive")
    if q < 1:
        raise ValueError("a schedule needs q >= 1 steps")
    return Schedule((float(tau),) * int(q), "uniform")


def golden_max(func, lo, hi, tol):
    """Maximise a unimodal ``func`` on ``[lo, hi]`` by golden-section search."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = func(c), func(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = func(d)
    x = (a + b) / 2
    return x, func(x)


def greedy_optimize(s: Spectrum, K, cfg: OptimizerConfig, representation="auto"):
    """Pick each interval to maximise that step's conditional success.

    Every step scans the grid, refines the best grid point by golden-section
    search between its neighbours, commits the interval and conditions the
    state on failure.  Grid ties go to the smaller time; a refinement that
    does worse than its grid point is discarded.  Steps where nothing in the
    window gives ``p > 1e-12`` are flagged.  The schedule stops early if a
    step succeeds with certainty.
    """
    rep = resolve_representation(s.dim, K, representation)
    state = initial_state(s.dim, K, rep)
    grid = cfg.grid()
    intervals, flagged = [], []

    for step in range(cfg.steps):
        def prob(t):
            return float(abs(success_amplitude_curve(state, s, [t])[0]) ** 2)

        p_grid = np.abs(success_amplitude_curve(state, s, grid)) ** 2
        k = int(np.argmax(p_grid))  # first maximum: smallest t on ties
        t_best, p_best = float(grid[k]), float(p_grid[k])
        if p_best < FLAT_THRESHOLD:
            flagged.append(step + 1)
        else:
            lo = grid[max(k - 1, 0)]
            hi = grid[min(k + 1, len(grid) - 1)]
            t_ref, p_ref = golden_max(prob, lo, hi, cfg.refine_tolerance)
            if p_ref > p_best:
                t_best, p_best = float(t_ref), p_ref
        intervals.append(t_best)
        state = evolve(state, propagator(s, t_best))
        if p_best > 1 - CERTAIN_THRESHOLD:
            break
        try:
            state = project_failure(state)[0].state
        except SuccessCertain:
            break
    return Schedule(tuple(intervals), "optimized", flagged_steps=tuple(flagged))


def expected_steps(trace):
    """Mean step of first success: ``(partial sum, exact value or None)``.

    The partial sum ``sum_j j pi[j]`` is always a lower bound on the mean; it
    is exact once the trace has collected all probability (``P[q] = 1`` to
    1e-12).
    """
    j = np.arange(1, trace.steps + 1)
    partial = float(np.sum(j * trace.pi))
    done = trace.steps > 0 and abs(trace.P[-1] - 1) <= 1e-12
    return partial, (partial if done else None)
