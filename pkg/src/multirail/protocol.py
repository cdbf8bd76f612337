"""Repeated collective measurements at the receiving end.

After each interval the receiver asks whether all K excitations sit on the
last sites.  ``p[j]`` is the conditional success probability at step j, the
unconditional law of the first success is ``pi[j] = p[j] * w[j]`` and the
failure weight ``w[j+1] = w[j] * (1 - p[j])`` with ``w[1] = 1``.  Hence
``P[q] = sum_{j<=q} pi[j] = 1 - w[q+1]``.

Arrays are 0-indexed: ``p[0]`` is step 1 and ``w[0]`` is ``w(1)``; ``w`` has
one more entry than ``p``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import Spectrum, propagator
from .engine import (CERTAIN_THRESHOLD, DENSE_BUDGET, evolve, initial_state,
                     project_failure, success_amplitude)
from .exceptions import SuccessCertain

AUTO_DENSE_LIMIT = 4096
MC_CHUNK = 1 << 15  # runs per random substream


@dataclass(frozen=True)
class Jitter:
    """Uniform timing error on ``[-width, width]``, one draw per interval."""

    width: float
    seed: int
    distribution: str = "uniform"

    def __post_init__(self):
        if self.distribution != "uniform":
            raise ValueError(f"unsupported jitter distribution {self.distribution!r}")
        if self.width < 0:
            raise ValueError("jitter width must be non-negative")


@dataclass(frozen=True)
class Schedule:
    intervals: tuple
    strategy: str = "custom"
    jitter: Jitter | None = None
    flagged_steps: tuple = ()  # optimizer steps where nothing in the window helped

    def __post_init__(self):
        iv = tuple(float(t) for t in self.intervals)
        if not iv:
            raise ValueError("a schedule needs at least one interval")
        if not all(np.isfinite(t) and t > 0 for t in iv):
            raise ValueError("intervals must be positive and finite")
        if self.strategy not in ("uniform", "optimized", "custom"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        object.__setattr__(self, "intervals", iv)

    def __len__(self):
        return len(self.intervals)

    def to_dict(self):
        d = {"intervals": list(self.intervals), "strategy": self.strategy}
        if self.jitter is not None:
            d["jitter"] = {"distribution": self.jitter.distribution,
                           "width": self.jitter.width, "seed": self.jitter.seed}
        if self.flagged_steps:
            d["flagged_steps"] = list(self.flagged_steps)
        return d

    @classmethod
    def from_dict(cls, d):
        jit = d.get("jitter")
        if jit is not None:
            jit = Jitter(width=float(jit["width"]), seed=int(jit["seed"]),
                         distribution=jit.get("distribution", "uniform"))
        return cls(tuple(d["intervals"]), d.get("strategy", "custom"), jit,
                   tuple(d.get("flagged_steps", ())))


@dataclass
class ProtocolTrace:
    N: int
    K: int
    intervals: np.ndarray  # realised intervals, one per recorded step
    p: np.ndarray
    pi: np.ndarray
    P: np.ndarray
    w: np.ndarray  # len(p) + 1 entries, w[0] = 1
    final_state: object = None
    certain_step: int | None = None  # 1-based step where success became certain
    metadata: dict = field(default_factory=dict)

    @property
    def steps(self):
        return len(self.p)

    @property
    def complete(self):
        """True when the trace ended in certain success."""
        return self.certain_step is not None

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "t", "p", "pi", "P", "w"])
        for j in range(self.steps):
            writer.writerow([j + 1] + [repr(float(x)) for x in
                                       (self.intervals[j], self.p[j], self.pi[j],
                                        self.P[j], self.w[j + 1])])
        return buf.getvalue()

    def to_dict(self):
        meta = {"N": self.N, "K": self.K, "steps": self.steps,
                "certain_step": self.certain_step, **self.metadata}
        return {"metadata": meta,
                "t": self.intervals.tolist(), "p": self.p.tolist(), "pi": self.pi.tolist(),
                "P": self.P.tolist(), "w": self.w.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def resolve_representation(N, K, representation):
    if representation == "auto":
        return "dense" if N ** K <= AUTO_DENSE_LIMIT else "product_sum"
    return representation


def iterate_steps(s: Spectrum, K, intervals, representation="product_sum",
                  budget=DENSE_BUDGET):
    """Yield ``(t, p, state)`` per step; stop after a certain success.

    ``intervals`` may be any iterable, including an endless one.  ``state``
    is the post-measurement residual (``None`` after certain success).
    """
    rep = resolve_representation(s.dim, K, representation)
    state = initial_state(s.dim, K, rep, budget)
    for t in intervals:
        state = evolve(state, propagator(s, t))
        try:
            residual, p = project_failure(state)
        except SuccessCertain:
            yield t, 1.0, None
            return
        state = residual.state
        yield t, p, state


def trace_from_probabilities(p, intervals, N=0, K=0, **extra):
    """Assemble the trace arrays from conditional success probabilities."""
    p = np.asarray(p, dtype=float)
    w = np.concatenate([[1.0], np.cumprod(1 - p)])
    pi = p * w[:-1]
    P = np.cumsum(pi)
    certain = extra.pop("certain_step", None)
    if certain is None and len(p) and p[-1] == 1.0:
        certain = len(p)
    return ProtocolTrace(N=N, K=K, intervals=np.asarray(intervals, dtype=float), p=p, pi=pi,
                         P=P, w=w, certain_step=certain, **extra)


def run(s: Spectrum, K, schedule, representation="product_sum", budget=DENSE_BUDGET):
    """Exact protocol trace for one schedule.

    A step whose success probability is 1 to round-off is recorded as
    ``p = 1`` and ends the trace.
    """
    intervals = schedule.intervals if isinstance(schedule, Schedule) else tuple(schedule)
    if isinstance(schedule, Schedule) and schedule.jitter is not None:
        return jittered_run(s, K, schedule, representation=representation, budget=budget)
    if not intervals:
        raise ValueError("schedule is empty")
    ts, ps, state = [], [], None
    for t, p, st in iterate_steps(s, K, intervals, representation, budget):
        ts.append(t)
        ps.append(p)
        state = st
    rep = resolve_representation(s.dim, K, representation)
    return trace_from_probabilities(ps, ts, s.dim, K, final_state=state,
                                    metadata={"representation": rep})


@dataclass(frozen=True)
class ReachResult:
    steps: int | None  # None when the target was not reached
    achieved: float
    reached: bool


def reach(s: Spectrum, K, intervals, target_P, q_max, representation="auto"):
    """First step at which the cumulative success probability reaches ``target_P``."""
    if not 0 < target_P < 1:
        raise ValueError("target_P must lie in (0, 1)")
    w = 1.0
    q = 0
    for q, (t, p, _) in enumerate(iterate_steps(s, K, itertools.islice(intervals, q_max),
                                                representation), start=1):
        w *= 1 - p
        if 1 - w >= target_P:
            return ReachResult(q, 1 - w, True)
    return ReachResult(None, 1 - w, False)


def steps_to_reach(s: Spectrum, K, tau, target_P, q_max, representation="auto"):
    """Smallest q with ``P[q] >= target_P`` under uniform intervals ``tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return reach(s, K, itertools.repeat(float(tau)), target_P, q_max, representation)


def jitter_intervals(intervals, jitter: Jitter):
    """Perturb each interval by an independent uniform draw (seeded)."""
    intervals = np.asarray(intervals, dtype=float)
    if jitter.width >= intervals.min():
        raise ValueError(f"jitter width {jitter.width} must be below the smallest interval "
                         f"{intervals.min()}")
    if jitter.width == 0:
        return intervals.copy()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(jitter.seed)))
    return intervals + rng.uniform(-jitter.width, jitter.width, size=len(intervals))


def jitter_stream(tau, jitter: Jitter):
    """Endless stream of jittered copies of ``tau``, reproducible from the seed."""
    if jitter.width >= tau:
        raise ValueError("jitter width must be below the interval")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(jitter.seed)))
    while True:
        for d in rng.uniform(-jitter.width, jitter.width, size=1024):
            yield tau + d


def jittered_run(s: Spectrum, K, schedule: Schedule, jitter: Jitter | None = None,
                 representation="product_sum", budget=DENSE_BUDGET):
    """Run with seeded timing errors; the trace records the realised intervals."""
    jitter = jitter or schedule.jitter
    if jitter is None:
        raise ValueError("no jitter given")
    realised = jitter_intervals(schedule.intervals, jitter)
    trace = run(s, K, replace(schedule, intervals=tuple(realised), jitter=None),
                representation, budget)
    trace.metadata.update(nominal=list(schedule.intervals), jitter_width=jitter.width,
                          jitter_seed=jitter.seed)
    return trace


@dataclass(frozen=True)
class MonteCarloResult:
    """``counts[j]`` runs first succeeded at step j+1; ``counts[-1]`` never did."""

    counts: np.ndarray
    seed: int

    @property
    def runs(self):
        return int(self.counts.sum())

    @property
    def frequencies(self):
        return self.counts / self.runs

    def to_csv(self, pi=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["step", "count", "frequency"] + (["pi"] if pi is not None else [])
        writer.writerow(header)
        q = len(self.counts) - 1
        for j, c in enumerate(self.counts):
            row = [j + 1 if j < q else "never", int(c), repr(float(c / self.runs))]
            if pi is not None:
                row.append(repr(float(pi[j] if j < q else 1 - np.sum(pi))))
            writer.writerow(row)
        return buf.getvalue()


def _sample_chunk(p, runs, seed, chunk_index):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk_index])))
    counts = np.zeros(len(p) + 1, dtype=np.int64)
    alive = runs
    for j, pj in enumerate(p):
        if alive == 0:
            break
        hits = int(np.count_nonzero(rng.random(alive) < pj))
        counts[j] = hits
        alive -= hits
    counts[-1] = alive
    return counts


def worker_count():
    env = os.environ.get("MULTIRAIL_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def sample_success_steps(p, runs, seed, workers=None):
    """Histogram of the first successful step over ``runs`` simulated receivers.

    Each run succeeds at step j with conditional probability ``p[j]``.  Runs
    are split into fixed chunks, chunk i drawing from the counter-based
    stream keyed by ``(seed, i)``, so the histogram does not depend on the
    number of workers.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if seed is None:
        raise ValueError("a seed is required for Monte Carlo sampling")
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    sizes = [min(MC_CHUNK, runs - start) for start in range(0, runs, MC_CHUNK)]
    workers = workers or worker_count()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(p, a[1], seed, a[0]),
                                  enumerate(sizes)))
    else:
        parts = [_sample_chunk(p, n, seed, i) for i, n in enumerate(sizes)]
    return MonteCarloResult(np.sum(parts, axis=0), int(seed))


def monte_carlo(s: Spectrum, K, schedule, runs, seed, representation="product_sum"):
    """Sample measurement records for ``schedule``; returns ``(result, trace)``."""
    trace = run(s, K, schedule, representation)
    return sample_success_steps(trace.p, runs, seed), trace
