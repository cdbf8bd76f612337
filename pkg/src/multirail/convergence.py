"""Spectral certificates for uniform measuring intervals.

With a fixed interval tau the failure weight after j failed measurements is
``w(j) = ||T^j |1..1>||^2`` for ``T = U(tau) Theta``, where ``U`` is the
K-fold product propagator and ``Theta`` removes ``|N..N>``.  Every eigenvalue
of ``T`` has modulus at most 1, and ``rho(T) < 1`` makes ``w`` decay
geometrically.

For K >= 2 the spectral radius of the full N**K operator is always 1:
states antisymmetric under exchanging two chains never overlap ``|N..N>``
and are left alone by ``Theta``.  They are also unreachable from the
symmetric initial state, so :func:`reduce_T` restricts ``T`` to the part of
state space that the protocol can feel.  Inside the exchange-symmetric
sector, the smallest subspace that is invariant under ``U`` and contains
``|N..N>`` is spanned by the projections of ``|N..N>`` onto the eigenspaces
of ``U(tau)``.  That subspace is invariant under ``T``, and on it ``T`` is
``diag(phases) (1 - a a^T)`` with ``a`` the projection norms.  Its
orthogonal complement is invariant too and ``T`` acts there as the unitary
``U``.  So whatever part of ``|1..1>`` lies in the complement (the
"dark weight") is never received, and the rest decays at the rate set by
the reduced operator.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .chain import ChainSpec, Spectrum, propagator
from .condition import (OVERLAP_EPSILON, PHASE_EPSILON, ConditionReport, ResonanceReport,
                        overlap_report, resonance_check)
from .exceptions import BudgetExceeded, EigensolverError

logger = logging.getLogger(__name__)

DENSE_T_BUDGET = 4096
MULTISET_BUDGET = 10 ** 6
CONVERGENCE_MARGIN = 1e-10
DARK_TOLERANCE = 1e-10

VERDICTS = ("converges", "fails_condition", "resonant_tau", "inconclusive")


def build_T(s: Spectrum, tau, K, budget=DENSE_T_BUDGET):
    """Dense ``f(tau)^{(x)K}`` with the column of ``(N, ..., N)`` zeroed."""
    D = s.dim ** K
    if D > budget:
        raise BudgetExceeded(D, budget, "use power_radius with T_matvec instead")
    f = propagator(s, tau).matrix
    T = reduce(np.kron, [f] * K)
    T[:, -1] = 0
    return T


def T_matvec(s: Spectrum, tau, K):
    """Matrix-free ``v -> U(tau) Theta v`` on flattened N**K vectors."""
    f = propagator(s, tau).matrix
    N = s.dim

    def matvec(v):
        x = np.array(v, dtype=complex)
        x[-1] = 0
        x = x.reshape((N,) * K)
        for ax in range(K):
            x = np.moveaxis(np.tensordot(f, x, axes=(1, ax)), 0, ax)
        return x.reshape(-1)

    return matvec


@dataclass(frozen=True)
class RadiusEstimate:
    rho: float
    error: float
    iterations: int


def power_radius(matvec, dim, iterations=4000, window=200, seed=0):
    """Spectral radius from the averaged log growth of ``||T^k v||``.

    Averaging the per-step growth over a window washes out the beating
    between eigenvalues of equal modulus and different phase.  ``error`` is
    the change between the last two windows.  Convergence is slow when the
    two largest moduli are close; treat the estimate accordingly.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    logs = []
    for k in range(iterations):
        v = matvec(v)
        n = np.linalg.norm(v)
        if n == 0:
            return RadiusEstimate(0.0, 0.0, k + 1)
        logs.append(math.log(n))
        v /= n
    window = min(window, iterations // 2)
    a = math.exp(np.mean(logs[-window:]))
    b = math.exp(np.mean(logs[-2 * window:-window]))
    return RadiusEstimate(a, abs(a - b), iterations)


def spectral_radius(T, eig_budget=DENSE_T_BUDGET):
    """Largest eigenvalue modulus of a general square matrix."""
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {T.shape}")
    if T.shape[0] > eig_budget:
        return power_radius(lambda v: T @ v, T.shape[0]).rho
    try:
        lam = np.linalg.eigvals(T)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"non-Hermitian eigensolver failed: {exc}") from exc
    return float(np.max(np.abs(lam))) if lam.size else 0.0


def _circular_clusters(phases, eps):
    """Label phases on the circle; neighbours closer than ``eps`` share a label."""
    order = np.argsort(phases, kind="stable")
    sorted_ph = phases[order]
    labels_sorted = np.concatenate([[0], np.cumsum(np.diff(sorted_ph) >= eps)])
    if len(phases) > 1 and 2 * np.pi - (sorted_ph[-1] - sorted_ph[0]) < eps:
        labels_sorted[labels_sorted == labels_sorted[-1]] = 0
    labels = np.empty_like(labels_sorted)
    labels[order] = labels_sorted
    _, labels = np.unique(labels, return_inverse=True)
    return labels


@dataclass(frozen=True)
class ReducedOperator:
    matrix: np.ndarray  # T on the U-cyclic span of |N..N>
    phases: np.ndarray  # U(tau) eigenphase of every kept cluster
    overlaps: np.ndarray  # ||P_c |N..N>||
    initial: np.ndarray  # components of |1..1> in the kept basis
    dark_weight: float  # weight of |1..1> that never reaches |N..N>

    @property
    def dim(self):
        return len(self.overlaps)

    def bright_radius(self):
        return spectral_radius(self.matrix)

    def failure_weights(self, q):
        """``w(1..q+1)``, aligned with ``ProtocolTrace.w``, through the reduced operator."""
        x = self.matrix @ self.initial
        out = [float(np.vdot(x, x).real) + self.dark_weight]
        for _ in range(q):
            x = self.matrix @ x
            out.append(float(np.vdot(x, x).real) + self.dark_weight)
        return np.array(out)


def reduce_T(s: Spectrum, tau, K, phase_epsilon=PHASE_EPSILON,
             overlap_epsilon=OVERLAP_EPSILON, budget=MULTISET_BUDGET):
    """Restrict ``T`` to the states the protocol can reach (see module docstring).

    Works on exchange-symmetric products of single-chain eigenvectors
    (multisets of K eigen-indices), so its cost is set by C(N+K-1, K)
    rather than N**K.  Eigenphases closer than ``phase_epsilon`` on the circle
    are merged into one eigenspace of ``U(tau)``; this is what accounts for
    resonant intervals.
    """
    N = s.dim
    count = math.comb(N + K - 1, K)
    if count > budget:
        raise BudgetExceeded(count, budget, "symmetric sector too large for the reduced operator")
    ms = np.array(list(itertools.combinations_with_replacement(range(N), K)))
    mult = np.array([np.prod([math.factorial(c) for c in np.bincount(row)]) for row in ms])
    norm = np.sqrt(math.factorial(K) / mult)
    V = s.eigenvectors
    to_end = norm * np.prod(V[-1, ms].conj(), axis=1)  # <S_m|N..N>
    to_start = norm * np.prod(V[0, ms].conj(), axis=1)  # <S_m|1..1>
    phases = np.mod(s.eigenvalues[ms].sum(axis=1) * float(tau), 2 * np.pi)

    labels = _circular_clusters(phases, phase_epsilon)
    L = labels.max() + 1
    w_end = np.abs(to_end) ** 2
    a = np.sqrt(np.bincount(labels, weights=w_end, minlength=L))
    # weighted circular mean phase of each cluster
    z = np.zeros(L, dtype=complex)
    np.add.at(z, labels, (w_end + 1e-300) * np.exp(1j * phases))
    cluster_phase = np.angle(z)
    proj = np.zeros(L, dtype=complex)
    np.add.at(proj, labels, to_end.conj() * to_start)

    keep = a > overlap_epsilon
    a, cluster_phase = a[keep], cluster_phase[keep]
    x = proj[keep] / a
    T = np.exp(-1j * cluster_phase)[:, None] * (np.eye(len(a)) - np.outer(a, a))
    dark = max(0.0, 1.0 - float(np.sum(np.abs(x) ** 2)))
    return ReducedOperator(T, cluster_phase, a, x, dark)


@dataclass(frozen=True)
class ConvergenceCertificate:
    tau: float
    K: int
    rho: float | None  # spectral radius felt by the protocol
    condition: ConditionReport
    resonance: ResonanceReport
    verdict: str
    rho_full: float | None = None  # spectral radius of the full N**K operator
    dark_weight: float | None = None
    empirical_rate: float | None = None
    note: str = ""

    def to_dict(self):
        return {"tau": self.tau, "K": self.K, "rho": self.rho, "verdict": self.verdict,
                "min_overlap": self.condition.min_overlap,
                "degenerate": [list(c) for c in self.condition.degenerate_clusters],
                "resonant_pairs": [list(p) for p in self.resonance.colliding_pairs],
                "empirical_rate": self.empirical_rate, "rho_full": self.rho_full,
                "dark_weight": self.dark_weight, "note": self.note}


def certify(s: Spectrum, spec: ChainSpec | None, tau, K, dense_budget=DENSE_T_BUDGET,
            fit_steps=None):
    """Combine the overlap condition, the resonance check and the spectral radius.

    ``converges`` requires the single-chain condition, a clean interval, no
    dark weight and ``rho < 1 - 1e-10``.  ``rho`` is the reduced-operator
    radius, or 1 when part of the initial state is dark.  ``rho_full`` is
    reported when the dense operator fits ``dense_budget``.  ``fit_steps``
    additionally runs that many uniform steps and fits the decay of ``w``.
    ``spec`` is only used for the note on chains outside the
    nearest-neighbour corollary.
    """
    tau = float(tau)
    cond = overlap_report(s)
    res = resonance_check(s, tau)
    note = []
    if spec is not None and spec.periodic:
        note.append("ring: overlap condition is not automatic")

    rho_full = None
    if s.dim ** K <= dense_budget:
        rho_full = spectral_radius(build_T(s, tau, K, dense_budget))

    rho = dark = None
    try:
        red = reduce_T(s, tau, K)
    except BudgetExceeded as exc:
        note.append(str(exc))
    else:
        dark = red.dark_weight
        rho = 1.0 if dark > DARK_TOLERANCE else red.bright_radius()

    if not cond.holds:
        verdict = "fails_condition"
    elif not res.clean:
        verdict = "resonant_tau"
        logger.warning("tau=%g collides eigenphases %s", tau, res.colliding_pairs)
    elif rho is None:
        verdict = "inconclusive"
    elif dark > DARK_TOLERANCE:
        verdict = "fails_condition"
        note.append(f"dark weight {dark:.3g} of the initial state never reaches the receiver")
    elif rho < 1 - CONVERGENCE_MARGIN:
        verdict = "converges"
    else:
        verdict = "inconclusive"

    rate = None
    if fit_steps:
        from .protocol import run  # late import: protocol does not depend on this module

        rate = fit_decay(run(s, K, (tau,) * int(fit_steps), representation="auto"))
    return ConvergenceCertificate(tau=tau, K=K, rho=rho, condition=cond, resonance=res,
                                  verdict=verdict, rho_full=rho_full, dark_weight=dark,
                                  empirical_rate=rate, note="; ".join(note))


def fit_decay(trace, min_steps=20, floor=1e-13):
    """Geometric decay ratio of the failure weight, ``w(j) ~ A r**j``.

    Least-squares slope of ``log w`` over the second half of the steps whose
    weight is still above ``floor``.
    """
    if trace.complete:
        raise ValueError("trace ended in certain success; nothing decays")
    w = np.asarray(trace.w)
    if trace.steps < min_steps:
        raise ValueError(f"need at least {min_steps} steps, got {trace.steps}")
    valid = np.flatnonzero(w > floor)
    usable = valid[valid == np.arange(len(valid))]  # stop at the first underflow
    if len(usable) < min_steps:
        raise ValueError(f"only {len(usable)} weights above {floor}")
    j = usable[len(usable) // 2:]
    slope = np.polyfit(j, np.log(w[j]), 1)[0]
    return float(np.exp(slope))
