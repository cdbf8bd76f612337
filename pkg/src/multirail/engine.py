"""Joint state of the K excited chains of one codeword between measurements.

The chains outside the codeword stay in the vacuum and never matter, and the
state of the K excited chains is the same for every codeword, so everything
here works on N**K amplitudes and never sees a codeword label.

Two representations are kept side by side:

``DenseJointState``
    The full tensor, flattened row-major over ``(n_1, ..., n_K)`` with
    ``n_1`` slowest.
``ProductSumState``
    ``sum_j c_j phi_j^{(x)K}``.  The initial state is one product term and each
    failed measurement subtracts one more (the image of ``|N>^{(x)K}``), so
    after q steps there are at most q+1 terms and each step costs
    O(terms * N**2) instead of O(N**(K+1)).

:func:`recursion_gamma` computes the same success amplitudes a third way,
by summing the amplitude recursion over all excitation configurations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .chain import Propagator, Spectrum, propagator
from .exceptions import BudgetExceeded, NormViolation, SuccessCertain

DENSE_BUDGET = 1 << 22  # complex amplitudes
RECURSION_BUDGET = 10 ** 6
RECURSION_MAX_STEPS = 8
CERTAIN_THRESHOLD = 1e-12  # p > 1 - this counts as certain success
TERM_DROP = 1e-14

REPRESENTATIONS = ("dense", "product_sum")


@dataclass(frozen=True)
class DenseJointState:
    N: int
    K: int
    amplitudes: np.ndarray

    representation = "dense"

    def tensor(self):
        return self.amplitudes.reshape((self.N,) * self.K)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class ProductSumState:
    N: int
    K: int
    coefficients: np.ndarray  # shape (terms,)
    phis: np.ndarray  # shape (terms, N)
    steps: int = 0

    representation = "product_sum"

    @property
    def terms(self):
        return len(self.coefficients)

    def gram(self):
        """``G[i, j] = <phi_i|phi_j>**K``."""
        return (self.phis.conj() @ self.phis.T) ** self.K

    def norm(self):
        c = self.coefficients
        return float(np.sqrt(max((c.conj() @ self.gram() @ c).real, 0.0)))


@dataclass(frozen=True)
class FailureResidual:
    """State after a failed measurement, plus what the projection removed."""

    state: object
    gamma: complex
    p: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", abs(self.gamma) ** 2)


def check_dense_budget(N, K, budget=DENSE_BUDGET, what="dense joint state"):
    size = N ** K
    if size > budget:
        raise BudgetExceeded(size, budget, f"{what} for N={N}, K={K}; use the product-sum path")
    return size


def initial_state(N, K, representation="product_sum", budget=DENSE_BUDGET):
    """All K excitations on site 1: ``|1>^{(x)K}``."""
    if N < 2 or K < 1:
        raise ValueError(f"need N >= 2 and K >= 1, got N={N}, K={K}")
    if representation == "dense":
        amps = np.zeros(check_dense_budget(N, K, budget), dtype=complex)
        amps[0] = 1.0
        return DenseJointState(N, K, amps)
    if representation == "product_sum":
        phi = np.zeros((1, N), dtype=complex)
        phi[0, 0] = 1.0
        return ProductSumState(N, K, np.ones(1, dtype=complex), phi)
    raise ValueError(f"unknown representation {representation!r}")


def _matrix(f):
    return f.matrix if isinstance(f, Propagator) else np.asarray(f)


def _apply_each_axis(op, tensor):
    for ax in range(tensor.ndim):
        tensor = np.moveaxis(np.tensordot(op, tensor, axes=(1, ax)), 0, ax)
    return tensor


def evolve(state, f):
    """Apply the same single-chain propagator to every excited chain."""
    m = _matrix(f)
    if m.shape != (state.N, state.N):
        raise ValueError(f"propagator is {m.shape}, state has N={state.N}")
    if isinstance(state, DenseJointState):
        out = _apply_each_axis(m, state.tensor())
        return DenseJointState(state.N, state.K, np.ascontiguousarray(out).reshape(-1))
    return ProductSumState(state.N, state.K, state.coefficients,
                           state.phis @ m.T, state.steps)


def success_amplitude(state):
    """Amplitude of ``|N>^{(x)K}``: every excitation at the receiving end."""
    if isinstance(state, DenseJointState):
        return complex(state.amplitudes[-1])
    return complex(state.coefficients @ state.phis[:, -1] ** state.K)


def project_failure(state):
    """Condition on a failed measurement.

    Returns ``(FailureResidual, p)`` with ``p = |gamma|**2`` the success
    probability that was projected out; the residual is renormalised.
    Raises :class:`SuccessCertain` when ``p`` is 1 to round-off.
    """
    gamma = success_amplitude(state)
    p = abs(gamma) ** 2
    if p > 1 - CERTAIN_THRESHOLD:
        raise SuccessCertain(p, gamma)
    scale = 1 / np.sqrt(1 - p)
    if isinstance(state, DenseJointState):
        amps = state.amplitudes.copy()
        amps[-1] = 0
        new = DenseJointState(state.N, state.K, amps * scale)
    else:
        eN = np.zeros((1, state.N), dtype=complex)
        eN[0, -1] = 1.0
        coeffs = np.append(state.coefficients, -gamma) * scale
        phis = np.vstack([state.phis, eN])
        keep = np.abs(coeffs) >= TERM_DROP
        new = ProductSumState(state.N, state.K, coeffs[keep], phis[keep], state.steps + 1)
    return FailureResidual(new, gamma), p


def to_dense(ps: ProductSumState, budget=DENSE_BUDGET, check_norm=True):
    """Expand ``sum_j c_j phi_j^{(x)K}`` into the full tensor."""
    check_dense_budget(ps.N, ps.K, budget)
    amps = np.zeros(ps.N ** ps.K, dtype=complex)
    for c, phi in zip(ps.coefficients, ps.phis):
        amps += c * reduce(np.kron, [phi] * ps.K)
    if check_norm and abs(np.linalg.norm(amps) - 1) > 1e-9:
        raise NormViolation(f"expanded state has norm {np.linalg.norm(amps)!r}")
    return DenseJointState(ps.N, ps.K, amps)


def success_amplitude_curve(state, s: Spectrum, times):
    """Success amplitude after evolving ``state`` for each of ``times``.

    Works in the eigenbasis so a whole grid of candidate intervals costs one
    basis change plus a contraction per time.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    V = s.eigenvectors
    g = np.exp(-1j * np.multiply.outer(times, s.eigenvalues)) * V[-1, :]  # (G, N)
    if isinstance(state, DenseJointState):
        X = _apply_each_axis(V.conj().T, state.tensor())
        Y = np.tensordot(g, X, axes=(1, 0))
        for _ in range(state.K - 1):
            Y = np.einsum("gm,gm...->g...", g, Y)
        return Y
    A = state.phis @ V.conj()  # eigen-coefficients of every phi
    return ((A @ g.T) ** state.K).T @ state.coefficients


def recursion_gamma(intervals, s: Spectrum, K, budget=RECURSION_BUDGET,
                    max_steps=RECURSION_MAX_STEPS):
    """Success amplitudes gamma_1..gamma_q by the explicit amplitude recursion.

    With ``F[n, n'; t] = prod_i f_{n_i, n'_i}(t)`` and configurations
    ``n != (N, ..., N)``::

        gamma_1   = F[N, 1; t_1]
        F_1[n]    = F[n, 1; t_1] / sqrt(1 - |gamma_1|^2)
        gamma_q   = sum_n F[N, n; t_q] F_{q-1}[n]
        F_q[n]    = sum_n' F[n, n'; t_q] F_{q-1}[n'] / sqrt(1 - |gamma_q|^2)

    Nothing is shared with the state-evolution path except the propagator.
    Costs O(q N**(2K)).  Stops early, returning the amplitudes so far, when
    some ``|gamma_q|`` reaches 1.
    """
    intervals = list(intervals)
    N = s.dim
    D = N ** K
    if D > budget:
        raise BudgetExceeded(D, budget, "amplitude recursion")
    if not 1 <= len(intervals) <= max_steps:
        raise ValueError(f"recursion supports 1..{max_steps} steps, got {len(intervals)}")

    configs = np.array(list(itertools.product(range(N), repeat=K)))
    last = D - 1
    rest = np.arange(D - 1)  # every configuration except (N, ..., N)
    chunk = max(1, (1 << 20) // D)

    def F(f, rows, cols):
        out = np.ones((len(rows), len(cols)), dtype=complex)
        for i in range(K):
            out *= f[configs[rows, i][:, None], configs[cols, i][None, :]]
        return out

    gammas = []
    F_prev = None
    for q, t in enumerate(intervals):
        f = propagator(s, t).matrix
        if q == 0:
            column = F(f, np.arange(D), np.array([0]))[:, 0]
            gamma = column[last]
        else:
            gamma = (F(f, np.array([last]), rest) @ F_prev)[0]
        gammas.append(complex(gamma))
        if abs(gamma) ** 2 > 1 - CERTAIN_THRESHOLD:
            break
        norm = np.sqrt(1 - abs(gamma) ** 2)
        if q == 0:
            F_prev = column[rest] / norm
        else:
            F_next = np.empty(D - 1, dtype=complex)
            for start in range(0, D - 1, chunk):
                rows = rest[start:start + chunk]
                F_next[start:start + chunk] = F(f, rows, rest) @ F_prev
            F_prev = F_next / norm
    return gammas


def state_to_dict(state):
    """JSON-ready dump; complex numbers as ``[re, im]`` pairs."""
    pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
    d = {"representation": state.representation, "N": state.N, "K": state.K}
    if isinstance(state, DenseJointState):
        d["amplitudes"] = [pair(z) for z in state.amplitudes]
    else:
        d["steps"] = state.steps
        d["terms"] = [{"coefficient": pair(c), "phi": [pair(z) for z in phi]}
                      for c, phi in zip(state.coefficients, state.phis)]
    return d


def state_from_dict(d):
    cplx = lambda a: np.asarray(a, dtype=float).reshape(-1, 2) @ np.array([1, 1j])  # noqa: E731
    N, K = int(d["N"]), int(d["K"])
    rep = d.get("representation")
    if rep == "dense":
        amps = cplx(d["amplitudes"])
        if amps.size != N ** K:
            raise ValueError(f"expected {N ** K} amplitudes, got {amps.size}")
        return DenseJointState(N, K, amps)
    if rep == "product_sum":
        terms = d["terms"]
        coeffs = np.array([cplx([t["coefficient"]])[0] for t in terms])
        phis = np.array([cplx(t["phi"]) for t in terms]).reshape(len(terms), N)
        return ProductSumState(N, K, coeffs, phis, int(d.get("steps", 0)))
    raise ValueError(f"unknown representation {rep!r}")
