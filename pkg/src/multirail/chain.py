"""Single-excitation sector of a spin chain: Hamiltonian, spectrum, propagator.

Sites are 0-indexed in arrays and 1-indexed in prose.  Units have hbar = 1,
so times are in inverse energy units.

Sector conventions
------------------
``xy``
    ``h[n, n+1] = h[n+1, n] = J[n]`` and ``h[n, n] = B[n]``.
``heisenberg``
    Isotropic exchange ``sum_n J_n (X X + Y Y + Z Z)/2`` between neighbours.
    The hopping is the same as for ``xy``; the Ising part lowers a flipped
    spin by ``J_k`` for every bond ``k`` touching it (energies measured from
    the fully polarised state), so ``h[n, n] = B[n] - sum_{k at n} J_k``.
    With this diagonal the uniform magnon is an exact eigenstate, as it must
    be for an SU(2)-invariant chain.
``custom``
    An explicit Hermitian matrix supplied by the caller.

``onsite`` values enter the sector diagonal directly; they are the on-site
excitation energies, not Zeeman couplings of a particular sign convention.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EigensolverError

MODELS = ("heisenberg", "xy", "custom")

#: relative tolerance used to group eigenvalues into degenerate clusters
DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class ChainSpec:
    """Parameters of one chain.

    ``couplings`` has ``sites - 1`` entries for an open chain and ``sites``
    entries for a ring, the last one closing site N back to site 1.  For the
    ``custom`` model ``matrix`` holds the full N x N sector matrix and the
    coupling/onsite arrays are ignored.
    """

    sites: int
    model: str = "xy"
    couplings: tuple = ()
    onsite: tuple = ()
    periodic: bool = False
    matrix: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if isinstance(self.sites, bool) or int(self.sites) != self.sites:
            raise ValueError(f"sites must be an integer, got {self.sites!r}")
        object.__setattr__(self, "sites", int(self.sites))
        N = self.sites
        if N < 2:
            raise ValueError(f"a chain needs at least 2 sites, got {N}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")

        if self.model == "custom":
            if self.matrix is None:
                raise ValueError("model 'custom' requires an explicit matrix")
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (N, N):
                raise ValueError(f"custom matrix must be {N}x{N}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError("custom matrix has non-finite entries")
            if np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
                raise ValueError("custom matrix is not Hermitian")
            object.__setattr__(self, "matrix", tuple(map(tuple, m.tolist())))

        n_bonds = N if self.periodic else N - 1
        J = tuple(float(x) for x in np.ravel(np.asarray(self.couplings, dtype=float)))
        B = tuple(float(x) for x in np.ravel(np.asarray(self.onsite, dtype=float)))
        if not B:
            B = (0.0,) * N
        if self.model != "custom" or J:
            if len(J) != n_bonds:
                raise ValueError(f"expected {n_bonds} couplings for N={N} "
                                 f"({'ring' if self.periodic else 'open'}), got {len(J)}")
        if len(B) != N:
            raise ValueError(f"expected {N} onsite energies, got {len(B)}")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(B))):
            raise ValueError("couplings and onsite energies must be finite")
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "onsite", B)

    @classmethod
    def uniform(cls, sites, model="xy", coupling=1.0, onsite=0.0, periodic=False):
        """Chain with identical couplings and on-site energies."""
        n_bonds = sites if periodic else sites - 1
        return cls(sites=sites, model=model, couplings=(coupling,) * max(n_bonds, 0),
                   onsite=(onsite,) * sites, periodic=periodic)

    @classmethod
    def from_matrix(cls, matrix):
        m = np.asarray(matrix, dtype=complex)
        return cls(sites=m.shape[0], model="custom", matrix=m)

    def to_dict(self):
        d = {"sites": self.sites, "model": self.model, "couplings": list(self.couplings),
             "onsite": list(self.onsite), "periodic": self.periodic}
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=complex)
            if np.any(m.imag):
                d["matrix"] = [[[z.real, z.imag] for z in row] for row in m]
            else:
                d["matrix"] = m.real.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValueError("chain spec must be a JSON object")
        unknown = set(d) - {"sites", "model", "couplings", "onsite", "periodic", "matrix"}
        if unknown:
            raise ValueError(f"unknown chain keys: {sorted(unknown)}")
        if "sites" not in d:
            raise ValueError("chain spec requires 'sites'")
        matrix = d.get("matrix")
        if matrix is not None:
            m = np.asarray(matrix, dtype=float)
            if m.ndim == 3:
                m = m[..., 0] + 1j * m[..., 1]
            matrix = m
        return cls(sites=d["sites"], model=d.get("model", "xy"),
                   couplings=tuple(d.get("couplings", ())), onsite=tuple(d.get("onsite", ())),
                   periodic=bool(d.get("periodic", False)), matrix=matrix)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SingleExcitationOperator:
    """Sector Hamiltonian ``h[n', n] = <n'|H|n>``."""

    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def is_tridiagonal(self):
        m = self.matrix
        return not np.any(np.triu(m, 2)) and not np.any(np.tril(m, -2))


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return len(self.eigenvalues)

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def clusters(self, rtol=DEGENERACY_RTOL):
        """Group eigenvalue indices into degenerate clusters.

        Neighbouring sorted eigenvalues closer than ``rtol * max(1, |h|_inf)``
        share a cluster.  The returned lists index the stored eigenvector
        columns, so the grouping does not depend on column order.
        """
        E = np.asarray(self.eigenvalues)
        scale = max(1.0, _inf_norm(self.reconstruct()))
        order = np.argsort(E, kind="stable")
        groups = [[int(order[0])]]
        for a, b in zip(order[:-1], order[1:]):
            if E[b] - E[a] <= rtol * scale:
                groups[-1].append(int(b))
            else:
                groups.append([int(b)])
        return groups


@dataclass(frozen=True)
class Propagator:
    """``matrix[n', n] = f_{n', n}(time) = <n'| exp(-i h t) |n>``."""

    time: float
    matrix: np.ndarray


def _inf_norm(a):
    return float(np.max(np.sum(np.abs(a), axis=1)))


def build_chain(spec: ChainSpec) -> SingleExcitationOperator:
    """Sector matrix of ``spec`` (see module docstring for conventions)."""
    N = spec.sites
    if spec.model == "custom":
        return SingleExcitationOperator(np.array(spec.matrix, dtype=complex))

    h = np.zeros((N, N), dtype=complex)
    h[np.arange(N), np.arange(N)] = spec.onsite
    bonds = [(n, n + 1) for n in range(N - 1)]
    if spec.periodic:
        bonds.append((N - 1, 0))
    for J, (a, b) in zip(spec.couplings, bonds):
        h[a, b] += J
        h[b, a] += J
        if spec.model == "heisenberg":
            h[a, a] -= J
            h[b, b] -= J
    return SingleExcitationOperator(h)


def _fix_phases(V):
    # first significant component of every column made real positive
    V = V.copy()
    for m in range(V.shape[1]):
        col = V[:, m]
        k = int(np.argmax(np.abs(col) > 1e-8))
        V[:, m] = col * (abs(col[k]) / col[k])
    return V


def spectrum(h) -> Spectrum:
    """Hermitian eigendecomposition with a deterministic eigenvector gauge."""
    m = h.matrix if isinstance(h, SingleExcitationOperator) else np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("sector matrix has non-finite entries")
    try:
        E, V = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"Hermitian eigensolver failed: {exc}") from exc
    return Spectrum(E, _fix_phases(V.astype(complex)))


def _modes(s, t):
    return np.exp(-1j * np.multiply.outer(np.asarray(t, dtype=float), s.eigenvalues))


def propagator(s: Spectrum, t) -> Propagator:
    t = float(t)
    if not np.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    V = s.eigenvectors
    f = (V * _modes(s, t)) @ V.conj().T
    return Propagator(t, f)


def transfer_amplitude(s: Spectrum, t, target=-1, source=0):
    """``f_{N,1}(t)`` summed over eigenmodes; ``t`` may be an array of times.

    ``target``/``source`` select other matrix elements (0-indexed sites).
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("times must be finite")
    V = s.eigenvectors
    weights = V[target, :] * V[source, :].conj()
    out = _modes(s, t_arr) @ weights
    return complex(out) if out.ndim == 0 else out
