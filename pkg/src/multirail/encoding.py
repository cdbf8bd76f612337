"""Multi-rail code: K excitations spread over M parallel chains.

A codeword is the set of chains (labels 1..M) that carry an excitation.
Codewords are ranked lexicographically on their sorted member lists, so for
M=5, K=2 the order starts {1,2}, {1,3}, {1,4}, {1,5}, {2,3}, ...
"""
from __future__ import annotations

import math
from dataclasses import dataclass


def _check_mk(M, K):
    if M < 1 or not 1 <= K <= M:
        raise ValueError(f"need 1 <= K <= M, got M={M}, K={K}")


@dataclass(frozen=True)
class RailCode:
    rails: int
    excitations: int

    def __post_init__(self):
        _check_mk(self.rails, self.excitations)

    @property
    def codewords(self):
        return math.comb(self.rails, self.excitations)

    @property
    def qubits(self):
        """Whole logical qubits that fit: ``floor(log2 C(M, K))``."""
        return self.codewords.bit_length() - 1

    @property
    def rate(self):
        return rate(self.rails, self.excitations)

    @property
    def integer_rate(self):
        return integer_rate(self.rails, self.excitations)


def rate(M, K):
    """``log2 C(M, K) / M`` from the exact binomial coefficient."""
    _check_mk(M, K)
    return math.log2(math.comb(M, K)) / M


def integer_rate(M, K):
    """Rate counting only whole qubits, ``floor(log2 C(M, K)) / M``."""
    _check_mk(M, K)
    return (math.comb(M, K).bit_length() - 1) / M


def optimal_K(M):
    """Excitation count maximising the rate: ``M // 2``.

    M=1 has no useful code (its only codeword carries zero qubits) and is
    rejected.
    """
    if M < 2:
        raise ValueError(f"no code carries information with M={M} rails")
    return M // 2


def subset_from_index(index, M, K):
    """Unrank: 1-based lexicographic index -> sorted tuple of chain labels."""
    _check_mk(M, K)
    total = math.comb(M, K)
    if not 1 <= index <= total:
        raise ValueError(f"index {index} outside 1..{total}")
    r = index - 1
    members = []
    start = 1
    for slots in range(K, 0, -1):
        m = start
        # codewords whose next member is m: C(M - m, slots - 1)
        while r >= (c := math.comb(M - m, slots - 1)):
            r -= c
            m += 1
        members.append(m)
        start = m + 1
    return tuple(members)


def index_from_subset(subset, M):
    """Rank: inverse of :func:`subset_from_index`."""
    members = tuple(int(m) for m in subset)
    K = len(members)
    _check_mk(M, K)
    if any(b <= a for a, b in zip(members, members[1:])):
        raise ValueError(f"subset {members} is not strictly increasing")
    if members[0] < 1 or members[-1] > M:
        raise ValueError(f"subset {members} has labels outside 1..{M}")
    r = 0
    prev = 0
    for pos, m in enumerate(members):
        slots = K - pos
        for skipped in range(prev + 1, m):
            r += math.comb(M - skipped, slots - 1)
        prev = m
    return r + 1


def encode_bits(bits, M, K):
    """Split ``bits`` into blocks of ``qubits(M, K)`` and map block value v to codeword v+1.

    Codewords beyond ``2**qubits`` are never produced.
    """
    code = RailCode(M, K)
    if any(b not in "01" for b in bits):
        raise ValueError(f"bit string may only contain 0 and 1, got {bits!r}")
    q = code.qubits
    if not bits:
        return []
    if q == 0:
        raise ValueError(f"M={M}, K={K} carries no whole qubit")
    if len(bits) % q:
        raise ValueError(f"bit string length {len(bits)} is not a multiple of {q}")
    return [subset_from_index(int(bits[i:i + q], 2) + 1, M, K) for i in range(0, len(bits), q)]


def decode_bits(subsets, M, K):
    code = RailCode(M, K)
    q = code.qubits
    out = []
    for s in subsets:
        v = index_from_subset(s, M) - 1
        if v >= 2 ** q:
            raise ValueError(f"codeword {tuple(s)} lies beyond the {2 ** q} used codewords")
        out.append(format(v, f"0{q}b"))
    return "".join(out)
