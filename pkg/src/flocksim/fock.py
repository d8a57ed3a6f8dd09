"""Configuration space of two hard-core boson species on a periodic chain.

A configuration of L sites is packed into a single integer of 2L bits:
bit 2l holds the up-species occupation of site l, bit 2l+1 the down-species
occupation.  A site may hold both species at once.  The basis at fixed total
particle number N is the set of all 2L-bit integers with popcount N, listed
in ascending numeric order; its size is C(2L, N).

Index lookup uses combinatorial (colex) ranking of fixed-popcount bitmasks:
for set bit positions p_0 < p_1 < ... the rank is sum_i C(p_i, i+1).  This is
exact, O(popcount) per lookup, and needs no hash table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numba import njit


def binomial_table(nmax: int) -> np.ndarray:
    """Pascal triangle C(n, k) for 0 <= n, k <= nmax as an int64 array."""
    t = np.zeros((nmax + 1, nmax + 1), dtype=np.int64)
    for n in range(nmax + 1):
        t[n, 0] = 1
        for k in range(1, n + 1):
            t[n, k] = t[n - 1, k - 1] + t[n - 1, k]
    return t


@njit(cache=True)
def rank_mask(mask: np.int64, binom: np.ndarray) -> np.int64:
    """Index of `mask` within the ascending list of equal-popcount masks."""
    r = np.int64(0)
    i = 0
    p = 0
    m = mask
    while m:
        if m & 1:
            i += 1
            r += binom[p, i]
        m >>= 1
        p += 1
    return r


@njit(cache=True)
def _fill_states(out: np.ndarray, n_modes: int, n_set: int) -> None:
    # Gosper's hack: next integer with the same popcount, ascending order.
    v = np.int64((1 << n_set) - 1)
    limit = np.int64(1) << n_modes
    k = 0
    while v < limit:
        out[k] = v
        k += 1
        c = v & -v
        r = v + c
        v = r | ((v ^ r) >> (np.int64(2) + _trailing_zeros(c)))


@njit(cache=True)
def _trailing_zeros(x: np.int64) -> np.int64:
    n = np.int64(0)
    while not (x & 1):
        x >>= 1
        n += 1
    return n


@dataclass(frozen=True)
class FockBasis:
    """All configurations of N particles in 2L site-species modes.

    states[i] is the i-th mask in ascending order; index_of inverts it.
    Immutable, safe to share across workers.
    """

    L: int
    N: int
    states: np.ndarray = field(repr=False)
    binom: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, mask: int) -> int:
        if bin(int(mask)).count("1") != self.N:
            raise ValueError(f"mask {mask:#x} has wrong particle number")
        return int(rank_mask(np.int64(mask), self.binom))

    def occupations(self, mask: int) -> np.ndarray:
        """(L, 2) array of per-site (n_up, n_down) for one configuration."""
        occ = np.empty((self.L, 2), dtype=np.int8)
        for l in range(self.L):
            occ[l, 0] = (mask >> (2 * l)) & 1
            occ[l, 1] = (mask >> (2 * l + 1)) & 1
        return occ

    def format_mask(self, mask: int) -> str:
        """Human-readable site string, e.g. 'u d 2 0' (2 = both species)."""
        sym = {(0, 0): "0", (1, 0): "u", (0, 1): "d", (1, 1): "2"}
        occ = self.occupations(mask)
        return " ".join(sym[(int(a), int(b))] for a, b in occ)


def enumerate_basis(L: int, N: int) -> FockBasis:
    """Build the fixed-N basis for L sites (2L modes), ascending mask order."""
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    if not 0 <= N <= 2 * L:
        raise ValueError(f"N must lie in [0, {2 * L}], got {N}")
    n_modes = 2 * L
    dim = comb(n_modes, N)
    states = np.zeros(dim, dtype=np.int64)
    if N > 0:
        _fill_states(states, n_modes, N)
    return FockBasis(L=L, N=N, states=states, binom=binomial_table(n_modes))


@njit(cache=True, inline="always")
def occ_up(mask: np.int64, l: int) -> np.int64:
    return (mask >> (2 * l)) & 1


@njit(cache=True, inline="always")
def occ_dn(mask: np.int64, l: int) -> np.int64:
    return (mask >> (2 * l + 1)) & 1


@njit(cache=True, inline="always")
def local_magnetization(mask: np.int64, l: int) -> np.int64:
    """n_up(l) - n_down(l), in {-1, 0, +1}."""
    return ((mask >> (2 * l)) & 1) - ((mask >> (2 * l + 1)) & 1)


@njit(cache=True)
def total_magnetization(mask: np.int64, L: int) -> np.int64:
    m = np.int64(0)
    for l in range(L):
        m += ((mask >> (2 * l)) & 1) - ((mask >> (2 * l + 1)) & 1)
    return m


def total_particles(mask: int) -> int:
    return bin(int(mask)).count("1")
