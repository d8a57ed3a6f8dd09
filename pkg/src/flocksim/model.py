"""Hamiltonian and jump operators of the dissipative two-species lattice gas.

The coherent part flips species on a site; the dissipative channels are
directed hops (up-species hops left, down-species hops right) and
neighborhood-weighted species flips.  All jump-operator products X^dag X are
diagonal in the configuration basis, which the compiled tables exploit: the
non-Hermitian drift is (i h) * spin-flip gather minus a real decay diagonal,
and every channel's action is a precomputed index map plus amplitude factor.

Species are indexed 0 (up) and 1 (down) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp

import numpy as np
from numba import njit

from .fock import FockBasis, local_magnetization, total_magnetization

UP, DOWN = 0, 1

_KERNELS = ("exponential", "linear", "delta")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters.

    h          on-site species-flip amplitude (units of rate)
    gamma_M    directed-motion rate
    gamma_A    alignment-flip rate
    K          alignment strength (dimensionless)
    r          neighborhood radius of the alignment kernel, 1 <= r <= L/2
    kernel     'exponential' | 'linear' | 'delta'
    M0         neighborhood-sum threshold used by the delta kernel
    """

    L: int
    N: int
    h: float
    gamma_M: float = 1.0
    gamma_A: float = 1.0
    K: float = 0.0
    r: int = 4
    kernel: str = "exponential"
    M0: int = 2

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be positive, got {self.L}")
        if not 0 <= self.N <= 2 * self.L:
            raise ValueError(f"N must lie in [0, {2 * self.L}], got {self.N}")
        if self.h < 0 or self.gamma_M < 0 or self.gamma_A < 0:
            raise ValueError("rates and h must be non-negative")
        if not 1 <= self.r <= self.L // 2 and self.L > 1:
            raise ValueError(f"r must lie in [1, L/2], got r={self.r}, L={self.L}")
        if self.L == 1 and self.r != 1:
            raise ValueError("L=1 admits only r=1")
        if self.kernel not in _KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}, expected one of {_KERNELS}")

    @classmethod
    def default(cls, L: int, **kw) -> "ModelParams":
        """Half filling, equal rates, r=4 (reduced to L//2 on short chains)."""
        kw.setdefault("N", L // 2)
        kw.setdefault("r", min(4, L // 2) if L > 1 else 1)
        kw.setdefault("h", 0.0)
        return cls(L=L, **kw)


@dataclass
class StateVector:
    """Complex amplitudes over a fixed-N basis; one pure trajectory state."""

    basis: FockBasis
    data: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> "StateVector":
        return StateVector(self.basis, self.data / np.linalg.norm(self.data))


def _check_basis(psi: StateVector, params: ModelParams) -> None:
    if psi.basis.L != params.L or psi.basis.N != params.N:
        raise ValueError(
            f"basis (L={psi.basis.L}, N={psi.basis.N}) does not match "
            f"params (L={params.L}, N={params.N})"
        )


@njit(cache=True, inline="always")
def _neighbor_sum(mask: np.int64, l: int, L: int, r: int) -> np.int64:
    """Sum of local magnetization over sites at distance 1..r on both sides.

    Periodic: for 2r = L the site at distance L/2 enters twice, once from
    each direction, exactly as the double-sided sum is written.
    """
    s = np.int64(0)
    for j in range(1, r + 1):
        s += local_magnetization(mask, (l + j) % L)
        s += local_magnetization(mask, (l - j) % L)
    return s


@njit(cache=True)
def _kernel_weight(mask, l, L, r, K, kcode, M0, species):
    """Diagonal kernel eigenvalue on the pre-flip configuration.

    kcode 0: exp(-K/(2r) m_l S_l)
    kcode 1: max(0, 1 - K/(2r) m_l S_l)
    kcode 2: 1 iff S_l == +M0 (flip into up) or S_l == -M0 (flip into down)
    """
    if kcode == 2:
        s = _neighbor_sum(mask, l, L, r)
        want = M0 if species == 0 else -M0
        return 1.0 if s == want else 0.0
    m = local_magnetization(mask, l)
    if m == 0:
        return 1.0
    x = K / (2.0 * r) * m * _neighbor_sum(mask, l, L, r)
    if kcode == 0:
        return np.exp(-x)
    w = 1.0 - x
    return w if w > 0.0 else 0.0


def alignment_weight(mask: int, l: int, params: ModelParams, species: int | None = None):
    """Kernel eigenvalue at site l for configuration `mask` (pre-flip).

    The exponential and linear kernels do not depend on the flip direction;
    the delta kernel does, so `species` (the species being flipped INTO) is
    required for it.
    """
    kcode = _KERNELS.index(params.kernel)
    if kcode == 2 and species is None:
        raise ValueError("delta kernel needs the target species")
    s = 0 if species is None else species
    return float(
        _kernel_weight(np.int64(mask), l, params.L, params.r, params.K, kcode, params.M0, s)
    )


# ---------------------------------------------------------------------------
# direct (matrix-free) operator applications


def apply_hamiltonian(psi: StateVector, params: ModelParams) -> StateVector:
    """H|psi> with H = -h * sum_l (c+_{l,up} c_{l,down} + h.c.).

    Flips the species of a singly-occupied site; doubly-occupied and empty
    sites give no matrix element.
    """
    _check_basis(psi, params)
    out = np.zeros_like(psi.data)
    _apply_h(psi.basis.states, psi.basis.binom, psi.data, params.L, params.h, out)
    return StateVector(psi.basis, out)


@njit(cache=True)
def _apply_h(states, binom, amps, L, h, out):
    for i in range(states.shape[0]):
        a = amps[i]
        if a == 0:
            continue
        mask = states[i]
        for l in range(L):
            pair = (mask >> (2 * l)) & 3
            if pair == 1 or pair == 2:
                tgt = mask ^ (np.int64(3) << (2 * l))
                out[_rank(tgt, binom)] += -h * a


@njit(cache=True, inline="always")
def _rank(mask, binom):
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


def apply_motion_jump(psi: StateVector, params: ModelParams, l: int, species: int) -> StateVector:
    """Directed hop: up-species l+1 -> l, down-species l -> l+1 (periodic)."""
    _check_basis(psi, params)
    out = np.zeros_like(psi.data)
    _apply_motion(psi.basis.states, psi.basis.binom, psi.data, params.L, l, species, out)
    return StateVector(psi.basis, out)


@njit(cache=True)
def _apply_motion(states, binom, amps, L, l, species, out):
    lp = (l + 1) % L
    if species == 0:
        src, tgt = lp, l  # up hops left
    else:
        src, tgt = l, lp  # down hops right
    src_bit = np.int64(1) << (2 * src + species)
    tgt_bit = np.int64(1) << (2 * tgt + species)
    for i in range(states.shape[0]):
        a = amps[i]
        if a == 0:
            continue
        mask = states[i]
        if (mask & src_bit) and not (mask & tgt_bit):
            out[_rank((mask ^ src_bit) | tgt_bit, binom)] += a


def apply_alignment_jump(
    psi: StateVector, params: ModelParams, l: int, species: int
) -> StateVector:
    """Species flip into `species` at site l, weighted by the pre-flip kernel."""
    _check_basis(psi, params)
    kcode = _KERNELS.index(params.kernel)
    out = np.zeros_like(psi.data)
    _apply_align(
        psi.basis.states, psi.basis.binom, psi.data,
        params.L, params.r, params.K, kcode, params.M0, l, species, out,
    )
    return StateVector(psi.basis, out)


@njit(cache=True)
def _apply_align(states, binom, amps, L, r, K, kcode, M0, l, species, out):
    tgt_bit = np.int64(1) << (2 * l + species)
    src_bit = np.int64(1) << (2 * l + (1 - species))
    for i in range(states.shape[0]):
        a = amps[i]
        if a == 0:
            continue
        mask = states[i]
        if (mask & src_bit) and not (mask & tgt_bit):
            w = _kernel_weight(mask, l, L, r, K, kcode, M0, species)
            if w != 0.0:
                out[_rank((mask ^ src_bit) | tgt_bit, binom)] += w * a


# ---------------------------------------------------------------------------
# compiled tables for the trajectory engine

# channel layout: alpha in [0, 2L) -> motion at site alpha//2, species alpha%2;
# alpha in [2L, 4L) -> alignment into species (alpha-2L)%2 at site (alpha-2L)//2


@dataclass
class CompiledModel:
    """Precomputed per-configuration tables.

    flip_idx[i, l] : basis index after flipping site l's species, -1 if blocked
    jump_tgt[a, i] : basis index after channel a fires on configuration i, -1
    jump_amp[a, i] : amplitude factor of channel a (kernel weight; hops -> 1)
    gamma[a]       : rate prefactor of channel a
    decay[i]       : sum_a gamma[a] * jump_amp[a, i]^2  (the drift diagonal)
    mag[i]         : total magnetization of configuration i
    """

    basis: FockBasis
    params: ModelParams
    flip_idx: np.ndarray = field(repr=False)
    jump_tgt: np.ndarray = field(repr=False)
    jump_amp: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    decay: np.ndarray = field(repr=False)
    mag: np.ndarray = field(repr=False)
    linear_clamp_count: int = 0

    @property
    def n_channels(self) -> int:
        return 4 * self.params.L


def compile_model(basis: FockBasis, params: ModelParams) -> CompiledModel:
    if basis.L != params.L or basis.N != params.N:
        raise ValueError("basis does not match params")
    L = params.L
    dim = basis.dim
    kcode = _KERNELS.index(params.kernel)
    flip_idx = np.empty((dim, L), dtype=np.int32)
    jump_tgt = np.empty((4 * L, dim), dtype=np.int32)
    jump_amp = np.zeros((4 * L, dim), dtype=np.float64)
    gamma = np.empty(4 * L, dtype=np.float64)
    gamma[: 2 * L] = params.gamma_M
    gamma[2 * L:] = params.gamma_A
    mag = np.empty(dim, dtype=np.int64)
    clamps = _build_tables(
        basis.states, basis.binom, L, params.r, params.K, kcode, params.M0,
        flip_idx, jump_tgt, jump_amp, mag,
    )
    decay = (gamma[:, None] * jump_amp**2).sum(axis=0)
    return CompiledModel(
        basis=basis, params=params, flip_idx=flip_idx, jump_tgt=jump_tgt,
        jump_amp=jump_amp, gamma=gamma, decay=decay, mag=mag,
        linear_clamp_count=int(clamps) if kcode == 1 else 0,
    )


@njit(cache=True)
def _build_tables(states, binom, L, r, K, kcode, M0, flip_idx, jump_tgt, jump_amp, mag):
    dim = states.shape[0]
    clamps = 0
    for i in range(dim):
        mask = states[i]
        mag[i] = total_magnetization(mask, L)
        for l in range(L):
            pair = (mask >> (2 * l)) & 3
            # spin-flip target for the Hamiltonian gather
            if pair == 1 or pair == 2:
                flip_idx[i, l] = _rank(mask ^ (np.int64(3) << (2 * l)), binom)
            else:
                flip_idx[i, l] = -1
            lp = (l + 1) % L
            for s in range(2):
                # motion channel 2l+s
                if s == 0:
                    src, tgt = lp, l
                else:
                    src, tgt = l, lp
                src_bit = np.int64(1) << (2 * src + s)
                tgt_bit = np.int64(1) << (2 * tgt + s)
                a = 2 * l + s
                if (mask & src_bit) and not (mask & tgt_bit):
                    jump_tgt[a, i] = _rank((mask ^ src_bit) | tgt_bit, binom)
                    jump_amp[a, i] = 1.0
                else:
                    jump_tgt[a, i] = -1
                # alignment channel 2L + 2l + s (flip into species s)
                a = 2 * L + 2 * l + s
                t_bit = np.int64(1) << (2 * l + s)
                s_bit = np.int64(1) << (2 * l + (1 - s))
                if (mask & s_bit) and not (mask & t_bit):
                    w = _kernel_weight(mask, l, L, r, K, kcode, M0, s)
                    if kcode == 1 and K != 0.0:
                        m = local_magnetization(mask, l)
                        if m != 0 and 1.0 - K / (2.0 * r) * m * _neighbor_sum(mask, l, L, r) < 0.0:
                            clamps += 1
                    if w != 0.0:
                        jump_tgt[a, i] = _rank((mask ^ s_bit) | t_bit, binom)
                        jump_amp[a, i] = w
                    else:
                        jump_tgt[a, i] = -1
                else:
                    jump_tgt[a, i] = -1
    return clamps


def channel_descr(params: ModelParams, alpha: int) -> tuple[str, int, int]:
    """(kind, site, species) for channel index alpha."""
    L = params.L
    if alpha < 2 * L:
        return ("motion", alpha // 2, alpha % 2)
    alpha -= 2 * L
    return ("alignment", alpha // 2, alpha % 2)


def z2_site_map(L: int, m: int = 0) -> np.ndarray:
    """Site permutation l -> (m - l) mod L of the spin-motion reflection."""
    return np.array([(m - l) % L for l in range(L)], dtype=np.int64)


def z2_permutation(basis: FockBasis, m: int = 0) -> np.ndarray:
    """Basis permutation of the symmetry that swaps species and reflects the
    lattice about m/2; perm[i] is the index of the transformed configuration.
    """
    site = z2_site_map(basis.L, m)
    perm = np.empty(basis.dim, dtype=np.int64)
    for i, mask in enumerate(basis.states):
        mask = int(mask)
        out = 0
        for l in range(basis.L):
            lp = int(site[l])
            if (mask >> (2 * l)) & 1:  # up at l -> down at lp
                out |= 1 << (2 * lp + 1)
            if (mask >> (2 * l + 1)) & 1:  # down at l -> up at lp
                out |= 1 << (2 * lp)
        perm[i] = basis.index_of(out)
    return perm
