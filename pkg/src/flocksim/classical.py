"""Classical analogue: synchronous-update Monte Carlo of two active species,
plus the cycle-rate analyzer showing broken detailed balance.

Occupation factors in the source probabilities are read as indicators
(move or flip allowed iff source occupied and target free), matching the
matrix elements of the quantum jump operators.  One synchronous sweep
collects every legal candidate, fires each with its probability, then
applies the accepted ones in random order, rechecking legality so that
hard-core constraints are never violated; per-sweep probabilities carry a
global scale factor to keep multi-event collisions rare.  Time is measured
in sweeps.

The cycle analyzer works with elementary rates: hops at Gamma (1 +- eps)/2
(up-movers prefer left, down-movers right) and flips at
Gamma exp(-K/(2r) m_l S_l), evaluated before the flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DOWN, UP


@dataclass(frozen=True)
class ClassicalParams:
    L: int
    K: float = 0.0
    r: int = 4
    prob_scale: float = 0.1

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"L must be at least 2, got {self.L}")
        if not 1 <= self.r <= self.L // 2:
            raise ValueError(f"r must lie in [1, L/2], got r={self.r}, L={self.L}")
        if not 0 < self.prob_scale <= 1:
            raise ValueError("prob_scale must lie in (0, 1]")


def paired_initial(L: int) -> np.ndarray:
    """Both species on the first L/4 sites: half filling, zero magnetization."""
    occ = np.zeros((L, 2), dtype=np.uint8)
    occ[: L // 4, :] = 1
    return occ


def neighbor_field(occ: np.ndarray, r: int) -> np.ndarray:
    """S_l = sum over offsets 1..r of m_{l+j} + m_{l-j} (literal, periodic)."""
    m = occ[:, UP].astype(np.int64) - occ[:, DOWN]
    S = np.zeros(len(m), dtype=np.int64)
    for j in range(1, r + 1):
        S += np.roll(m, -j) + np.roll(m, j)
    return S


def sweep(occ: np.ndarray, params: ClassicalParams, rng) -> np.ndarray:
    """One synchronous update; returns the new occupation array."""
    L, K, r, scale = params.L, params.K, params.r, params.prob_scale
    up, dn = occ[:, UP], occ[:, DOWN]
    m = up.astype(np.int64) - dn
    S = neighbor_field(occ, r)

    # candidate masks and firing probabilities per channel
    mv_up = (np.roll(up, -1) == 1) & (up == 0)  # up hops l+1 -> l
    mv_dn = (dn == 1) & (np.roll(dn, -1) == 0)  # down hops l -> l+1
    fl_up = (dn == 1) & (up == 0)  # flip down -> up at l (m_l = -1)
    fl_dn = (up == 1) & (dn == 0)  # flip up -> down at l (m_l = +1)
    p_flip_up = np.minimum(1.0, scale * np.exp(+K / (2.0 * r) * S))
    p_flip_dn = np.minimum(1.0, scale * np.exp(-K / (2.0 * r) * S))

    moves = []  # (src_l, src_s, tgt_l, tgt_s)
    u = rng.random((4, L))
    for l in np.flatnonzero(mv_up & (u[0] < scale)):
        moves.append(((l + 1) % L, UP, l, UP))
    for l in np.flatnonzero(mv_dn & (u[1] < scale)):
        moves.append((l, DOWN, (l + 1) % L, DOWN))
    for l in np.flatnonzero(fl_up & (u[2] < p_flip_up)):
        moves.append((l, DOWN, l, UP))
    for l in np.flatnonzero(fl_dn & (u[3] < p_flip_dn)):
        moves.append((l, UP, l, DOWN))

    out = occ.copy()
    for k in rng.permutation(len(moves)):
        src_l, src_s, tgt_l, tgt_s = moves[k]
        if out[src_l, src_s] == 1 and out[tgt_l, tgt_s] == 0:
            out[src_l, src_s] = 0
            out[tgt_l, tgt_s] = 1
    return out


def magnetization_sq(occ: np.ndarray) -> float:
    """(sum_l m_l)^2 / L^2 of one configuration."""
    m_tot = int(occ[:, UP].sum()) - int(occ[:, DOWN].sum())
    return m_tot**2 / len(occ) ** 2


def history_rng(seed: int, index: int):
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def run_history(params: ClassicalParams, n_sweeps: int, rng, record_every: int = 1, initial=None):
    """M^2 time series of one history; times are sweep indices."""
    occ = paired_initial(params.L) if initial is None else np.array(initial, dtype=np.uint8)
    times = [0]
    m2 = [magnetization_sq(occ)]
    for t in range(1, n_sweeps + 1):
        occ = sweep(occ, params, rng)
        if t % record_every == 0:
            times.append(t)
            m2.append(magnetization_sq(occ))
    return np.array(times), np.array(m2), occ


def run_classical_ensemble(
    params: ClassicalParams, n_histories: int, n_sweeps: int, seed: int = 1, record_every: int = 1
):
    """Ensemble-averaged M^2(t); per-history counter-based streams.

    Returns (times, mean, stderr).
    """
    if n_histories < 1:
        raise ValueError("need at least one history")
    rows = []
    times = None
    for idx in range(n_histories):
        t, m2, _ = run_history(params, n_sweeps, history_rng(seed, idx), record_every)
        times = t
        rows.append(m2)
    rows = np.array(rows)
    err = rows.std(axis=0, ddof=1) / math.sqrt(n_histories) if n_histories > 1 else np.zeros_like(times, dtype=float)
    return times, rows.mean(axis=0), err


# -- cycle-rate analyzer ---------------------------------------------------


@dataclass(frozen=True)
class Transition:
    kind: str  # "motion" | "flip"
    site: int
    species: int  # motion: which species hops; flip: species flipped INTO
    direction: int = 0  # motion only: +1 right, -1 left

    def __post_init__(self):
        if self.kind not in ("motion", "flip"):
            raise ValueError(f"unknown transition kind {self.kind!r}")
        if self.kind == "motion" and self.direction not in (-1, 1):
            raise ValueError("motion needs direction -1 or +1")

    def inverse(self) -> "Transition":
        if self.kind == "motion":
            tgt = self.site + self.direction
            return Transition("motion", tgt, self.species, -self.direction)
        return Transition("flip", self.site, 1 - self.species)


@dataclass(frozen=True)
class CycleSpec:
    L: int
    initial: tuple  # ((n_up, n_down) per site)
    steps: tuple  # Transition sequence returning to initial
    K: float = 0.0
    epsilon: float = 1.0
    r: int = 1


class CycleError(ValueError):
    pass


def _occ_array(initial, L):
    occ = np.array(initial, dtype=np.int64)
    if occ.shape != (L, 2) or not np.isin(occ, (0, 1)).all():
        raise CycleError("initial configuration must be (L, 2) zeros and ones")
    return occ


def elementary_rate(occ: np.ndarray, tr: Transition, K: float, epsilon: float, r: int, gamma: float) -> float:
    """Rate of one allowed transition; raises CycleError if it is illegal."""
    L = len(occ)
    l = tr.site % L
    if tr.kind == "motion":
        tgt = (l + tr.direction) % L
        if occ[l, tr.species] != 1 or occ[tgt, tr.species] != 0:
            raise CycleError(f"illegal hop at site {l}")
        preferred = -1 if tr.species == UP else +1  # up-movers go left
        bias = 1.0 + epsilon if tr.direction == preferred else 1.0 - epsilon
        return gamma * bias / 2.0
    src_species = 1 - tr.species
    if occ[l, src_species] != 1 or occ[l, tr.species] != 0:
        raise CycleError(f"illegal flip at site {l}")
    m_l = occ[l, UP] - occ[l, DOWN]
    S = 0
    for j in range(1, r + 1):
        S += (occ[(l + j) % L, UP] - occ[(l + j) % L, DOWN]) + (occ[(l - j) % L, UP] - occ[(l - j) % L, DOWN])
    return gamma * math.exp(-K / (2.0 * r) * m_l * S)


def apply_transition(occ: np.ndarray, tr: Transition) -> np.ndarray:
    out = occ.copy()
    L = len(occ)
    l = tr.site % L
    if tr.kind == "motion":
        tgt = (l + tr.direction) % L
        out[l, tr.species] = 0
        out[tgt, tr.species] = 1
    else:
        out[l, 1 - tr.species] = 0
        out[l, tr.species] = 1
    return out


def kolmogorov_rates(cycle: CycleSpec, gamma: float = 1.0):
    """(Gamma_F, Gamma_B, ratio) of the forward and backward rate products."""
    occ = _occ_array(cycle.initial, cycle.L)
    states = [occ]
    forward = 1.0
    for tr in cycle.steps:
        forward *= elementary_rate(states[-1], tr, cycle.K, cycle.epsilon, cycle.r, gamma)
        states.append(apply_transition(states[-1], tr))
    if not np.array_equal(states[-1], states[0]):
        raise CycleError("transition sequence does not return to the initial configuration")
    backward = 1.0
    for k, tr in enumerate(cycle.steps):
        backward *= elementary_rate(states[k + 1], tr.inverse(), cycle.K, cycle.epsilon, cycle.r, gamma)
    ratio = math.inf if backward == 0.0 else forward / backward
    return forward, backward, ratio


def canonical_three_particle_cycle(K: float, epsilon: float, L: int = 8) -> CycleSpec:
    """Three adjacent up-movers, empty surroundings: the four-step loop whose
    forward/backward products are Gamma^4 e^{-K/2} (1+eps)^2 / 4 and
    Gamma^4 e^{+K/2} (1-eps)^2 / 4."""
    if L < 6:
        raise ValueError("need L >= 6 to keep the loop's neighborhood empty")
    occ = [(0, 0)] * L
    for l in (1, 2, 3):
        occ[l] = (1, 0)
    steps = (
        Transition("flip", 3, DOWN),  # edge particle, one aligned neighbor: rate Gamma e^{-K/2}
        Transition("motion", 3, DOWN, +1),
        Transition("flip", 4, UP),  # isolated, S = 0: rate Gamma
        Transition("motion", 4, UP, -1),
    )
    return CycleSpec(L=L, initial=tuple(occ), steps=steps, K=K, epsilon=epsilon, r=1)


def canonical_rate_forms(gamma: float, K: float, epsilon: float):
    """Closed forms for the canonical cycle."""
    gf = gamma**4 * math.exp(-K / 2.0) * (1.0 + epsilon) ** 2 / 4.0
    gb = gamma**4 * math.exp(+K / 2.0) * (1.0 - epsilon) ** 2 / 4.0
    return gf, gb
