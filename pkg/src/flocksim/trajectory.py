"""Piecewise-deterministic quantum trajectories.

Between jumps the state follows the non-Hermitian drift
G = -iH - (1/2) sum_alpha gamma_alpha X_alpha^dag X_alpha, integrated with an
explicit RK4 substep and renormalized; jumps fire with first-order
probability (total rate * substep) and the channel is chosen by a cumulative
scan with the same uniform variate.  Substeps halve until the per-step jump
probability is below MAX_JUMP_PROB.

All X^dag X are diagonal, so the drift needs one gather per spin-flip pair
plus a real decay diagonal; per-channel rates are only materialized in the
(rare) steps that actually jump.

Randomness is a counter-based Philox stream keyed by
(global_seed, trajectory_index): any trajectory can be reproduced in
isolation, and ensemble results cannot depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .fock import FockBasis, enumerate_basis
from .model import CompiledModel, ModelParams, StateVector, channel_descr, compile_model
from .observables import (
    MomentAccumulator,
    ObservableSeries,
    _pair_rho,
    make_pair_plan,
    moments_from_table,
    offdiag_l1,
)

MAX_JUMP_PROB = 0.1

INITIAL_STATES = ("plus", "pair")


class StepSizeError(RuntimeError):
    """Deterministic substep lost essentially all norm; halve and retry."""


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration controls for one trajectory.

    dt             default substep (units of inverse rate)
    t_max          final time
    seed           global seed; the per-trajectory key is (seed, index)
    sample_times   observation times; default 0, 0.5, 1.0, ... t_max
    initial_state  'plus' (first N sites in (|up>+|down>)/sqrt2) or
                   'pair'  (first N/2 sites doubly occupied)
    snapshot_times times at which a configuration is Born-sampled; must be a
                   subset of sample_times
    record_rho     accumulate two-site reduced matrices at every sample time
    record_final_state  keep |psi(t_max)> (used by the oracle comparison)
    """

    dt: float = 0.01
    t_max: float = 70.0
    seed: int = 1
    sample_times: Optional[tuple] = None
    initial_state: str = "plus"
    snapshot_times: tuple = ()
    record_rho: bool = False
    record_final_state: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be non-negative")
        if self.initial_state not in INITIAL_STATES:
            raise ValueError(
                f"unknown initial state {self.initial_state!r}, expected {INITIAL_STATES}"
            )
        times = self.resolved_sample_times()
        if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > self.t_max + 1e-9:
            raise ValueError("sample_times must be strictly increasing within [0, t_max]")
        grid = set(np.round(times, 6).tolist())
        for ts in self.snapshot_times:
            if round(float(ts), 6) not in grid:
                raise ValueError(f"snapshot time {ts} is not a sample time")

    def resolved_sample_times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=np.float64)
        return np.arange(0.0, self.t_max + 1e-9, 0.5)


@dataclass(frozen=True)
class JumpChannel:
    kind: str  # 'motion' | 'alignment'
    site: int
    species: int
    rate: float


# ---------------------------------------------------------------------------
# compiled-model cache

_MODEL_CACHE: dict[ModelParams, CompiledModel] = {}
_BASIS_CACHE: dict[tuple[int, int], FockBasis] = {}


def get_basis(L: int, N: int) -> FockBasis:
    key = (L, N)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = enumerate_basis(L, N)
    return _BASIS_CACHE[key]


def get_compiled(params: ModelParams) -> CompiledModel:
    if params not in _MODEL_CACHE:
        _MODEL_CACHE[params] = compile_model(get_basis(params.L, params.N), params)
    return _MODEL_CACHE[params]


# ---------------------------------------------------------------------------
# initial states


def initial_state(basis: FockBasis, which: str) -> StateVector:
    """Built-in product states: 'plus' or 'pair' (see TrajectoryConfig)."""
    L, N = basis.L, basis.N
    amps = np.zeros(basis.dim, dtype=np.complex128)
    if which == "plus":
        if N > L:
            raise ValueError(f"plus state needs N <= L, got N={N}, L={L}")
        # every choice of species on the first N sites, weight 2^(-N/2)
        w = 2.0 ** (-N / 2.0)
        for choice in range(1 << N):
            mask = 0
            for l in range(N):
                mask |= 1 << (2 * l + ((choice >> l) & 1))
            amps[basis.index_of(mask)] = w
    elif which == "pair":
        if N % 2 != 0:
            raise ValueError(f"pair state needs even N, got N={N}")
        if N // 2 > L:
            raise ValueError(f"pair state needs N/2 <= L, got N={N}, L={L}")
        mask = 0
        for l in range(N // 2):
            mask |= 0b11 << (2 * l)
        amps[basis.index_of(mask)] = 1.0
    else:
        raise ValueError(f"unknown initial state {which!r}")
    return StateVector(basis, amps)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, fastmath=True, nogil=True)
def _g_apply(psi, flip_idx, decay, h, out):
    # G psi = i h * (spin-flip gather) - decay/2 * psi
    dim, L = flip_idx.shape
    for i in range(dim):
        acc = 0.0 + 0.0j
        for l in range(L):
            j = flip_idx[i, l]
            if j >= 0:
                acc += psi[j]
        out[i] = 1j * h * acc - 0.5 * decay[i] * psi[i]


@njit(cache=True, fastmath=True, nogil=True)
def _rk4(psi, flip_idx, decay, h, dt, k1, k2, k3, k4, tmp, out):
    """One RK4 substep of the drift; returns the squared norm of `out`."""
    dim = psi.shape[0]
    _g_apply(psi, flip_idx, decay, h, k1)
    for i in range(dim):
        tmp[i] = psi[i] + 0.5 * dt * k1[i]
    _g_apply(tmp, flip_idx, decay, h, k2)
    for i in range(dim):
        tmp[i] = psi[i] + 0.5 * dt * k2[i]
    _g_apply(tmp, flip_idx, decay, h, k3)
    for i in range(dim):
        tmp[i] = psi[i] + dt * k3[i]
    _g_apply(tmp, flip_idx, decay, h, k4)
    n2 = 0.0
    for i in range(dim):
        v = psi[i] + (dt / 6.0) * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
        out[i] = v
        n2 += v.real * v.real + v.imag * v.imag
    return n2


@njit(cache=True, fastmath=True, nogil=True)
def _total_rate(psi, decay):
    r = 0.0
    for i in range(psi.shape[0]):
        r += decay[i] * (psi[i].real ** 2 + psi[i].imag ** 2)
    return r


@njit(cache=True, nogil=True)
def _channel_rates(psi, jump_w):
    """All per-channel rates gamma_a <X^dag X>_a (used by tests and the
    public jump_probabilities)."""
    n_ch, dim = jump_w.shape
    out = np.zeros(n_ch)
    for a in range(n_ch):
        s = 0.0
        for i in range(dim):
            s += jump_w[a, i] * (psi[i].real ** 2 + psi[i].imag ** 2)
        out[a] = s
    return out


@njit(cache=True, nogil=True)
def _select_channel(psi, jump_w, target):
    """Smallest channel index with cumulative rate exceeding `target`.

    target lies in [0, total rate) whenever a jump was decided, so the scan
    always lands; the final clamp only guards float roundoff.
    """
    n_ch, dim = jump_w.shape
    cum = 0.0
    for a in range(n_ch):
        s = 0.0
        for i in range(dim):
            s += jump_w[a, i] * (psi[i].real ** 2 + psi[i].imag ** 2)
        cum += s
        if target < cum:
            return a
    return n_ch - 1


@njit(cache=True, nogil=True)
def _apply_channel(psi, tgt, amp, out):
    dim = psi.shape[0]
    out[:] = 0.0
    n2 = 0.0
    for i in range(dim):
        j = tgt[i]
        if j >= 0:
            v = amp[i] * psi[i]
            out[j] += v
            n2 += v.real * v.real + v.imag * v.imag
    return n2


@njit(cache=True, nogil=True)
def _born_index(psi, u):
    """Inverse-CDF sample of a configuration index from |psi|^2."""
    cum = 0.0
    last = 0
    for i in range(psi.shape[0]):
        w = psi[i].real ** 2 + psi[i].imag ** 2
        if w > 0.0:
            cum += w
            last = i
            if u < cum:
                return i
    return last


# ---------------------------------------------------------------------------
# engine


class _Workspace:
    def __init__(self, dim: int):
        self.bufs = [np.empty(dim, dtype=np.complex128) for _ in range(6)]


def _jump_w(cm: CompiledModel) -> np.ndarray:
    # cached on the compiled model: rate-weight table gamma_a * amp^2
    w = getattr(cm, "_jump_w_cache", None)
    if w is None:
        w = cm.gamma[:, None] * cm.jump_amp**2
        cm._jump_w_cache = w
    return w


def jump_probabilities(psi: StateVector, params: ModelParams, dt: float) -> np.ndarray:
    """All 4L per-channel jump probabilities gamma_a <X^dag X>_a dt."""
    cm = get_compiled(params)
    if psi.basis.dim != cm.basis.dim:
        raise ValueError("basis mismatch")
    return _channel_rates(psi.data, _jump_w(cm)) * dt


def evolve_deterministic(
    psi: StateVector, params: ModelParams, dt: float, cm: Optional[CompiledModel] = None
) -> StateVector:
    """Drift over dt with no jump, then renormalize."""
    cm = cm or get_compiled(params)
    ws = _Workspace(psi.basis.dim)
    out = np.empty_like(psi.data)
    n2 = _rk4(psi.data, cm.flip_idx, cm.decay, params.h, dt, *ws.bufs[:5], out)
    if n2 < 1e-28:
        raise StepSizeError(f"norm underflow in deterministic substep (dt={dt})")
    out /= np.sqrt(n2)
    return StateVector(psi.basis, out)


def _substep(psi_data, cm, h, dt_req, rng, ws):
    """One substep from the current state.

    Returns (new_psi_data, jump_channel_index_or_-1, dt_used).
    """
    rate = _total_rate(psi_data, cm.decay)
    dt_sub = dt_req
    while rate * dt_sub >= MAX_JUMP_PROB:
        dt_sub *= 0.5
    u = rng.random()
    if u < rate * dt_sub:
        alpha = _select_channel(psi_data, _jump_w(cm), u / dt_sub)
        out = ws.bufs[5]
        n2 = _apply_channel(psi_data, cm.jump_tgt[alpha], cm.jump_amp[alpha], out)
        if n2 <= 0.0:
            raise RuntimeError(f"selected channel {alpha} has zero-norm image")
        new = out / np.sqrt(n2)
        return new.copy(), int(alpha), dt_sub
    out = np.empty_like(psi_data)
    while True:
        n2 = _rk4(psi_data, cm.flip_idx, cm.decay, h, dt_sub, *ws.bufs[:5], out)
        if n2 >= 1e-28:
            break
        dt_sub *= 0.5  # step-size error: retry smaller
    out /= np.sqrt(n2)
    return out, -1, dt_sub


def step(
    psi: StateVector,
    params: ModelParams,
    config: TrajectoryConfig,
    rng,
    cm: Optional[CompiledModel] = None,
):
    """One stochastic substep.

    Draws a single uniform; jumps with probability (total rate * dt_used) and
    selects the channel by cumulative scan, otherwise drifts.  dt_used is
    config.dt halved as needed to respect MAX_JUMP_PROB.

    Returns (psi', jump_taken or None, dt_used).
    """
    cm = cm or get_compiled(params)
    ws = _Workspace(psi.basis.dim)
    data, alpha, dt_used = _substep(psi.data, cm, params.h, config.dt, rng, ws)
    jump = None
    if alpha >= 0:
        kind, site, species = channel_descr(params, alpha)
        jump = JumpChannel(kind, site, species, float(cm.gamma[alpha]))
    return StateVector(psi.basis, data), jump, dt_used


def trajectory_rng(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory; independent of all others."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, traj_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def run_trajectory(
    params: ModelParams,
    config: TrajectoryConfig,
    traj_index: int = 0,
    cm: Optional[CompiledModel] = None,
    plans=None,
) -> ObservableSeries:
    """Integrate one trajectory; deterministic in (params, config, traj_index)."""
    cm = cm or get_compiled(params)
    basis = cm.basis
    rng = trajectory_rng(config.seed, traj_index)
    psi = initial_state(basis, config.initial_state).data
    ws = _Workspace(basis.dim)
    times = config.resolved_sample_times()
    nt = len(times)
    m1 = np.empty(nt)
    m2 = np.empty(nt)
    m4 = np.empty(nt)
    coh = np.zeros(nt) if config.record_rho else None
    rho = np.zeros((nt, params.L, 16, 16), np.complex128) if config.record_rho else None
    if config.record_rho and plans is None:
        plans = [make_pair_plan(basis, l) for l in range(params.L)]
    snap_set = {round(float(ts), 6) for ts in config.snapshot_times}
    snap_t: list[float] = []
    snaps: list[int] = []
    t = 0.0
    for k, ts in enumerate(times):
        while t < ts - 1e-12:
            psi, _, dt_used = _substep(psi, cm, params.h, min(config.dt, ts - t), rng, ws)
            t += dt_used
        t = float(ts)
        m1[k], m2[k], m4[k] = moments_from_table(psi, cm.mag)
        if config.record_rho:
            for l in range(params.L):
                p = plans[l]
                _pair_rho(psi, p.order, p.starts, p.pair, rho[k, l])
                coh[k] += offdiag_l1(rho[k, l])
        if round(float(ts), 6) in snap_set:
            idx = _born_index(psi, rng.random())
            snap_t.append(float(ts))
            snaps.append(int(basis.states[idx]))
    return ObservableSeries(
        traj_index=traj_index,
        times=times,
        m1=m1,
        m2=m2,
        m4=m4,
        coh=coh,
        rho_red=rho,
        snapshot_times=np.array(snap_t) if snap_t else None,
        snapshots=np.array(snaps, dtype=np.int64) if snaps else None,
        final_state=psi.copy() if config.record_final_state else None,
    )


def run_ensemble(
    params: ModelParams,
    config: TrajectoryConfig,
    n_traj: int,
    chunk_size: int = 16,
    threads: int = 1,
    traj_offset: int = 0,
    progress=None,
) -> MomentAccumulator:
    """Run trajectories traj_offset .. traj_offset + n_traj - 1 and merge.

    Work is statically partitioned into fixed chunks of trajectory indices;
    chunk accumulators are merged in chunk order, so the result is identical
    for any thread count.
    """
    cm = get_compiled(params)
    plans = (
        [make_pair_plan(cm.basis, l) for l in range(params.L)] if config.record_rho else None
    )
    times = config.resolved_sample_times()
    indices = list(range(traj_offset, traj_offset + n_traj))
    chunks = [indices[i: i + chunk_size] for i in range(0, len(indices), chunk_size)]

    def run_chunk(chunk):
        acc = MomentAccumulator(times, params.L, with_rho=config.record_rho)
        for idx in chunk:
            acc.add(run_trajectory(params, config, idx, cm=cm, plans=plans))
            if progress is not None:
                progress(idx)
        return acc

    if threads <= 1:
        parts = [run_chunk(c) for c in chunks]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run_chunk, chunks))
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    return acc
