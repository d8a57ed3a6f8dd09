"""Measured quantities: magnetization moments, Binder cumulant, two-site
reduced density matrices at half-chain separation, and l1 coherence.

The total magnetization is diagonal in the configuration basis, so its
moments are weighted sums of |amplitude|^2.  The two-site reduced matrix of a
pure state is assembled by grouping basis states that share the same
configuration on the traced-out sites; each group contributes a small outer
product.  16x16 matrices are indexed by 4*code(site a) + code(site b) with
code = n_up + 2*n_down, i.e. 0 empty, 1 up, 2 down, 3 both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .fock import FockBasis
from .model import StateVector


def mag_table(basis: FockBasis) -> np.ndarray:
    """Total magnetization of every configuration, as int64."""
    return _mag_table(basis.states, basis.L)


@njit(cache=True)
def _mag_table(states, L):
    out = np.empty(states.shape[0], dtype=np.int64)
    for i in range(states.shape[0]):
        m = np.int64(0)
        mask = states[i]
        for l in range(L):
            m += ((mask >> (2 * l)) & 1) - ((mask >> (2 * l + 1)) & 1)
        out[i] = m
    return out


@njit(cache=True)
def moments_from_table(amps, mag):
    """(m1, m2, m4) = <M>, <M^2>, <M^4> for a normalized amplitude vector."""
    m1 = 0.0
    m2 = 0.0
    m4 = 0.0
    for i in range(amps.shape[0]):
        w = amps[i].real ** 2 + amps[i].imag ** 2
        m = float(mag[i])
        m1 += w * m
        mm = m * m
        m2 += w * mm
        m4 += w * mm * mm
    return m1, m2, m4


def magnetization_moments(psi: StateVector) -> tuple[float, float, float]:
    """Expectation values of M, M^2, M^4 in the state psi."""
    return moments_from_table(psi.data, mag_table(psi.basis))


def binder(m2: float, m4: float, tol: float = 1e-12):
    """U = 1 - m4 / (3 m2^2) from ensemble moments.

    Returns None when m2 is below `tol`: the cumulant is undefined there and
    the caller must report a missing data point, not zero.
    """
    if m2 <= tol:
        return None
    return 1.0 - m4 / (3.0 * m2 * m2)


# ---------------------------------------------------------------------------
# two-site reduced density matrices


@dataclass(frozen=True)
class PairTracePlan:
    """Index plan for tracing all sites except {l, l + L/2}.

    order  : basis indices sorted so equal remainder configurations are
             contiguous
    starts : group boundaries into `order` (len n_groups + 1)
    pair   : 16-level pair code of each basis index, in `order` order
    """

    l: int
    order: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    pair: np.ndarray = field(repr=False)


def make_pair_plan(basis: FockBasis, l: int) -> PairTracePlan:
    if basis.L % 2 != 0:
        raise ValueError("two-site reduction at distance L/2 needs even L")
    if not 0 <= l < basis.L:
        raise ValueError(f"site index {l} out of range")
    l2 = (l + basis.L // 2) % basis.L
    states = basis.states
    code_a = (states >> (2 * l)) & 3
    code_b = (states >> (2 * l2)) & 3
    pair = (4 * code_a + code_b).astype(np.uint8)
    rem = states & ~((np.int64(3) << (2 * l)) | (np.int64(3) << (2 * l2)))
    order = np.argsort(rem, kind="stable").astype(np.int64)
    rem_sorted = rem[order]
    boundaries = np.nonzero(np.diff(rem_sorted))[0] + 1
    starts = np.concatenate(([0], boundaries, [len(states)])).astype(np.int64)
    return PairTracePlan(l=l, order=order, starts=starts, pair=pair[order])


@njit(cache=True)
def _pair_rho(amps, order, starts, pair, out):
    # sum of outer products of per-group 16-component slices
    for g in range(starts.shape[0] - 1):
        a, b = starts[g], starts[g + 1]
        for x in range(a, b):
            ix = order[x]
            px = pair[x]
            vx = amps[ix]
            for y in range(a, b):
                out[px, pair[y]] += vx * np.conj(amps[order[y]])


def reduced_two_site(psi: StateVector, l: int, plan: PairTracePlan | None = None) -> np.ndarray:
    """Partial trace of |psi><psi| onto sites (l, l + L/2); 16x16, Hermitian,
    unit trace."""
    if plan is None:
        plan = make_pair_plan(psi.basis, l)
    out = np.zeros((16, 16), dtype=np.complex128)
    _pair_rho(psi.data, plan.order, plan.starts, plan.pair, out)
    return out


def offdiag_l1(rho: np.ndarray) -> float:
    """Sum of |off-diagonal| entries of one reduced matrix."""
    a = np.abs(rho)
    return float(a.sum() - np.trace(a))


def coherence(rho_per_site) -> float:
    """Total coherence: sum over site offsets of the l1 norm of off-diagonal
    elements.  The inputs must already be ensemble-averaged reduced matrices;
    averaging after taking absolute values would measure something else.
    """
    return float(sum(offdiag_l1(r) for r in rho_per_site))


# ---------------------------------------------------------------------------
# per-trajectory series and the mergeable ensemble accumulator


@dataclass
class ObservableSeries:
    """One trajectory's observable stream.

    rho_red, when present, is (n_times, L, 16, 16): the trajectory's own
    reduced matrices (pure-state contributions to the ensemble average).
    coh is the l1 coherence of those per-trajectory matrices.
    snapshots holds (time, configuration mask) pairs.
    """

    traj_index: int
    times: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m4: np.ndarray
    coh: np.ndarray | None = None
    rho_red: np.ndarray | None = None
    snapshot_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None
    final_state: np.ndarray | None = None


class MomentAccumulator:
    """Ensemble statistics with associative, commutative merge.

    Scalars are summed; per-trajectory series are kept in dictionaries keyed
    by trajectory index (set union on merge), so merging is order-independent
    and repeated indices are rejected.
    """

    def __init__(self, times: np.ndarray, L: int, with_rho: bool = False):
        self.times = np.asarray(times, dtype=np.float64)
        self.L = L
        nt = len(self.times)
        self.count = 0
        self.sum_m1 = np.zeros(nt)
        self.sum_m2 = np.zeros(nt)
        self.sum_m4 = np.zeros(nt)
        self.sum_coh = np.zeros(nt)
        self.sum_rho = np.zeros((nt, L, 16, 16), dtype=np.complex128) if with_rho else None
        self.per_traj: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.snapshots: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.sum_state: np.ndarray | None = None

    def add(self, s: ObservableSeries) -> None:
        if len(s.times) != len(self.times) or not np.array_equal(s.times, self.times):
            raise ValueError("sample-time grid mismatch")
        if s.traj_index in self.per_traj:
            raise ValueError(f"trajectory {s.traj_index} already accumulated")
        self.count += 1
        self.sum_m1 += s.m1
        self.sum_m2 += s.m2
        self.sum_m4 += s.m4
        if s.coh is not None:
            self.sum_coh += s.coh
        if self.sum_rho is not None:
            if s.rho_red is None:
                raise ValueError("accumulator expects reduced matrices")
            self.sum_rho += s.rho_red
        self.per_traj[s.traj_index] = (s.m1.copy(), s.m2.copy(), s.m4.copy())
        if s.snapshots is not None:
            self.snapshots[s.traj_index] = (s.snapshot_times.copy(), s.snapshots.copy())
        if s.final_state is not None:
            outer = np.outer(s.final_state, s.final_state.conj())
            if self.sum_state is None:
                self.sum_state = outer
            else:
                self.sum_state += outer

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if not np.array_equal(self.times, other.times) or self.L != other.L:
            raise ValueError("incompatible accumulators")
        overlap = self.per_traj.keys() & other.per_traj.keys()
        if overlap:
            raise ValueError(f"duplicate trajectory indices in merge: {sorted(overlap)[:5]}")
        out = MomentAccumulator(self.times, self.L, with_rho=self.sum_rho is not None)
        out.count = self.count + other.count
        out.sum_m1 = self.sum_m1 + other.sum_m1
        out.sum_m2 = self.sum_m2 + other.sum_m2
        out.sum_m4 = self.sum_m4 + other.sum_m4
        out.sum_coh = self.sum_coh + other.sum_coh
        if self.sum_rho is not None:
            if other.sum_rho is None:
                raise ValueError("incompatible accumulators (reduced matrices)")
            out.sum_rho = self.sum_rho + other.sum_rho
        out.per_traj = {**self.per_traj, **other.per_traj}
        out.snapshots = {**self.snapshots, **other.snapshots}
        if self.sum_state is not None or other.sum_state is not None:
            a = 0 if self.sum_state is None else self.sum_state
            b = 0 if other.sum_state is None else other.sum_state
            out.sum_state = a + b
        return out

    # -- derived ensemble quantities ------------------------------------

    def mean_moments(self):
        n = self.count
        return self.sum_m1 / n, self.sum_m2 / n, self.sum_m4 / n

    def traj_moments(self, which: int) -> np.ndarray:
        """(n_traj, nt) matrix of one per-trajectory moment series.

        which: 0 for first moment, 1 for second, 2 for fourth.
        """
        keys = sorted(self.per_traj)
        return np.array([self.per_traj[k][which] for k in keys])

    def moment_stderr(self, which: int) -> np.ndarray:
        """Standard error over trajectories of one moment series."""
        m = self.traj_moments(which)
        return m.std(axis=0, ddof=1) / np.sqrt(m.shape[0])

    def binder_series(self):
        """U(t) from ensemble moments; None entries where undefined."""
        _, m2, m4 = self.mean_moments()
        return [binder(a, b) for a, b in zip(m2, m4)]

    def mean_rho(self, t_index: int) -> np.ndarray:
        """(L, 16, 16) ensemble-averaged reduced matrices at one sample time."""
        if self.sum_rho is None:
            raise ValueError("reduced matrices were not accumulated")
        return self.sum_rho[t_index] / self.count

    def coherence_series(self) -> np.ndarray:
        """C(t) computed on ensemble-averaged reduced matrices."""
        if self.sum_rho is None:
            raise ValueError("reduced matrices were not accumulated")
        nt = len(self.times)
        out = np.empty(nt)
        for t in range(nt):
            out[t] = coherence(self.sum_rho[t] / self.count)
        return out

    def window_mask(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.times >= t_lo - 1e-9) & (self.times <= t_hi + 1e-9)

    def binder_window(self, t_lo: float = 40.0, t_hi: float = 70.0, traj_subset=None):
        """Time-averaged Binder cumulant over [t_lo, t_hi] with jackknife error.

        traj_subset optionally restricts to a list of trajectory indices
        (e.g. the first 500 of a larger ensemble).
        """
        w = self.window_mask(t_lo, t_hi)
        if not w.any():
            raise ValueError("empty averaging window")
        keys = sorted(self.per_traj) if traj_subset is None else sorted(traj_subset)
        if len(keys) < 2:
            raise ValueError("jackknife needs at least two trajectories")
        m2 = np.array([self.per_traj[k][1][w] for k in keys])  # (n, nt_w)
        m4 = np.array([self.per_traj[k][2][w] for k in keys])
        n = len(keys)
        s2, s4 = m2.sum(axis=0), m4.sum(axis=0)
        u_bar = float(np.mean(1.0 - (s4 / n) / (3.0 * (s2 / n) ** 2)))
        # leave-one-out estimates
        l2 = (s2[None, :] - m2) / (n - 1)
        l4 = (s4[None, :] - m4) / (n - 1)
        u_i = np.mean(1.0 - l4 / (3.0 * l2**2), axis=1)
        err = float(np.sqrt((n - 1) / n * np.sum((u_i - u_i.mean()) ** 2)))
        return u_bar, err

    def mean_state(self) -> np.ndarray:
        """Ensemble-averaged density matrix from stored final states."""
        if self.sum_state is None:
            raise ValueError("final states were not accumulated")
        return self.sum_state / self.count

    # -- persistence -----------------------------------------------------

    def save(self, path) -> None:
        """Write the full accumulator state to a compressed .npz file."""
        keys = np.array(sorted(self.per_traj), dtype=np.int64)
        arrays = {
            "times": self.times,
            "L": np.int64(self.L),
            "count": np.int64(self.count),
            "sum_m1": self.sum_m1,
            "sum_m2": self.sum_m2,
            "sum_m4": self.sum_m4,
            "sum_coh": self.sum_coh,
            "traj_keys": keys,
            "traj_m1": np.array([self.per_traj[k][0] for k in keys]).reshape(len(keys), -1),
            "traj_m2": np.array([self.per_traj[k][1] for k in keys]).reshape(len(keys), -1),
            "traj_m4": np.array([self.per_traj[k][2] for k in keys]).reshape(len(keys), -1),
        }
        if self.sum_rho is not None:
            arrays["sum_rho"] = self.sum_rho
        if self.sum_state is not None:
            arrays["sum_state"] = self.sum_state
        if self.snapshots:
            skeys = np.array(sorted(self.snapshots), dtype=np.int64)
            counts = np.array([len(self.snapshots[k][0]) for k in skeys], dtype=np.int64)
            arrays["snap_keys"] = skeys
            arrays["snap_offsets"] = np.concatenate([[0], np.cumsum(counts)])
            arrays["snap_times"] = np.concatenate([self.snapshots[k][0] for k in skeys])
            arrays["snap_masks"] = np.concatenate([self.snapshots[k][1] for k in skeys])
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path) -> "MomentAccumulator":
        with np.load(path) as z:
            out = cls(z["times"], int(z["L"]), with_rho="sum_rho" in z)
            out.count = int(z["count"])
            out.sum_m1 = z["sum_m1"]
            out.sum_m2 = z["sum_m2"]
            out.sum_m4 = z["sum_m4"]
            out.sum_coh = z["sum_coh"]
            if "sum_rho" in z:
                out.sum_rho = z["sum_rho"]
            if "sum_state" in z:
                out.sum_state = z["sum_state"]
            keys = z["traj_keys"]
            m1, m2, m4 = z["traj_m1"], z["traj_m2"], z["traj_m4"]
            for i, k in enumerate(keys):
                out.per_traj[int(k)] = (m1[i], m2[i], m4[i])
            if "snap_keys" in z:
                off = z["snap_offsets"]
                st, sm = z["snap_times"], z["snap_masks"]
                for i, k in enumerate(z["snap_keys"]):
                    out.snapshots[int(k)] = (st[off[i] : off[i + 1]], sm[off[i] : off[i + 1]])
        return out
