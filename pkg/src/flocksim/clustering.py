"""Density-peak statistics on measured configurations.

A projective measurement of a trajectory state yields a single many-body
configuration.  Each site gets a local density rho_l (same-species
occupation within radius d_c, periodic, m = l included), a distance delta_l
to the nearest strictly-higher-density site, and the product gamma_l =
rho_l * delta_l whose histogram distinguishes tight flocks (isolated mass
at large gamma) from disordered gases (decaying P(gamma)).

Sites sharing the global density maximum all get delta = L/2, so an
L/2-particle flock saturates gamma_max = L^2/4 at half filling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DOWN, UP  # noqa: F401  (UP re-exported for callers)


@dataclass(frozen=True)
class ClusterStats:
    gamma: np.ndarray  # (L,) per-site score
    species: int
    d_c: int


@dataclass(frozen=True)
class GammaHistogram:
    edges: np.ndarray  # (n_bins + 1,)
    centers: np.ndarray  # (n_bins,)
    density: np.ndarray  # (n_bins,), sums to 1 after * width
    counts: np.ndarray  # (n_bins,) raw
    width: float
    gamma_max: float


def gamma_max(L: int) -> float:
    return L * L / 4.0


def occupation_vector(mask: int, L: int, species: int = DOWN) -> np.ndarray:
    """(L,) 0/1 occupation of one species from a packed configuration."""
    return np.array([(mask >> (2 * l + species)) & 1 for l in range(L)], dtype=np.uint8)


def _check_dc(d_c: int, L: int) -> None:
    if not 1 <= d_c <= L // 2:
        raise ValueError(f"d_c must lie in [1, L/2], got d_c={d_c}, L={L}")


def _distance_matrix(L: int) -> np.ndarray:
    idx = np.arange(L)
    d = np.abs(idx[:, None] - idx[None, :])
    return np.minimum(d, L - d).astype(np.float64)


def batch_gamma(occ: np.ndarray, d_c: int) -> np.ndarray:
    """Per-site gamma for a batch of occupation rows, shape (S, L) -> (S, L)."""
    occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
    S, L = occ.shape
    _check_dc(d_c, L)
    offsets = sorted({off % L for off in range(-(d_c - 1), d_c)})
    rho = occ * sum(np.roll(occ, -off, axis=1) for off in offsets)
    D = _distance_matrix(L)
    higher = rho[:, None, :] > rho[:, :, None]
    delta = np.where(higher, D[None, :, :], np.inf).min(axis=2)
    delta[np.isinf(delta)] = L / 2.0  # global maxima, ties included
    return rho * delta


def cluster_gamma(mask: int, L: int, species: int = DOWN, d_c: int = 4) -> ClusterStats:
    """Density-peak score of every site for one measured configuration."""
    occ = occupation_vector(mask, L, species)
    g = batch_gamma(occ[None, :], d_c)[0]
    return ClusterStats(gamma=g, species=species, d_c=d_c)


def sample_snapshot(psi, rng) -> int:
    """Joint projective measurement: draw one configuration from |psi|^2."""
    from .trajectory import _born_index

    idx = _born_index(psi.data, rng.random())
    return int(psi.basis.states[idx])


def pooled_gamma(snapshots: dict, L: int, species: int = DOWN, d_c: int = 4) -> np.ndarray:
    """Flat array of gamma values pooled over trajectories, times and sites.

    snapshots: {traj_index: (times, masks)} as stored by the ensemble
    accumulator.
    """
    masks = np.concatenate([m for _, m in snapshots.values()]) if snapshots else np.array([], dtype=np.int64)
    if masks.size == 0:
        return np.zeros(0)
    shifts = 2 * np.arange(L, dtype=np.int64) + species
    occ = (masks[:, None] >> shifts[None, :]) & 1
    return batch_gamma(occ, d_c).ravel()


def gamma_histogram(values, L: int, n_bins: int = 40) -> GammaHistogram:
    """Normalized P(gamma) on n_bins uniform bins covering [0, gamma_max]."""
    if isinstance(values, ClusterStats):
        values = [values]
    if len(values) and isinstance(values[0], ClusterStats):
        values = np.concatenate([s.gamma for s in values])
    values = np.asarray(values, dtype=np.float64)
    gmax = gamma_max(L)
    if values.size == 0:
        raise ValueError("no gamma values to histogram")
    if values.min() < 0 or values.max() > gmax * (1 + 1e-12):
        raise ValueError("gamma values outside [0, gamma_max]")
    edges = np.linspace(0.0, gmax, n_bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    width = gmax / n_bins
    density = counts / (counts.sum() * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return GammaHistogram(
        edges=edges, centers=centers, density=density, counts=counts, width=width, gamma_max=gmax
    )


def coarse_density(hist: GammaHistogram, n_coarse: int = 10) -> np.ndarray:
    """Merge fine bins into n_coarse equal groups (density units)."""
    n = len(hist.counts)
    if n % n_coarse != 0:
        raise ValueError(f"{n} fine bins do not divide into {n_coarse} coarse bins")
    g = hist.counts.reshape(n_coarse, n // n_coarse).sum(axis=1)
    return g / (hist.counts.sum() * hist.gamma_max / n_coarse)


def monotone_violation_mass(hist: GammaHistogram, n_coarse: int = 10) -> float:
    """Probability mass by which coarse P(gamma) fails to be non-increasing.

    Sum over adjacent coarse bins of max(0, P[k+1] - P[k]) * width: zero for
    a monotone decay, bounded by 1.
    """
    p = coarse_density(hist, n_coarse)
    width = hist.gamma_max / n_coarse
    return float(np.clip(np.diff(p), 0.0, None).sum() * width)


def tail_mass(hist: GammaHistogram, frac: float = 0.5) -> float:
    """Probability mass at gamma > frac * gamma_max."""
    sel = hist.centers > frac * hist.gamma_max
    return float(hist.counts[sel].sum() / hist.counts.sum())


def export_histogram(path, hist: GammaHistogram) -> None:
    """Two-column text table: bin center, probability density."""
    with open(path, "w") as f:
        f.write("# gamma_bin_center\tdensity\n")
        for c, d in zip(hist.centers, hist.density):
            f.write(f"{c:.10g}\t{d:.10g}\n")
