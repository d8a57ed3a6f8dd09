"""Coarse-grained density / magnetization fields on a periodic chain.

Two closure modes for the alignment reaction:

* "constant": local-moment closure with fixed variance sigma2 and cubic
  constant q.  Near threshold the reaction is kept in the normal form whose
  nonzero fixed point is exactly homogeneous_m2() and whose homogeneous
  linearization is exactly homogeneous_stability(); used for fixed-point
  and stability analysis.
* "density": variances proportional to the local density
  (sigma_X^2 = gamma_X * rho), the full inhomogeneous form.  Supports
  traveling domain walls.  Implements the h = 0 reduction; the transverse
  current is not evolved.

Spatial derivatives are the lattice differences
d1 O_l = O_{l+1} - O_{l-1} and d2 O_l = O_{l+1} + O_{l-1} - 2 O_l,
substituted directly for d/dx and d^2/dx^2.  The density equation is a
total difference, so total mass telescopes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MODES = ("density", "constant")
BLOWUP_LIMIT = 10.0


class BlowUpError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"field magnitude exceeded {BLOWUP_LIMIT} at t={t:.4f}")
        self.t = t


class DegenerateClosureError(ValueError):
    pass


@dataclass(frozen=True)
class ClosureParams:
    K: float
    h: float = 0.0
    gamma_M: float = 1.0
    gamma_A: float = 1.0
    sigma2: float = 0.125
    q: float = 0.5
    gamma_rho: float = 0.0
    gamma_m: float = 0.0
    mode: str = "density"

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.gamma_rho < 0 or self.gamma_m < 0:
            raise ValueError("variance-density coefficients must be non-negative")
        if self.gamma_M < 0 or self.gamma_A < 0 or self.h < 0:
            raise ValueError("rates and h must be non-negative")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")


def critical_coupling(p: ClosureParams) -> float:
    """K_c at h = 0: 1 / (2 sigma^2)."""
    return 1.0 / (2.0 * p.sigma2)


def quantum_shift(p: ClosureParams) -> float:
    """Delta_h = 4 h^2 / (Gamma_A (Gamma_M + Gamma_A))."""
    return 4.0 * p.h**2 / (p.gamma_A * (p.gamma_M + p.gamma_A))


def critical_coupling_h(p: ClosureParams) -> float:
    """Shifted threshold K_c(h) = (1 + Delta_h) K_c(0)."""
    return (1.0 + quantum_shift(p)) * critical_coupling(p)


def homogeneous_m2(p: ClosureParams):
    """Fixed-point m^2 of the homogeneous closure; None when disordered."""
    kc = critical_coupling(p)
    denom = p.q - 1.0 / kc
    if abs(denom) <= 1e-12:
        raise DegenerateClosureError("q = 1/K_c: closure denominator vanishes")
    m2 = (p.K / kc - 1.0 - quantum_shift(p)) / (2.0 * kc**2 * denom)
    return m2 if m2 >= 0 else None


def homogeneous_stability(p: ClosureParams) -> float:
    """Decay rate of homogeneous deviations: -4 Gamma_A (K/K_c - 1)."""
    return -4.0 * p.gamma_A * (p.K / critical_coupling(p) - 1.0)


@dataclass
class FieldState:
    rho: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        self.m = np.asarray(self.m, dtype=np.float64)
        if self.rho.shape != self.m.shape or self.rho.ndim != 1 or len(self.rho) < 3:
            raise ValueError("rho and m must be equal-length 1d arrays, L >= 3")

    @property
    def L(self) -> int:
        return len(self.rho)

    def mass(self) -> float:
        return float(self.rho.sum())

    def copy(self) -> "FieldState":
        return FieldState(self.rho.copy(), self.m.copy(), self.t)


def _d1(a: np.ndarray) -> np.ndarray:
    return np.roll(a, -1) - np.roll(a, 1)


def _d2(a: np.ndarray) -> np.ndarray:
    return np.roll(a, -1) + np.roll(a, 1) - 2.0 * a


def _rhs(rho: np.ndarray, m: np.ndarray, p: ClosureParams):
    gm, ga, K = p.gamma_M, p.gamma_A, p.K
    M = m.mean()
    drho = -gm * (2.0 * _d1(rho * m) - _d1(m) - 0.5 * _d2(rho))
    adv = _d1(rho**2) - _d1(rho) + _d1(m**2) - 0.5 * _d2(m)
    if p.mode == "density":
        adv = adv + (p.gamma_rho + p.gamma_m) * _d1(rho)
        react = (
            m
            - 2.0 * K * m**2 * M
            + 2.0 * K**2 * m**3 * M**2
            - 2.0 * K * p.gamma_m * rho * M
            + 6.0 * K**2 * p.gamma_m * rho * m * M**2
        )
    else:
        kc = critical_coupling(p)
        react = (
            (1.0 + quantum_shift(p)) * m
            - 2.0 * K * p.sigma2 * M
            - 2.0 * kc * m**2 * M
            + 2.0 * kc**2 * p.q * m * M**2
        )
    return drho, -gm * adv - 2.0 * ga * react


def field_rhs(s: FieldState, p: ClosureParams):
    """(d rho/dt, d m/dt) arrays for the current profiles."""
    return _rhs(s.rho, s.m, p)


def integrate_fields(s0: FieldState, p: ClosureParams, t_max: float, dt: float = 0.01, sample_times=None):
    """RK4 time series of FieldState; raises BlowUpError when |m| > 10."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if sample_times is None:
        sample_times = np.arange(0.0, t_max + 1e-9, 0.5)
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if len(sample_times) == 0 or sample_times[0] < 0 or sample_times[-1] > t_max + 1e-9:
        raise ValueError("sample times must lie in [0, t_max]")
    rho, m = s0.rho.copy(), s0.m.copy()
    t = 0.0
    out = []
    for ts in sample_times:
        while t < ts - 1e-12:
            step = min(dt, ts - t)
            k1r, k1m = _rhs(rho, m, p)
            k2r, k2m = _rhs(rho + 0.5 * step * k1r, m + 0.5 * step * k1m, p)
            k3r, k3m = _rhs(rho + 0.5 * step * k2r, m + 0.5 * step * k2m, p)
            k4r, k4m = _rhs(rho + step * k3r, m + step * k3m, p)
            rho = rho + (step / 6.0) * (k1r + 2.0 * (k2r + k3r) + k4r)
            m = m + (step / 6.0) * (k1m + 2.0 * (k2m + k3m) + k4m)
            t += step
            if np.abs(m).max() > BLOWUP_LIMIT or not np.isfinite(m).all():
                raise BlowUpError(t)
        t = float(ts)
        out.append(FieldState(rho.copy(), m.copy(), t))
    return out


# -- canned initial conditions -------------------------------------------


def gaussian_cluster(L: int, width: float = 0.5, amplitude: float = 0.5) -> FieldState:
    """All-up cluster: n_up(x) = amplitude exp(-((x - L/2)/width)^2 / 2)."""
    x = np.arange(L, dtype=np.float64)
    n_up = amplitude * np.exp(-0.5 * ((x - L / 2) / width) ** 2)
    return FieldState(rho=n_up / 2.0, m=n_up / 2.0)


def noisy_homogeneous(
    L: int, rho0: float = 0.25, m0: float = 0.25, amplitude: float = 5e-4, seed: int = 0
) -> FieldState:
    """Homogeneous profiles with iid uniform noise on every site."""
    rng = np.random.default_rng(seed)
    return FieldState(
        rho=rho0 + rng.uniform(-amplitude, amplitude, size=L),
        m=m0 + rng.uniform(-amplitude, amplitude, size=L),
    )


# -- peak tracking ---------------------------------------------------------


def peak_positions(states, field_name: str = "m"):
    """Sub-lattice peak location of a periodic profile per state, unwrapped.

    Quadratic interpolation around the circular argmax; consecutive
    positions are unwrapped so steady drift accumulates monotonically.
    Returns (times, positions, heights).
    """
    times, pos, height = [], [], []
    prev = None
    offset = 0.0
    for s in states:
        y = getattr(s, field_name)
        L = len(y)
        j = int(np.argmax(y))
        ym, y0, yp = y[(j - 1) % L], y[j], y[(j + 1) % L]
        denom = ym - 2.0 * y0 + yp
        frac = 0.0 if denom == 0 else 0.5 * (ym - yp) / denom
        frac = float(np.clip(frac, -0.5, 0.5))
        x = (j + frac) % L
        if prev is not None:
            d = (x - prev) % L
            if d > L / 2:
                d -= L
            offset += d
        times.append(s.t)
        pos.append(offset)
        height.append(y0 - 0.25 * (ym - yp) * frac)
        prev = x
    return np.array(times), np.array(pos), np.array(height)


def drift_summary(positions: np.ndarray, tol: float = 1e-6):
    """(monotone, total displacement): are increments sign-consistent?"""
    d = np.diff(positions)
    total = float(positions[-1] - positions[0])
    if total >= 0:
        monotone = bool((d >= -tol).all())
    else:
        monotone = bool((d <= tol).all())
    return monotone, total


def export_profiles(path_rho, path_m, states) -> None:
    """Dense space-time grids, rows = times, columns = sites."""
    rho = np.array([s.rho for s in states])
    m = np.array([s.m for s in states])
    times = np.array([s.t for s in states])
    for path, grid in ((path_rho, rho), (path_m, m)):
        with open(path, "w") as f:
            f.write("# time\t" + "\t".join(f"site_{i}" for i in range(grid.shape[1])) + "\n")
            for t, row in zip(times, grid):
                f.write(f"{t:.10g}\t" + "\t".join(f"{v:.10g}" for v in row) + "\n")
