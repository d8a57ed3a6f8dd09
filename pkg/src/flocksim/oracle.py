"""Dense integrator of the full master equation for small systems.

Ground truth for validating the stochastic engine: materializes every
operator as a dense matrix and integrates
  d rho / dt = -i [H, rho] + sum_a (gamma_a / 2) (2 X rho X+ - {X+X, rho})
with RK4.  Deliberately simple; guarded to small basis dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import FockBasis
from .model import ModelParams
from .trajectory import get_compiled

DIM_GUARD = 5000


@dataclass
class DensityMatrix:
    basis: FockBasis
    data: np.ndarray

    def validate(self, htol=1e-10, ttol=1e-10, ptol=1e-8) -> None:
        r = self.data
        if np.abs(r - r.conj().T).max() > htol:
            raise ValueError("density matrix not Hermitian within tolerance")
        if abs(np.trace(r).real - 1.0) > ttol or abs(np.trace(r).imag) > ttol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(r).min() < -ptol:
            raise ValueError("density matrix has a negative eigenvalue")


@dataclass
class _DenseOps:
    H: np.ndarray
    X: list  # (gamma, dense matrix) per channel
    XdX_diag: np.ndarray  # decay diagonal sum_a gamma_a X+X (real)


_OPS_CACHE: dict[ModelParams, _DenseOps] = {}


def dense_operators(params: ModelParams) -> _DenseOps:
    """Materialize H and all jump channels as dense matrices."""
    dim = math.comb(2 * params.L, params.N)
    if dim > DIM_GUARD:
        raise ValueError(f"basis dimension {dim} exceeds the oracle guard {DIM_GUARD}")
    if params in _OPS_CACHE:
        return _OPS_CACHE[params]
    cm = get_compiled(params)
    H = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(dim):
        for l in range(params.L):
            j = cm.flip_idx[i, l]
            if j >= 0:
                H[i, j] += -params.h  # gather form; Hermitian by pairing
    X = []
    for a in range(cm.n_channels):
        M = np.zeros((dim, dim), dtype=np.complex128)
        for i in range(dim):
            j = cm.jump_tgt[a, i]
            if j >= 0:
                M[j, i] = cm.jump_amp[a, i]
        X.append((float(cm.gamma[a]), M))
    ops = _DenseOps(H=H, X=X, XdX_diag=cm.decay.copy())
    _OPS_CACHE[params] = ops
    return ops


def lindblad_rhs(rho: DensityMatrix, params: ModelParams) -> DensityMatrix:
    """d rho / dt for the full master equation."""
    ops = dense_operators(params)
    return DensityMatrix(rho.basis, _rhs(rho.data, ops))


def _rhs(r: np.ndarray, ops: _DenseOps) -> np.ndarray:
    out = -1j * (ops.H @ r - r @ ops.H)
    for gamma, X in ops.X:
        if gamma == 0.0:
            continue
        out += gamma * (X @ r @ X.conj().T)
    # anticommutator with the (diagonal) total decay
    d = ops.XdX_diag
    out -= 0.5 * (d[:, None] * r + r * d[None, :])
    return out


def integrate(
    rho0: DensityMatrix,
    params: ModelParams,
    t_max: float,
    dt: float = 0.005,
    sample_times=None,
    validate: bool = True,
):
    """RK4 time series [(t, DensityMatrix)]; invariants checked when sampling."""
    ops = dense_operators(params)
    if sample_times is None:
        sample_times = np.arange(0.0, t_max + 1e-9, 0.5)
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if len(sample_times) == 0 or sample_times[0] < 0 or sample_times[-1] > t_max + 1e-9:
        raise ValueError("sample times must lie in [0, t_max]")
    r = rho0.data.astype(np.complex128).copy()
    out = []
    t = 0.0
    for ts in sample_times:
        while t < ts - 1e-12:
            step = min(dt, ts - t)
            k1 = _rhs(r, ops)
            k2 = _rhs(r + 0.5 * step * k1, ops)
            k3 = _rhs(r + 0.5 * step * k2, ops)
            k4 = _rhs(r + step * k3, ops)
            r = r + (step / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            t += step
        t = float(ts)
        dm = DensityMatrix(rho0.basis, r.copy())
        if validate:
            try:
                dm.validate()
            except ValueError as e:
                raise RuntimeError(f"oracle invariant violated at t={ts}: {e}; reduce dt")
        out.append((float(ts), dm))
    return out


def superoperator(params: ModelParams) -> np.ndarray:
    """Vectorized generator: d vec(rho)/dt = S vec(rho), dim^2 x dim^2.

    Column-major (Fortran) vectorization: vec(A rho B) = (B^T kron A) vec(rho).
    """
    ops = dense_operators(params)
    dim = ops.H.shape[0]
    ident = np.eye(dim)
    S = -1j * (np.kron(ident, ops.H) - np.kron(ops.H.T, ident))
    for gamma, X in ops.X:
        if gamma == 0.0:
            continue
        S += gamma * np.kron(X.conj(), X)
    D = np.diag(ops.XdX_diag.astype(np.complex128))
    S -= 0.5 * (np.kron(ident, D) + np.kron(D.T, ident))
    return S


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2) tr |a - b| for Hermitian a, b."""
    ev = np.linalg.eigvalsh(a - b)
    return 0.5 * float(np.abs(ev).sum())


def expectation_m2(rho: DensityMatrix) -> float:
    """tr(rho M^2); M is diagonal so only diag(rho) enters."""
    from .observables import mag_table

    mag = mag_table(rho.basis).astype(np.float64)
    return float(np.real(np.diag(rho.data)) @ mag**2)


def initial_density(psi) -> DensityMatrix:
    """|psi><psi| as a DensityMatrix."""
    return DensityMatrix(psi.basis, np.outer(psi.data, psi.data.conj()))
