"""Dense master-equation integrator: invariants, spectra, and agreement
with both classical rate-matrix dynamics and the stochastic engine."""

import numpy as np
import pytest
from scipy.linalg import expm

from flocksim.model import ModelParams
from flocksim.observables import mag_table
from flocksim.oracle import (
    DensityMatrix,
    dense_operators,
    expectation_m2,
    initial_density,
    integrate,
    lindblad_rhs,
    superoperator,
    trace_distance,
)
from flocksim.trajectory import (
    TrajectoryConfig,
    get_basis,
    get_compiled,
    initial_state,
    run_ensemble,
)


def random_density(basis, rng):
    a = rng.normal(size=(basis.dim, basis.dim)) + 1j * rng.normal(size=(basis.dim, basis.dim))
    r = a @ a.conj().T
    return DensityMatrix(basis, r / np.trace(r))


@pytest.mark.parametrize("kernel", ["exponential", "linear", "delta"])
def test_rhs_is_trace_free(kernel):
    p = ModelParams(L=3, N=2, h=0.7, K=1.3, r=1, kernel=kernel)
    basis = get_basis(3, 2)
    rng = np.random.default_rng(5)
    for _ in range(4):
        rho = random_density(basis, rng)
        rhs = lindblad_rhs(rho, p)
        assert abs(np.trace(rhs.data)) <= 1e-12


def test_rhs_preserves_hermiticity():
    p = ModelParams(L=3, N=3, h=0.4, K=0.9, r=1)
    basis = get_basis(3, 3)
    rho = random_density(basis, np.random.default_rng(7))
    rhs = lindblad_rhs(rho, p).data
    assert np.abs(rhs - rhs.conj().T).max() <= 1e-12


def test_superoperator_matches_rhs():
    p = ModelParams(L=2, N=2, h=0.6, K=1.1, r=1)
    basis = get_basis(2, 2)
    S = superoperator(p)
    rho = random_density(basis, np.random.default_rng(11))
    lhs = S @ rho.data.flatten(order="F")
    rhs = lindblad_rhs(rho, p).data.flatten(order="F")
    assert np.abs(lhs - rhs).max() <= 1e-11


@pytest.mark.parametrize(
    "L,N,kernel",
    [(2, 1, "exponential"), (2, 2, "linear"), (3, 1, "delta"), (4, 1, "exponential")],
)
def test_superoperator_spectrum_contractive(L, N, kernel):
    p = ModelParams(L=L, N=N, h=0.4, K=1.1, r=1, kernel=kernel)
    ev = np.linalg.eigvals(superoperator(p))
    assert ev.real.max() <= 1e-10
    # a stationary state exists
    assert np.abs(ev).min() <= 1e-8


def test_integrate_preserves_invariants():
    p = ModelParams(L=2, N=2, h=0.5, K=2.0, r=1)
    basis = get_basis(2, 2)
    rho0 = initial_density(initial_state(basis, "plus"))
    rho0.validate()
    series = integrate(rho0, p, t_max=3.0)
    for t, dm in series:
        dm.validate()
    final = series[-1][1].data
    assert np.trace(final @ final).real < 1.0 - 1e-3  # dissipation mixes the state
    assert trace_distance(rho0.data, final) > 0.01


def test_integrate_zero_time():
    p = ModelParams(L=2, N=1, h=0.3, r=1)
    basis = get_basis(2, 1)
    rho0 = initial_density(initial_state(basis, "plus"))
    series = integrate(rho0, p, t_max=0.0, sample_times=[0.0])
    assert np.allclose(series[0][1].data, rho0.data)


def test_dimension_guard():
    p = ModelParams(L=12, N=12, h=0.1)
    with pytest.raises(ValueError, match="guard"):
        dense_operators(p)


def test_density_validation_catches_defects():
    basis = get_basis(2, 1)
    bad = DensityMatrix(basis, np.eye(basis.dim, dtype=complex))  # trace 4
    with pytest.raises(ValueError):
        bad.validate()
    tilted = np.zeros((basis.dim, basis.dim), dtype=complex)
    tilted[0, 1] = 1.0
    tilted[0, 0] = 1.0
    with pytest.raises(ValueError):
        DensityMatrix(basis, tilted).validate()


def classical_rate_matrix(params):
    """W[j, i]: total rate config i -> j summed over channels (h = 0 route)."""
    cm = get_compiled(params)
    dim = cm.basis.dim
    W = np.zeros((dim, dim))
    for a in range(cm.n_channels):
        for i in range(dim):
            j = cm.jump_tgt[a, i]
            if j >= 0:
                W[j, i] += cm.gamma[a] * cm.jump_amp[a, i] ** 2
    W -= np.diag(cm.decay)
    return W


def test_h0_diagonal_dynamics_match_rate_matrix():
    """With no coherent drive a diagonal state stays diagonal and follows
    the classical master equation; compare RK4 against expm directly."""
    p = ModelParams(L=3, N=3, h=0.0, K=1.2, r=1)
    basis = get_basis(3, 3)
    rng = np.random.default_rng(3)
    p0 = rng.random(basis.dim)
    p0 /= p0.sum()
    series = integrate(DensityMatrix(basis, np.diag(p0).astype(complex)), p, t_max=1.5)
    t, dm = series[-1]
    expected = expm(classical_rate_matrix(p) * t) @ p0
    off = dm.data - np.diag(np.diag(dm.data))
    assert np.abs(off).max() <= 1e-12
    assert np.abs(np.diag(dm.data).real - expected).max() <= 1e-8


def test_trace_distance_basics():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 1.0]).astype(complex)
    assert trace_distance(a, a) == 0.0
    assert abs(trace_distance(a, b) - 1.0) <= 1e-12


def test_trajectory_ensemble_matches_oracle():
    """Stochastic engine vs dense integration on a tiny sector: first and
    second magnetization moments within 3 standard errors, and the
    reconstructed ensemble state close in trace distance."""
    p = ModelParams(L=2, N=1, h=0.5, K=1.0, r=1)
    basis = get_basis(2, 1)
    times = np.arange(0.0, 5.0 + 1e-9, 0.5)
    cfg = TrajectoryConfig(
        dt=0.005, t_max=5.0, seed=42, sample_times=tuple(times), record_final_state=True
    )
    acc = run_ensemble(p, cfg, n_traj=2000)

    rho0 = initial_density(initial_state(basis, "plus"))
    oracle = integrate(rho0, p, t_max=5.0, sample_times=times)
    mag = mag_table(basis).astype(np.float64)

    m1, m2, _ = acc.mean_moments()
    se1 = np.maximum(acc.moment_stderr(0), 1e-4)
    se2 = np.maximum(acc.moment_stderr(1), 1e-4)
    for k, (t, dm) in enumerate(oracle):
        d = np.diag(dm.data).real
        assert abs(m1[k] - d @ mag) <= 3.0 * se1[k] + 1e-9
        assert abs(m2[k] - d @ mag**2) <= 3.0 * se2[k] + 1e-9

    dist = trace_distance(acc.mean_state(), oracle[-1][1].data)
    assert dist <= 5.0 / np.sqrt(2000)


def test_expectation_m2_on_pure_state():
    basis = get_basis(2, 2)
    psi = initial_state(basis, "pair")
    rho = initial_density(psi)
    mag = mag_table(basis).astype(np.float64)
    direct = float((np.abs(psi.data) ** 2) @ mag**2)
    assert abs(expectation_m2(rho) - direct) <= 1e-12
