import math

import numpy as np
import pytest

from flocksim.classical import (
    ClassicalParams,
    CycleError,
    CycleSpec,
    Transition,
    apply_transition,
    canonical_rate_forms,
    canonical_three_particle_cycle,
    elementary_rate,
    history_rng,
    kolmogorov_rates,
    magnetization_sq,
    neighbor_field,
    paired_initial,
    run_classical_ensemble,
    run_history,
    sweep,
)
from flocksim.model import DOWN, UP


# -- cycle analyzer ---------------------------------------------------------


def test_canonical_cycle_closed_forms():
    rng = np.random.default_rng(3)
    for _ in range(100):
        gamma = rng.uniform(0.1, 3.0)
        K = rng.uniform(0.0, 5.0)
        eps = rng.uniform(0.0, 1.0)
        gf, gb, ratio = kolmogorov_rates(canonical_three_particle_cycle(K, eps), gamma=gamma)
        cf, cb = canonical_rate_forms(gamma, K, eps)
        assert math.isclose(gf, cf, rel_tol=1e-13)
        assert math.isclose(gb, cb, rel_tol=1e-13) or (gb == 0.0 and cb == 0.0)
        if gb > 0:
            expect = math.exp(-K) * (1 + eps) ** 2 / (1 - eps) ** 2
            assert math.isclose(ratio, expect, rel_tol=1e-12)


def test_canonical_cycle_reference_point():
    # K=1, eps=0: forward/backward ratio is 1/e
    _, _, ratio = kolmogorov_rates(canonical_three_particle_cycle(1.0, 0.0))
    assert math.isclose(ratio, math.exp(-1.0), rel_tol=1e-13)
    assert round(ratio, 5) == 0.36788


def test_fully_biased_cycle_is_irreversible():
    gf, gb, ratio = kolmogorov_rates(canonical_three_particle_cycle(2.0, 1.0))
    assert gf > 0
    assert gb == 0.0
    assert ratio == math.inf


def _legal_transitions(occ):
    L = len(occ)
    out = []
    for l in range(L):
        for s in (UP, DOWN):
            for d in (-1, 1):
                if occ[l, s] == 1 and occ[(l + d) % L, s] == 0:
                    out.append(Transition("motion", l, s, d))
            if occ[l, 1 - s] == 1 and occ[l, s] == 0:
                out.append(Transition("flip", l, s))
    return out


def _random_cycle(rng, L=5, max_len=8):
    while True:
        occ0 = np.zeros((L, 2), dtype=np.int64)
        for _ in range(3):
            occ0[rng.integers(L), rng.integers(2)] = 1
        occ = occ0.copy()
        steps = []
        for _ in range(max_len):
            cands = _legal_transitions(occ)
            tr = cands[rng.integers(len(cands))]
            steps.append(tr)
            occ = apply_transition(occ, tr)
            if len(steps) >= 2 and np.array_equal(occ, occ0):
                return CycleSpec(L=L, initial=tuple(map(tuple, occ0)), steps=tuple(steps), K=0.0, epsilon=0.0)


def test_unbiased_cycles_balance():
    # K=0, eps=0: every closed cycle has equal forward and backward products
    rng = np.random.default_rng(11)
    for _ in range(25):
        cyc = _random_cycle(rng)
        gf, gb, ratio = kolmogorov_rates(cyc, gamma=1.0)
        assert gf == pytest.approx(gb, rel=1e-12)
        assert ratio == pytest.approx(1.0, rel=1e-12)


def test_nonclosing_cycle_rejected():
    cyc = canonical_three_particle_cycle(1.0, 0.5)
    bad = CycleSpec(L=cyc.L, initial=cyc.initial, steps=cyc.steps[:3], K=cyc.K, epsilon=cyc.epsilon)
    with pytest.raises(CycleError):
        kolmogorov_rates(bad)


def test_illegal_step_rejected():
    occ = [(0, 0)] * 6
    occ[2] = (1, 0)
    # hop onto itself from an empty source
    bad = CycleSpec(L=6, initial=tuple(occ), steps=(Transition("motion", 4, UP, 1),))
    with pytest.raises(CycleError):
        kolmogorov_rates(bad)


def test_transition_inverse_roundtrip():
    occ = np.zeros((6, 2), dtype=np.int64)
    occ[2, UP] = 1
    occ[3, DOWN] = 1
    for tr in _legal_transitions(occ):
        moved = apply_transition(occ, tr)
        back = apply_transition(moved, tr.inverse())
        assert np.array_equal(back, occ)


def test_elementary_rate_values():
    # isolated up-mover: left hop (1+eps)/2, right hop (1-eps)/2
    occ = np.zeros((6, 2), dtype=np.int64)
    occ[3, UP] = 1
    assert elementary_rate(occ, Transition("motion", 3, UP, -1), 0.0, 0.3, 1, 2.0) == pytest.approx(2.0 * 1.3 / 2)
    assert elementary_rate(occ, Transition("motion", 3, UP, 1), 0.0, 0.3, 1, 2.0) == pytest.approx(2.0 * 0.7 / 2)
    # down-mover mirrored
    occ2 = np.zeros((6, 2), dtype=np.int64)
    occ2[3, DOWN] = 1
    assert elementary_rate(occ2, Transition("motion", 3, DOWN, 1), 0.0, 0.3, 1, 1.0) == pytest.approx(1.3 / 2)
    # flip against one aligned neighbor: exp(-K/2)
    occ3 = np.zeros((6, 2), dtype=np.int64)
    occ3[2, UP] = occ3[3, UP] = 1
    assert elementary_rate(occ3, Transition("flip", 3, DOWN), 1.8, 0.0, 1, 1.0) == pytest.approx(math.exp(-0.9))


# -- synchronous sweep ------------------------------------------------------


def test_paired_initial_state():
    occ = paired_initial(16)
    assert occ.sum() == 8  # a quarter of the sites paired: L/2 particles, half filling
    assert (occ[:4] == 1).all() and (occ[4:] == 0).all()
    assert magnetization_sq(occ) == 0.0


def test_polarized_m2():
    L = 20
    occ = np.zeros((L, 2), dtype=np.uint8)
    occ[:10, UP] = 1  # density 1/2, all up
    assert magnetization_sq(occ) == pytest.approx(0.25)


def test_neighbor_field_literal():
    L, r = 8, 3
    occ = np.zeros((L, 2), dtype=np.uint8)
    occ[0, UP] = occ[2, DOWN] = occ[5, UP] = 1
    m = occ[:, UP].astype(int) - occ[:, DOWN]
    S = neighbor_field(occ, r)
    for l in range(L):
        expect = sum(m[(l + j) % L] + m[(l - j) % L] for j in range(1, r + 1))
        assert S[l] == expect


def test_sweep_conserves_particles_and_hardcore():
    rng = np.random.default_rng(5)
    for trial in range(30):
        L = int(rng.integers(6, 20))
        occ = (rng.random((L, 2)) < 0.4).astype(np.uint8)
        params = ClassicalParams(L=L, K=float(rng.uniform(0, 4)), r=int(rng.integers(1, L // 2 + 1)))
        total = occ.sum()
        for _ in range(5):
            occ = sweep(occ, params, rng)
            assert occ.sum() == total
            assert occ.max() <= 1 and occ.min() >= 0


def test_empty_chain_is_stationary():
    params = ClassicalParams(L=10, K=2.0)
    occ = np.zeros((10, 2), dtype=np.uint8)
    rng = np.random.default_rng(0)
    for _ in range(20):
        occ = sweep(occ, params, rng)
    assert occ.sum() == 0


def test_motion_direction_bias():
    # lone movers hop one site per sweep at most, up only to the left and
    # down only to the right; a lone particle may also flip species
    L, n = 16, 3000
    params = ClassicalParams(L=L, K=0.0, r=1)
    for species, step in ((UP, -1), (DOWN, +1)):
        moved = flipped = 0
        for k in range(n):
            occ = np.zeros((L, 2), dtype=np.uint8)
            occ[8, species] = 1
            out = sweep(occ, params, history_rng(31 + species, k))
            site = int(np.flatnonzero(out.any(axis=1))[0])
            assert site in (8, (8 + step) % L)  # never the disallowed direction
            if site != 8:
                assert out[site, species] == 1
                moved += 1
            elif out[8, species] == 0:
                flipped += 1
        # move and flip both fire at 0.1; simultaneous firing splits evenly
        expect = n * (0.1 * 0.9 + 0.1 * 0.1 * 0.5)
        sigma = math.sqrt(n * 0.095 * 0.905)
        assert abs(moved - expect) < 4 * sigma
        assert abs(flipped - expect) < 4 * sigma


def test_flip_and_hop_share_conflicts_fairly():
    # lone down particle with no neighbors: flip fires at 0.1, hop at 0.1;
    # when both fire the random application order picks the survivor
    L, n = 4, 4000
    params = ClassicalParams(L=L, K=5.0, r=1)
    flips = hops = 0
    for k in range(n):
        occ = np.zeros((L, 2), dtype=np.uint8)
        occ[0, DOWN] = 1
        out = sweep(occ, params, history_rng(77, k))
        if out[0, UP] == 1:
            flips += 1
        elif out[1, DOWN] == 1:
            hops += 1
        else:
            assert out[0, DOWN] == 1
    expect = n * (0.1 * 0.9 + 0.1 * 0.1 * 0.5)
    sigma = math.sqrt(n * 0.095 * 0.905)
    assert abs(flips - expect) < 4 * sigma
    assert abs(hops - expect) < 4 * sigma
    assert abs(flips - hops) < 4 * math.sqrt(2 * n * 0.095)


def test_supported_flip_saturates():
    # a down particle flanked by aligned up-movers flips with capped
    # probability one, so its down state never survives a sweep
    L = 8
    params = ClassicalParams(L=L, K=50.0, r=1)
    for k in range(20):
        occ = np.zeros((L, 2), dtype=np.uint8)
        occ[2, UP] = occ[4, UP] = 1
        occ[3, DOWN] = 1
        out = sweep(occ, params, history_rng(13, k))
        assert out[3, DOWN] == 0


def test_history_and_ensemble_reproducible():
    params = ClassicalParams(L=16, K=1.5)
    t1, m1, occ1 = run_history(params, 50, history_rng(21, 0), record_every=10)
    t2, m2, occ2 = run_history(params, 50, history_rng(21, 0), record_every=10)
    assert np.array_equal(m1, m2) and np.array_equal(occ1, occ2)
    assert t1[-1] == 50 and len(t1) == 6

    ta, ma, _ = run_classical_ensemble(params, n_histories=6, n_sweeps=30, seed=4, record_every=5)
    tb, mb, _ = run_classical_ensemble(params, n_histories=6, n_sweeps=30, seed=4, record_every=5)
    assert np.array_equal(ma, mb)
    # first histories of a larger ensemble match a smaller one bitwise
    _, mc, _ = run_classical_ensemble(params, n_histories=3, n_sweeps=30, seed=4, record_every=5)
    rows_a = [run_history(params, 30, history_rng(4, i), 5)[1] for i in range(3)]
    assert np.array_equal(np.mean(rows_a, axis=0), mc)


def test_params_validation():
    with pytest.raises(ValueError):
        ClassicalParams(L=1)
    with pytest.raises(ValueError):
        ClassicalParams(L=8, r=5)
    with pytest.raises(ValueError):
        ClassicalParams(L=8, prob_scale=0.0)
    with pytest.raises(ValueError):
        Transition("teleport", 0, UP)
    with pytest.raises(ValueError):
        Transition("motion", 0, UP, 0)
