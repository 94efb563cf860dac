import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pams_opt.errors import DomainError
from pams_opt.inner import (InnerProblem, InnerSolution, freq_active, freq_inactive, objective,
                            residual, solve, solve_batch, t0_of_z)
from pams_opt.model import SystemParams
from pams_opt.oracle import GridSpec, brute_force_inner
from pams_opt.validation import kkt_stats, random_problems

P = SystemParams.default()

# roots of (1+z)ln(1+z) - z = s, 40-digit reference values
ROOTS = {1.0: 1.718281828459045, 10.0: 7.174364667724810, 1000.0: 224.99245278158663}

ups_st = st.floats(1e-9, 1e-6)
gam_st = st.floats(1e4, 1e8)


def problem(ups, gam, params=P):
    return InnerProblem(np.asarray(ups, float), np.asarray(gam, float), params)


@pytest.mark.parametrize("s", sorted(ROOTS))
def test_all_active_residual_root(s):
    pr = problem([1e-7], [s / 1e-7])
    z = ROOTS[s]
    expected = math.log1p(z) - z / (1 + z) - s / (1 + z)
    # no inactive devices: residual is the closed expression above
    assert residual(z, pr, [0]) == pytest.approx(expected, abs=1e-12)
    assert abs(residual(z, pr, [0])) < 1e-12


def test_zero_capability_root_is_zero():
    sol = solve(problem([1e-7], [0.0]))
    assert sol.z_star == 0.0
    sol = solve(problem([1e-7, 2e-7], [0.0, 0.0]))
    assert sol.z_star == 0.0 and sol.t0_s == P.frame_s


def test_residual_rejects_nonpositive_z():
    with pytest.raises(DomainError):
        residual(0.0, problem([1e-7], [1e6]))
    with pytest.raises(DomainError):
        t0_of_z(-1.0, problem([1e-7], [1e6]))


def test_residual_strictly_increasing_all_active():
    rng = np.random.default_rng(11)
    zs = np.logspace(-8, 6, 3000)
    for pr in random_problems(P, 20, rng):
        act = np.ones(pr.device_count, bool)
        r = np.array([residual(z, pr, act) for z in zs])
        assert np.all(np.diff(r) > 0)


def test_freq_branches():
    assert freq_inactive(0.0, 1e-7, P) == 0.0
    f = freq_active(10.0, 4.54e7, P)
    alpha = (5e7 / math.log(2)) * 4.54e7 / 11
    assert alpha == pytest.approx(2.977e14, rel=1e-3)
    assert f == pytest.approx(236603.148383445, rel=1e-12)
    # the active frequency maximises T f / I_c - alpha T kappa f^3
    grid = np.linspace(0.5 * f, 1.5 * f, 200001)
    lag = grid / 200 - alpha * 1e-28 * grid ** 3
    assert grid[np.argmax(lag)] == pytest.approx(f, rel=1e-4)


def test_inactive_branch_spends_all_energy_locally():
    t0, ups = 0.4, 3e-7
    f = freq_inactive(t0, ups, P)
    assert P.frame_s * P.kappa * f ** 3 == pytest.approx(t0 * ups, rel=1e-14)


def test_t0_limit_when_local_cost_dominates():
    # with local computing priced out, t0 -> zT/(z + sum ups*gam)
    ups, gam = np.array([5e-8, 2e-8]), np.array([3e6, 1e7])
    s = float(ups @ gam)
    pr = problem(ups, gam, P.replace(kappa=1.0))
    for z in (0.1, 1.0, 5.0):
        assert t0_of_z(z, pr, [0, 1]) == pytest.approx(z / (z + s), rel=1e-12)


def test_t0_of_z_in_frame_below_root():
    rng = np.random.default_rng(5)
    for pr in random_problems(P, 30, rng):
        sol = solve(pr)
        if not sol.active_set.any():
            continue
        for z in np.linspace(sol.z_star * 1e-6, sol.z_star, 50):
            t = t0_of_z(z, pr, sol.active_set)
            assert 0 < t <= P.frame_s * (1 + 1e-12)


def test_single_device_no_uplink():
    ups = 2e-7
    sol = solve(problem([ups], [0.0]))
    f = (ups / P.kappa) ** (1 / 3)
    assert not sol.active_set.any()
    assert sol.t0_s == P.frame_s
    assert sol.freq_hz[0] == pytest.approx(f, rel=1e-12)
    assert sol.objective_bits == pytest.approx(P.frame_s * f / 200, rel=1e-12)
    assert sol.t1_s == 0


def test_no_harvest_is_domain_error():
    with pytest.raises(DomainError):
        solve(problem([0.0, 0.0], [1e6, 1e6]))


def test_single_device_matches_grid():
    pr = random_problems(P, 1, np.random.default_rng(2), device_counts=(1,))[0]
    v = solve(pr).objective_bits
    o = brute_force_inner(pr, GridSpec(400, 400))
    assert abs(v - o) / v <= 5e-3
    assert o <= v * (1 + 1e-9)


def test_symmetric_devices():
    sol = solve(problem([4e-8, 4e-8], [2e6, 2e6]))
    assert sol.tau_s[0] == pytest.approx(sol.tau_s[1], rel=1e-12)
    assert sol.power_w[0] == pytest.approx(sol.power_w[1], rel=1e-12)
    assert sol.freq_hz[0] == pytest.approx(sol.freq_hz[1], rel=1e-12)


def test_objective_of_zero_solution():
    z = np.zeros(2)
    sol = InnerSolution(t0_s=0.0, tau_s=z, power_w=z, freq_hz=z, offload_energy_j=z,
                        active_set=np.zeros(2, bool), z_star=0.0, objective_bits=0.0,
                        lam=0.0, alpha=z)
    assert objective(sol, problem([1e-7, 1e-7], [1e6, 1e6])) == 0.0


def test_equal_snr_form_matches_slot_sum():
    rng = np.random.default_rng(8)
    for pr in random_problems(P, 30, rng):
        sol = solve(pr)
        eq = sol.offload_bits(P) + sol.local_bits(P)
        assert eq == pytest.approx(sol.objective_bits, rel=1e-12)
        assert objective(sol, pr) == pytest.approx(sol.objective_bits, rel=1e-9)


def test_batch_matches_scalar():
    rng = np.random.default_rng(9)
    probs = random_problems(P, 12, rng, device_counts=(3,))
    ups = np.stack([p.upsilon for p in probs])
    gam = np.stack([p.gamma_snr for p in probs])
    b = solve_batch(ups, gam, P)
    for i, pr in enumerate(probs):
        assert b.objective_bits[i] == solve(pr).objective_bits


def test_partial_capability_rows():
    # one device cannot offload (gamma = 0); it must compute locally only
    sol = solve(problem([5e-8, 5e-8], [0.0, 5e6]))
    assert not sol.active_set[0] and sol.tau_s[0] == 0
    assert sol.offload_energy_j[0] == 0
    st_ = kkt_stats(problem([5e-8, 5e-8], [0.0, 5e6]), sol)
    assert st_.time_gap <= 1e-9 and st_.energy_gap <= 1e-12


@settings(max_examples=80, deadline=None)
@given(ups=st.lists(ups_st, min_size=1, max_size=3), data=st.data())
def test_kkt_invariants(ups, data):
    gam = data.draw(st.lists(gam_st, min_size=len(ups), max_size=len(ups)))
    pr = problem(ups, gam)
    sol = solve(pr)
    s = kkt_stats(pr, sol)
    assert s.residual <= 1e-10
    assert s.time_gap <= 1e-9
    assert s.energy_gap <= 1e-12
    assert s.snr_spread <= 1e-9
    for a in (sol.tau_s, sol.power_w, sol.freq_hz, sol.offload_energy_j):
        assert np.all(np.isfinite(a)) and np.all(a >= 0)


@settings(max_examples=60, deadline=None)
@given(ups=st.lists(ups_st, min_size=1, max_size=3), data=st.data(),
       factor=st.floats(1.0, 4.0))
def test_objective_monotone(ups, data, factor):
    gam = data.draw(st.lists(gam_st, min_size=len(ups), max_size=len(ups)))
    k = data.draw(st.integers(0, len(ups) - 1))
    base = solve(problem(ups, gam)).objective_bits
    ups2 = np.array(ups) * factor  # larger P_b or gamma scales every upsilon
    assert solve(problem(ups2, gam)).objective_bits >= base * (1 - 1e-12)
    wider = P.replace(bandwidth_hz=P.bandwidth_hz * factor)
    assert solve(problem(ups, gam, wider)).objective_bits >= base * (1 - 1e-12)
    gam2 = np.array(gam)
    gam2[k] *= factor
    assert solve(problem(ups, gam2)).objective_bits >= base * (1 - 1e-12)
