"""Checks shared by ``pams-opt validate`` and the test suite.

Each check returns plain numbers; the caller decides the tolerance. The
random instances use the reference parameters with a sampled topology and random
activation patterns, which gives realistic ``upsilon`` / ``gamma`` scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cross_entropy as ce
from .inner import InnerProblem, InnerSolution, residual, solve
from .model import SystemParams, channel_matrix, coefficients_from_bits, \
    derive_wavelengths, sample_topology
from .oracle import GridSpec, best_tau_grid, brute_force_inner, exhaustive_outer
from .schemes import (Access, ActivationSet, Level, SchemeConfig, check_chain, evaluate,
                      noma_rate, optimize_config, reconstruct_noma)

TDMA_PARTIAL = SchemeConfig(Access.TDMA, Level.PARTIAL)


def random_problems(params: SystemParams, count: int, rng: np.random.Generator,
                    n_antennas: int = 40, device_counts=(1, 2, 3)):
    """Inner problems from sampled topologies and random activation patterns."""
    out = []
    for i in range(count):
        n_dev = device_counts[i % len(device_counts)]
        topo = sample_topology(params, n_antennas, n_dev, rng)
        h = channel_matrix(topo, derive_wavelengths(params))
        bits = rng.random((2, n_antennas)) < 0.5
        bits[:, rng.integers(n_antennas)] = True
        ups, gam = coefficients_from_bits(bits[0][None], bits[1][None], h, params)
        out.append(InnerProblem(ups[0], gam[0], params))
    return out


@dataclass
class KKTStats:
    residual: float
    time_gap: float  # |t0 + sum(tau) - T| / T
    energy_gap: float  # max relative |used - harvested|
    snr_spread: float  # (max - min) / max over active devices


def kkt_stats(problem: InnerProblem, sol: InnerSolution) -> KKTStats:
    p = problem.params
    T = p.frame_s
    act = np.asarray(sol.active_set, dtype=bool)
    res = abs(residual(sol.z_star, problem, act)) if act.any() else 0.0
    time_gap = abs(sol.t0_s + float(np.sum(sol.tau_s)) - T) / T
    harvested = sol.t0_s * problem.upsilon
    used = sol.offload_energy_j + T * p.kappa * sol.freq_hz ** 3
    ok = harvested > 0
    energy_gap = float(np.max(np.abs(used[ok] - harvested[ok]) / harvested[ok])) if ok.any() else 0.0
    spread = 0.0
    if act.any():
        snr = sol.offload_energy_j[act] * problem.gamma_snr[act] / sol.tau_s[act]
        spread = float((snr.max() - snr.min()) / snr.max())
    return KKTStats(float(res), float(time_gap), energy_gap, spread)


def oracle_gap(problem: InnerProblem, grid: GridSpec = GridSpec()):
    """``(relative gap, solver value, oracle value)``; gap > 0 when the solver is better."""
    v = solve(problem).objective_bits
    o = brute_force_inner(problem, grid)
    return (v - o) / max(v, o, 1e-300), v, o


def equal_snr_gap(problem: InnerProblem, points: int = 20001) -> float:
    """Relative gap between the equal-SNR uplink split and a raw slot grid (two devices)."""
    sol = solve(problem)
    p = problem.params
    t1 = sol.t1_s
    if t1 <= 0:
        return 0.0
    rule = p.bandwidth_hz * t1 * np.log2(1.0 + np.dot(sol.offload_energy_j, problem.gamma_snr) / t1)
    grid = best_tau_grid(sol.offload_energy_j, problem.gamma_snr, t1, p.bandwidth_hz, points)
    return (rule - grid) / rule


def noma_equality(topology, params, activations: ActivationSet, level: Level):
    """``(objective gap, rate gap)`` between TDMA and NOMA at the same activations."""
    t = evaluate(topology, params, SchemeConfig(Access.TDMA, level), activations)
    n = evaluate(topology, params, SchemeConfig(Access.NOMA, level), activations)
    obj_gap = abs(t.objective_bits - n.objective_bits) / t.objective_bits
    if t.inner.t1_s <= 0:
        return obj_gap, 0.0
    view = reconstruct_noma(t.inner)
    rate = noma_rate(view.t1_s, view.power_w, t.gamma_snr, params.bandwidth_hz)
    off = t.inner.offload_bits(params)
    return obj_gap, abs(rate - off) / off


def exhaustive_chain_report(topology, params):
    """Exact optima of the six configurations and their ordering violations."""
    from .schemes import ALL_CONFIGS
    res = {c.name: exhaustive_outer(topology, params, c) for c in ALL_CONFIGS}
    obj = {k: r.objective_bits for k, r in res.items()}
    return obj, check_chain(obj, slack=0.0), res


def ce_versus_exhaustive(topology, params, ce_params: ce.CEParams, rng=None,
                         optimum: float | None = None):
    """``(relative shortfall, trace)`` of one cross-entropy run."""
    if optimum is None:
        optimum = exhaustive_outer(topology, params, TDMA_PARTIAL).objective_bits
    res = optimize_config(topology, params, TDMA_PARTIAL, ce_params, rng)
    return (optimum - res.solution.objective_bits) / optimum, res.trace


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str


def run_suites(params: SystemParams | None = None, seed: int = 0) -> list:
    """Quick oracle suites for ``pams-opt validate`` (a few seconds)."""
    params = params or SystemParams.default()
    rng = np.random.default_rng(seed)
    out = []

    probs = random_problems(params, 100, rng)
    st = [kkt_stats(p, solve(p)) for p in probs]
    worst = KKTStats(*(max(getattr(s, f) for s in st) for f in KKTStats.__dataclass_fields__))
    out.append(SuiteResult("inner KKT", worst.residual <= 1e-10 and worst.time_gap <= 1e-9
                           and worst.energy_gap <= 1e-12,
                           f"residual {worst.residual:.2e}, time {worst.time_gap:.2e}, "
                           f"energy {worst.energy_gap:.2e}"))
    out.append(SuiteResult("equal SNR", worst.snr_spread <= 1e-9,
                           f"spread {worst.snr_spread:.2e}"))

    small = random_problems(params, 6, rng, device_counts=(1, 2))
    gaps = [oracle_gap(p, GridSpec(200, 200))[0] for p in small]
    out.append(SuiteResult("grid oracle", max(abs(g) for g in gaps) <= 5e-3 and min(gaps) > -5e-3,
                           f"max |gap| {max(abs(g) for g in gaps):.2e}"))
    tau = [equal_snr_gap(p) for p in small if p.device_count == 2]
    out.append(SuiteResult("equal-SNR slot rule", min(tau) >= -1e-12 and max(tau) <= 1e-6,
                           f"gaps in [{min(tau):.2e}, {max(tau):.2e}]"))

    topo = sample_topology(params, 6, 2, rng)
    obj, viol, _ = exhaustive_chain_report(topo, params)
    out.append(SuiteResult("configuration chain (N=6)", not viol, "; ".join(viol) or "exact"))

    short, trace = ce_versus_exhaustive(topo, params, ce.CEParams(seed=seed))
    out.append(SuiteResult("cross-entropy vs exhaustive (N=6)", short <= 5e-3,
                           f"shortfall {short:.2e} after {trace.iterations} iterations"))
    return out
