"""Brute-force references for small instances.

Nothing here uses the KKT formulas of :mod:`pams_opt.inner`.
``brute_force_inner`` grids the charging time and each device's energy split
and scores points straight from the objective definition. The
``exhaustive_outer`` search enumerates every nonzero activation pattern.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .inner import InnerProblem, residual, solve_batch
from .model import (ActivationPattern, SystemParams, Topology, channel_matrix,
                    coefficients_from_bits, derive_wavelengths)
from .schemes import Access, ActivationSet, Level, SchemeConfig, evaluate

MAX_PAIR_ANTENNAS = 8
MAX_BRUTE_FULL_ANTENNAS = 6
MAX_BRUTE_FULL_DEVICES = 2
CHUNK = 16384


@dataclass(frozen=True)
class GridSpec:
    t0_points: int = 400
    split_points: int = 400
    z_points: int = 2000

    def __post_init__(self):
        if min(self.t0_points, self.split_points, self.z_points) < 2:
            raise ValueError("every grid needs at least 2 points")

    def refined(self) -> "GridSpec":
        """Grid containing every point of this one."""
        return GridSpec(2 * self.t0_points + 1, 2 * self.split_points - 1, 2 * self.z_points - 1)


def brute_force_inner(problem: InnerProblem, grid: GridSpec = GridSpec(),
                      return_point: bool = False):
    """Best objective over a grid of feasible allocations.

    Charging time runs over the interior of ``(0, T)``; each device splits its
    harvested energy between uplink and local CPU on ``split_points`` levels,
    spends all of it, and the uplink window goes to devices in proportion to
    ``e * gamma`` so that every device sees the same SNR.
    """
    ups, gam, p = problem.upsilon, problem.gamma_snr, problem.params
    n_dev = problem.device_count
    if n_dev > 3:
        raise BudgetExceeded("grid oracle supports at most 3 devices")
    T = p.frame_s
    t0s = np.linspace(0.0, T, grid.t0_points + 2)[1:-1]
    s = np.linspace(0.0, 1.0, grid.split_points)
    # per-device terms on the split grid, combined by broadcasting
    loc_unit = (T / p.intensity_cycles_per_bit) * np.cbrt(np.outer(ups, 1.0 - s) / (T * p.kappa))
    snr_unit = np.outer(ups * gam, s)
    best, arg = 0.0, None
    for t0 in t0s:
        t1 = T - t0
        snr = _outer_sum(snr_unit * (t0 / t1))
        local = _outer_sum(loc_unit * np.cbrt(t0))
        total = p.bandwidth_hz * t1 * np.log2(1.0 + snr) + local
        i = int(np.argmax(total))
        if total.flat[i] > best:
            best, arg = float(total.flat[i]), (float(t0), s[list(np.unravel_index(i, total.shape))])
    return (best, arg) if return_point else best


def _outer_sum(rows):
    out = rows[0]
    for r in rows[1:]:
        out = np.add.outer(out, r)
    return out


def best_tau_grid(offload_energy, gamma_snr, t1: float, bandwidth_hz: float,
                  points: int = 20001) -> float:
    """Two-device uplink bits maximised over a raw grid of slot splits."""
    e = np.asarray(offload_energy, dtype=float)
    g = np.asarray(gamma_snr, dtype=float)
    if e.size != 2:
        raise ValueError("raw slot grid is for two devices")
    tau1 = np.linspace(0.0, t1, points)
    tau = np.column_stack([tau1, t1 - tau1])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(tau > 0, tau * np.log2(1.0 + e * g / np.where(tau > 0, tau, 1.0)), 0.0)
    return float(bandwidth_hz * r.sum(axis=1).max())


def residual_sign_changes(problem: InnerProblem, active_set, grid: GridSpec = GridSpec(),
                          z_max: float = 1e8) -> int:
    """Count sign changes of the stationarity residual on a log grid of ``z``."""
    zs = np.logspace(-10, np.log10(z_max), grid.z_points)
    r = np.array([residual(z, problem, active_set) for z in zs])
    sg = np.sign(r)
    return int(np.count_nonzero(sg[1:] != sg[:-1]))


def enumerate_patterns(n: int) -> np.ndarray:
    """All ``2**n - 1`` nonzero patterns, in increasing binary order."""
    idx = np.arange(1, 2 ** n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(bool)


@dataclass
class ExhaustiveResult:
    activations: ActivationSet
    objective_bits: float
    solution: object
    evaluations: int


def _argmax_chunks(values_fn, total: int):
    best, arg = -np.inf, -1
    for start in range(0, total, CHUNK):
        v = values_fn(start, min(start + CHUNK, total))
        i = int(np.argmax(v))
        if v[i] > best:
            best, arg = float(v[i]), start + i
    return best, arg


def exhaustive_outer(topology: Topology, params: SystemParams, config: SchemeConfig,
                     evaluator=solve_batch, brute_full: bool = False) -> ExhaustiveResult:
    """Exact optimum over activation patterns for one configuration.

    TDMA full-dynamic search is reduced by default: for a fixed downlink
    pattern the inner optimum is nondecreasing in every device's uplink
    coefficient, so each device's best slot pattern is the one maximising its
    own coefficient. The reduced candidates are scored together with all
    shared-pattern candidates. ``brute_full`` enumerates every tuple instead
    (small ``N`` and ``L`` only). NOMA full-dynamic equals NOMA partial and is
    enumerated as such.
    """
    n, n_dev = topology.n_antennas, topology.n_devices
    h = channel_matrix(topology, derive_wavelengths(params))
    pats = enumerate_patterns(n)
    n_p = len(pats)
    default = evaluator is solve_batch

    def finish(acts, value, evals):
        if default:
            # report the value recomputed along the same path as any other evaluation
            sol = evaluate(topology, params, config, acts, h)
            return ExhaustiveResult(acts, sol.objective_bits, sol, evals)
        return ExhaustiveResult(acts, value, None, evals)

    if config.level is Level.STATIC:
        if n > 16:
            raise BudgetExceeded("static enumeration limited to 16 antennas")
        ups, gam = coefficients_from_bits(pats, pats, h, params)
        v = evaluator(ups, gam, params).objective_bits
        i = int(np.argmax(v))
        return finish(ActivationSet.static(_pat(pats[i])), float(v[i]), n_p)

    if n > MAX_PAIR_ANTENNAS:
        raise BudgetExceeded(f"pair enumeration limited to {MAX_PAIR_ANTENNAS} antennas")

    pair_best, pair_arg = _pair_search(pats, h, params, evaluator)
    pair_acts = ActivationSet(_pat(pats[pair_arg // n_p]), (_pat(pats[pair_arg % n_p]),))

    if config.level is Level.PARTIAL or config.access is Access.NOMA:
        if config.level is Level.FULL:
            pair_acts = ActivationSet(pair_acts.downlink, pair_acts.uplink * n_dev)
        return finish(pair_acts, pair_best, n_p * n_p)

    # TDMA, per-slot uplink patterns
    if brute_full:
        if n > MAX_BRUTE_FULL_ANTENNAS or n_dev > MAX_BRUTE_FULL_DEVICES:
            raise BudgetExceeded("brute per-slot enumeration limited to N <= 6, L <= 2")
        best, arg, evals = -np.inf, None, 0
        ups_all, g_all = coefficients_from_bits(pats, pats, h, params)  # gamma[q, l]
        combos = np.array(list(itertools.product(range(n_p), repeat=n_dev)))
        gam_c = g_all[combos, np.arange(n_dev)]
        for p_dl in range(n_p):
            v = evaluator(np.repeat(ups_all[p_dl:p_dl + 1], len(combos), 0), gam_c,
                          params).objective_bits
            evals += len(combos)
            i = int(np.argmax(v))
            if v[i] > best:
                best, arg = float(v[i]), (p_dl, combos[i])
        acts = ActivationSet(_pat(pats[arg[0]]), tuple(_pat(pats[q]) for q in arg[1]))
        return finish(acts, best, evals)

    ups_all, g_all = coefficients_from_bits(pats, pats, h, params)
    q_best = np.argmax(g_all, axis=0)  # best own-slot pattern per device
    gam_best = np.broadcast_to(g_all[q_best, np.arange(n_dev)], ups_all.shape)
    v = evaluator(ups_all, np.ascontiguousarray(gam_best), params).objective_bits
    i = int(np.argmax(v))
    if v[i] > pair_best:
        acts = ActivationSet(_pat(pats[i]), tuple(_pat(pats[q]) for q in q_best))
        return finish(acts, float(v[i]), n_p * n_p + n_p)
    acts = ActivationSet(pair_acts.downlink, pair_acts.uplink * n_dev)
    return finish(acts, pair_best, n_p * n_p + n_p)


def _pat(bits):
    return ActivationPattern(bits)


def _pair_search(pats, h, params, evaluator):
    n_p = len(pats)
    ups_all, g_all = coefficients_from_bits(pats, pats, h, params)

    def values(a, b):
        k = np.arange(a, b)
        return evaluator(ups_all[k // n_p], g_all[k % n_p], params).objective_bits

    return _argmax_chunks(values, n_p * n_p)


def exhaustive_chain(topology: Topology, params: SystemParams) -> dict:
    """Exact optima of all six configurations, keyed by configuration name."""
    from .schemes import ALL_CONFIGS
    return {cfg.name: exhaustive_outer(topology, params, cfg) for cfg in ALL_CONFIGS}
