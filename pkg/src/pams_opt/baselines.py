"""Comparison schemes.

``fixed_tdma``, ``full_offload`` and ``full_local`` replace the inner solver
with a restricted allocation and keep the activation search. ``full_pa`` and
``conventional_array`` keep the inner solver and fix the antennas instead.
The batch evaluators here share the signature of
:func:`pams_opt.inner.solve_batch` so the outer search can use either.
"""

from __future__ import annotations

import enum

import numpy as np

from .inner import LN2, BatchSolution, bisect_increasing
from .model import (ActivationPattern, SystemParams, Topology, channel_matrix,
                    derive_wavelengths)
from .schemes import (Access, ActivationSet, Level, SchemeConfig, SchemeSolution,
                      coefficients_for, evaluate)

TDMA_PARTIAL = SchemeConfig(Access.TDMA, Level.PARTIAL)


class BaselineKind(enum.Enum):
    FULL_PA = "full-pa"
    CONVENTIONAL_ARRAY = "conventional-array"
    FIXED_TDMA = "fixed-tdma"
    FULL_OFFLOAD = "full-offload"
    FULL_LOCAL = "full-local"


def _empty(m, n_dev):
    z = np.zeros((m, n_dev))
    return dict(power_w=z.copy(), freq_hz=z.copy(), offload_energy_j=z.copy(),
                active=np.zeros((m, n_dev), dtype=bool), alpha=np.full((m, n_dev), np.nan),
                lam=np.full(m, np.nan))


def full_local_batch(upsilon, gamma_snr, params: SystemParams) -> BatchSolution:
    """Whole frame spent charging, every joule spent on the local CPU."""
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    m, n_dev = ups.shape
    T = params.frame_s
    d = _empty(m, n_dev)
    d["freq_hz"] = np.cbrt(ups / params.kappa)
    obj = (T * d["freq_hz"] / params.intensity_cycles_per_bit).sum(axis=1)
    return BatchSolution(t0_s=np.full(m, T), tau_s=np.zeros((m, n_dev)),
                         z_star=np.zeros(m), objective_bits=obj, **d)


def full_offload_batch(upsilon, gamma_snr, params: SystemParams) -> BatchSolution:
    """No local computing; harvested energy all goes to the uplink."""
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    gam = np.atleast_2d(np.asarray(gamma_snr, dtype=float))
    m, n_dev = ups.shape
    T = params.frame_s
    s = (ups * gam).sum(axis=1)
    ok = s > 0
    z = np.zeros(m)
    if ok.any():
        so = s[ok]
        z[ok] = bisect_increasing(lambda x: np.log1p(x) - x / (1.0 + x) - so / (1.0 + x),
                                  int(ok.sum()))
    zz = np.where(ok, z, 1.0)
    t0 = np.where(ok, z * T / (zz + s), T)
    d = _empty(m, n_dev)
    offl = ok[:, None] & (gam > 0)
    e = np.where(offl, t0[:, None] * ups, 0.0)
    tau = np.where(offl, e * gam / zz[:, None], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d["power_w"] = np.where(offl & (tau > 0), e / tau, 0.0)
    d["offload_energy_j"] = e
    d["active"] = offl & (e > 0)
    obj = params.bandwidth_hz * tau.sum(axis=1) * np.log2(1.0 + z)
    return BatchSolution(t0_s=t0, tau_s=tau, z_star=z, objective_bits=obj, **d)


def _split_marginal(e, E, gam, tau, params):
    T = params.frame_s
    off = params.bandwidth_hz * gam / (LN2 * (1.0 + e * gam / tau))
    with np.errstate(divide="ignore"):
        loc = (T / (3.0 * params.intensity_cycles_per_bit)) * (T * params.kappa) ** (-1.0 / 3.0) \
            * (E - e) ** (-2.0 / 3.0)
    return off - loc


def best_energy_split(E, gam, tau, params: SystemParams, rtol: float = 1e-14,
                      max_iter: int = 200) -> np.ndarray:
    """Offload energy maximising one device's bits in a fixed slot ``tau``.

    Offload bits are concave and local bits strictly concave in the offload
    energy, so the optimum is where the two marginal values meet; found by
    bisection on ``[0, E]``.
    """
    E = np.asarray(E, dtype=float)
    gam = np.broadcast_to(np.asarray(gam, dtype=float), E.shape)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), E.shape)
    live = (E > 0) & (gam > 0) & (tau > 0)
    g0 = np.where(live, _split_marginal(np.zeros_like(E), np.where(live, E, 1.0),
                                        np.where(live, gam, 0.0), np.where(live, tau, 1.0),
                                        params), -1.0)
    live &= g0 > 0
    lo = np.zeros_like(E)
    hi = np.where(live, E, 0.0)
    Es = np.where(live, E, 1.0)
    gs = np.where(live, gam, 0.0)
    ts = np.where(live, tau, 1.0)
    for _ in range(max_iter):
        running = live & ((hi - lo) > rtol * Es)
        if not running.any():
            break
        mid = 0.5 * (lo + hi)
        g = _split_marginal(mid, Es, gs, ts, params)
        lo = np.where(running & (g > 0), mid, lo)
        hi = np.where(running & (g <= 0), mid, hi)
    return 0.5 * (lo + hi)


def fixed_tdma_batch(upsilon, gamma_snr, params: SystemParams) -> BatchSolution:
    """Frame split into ``L + 1`` equal slots: one for charging, one per device."""
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    gam = np.atleast_2d(np.asarray(gamma_snr, dtype=float))
    m, n_dev = ups.shape
    T = params.frame_s
    slot = T / (n_dev + 1)
    E = slot * ups
    e = best_energy_split(E, gam, slot, params)
    local = np.clip(E - e, 0.0, None)
    f = np.cbrt(local / (T * params.kappa))
    off_bits = params.bandwidth_hz * slot * np.log2(1.0 + e * gam / slot)
    obj = off_bits.sum(axis=1) + (T * f / params.intensity_cycles_per_bit).sum(axis=1)
    d = _empty(m, n_dev)
    d.update(power_w=e / slot, freq_hz=f, offload_energy_j=e, active=e > 0)
    return BatchSolution(t0_s=np.full(m, slot), tau_s=np.full((m, n_dev), slot),
                         z_star=np.full(m, np.nan), objective_bits=obj, **d)


def offload_bits(sol: BatchSolution, gamma_snr, params: SystemParams) -> np.ndarray:
    """Uplink bits per batch row, summed slot by slot."""
    gam = np.atleast_2d(gamma_snr)
    tau = sol.tau_s
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(tau > 0, tau * np.log2(1.0 + sol.offload_energy_j * gam
                                             / np.where(tau > 0, tau, 1.0)), 0.0)
    return params.bandwidth_hz * r.sum(axis=1)


EVALUATORS = {
    BaselineKind.FIXED_TDMA: fixed_tdma_batch,
    BaselineKind.FULL_OFFLOAD: full_offload_batch,
    BaselineKind.FULL_LOCAL: full_local_batch,
}


# ---------------------------------------------------------------------------
# single-instance wrappers

def _single(evaluator, topology, params, activations, config=TDMA_PARTIAL):
    h = channel_matrix(topology, derive_wavelengths(params))
    bits = activations.bits()
    if config.level is Level.STATIC:
        bits = bits[:1]
    ups, gam = coefficients_for(bits[None], config, h, params)
    return evaluator(ups, gam, params).row(0)


def full_pa(topology: Topology, params: SystemParams) -> SchemeSolution:
    ones = ActivationPattern.ones(topology.n_antennas)
    return evaluate(topology, params, TDMA_PARTIAL, ActivationSet(ones, (ones,)))


def conventional_array_topology(topology: Topology, params: SystemParams) -> Topology:
    lam = derive_wavelengths(params).lambda_m
    x = np.arange(topology.n_antennas) * lam / 2.0
    return Topology(pa_x_m=x, devices=topology.devices, feed=topology.feed)


def conventional_array(topology: Topology, params: SystemParams) -> SchemeSolution:
    """Half-wavelength array at the feed point, all elements on."""
    return full_pa(conventional_array_topology(topology, params), params)


def fixed_tdma(topology: Topology, params: SystemParams, activations: ActivationSet):
    return _single(fixed_tdma_batch, topology, params, activations)


def full_offload(topology: Topology, params: SystemParams, activations: ActivationSet):
    return _single(full_offload_batch, topology, params, activations)


def full_local(topology: Topology, params: SystemParams, beta_dl: ActivationPattern):
    return _single(full_local_batch, topology, params, ActivationSet.static(beta_dl),
                   SchemeConfig(Access.TDMA, Level.STATIC))
