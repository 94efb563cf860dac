"""Closed-form KKT solver for the time/energy/frequency allocation.

For fixed activation patterns the whole channel geometry collapses into two
per-device numbers: the harvest power ``upsilon`` (W) and the uplink SNR per
watt of transmit power ``gamma`` (1/W). At the optimum every offloading device
sees the same received SNR ``z``; given ``z`` everything else is closed form,
and ``z`` itself is the root of a scalar stationarity equation.

All work is vectorised over a leading batch axis so that thousands of
activation candidates can be scored at once. Each batch element is processed
independently, so a result never depends on what else was in the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoConvergence
from .model import SystemParams

LN2 = math.log(2.0)

Z_START = 1e-12
ROOT_RTOL = 1e-12
ROOT_MAX_ITER = 200


@dataclass
class InnerProblem:
    upsilon: np.ndarray
    gamma_snr: np.ndarray
    params: SystemParams

    def __post_init__(self):
        self.upsilon = np.asarray(self.upsilon, dtype=float).reshape(-1)
        self.gamma_snr = np.asarray(self.gamma_snr, dtype=float).reshape(-1)
        if self.upsilon.shape != self.gamma_snr.shape:
            raise ValueError("upsilon and gamma_snr must have the same length")
        if np.any(self.upsilon < 0) or np.any(self.gamma_snr < 0):
            raise ValueError("coefficients must be nonnegative")

    @property
    def device_count(self) -> int:
        return self.upsilon.size


@dataclass
class InnerSolution:
    t0_s: float
    tau_s: np.ndarray
    power_w: np.ndarray
    freq_hz: np.ndarray
    offload_energy_j: np.ndarray
    active_set: np.ndarray
    z_star: float
    objective_bits: float
    lam: float
    alpha: np.ndarray
    rounds: int = 1

    @property
    def t1_s(self) -> float:
        return float(np.sum(self.tau_s))

    def harvested_energy_j(self, problem: InnerProblem) -> np.ndarray:
        return self.t0_s * problem.upsilon

    def offload_bits(self, params: SystemParams) -> float:
        if self.t1_s == 0:
            return 0.0
        return params.bandwidth_hz * self.t1_s * math.log2(1.0 + self.z_star)

    def local_bits(self, params: SystemParams) -> float:
        return float(np.sum(params.frame_s * self.freq_hz / params.intensity_cycles_per_bit))

    def to_dict(self) -> dict:
        def clean(a):
            return [float(v) if np.isfinite(v) else None for v in np.asarray(a, dtype=float)]
        return {
            "t0_s": self.t0_s,
            "t1_s": self.t1_s,
            "tau_s": clean(self.tau_s),
            "power_w": clean(self.power_w),
            "freq_hz": clean(self.freq_hz),
            "offload_energy_j": clean(self.offload_energy_j),
            "active_set": [int(i) for i in np.flatnonzero(self.active_set)],
            "z_star": self.z_star,
            "objective_bits": self.objective_bits,
            "multipliers": {"lambda": self.lam, "alpha": clean(self.alpha)},
        }


@dataclass
class BatchSolution:
    """Solutions for a batch of inner problems; arrays are ``(M,)`` or ``(M, L)``."""
    t0_s: np.ndarray
    tau_s: np.ndarray
    power_w: np.ndarray
    freq_hz: np.ndarray
    offload_energy_j: np.ndarray
    active: np.ndarray
    z_star: np.ndarray
    objective_bits: np.ndarray
    lam: np.ndarray
    alpha: np.ndarray
    rounds: np.ndarray = field(default=None)

    def __len__(self):
        return self.t0_s.size

    def row(self, i: int) -> InnerSolution:
        return InnerSolution(
            t0_s=float(self.t0_s[i]),
            tau_s=self.tau_s[i].copy(),
            power_w=self.power_w[i].copy(),
            freq_hz=self.freq_hz[i].copy(),
            offload_energy_j=self.offload_energy_j[i].copy(),
            active_set=self.active[i].copy(),
            z_star=float(self.z_star[i]),
            objective_bits=float(self.objective_bits[i]),
            lam=float(self.lam[i]),
            alpha=self.alpha[i].copy(),
            rounds=int(self.rounds[i]) if self.rounds is not None else 1,
        )


# ---------------------------------------------------------------------------
# vectorised building blocks; z has shape (M,), coefficient arrays (M, L)

def _f_active_cubed(z, gam, p):
    # f = sqrt(1 / (3 kappa Ic alpha)), alpha = (B/ln2) gam / (1+z); inf where gam == 0
    safe = np.where(gam > 0, gam, 1.0)
    base = (1.0 + z)[:, None] * LN2 / (3.0 * p.kappa * p.intensity_cycles_per_bit
                                       * p.bandwidth_hz * safe)
    return np.where(gam > 0, base ** 1.5, np.inf)


def _t0(z, ups, gam, active, p):
    T = p.frame_s
    gf3 = gam * np.where(active, _f_active_cubed(z, gam, p), 0.0)
    s = np.where(active, ups * gam, 0.0).sum(axis=1)
    return (z * T + T * p.kappa * gf3.sum(axis=1)) / (z + s)


def _residual(z, ups, gam, active, p):
    t0 = _t0(z, ups, gam, active, p)
    s = np.where(active, ups * gam, 0.0).sum(axis=1)
    c = LN2 * np.cbrt(ups) / (3.0 * p.bandwidth_hz * p.kappa * p.intensity_cycles_per_bit)
    local = np.where(active, 0.0, c).sum(axis=1) * (p.frame_s * p.kappa / t0) ** (2.0 / 3.0)
    return np.log1p(z) - z / (1.0 + z) - s / (1.0 + z) - local


def bisect_increasing(fun, m: int, lo0: float = Z_START, rtol: float = ROOT_RTOL,
                      max_iter: int = ROOT_MAX_ITER) -> np.ndarray:
    """Vectorised bisection for ``fun(z) = 0`` with ``fun`` negative below the root.

    The bracket starts at ``[lo0, 1]`` and the upper end doubles until the
    sign changes. Returns whichever final bracket end has the smaller
    residual magnitude.
    """
    lo = np.full(m, lo0)
    hi = np.ones(m)
    r_lo = fun(lo)
    if np.any(r_lo >= 0):
        raise NoConvergence("residual is already nonnegative at the lower bracket end")
    r_hi = fun(hi)
    for _ in range(max_iter):
        grow = r_hi <= 0
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        r_lo = np.where(grow, r_hi, r_lo)
        hi = np.where(grow, 2.0 * hi, hi)
        r_hi = fun(hi)
    else:
        raise NoConvergence("could not bracket the root")
    for _ in range(max_iter):
        running = (hi - lo) > rtol * hi
        if not running.any():
            break
        mid = 0.5 * (lo + hi)
        r_mid = fun(mid)
        down = running & (r_mid >= 0)
        up = running & (r_mid < 0)
        hi = np.where(down, mid, hi)
        r_hi = np.where(down, r_mid, r_hi)
        lo = np.where(up, mid, lo)
        r_lo = np.where(up, r_mid, r_lo)
    else:
        raise NoConvergence("bisection hit the iteration cap")
    return np.where(np.abs(r_lo) <= np.abs(r_hi), lo, hi)


def _solve_z(ups, gam, active, p):
    return bisect_increasing(lambda z: _residual(z, ups, gam, active, p), len(ups))


def _assemble(z, ups, gam, active, p):
    T, kappa = p.frame_s, p.kappa
    any_active = active.any(axis=1)
    z = np.where(any_active, z, 0.0)
    zz = np.where(any_active, z, 1.0)  # placeholder to keep all-local rows finite
    t0 = np.where(any_active, _t0(zz, ups, gam, active, p), T)
    f_act3 = np.where(active, _f_active_cubed(zz, gam, p), 0.0)
    f_loc3 = t0[:, None] * ups / (kappa * T)
    f3 = np.where(active, f_act3, f_loc3)
    freq = np.cbrt(f3)
    e = np.where(active, t0[:, None] * ups - T * kappa * f_act3, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(active, e * gam / zz[:, None], 0.0)
        power = np.where(active, e / tau, 0.0)
        alpha_act = (p.bandwidth_hz / LN2) * gam / (1.0 + zz[:, None])
        alpha_loc = (1.0 / (3.0 * kappa * p.intensity_cycles_per_bit)) * \
            (T * kappa / (t0[:, None] * ups)) ** (2.0 / 3.0)
    alpha = np.where(active, alpha_act, alpha_loc)
    t1 = tau.sum(axis=1)
    objective = p.bandwidth_hz * t1 * np.log2(1.0 + z) + \
        (T * freq / p.intensity_cycles_per_bit).sum(axis=1)
    lam = np.where(any_active,
                   p.bandwidth_hz * (np.log2(1.0 + z) - z / ((1.0 + z) * LN2)),
                   (np.where(np.isfinite(alpha), alpha, 0.0) * ups).sum(axis=1))
    return BatchSolution(t0_s=t0, tau_s=tau, power_w=power, freq_hz=freq,
                         offload_energy_j=e, active=active.copy(), z_star=z,
                         objective_bits=objective, lam=lam, alpha=alpha)


def solve_batch(upsilon, gamma_snr, params: SystemParams) -> BatchSolution:
    """Solve a batch of inner problems with the active-set iteration.

    Starts from every device that can offload at all, solves for the common
    SNR, drops devices whose offload energy comes out nonpositive and repeats.
    Once nothing is dropped, devices left out are checked against the KKT
    condition for joining and re-admitted if it fails; the loop is capped at
    ``2L`` updates.
    """
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    gam = np.atleast_2d(np.asarray(gamma_snr, dtype=float))
    if ups.shape != gam.shape:
        raise ValueError("upsilon and gamma_snr must have the same shape")
    m, n_dev = ups.shape
    if np.any(ups < 0) or np.any(gam < 0):
        raise ValueError("coefficients must be nonnegative")
    capable = (ups > 0) & (gam > 0)
    active = capable.copy()
    z = np.zeros(m)
    rounds = np.zeros(m, dtype=int)
    pending = np.ones(m, dtype=bool)
    p = params
    for _ in range(2 * n_dev + 1):
        rows = pending & active.any(axis=1)
        rounds[pending] += 1
        if rows.any():
            idx = np.flatnonzero(rows)
            z[idx] = _solve_z(ups[idx], gam[idx], active[idx], p)
            zi = z[idx]
            t0 = _t0(zi, ups[idx], gam[idx], active[idx], p)
            e_raw = t0[:, None] * ups[idx] - p.frame_s * p.kappa * _f_active_cubed(zi, gam[idx], p)
            with np.errstate(invalid="ignore"):
                keep = active[idx] & (e_raw > 0)
                join = ~active[idx] & capable[idx] & (e_raw > 0)
            settled = (keep == active[idx]).all(axis=1)
            new = np.where(settled[:, None], active[idx] | join, keep)
            changed = (new != active[idx]).any(axis=1)
            active[idx] = new
            pending[idx[~changed]] = False
        pending &= active.any(axis=1)
        if not pending.any():
            break
    else:
        raise NoConvergence(f"active set did not settle within {2 * n_dev} updates")
    sol = _assemble(z, ups, gam, active, p)
    sol.rounds = rounds
    return sol


def solve(problem: InnerProblem) -> InnerSolution:
    if not np.any(problem.upsilon > 0):
        raise DomainError("no device harvests any energy")
    return solve_batch(problem.upsilon[None, :], problem.gamma_snr[None, :],
                       problem.params).row(0)


def solve_objective(upsilon, gamma_snr, params: SystemParams) -> np.ndarray:
    """Optimal total bits for each row of a coefficient batch."""
    return solve_batch(upsilon, gamma_snr, params).objective_bits


# ---------------------------------------------------------------------------
# scalar views of the same equations, for inspection and tests

def _as_mask(active_set, n):
    mask = np.zeros(n, dtype=bool)
    if active_set is None:
        return np.ones(n, dtype=bool)
    a = np.asarray(active_set)
    if a.dtype == bool:
        return a.copy()
    mask[a.astype(int)] = True
    return mask


def t0_of_z(z: float, problem: InnerProblem, active_set=None) -> float:
    """Charging time implied by a common SNR ``z`` for the given active set."""
    if z <= 0:
        raise DomainError("z must be positive")
    mask = _as_mask(active_set, problem.device_count)
    s = float(np.sum(problem.upsilon[mask] * problem.gamma_snr[mask]))
    if z + s == 0:
        raise DomainError("zero denominator")
    return float(_t0(np.array([z]), problem.upsilon[None], problem.gamma_snr[None],
                     mask[None], problem.params)[0])


def residual(z: float, problem: InnerProblem, active_set=None) -> float:
    """Stationarity residual whose root is the common optimal SNR."""
    if z <= 0:
        raise DomainError("z must be positive")
    mask = _as_mask(active_set, problem.device_count)
    return float(_residual(np.array([z]), problem.upsilon[None], problem.gamma_snr[None],
                           mask[None], problem.params)[0])


def freq_active(z: float, gamma_l: float, params: SystemParams) -> float:
    if gamma_l <= 0:
        raise DomainError("active branch needs a positive uplink coefficient")
    if z <= 0:
        raise DomainError("z must be positive")
    alpha = (params.bandwidth_hz / LN2) * gamma_l / (1.0 + z)
    return math.sqrt(1.0 / (3.0 * params.kappa * params.intensity_cycles_per_bit * alpha))


def freq_inactive(t0: float, upsilon_l: float, params: SystemParams) -> float:
    if t0 < 0:
        raise DomainError("t0 must be nonnegative")
    return (t0 * upsilon_l / (params.kappa * params.frame_s)) ** (1.0 / 3.0)


def objective(solution: InnerSolution, problem: InnerProblem) -> float:
    """Total bits evaluated slot by slot, independently of the common-SNR form."""
    p = problem.params
    bits = 0.0
    for tau, e, g in zip(solution.tau_s, solution.offload_energy_j, problem.gamma_snr):
        if tau > 0:
            bits += p.bandwidth_hz * tau * math.log2(1.0 + e * g / tau)
    bits += float(np.sum(p.frame_s * solution.freq_hz / p.intensity_cycles_per_bit))
    return bits
