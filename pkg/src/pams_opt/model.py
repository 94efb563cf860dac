"""Geometry, channel, harvesting and local-computation primitives.

Every antenna sits on a waveguide at height ``d`` along the x axis, fed from
``(0, 0, d)``. Devices lie on the ground plane. Downlink and uplink channels
are the same spherical-wave line-of-sight model, so one gain function serves
both directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .errors import ZeroActivation

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class SystemParams:
    pb_watts: float
    noise_watts: float
    bandwidth_hz: float
    frame_s: float
    gamma: float
    kappa: float
    intensity_cycles_per_bit: float
    carrier_hz: float
    refractive_index: float
    height_m: float
    region_m: tuple = (30.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "region_m", tuple(float(v) for v in self.region_m))
        for name in ("pb_watts", "noise_watts", "bandwidth_hz", "frame_s", "gamma",
                     "kappa", "intensity_cycles_per_bit", "carrier_hz",
                     "refractive_index", "height_m"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.gamma > 1:
            raise ValueError(f"gamma must be <= 1, got {self.gamma}")
        if self.refractive_index < 1:
            raise ValueError(f"refractive_index must be >= 1, got {self.refractive_index}")
        if len(self.region_m) != 2 or min(self.region_m) <= 0:
            raise ValueError(f"region_m must be two positive extents, got {self.region_m}")

    @classmethod
    def default(cls) -> "SystemParams":
        """Reference simulation setting: 43 dBm, -120 dBm noise, 28 GHz, 50 MHz."""
        return cls(
            pb_watts=dbm_to_watts(43.0),
            noise_watts=dbm_to_watts(-120.0),
            bandwidth_hz=50e6,
            frame_s=1.0,
            gamma=0.8,
            kappa=1e-28,
            intensity_cycles_per_bit=200.0,
            carrier_hz=28e9,
            refractive_index=1.4,
            height_m=4.0,
            region_m=(30.0, 10.0),
        )

    def replace(self, **changes) -> "SystemParams":
        data = asdict(self)
        if "pb_dbm" in changes:
            changes["pb_watts"] = dbm_to_watts(changes.pop("pb_dbm"))
        if "noise_dbm" in changes:
            changes["noise_watts"] = dbm_to_watts(changes.pop("noise_dbm"))
        data.update(changes)
        return SystemParams(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region_m"] = list(self.region_m)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        """Build from a JSON mapping.

        Power and noise may be given either in watts (``pb_watts``,
        ``noise_watts``) or in dBm (``pb_dbm``, ``noise_dbm``), but not both.
        Missing fields fall back to :meth:`default`.
        """
        data = dict(data)
        for stem in ("pb", "noise"):
            w, dbm = f"{stem}_watts", f"{stem}_dbm"
            if w in data and dbm in data:
                raise ValueError(f"give exactly one of {w} and {dbm}")
            if dbm in data:
                data[w] = dbm_to_watts(float(data.pop(dbm)))
        base = asdict(cls.default())
        unknown = set(data) - set(base)
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        base.update(data)
        return cls(**base)


@dataclass(frozen=True)
class Topology:
    pa_x_m: np.ndarray
    devices: np.ndarray
    feed: tuple = (0.0, 0.0, 4.0)

    def __post_init__(self):
        pa = np.asarray(self.pa_x_m, dtype=float).reshape(-1)
        dev = np.asarray(self.devices, dtype=float)
        if dev.ndim == 1:
            dev = dev.reshape(1, -1)
        if dev.shape[1] == 2:
            dev = np.column_stack([dev, np.zeros(len(dev))])
        if pa.size < 1 or len(dev) < 1:
            raise ValueError("topology needs at least one antenna and one device")
        if dev.shape[1] != 3:
            raise ValueError("device positions must be (x, y) or (x, y, 0)")
        if pa.size > 1 and np.any(np.diff(pa) <= 0):
            raise ValueError("antenna x-coordinates must be strictly increasing")
        object.__setattr__(self, "pa_x_m", pa)
        object.__setattr__(self, "devices", dev)
        object.__setattr__(self, "feed", tuple(float(v) for v in self.feed))

    @property
    def n_antennas(self) -> int:
        return self.pa_x_m.size

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def height_m(self) -> float:
        return self.feed[2]

    def antenna_positions(self) -> np.ndarray:
        n = self.n_antennas
        return np.column_stack([self.pa_x_m, np.zeros(n), np.full(n, self.height_m)])

    def to_dict(self) -> dict:
        return {
            "pa_x_m": self.pa_x_m.tolist(),
            "feed": list(self.feed),
            "devices": self.devices.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        return cls(pa_x_m=data["pa_x_m"], devices=data["devices"],
                   feed=tuple(data.get("feed", (0.0, 0.0, 4.0))))


@dataclass(frozen=True)
class ActivationPattern:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(bool(b)) for b in np.asarray(self.bits).reshape(-1))
        object.__setattr__(self, "bits", bits)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))

    @classmethod
    def ones(cls, n: int) -> "ActivationPattern":
        return cls((1,) * n)

    @classmethod
    def from_string(cls, s: str) -> "ActivationPattern":
        return cls(tuple(int(c) for c in s.strip()))


@dataclass(frozen=True)
class DerivedWavelengths:
    eta_m: float
    lambda_m: float
    lambda_g_m: float


def derive_wavelengths(params: SystemParams) -> DerivedWavelengths:
    lam = SPEED_OF_LIGHT / params.carrier_hz
    return DerivedWavelengths(
        eta_m=SPEED_OF_LIGHT / (4.0 * math.pi * params.carrier_hz),
        lambda_m=lam,
        lambda_g_m=lam / params.refractive_index,
    )


def channel_matrix(topology: Topology, wavelengths: DerivedWavelengths) -> np.ndarray:
    """Per-antenna channel coefficients for every device, all antennas active.

    Returns a complex ``(N, L)`` array. Masking by an activation pattern and
    summing over antennas gives the combined channel of that pattern.
    """
    pa = topology.antenna_positions()
    r = np.linalg.norm(topology.devices[None, :, :] - pa[:, None, :], axis=-1)
    w = np.linalg.norm(pa - np.asarray(topology.feed)[None, :], axis=-1)
    free = (wavelengths.eta_m / r) * np.exp(-2j * np.pi * r / wavelengths.lambda_m)
    guided = np.exp(-2j * np.pi * w / wavelengths.lambda_g_m)
    return free * guided[:, None]


def channel_coefficient(topology: Topology, wavelengths: DerivedWavelengths,
                        pattern: ActivationPattern, n: int, l: int,
                        direction: str = "downlink") -> complex:
    """Coefficient between antenna ``n`` and device ``l`` (1-based indices).

    The uplink coefficient equals the downlink one; ``direction`` is accepted
    for readability at call sites and validated, nothing more.
    """
    if direction not in ("downlink", "uplink"):
        raise ValueError(f"direction must be 'downlink' or 'uplink', got {direction!r}")
    if not 1 <= n <= topology.n_antennas or not 1 <= l <= topology.n_devices:
        raise IndexError(f"antenna {n} / device {l} out of range")
    if not pattern.bits[n - 1]:
        return 0j
    pa = topology.antenna_positions()[n - 1]
    r = float(np.linalg.norm(topology.devices[l - 1] - pa))
    w = float(np.linalg.norm(pa - np.asarray(topology.feed)))
    return complex((wavelengths.eta_m / r)
                   * np.exp(-2j * math.pi * r / wavelengths.lambda_m)
                   * np.exp(-2j * math.pi * w / wavelengths.lambda_g_m))


def gains_from_bits(bits: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Gains ``|sum_n b_n h_nl|^2`` for a batch of patterns.

    ``bits`` has shape ``(..., N)``; ``h`` is the ``(N, L)`` channel matrix.
    Result has shape ``(..., L)``.
    """
    s = np.asarray(bits, dtype=float) @ h
    return s.real ** 2 + s.imag ** 2


def gain(topology: Topology, wavelengths: DerivedWavelengths,
         pattern: ActivationPattern, l: int) -> float:
    """Combined gain for device ``l`` (1-based); serves downlink and uplink."""
    if pattern.popcount == 0:
        raise ZeroActivation("gain needs at least one active antenna")
    h = channel_matrix(topology, wavelengths)[:, l - 1]
    return float(gains_from_bits(pattern.as_array(), h[:, None])[0])


def harvested_energy(gain_dl: float, pattern: ActivationPattern, t0: float,
                     params: SystemParams) -> float:
    if pattern.popcount == 0:
        raise ZeroActivation("harvesting needs at least one active antenna")
    if t0 < 0:
        raise ValueError("t0 must be nonnegative")
    return params.gamma * t0 * (params.pb_watts / pattern.popcount) * gain_dl


def local_computation(f_hz, params: SystemParams):
    """Bits computed and energy spent by a CPU running at ``f_hz`` for a frame."""
    f = np.asarray(f_hz, dtype=float)
    if np.any(f < 0):
        raise ValueError("CPU frequency must be nonnegative")
    bits = params.frame_s * f / params.intensity_cycles_per_bit
    energy = params.frame_s * params.kappa * f ** 3
    if np.ndim(f) == 0:
        return float(bits), float(energy)
    return bits, energy


def coefficients_from_bits(bits_dl: np.ndarray, bits_ul: np.ndarray, h: np.ndarray,
                           params: SystemParams):
    """Harvest and uplink-SNR coefficients for batches of patterns.

    ``bits_dl`` has shape ``(..., N)``. ``bits_ul`` has shape ``(..., N)``
    (one shared uplink pattern) or ``(..., L, N)`` (one pattern per device
    slot). Returns ``(upsilon, gamma)`` each of shape ``(..., L)``.
    """
    bits_dl = np.asarray(bits_dl, dtype=bool)
    bits_ul = np.asarray(bits_ul, dtype=bool)
    n_dl = bits_dl.sum(axis=-1)
    if np.any(n_dl == 0):
        raise ZeroActivation("downlink pattern with no active antenna")
    upsilon = params.gamma * (params.pb_watts / n_dl)[..., None] * gains_from_bits(bits_dl, h)
    n_ul = bits_ul.sum(axis=-1)
    if np.any(n_ul == 0):
        raise ZeroActivation("uplink pattern with no active antenna")
    if bits_ul.ndim == bits_dl.ndim:
        g_ul = gains_from_bits(bits_ul, h)
        gamma = g_ul / (n_ul[..., None] * params.noise_watts)
    else:
        # per-slot patterns: device l only sees the pattern of its own slot
        g_all = gains_from_bits(bits_ul, h)  # (..., L_slot, L_dev)
        g_ul = np.diagonal(g_all, axis1=-2, axis2=-1)
        gamma = g_ul / (n_ul * params.noise_watts)
    return upsilon, gamma


def coefficients(topology: Topology, params: SystemParams, beta_dl: ActivationPattern,
                 beta_ul_per_slot: Sequence[ActivationPattern]):
    """Harvest power coefficients and uplink SNR-per-watt coefficients.

    ``beta_ul_per_slot`` holds either one shared uplink pattern or one per
    device. Returns two length-L arrays ``(upsilon, gamma)``.
    """
    h = channel_matrix(topology, derive_wavelengths(params))
    ul = [p.as_array() for p in beta_ul_per_slot]
    if len(ul) == 1:
        ul_bits = ul[0]
    elif len(ul) == topology.n_devices:
        ul_bits = np.stack(ul)
    else:
        raise ValueError(f"expected 1 or {topology.n_devices} uplink patterns, got {len(ul)}")
    return coefficients_from_bits(beta_dl.as_array(), ul_bits, h, params)


def uniform_antenna_positions(n: int, length_m: float) -> np.ndarray:
    if n == 1:
        return np.array([0.0])
    return np.linspace(0.0, length_m, n)


def sample_topology(params: SystemParams, n_antennas: int, n_devices: int,
                    rng: np.random.Generator) -> Topology:
    if n_antennas < 1 or n_devices < 1:
        raise ValueError("need at least one antenna and one device")
    dx, dy = params.region_m
    xy = rng.uniform(0.0, 1.0, size=(n_devices, 2)) * np.array([dx, dy])
    return Topology(pa_x_m=uniform_antenna_positions(n_antennas, dx), devices=xy,
                    feed=(0.0, 0.0, params.height_m))
