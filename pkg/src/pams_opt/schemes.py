"""The six access/activation configurations and the TDMA-to-NOMA mapping.

A configuration pairs an uplink access method (TDMA or NOMA) with how often
the antenna activation may change: never (static), between downlink and
uplink (partial), or additionally per uplink sub-slot (full). Every
configuration reduces to the same inner problem once the activation patterns
are fixed; only the way ``upsilon`` and ``gamma`` are built differs.

NOMA with partial or static activation reaches exactly the TDMA optimum: the
TDMA solution transmits every device at the same SNR, so letting all devices
transmit together over the combined uplink window with the same energies gives
the same sum rate. NOMA with per-slot patterns cannot beat its best single
pattern, so it is evaluated as partial activation with that pattern.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cross_entropy as ce
from .errors import ConfigMismatch, DegenerateUplink
from .inner import BatchSolution, InnerSolution, solve_batch
from .model import (ActivationPattern, SystemParams, Topology, channel_matrix,
                    coefficients_from_bits, derive_wavelengths)

Evaluator = Callable[[np.ndarray, np.ndarray, SystemParams], BatchSolution]


class Access(enum.Enum):
    TDMA = "tdma"
    NOMA = "noma"


class Level(enum.Enum):
    STATIC = "static"
    PARTIAL = "partial"
    FULL = "full"


@dataclass(frozen=True)
class SchemeConfig:
    access: Access
    level: Level

    @property
    def name(self) -> str:
        return f"{self.access.value}-{self.level.value}"

    @classmethod
    def from_name(cls, name: str) -> "SchemeConfig":
        try:
            access, level = name.lower().split("-")
            return cls(Access(access), Level(level))
        except ValueError:
            raise ValueError(f"unknown scheme configuration {name!r}") from None

    def n_vectors(self, n_devices: int) -> int:
        """Number of activation vectors the outer search learns."""
        if self.level is Level.STATIC:
            return 1
        if self.level is Level.FULL and self.access is Access.TDMA:
            return n_devices + 1
        return 2

    def __str__(self):
        return self.name


ALL_CONFIGS = tuple(SchemeConfig(a, l) for a in Access for l in Level)


@dataclass(frozen=True)
class ActivationSet:
    downlink: ActivationPattern
    uplink: tuple

    def __post_init__(self):
        object.__setattr__(self, "uplink", tuple(self.uplink))

    def validate(self, config: SchemeConfig, n_devices: int) -> None:
        pats = (self.downlink,) + self.uplink
        if any(p.popcount == 0 for p in pats):
            raise ConfigMismatch("every activation pattern needs at least one active antenna")
        if len({len(p) for p in pats}) != 1:
            raise ConfigMismatch("activation patterns differ in length")
        if config.level is Level.STATIC:
            if len(self.uplink) != 1 or self.uplink[0] != self.downlink:
                raise ConfigMismatch("static activation needs one uplink pattern equal to the downlink")
        elif config.level is Level.PARTIAL:
            if len(self.uplink) != 1:
                raise ConfigMismatch("partially dynamic activation needs one uplink pattern")
        elif len(self.uplink) != n_devices:
            raise ConfigMismatch(f"fully dynamic activation needs {n_devices} uplink patterns")

    def bits(self) -> np.ndarray:
        return np.stack([self.downlink.as_array()] + [p.as_array() for p in self.uplink])

    def to_dict(self) -> dict:
        return {"downlink": str(self.downlink), "uplink": [str(p) for p in self.uplink]}

    @classmethod
    def static(cls, pattern: ActivationPattern) -> "ActivationSet":
        return cls(pattern, (pattern,))

    @classmethod
    def from_bits(cls, bits: np.ndarray, config: SchemeConfig) -> "ActivationSet":
        """Decode the ``(K, N)`` search vector of ``config`` into patterns."""
        pats = [ActivationPattern(b) for b in np.asarray(bits)]
        if config.level is Level.STATIC:
            return cls.static(pats[0])
        return cls(pats[0], tuple(pats[1:]))


@dataclass
class NomaView:
    t1_s: float
    power_w: np.ndarray

    def to_dict(self) -> dict:
        return {"t1_s": self.t1_s, "power_w": [float(v) for v in self.power_w]}


@dataclass
class SchemeSolution:
    inner: InnerSolution
    config: SchemeConfig
    activations: ActivationSet
    upsilon: np.ndarray
    gamma_snr: np.ndarray
    params: SystemParams
    noma_view: NomaView | None = None
    selected_slot: int | None = None

    @property
    def objective_bits(self) -> float:
        if self.config.access is Access.NOMA and self.noma_view is not None:
            rate = noma_rate(self.noma_view.t1_s, self.noma_view.power_w, self.gamma_snr,
                             self.params.bandwidth_hz)
            return rate + self.inner.local_bits(self.params)
        return self.inner.objective_bits

    def to_dict(self) -> dict:
        d = {
            "config": self.config.name,
            "activations": self.activations.to_dict(),
            "objective_bits": self.objective_bits,
            "upsilon_w": [float(v) for v in self.upsilon],
            "gamma_per_w": [float(v) for v in self.gamma_snr],
            "inner": self.inner.to_dict(),
        }
        if self.noma_view is not None:
            d["noma"] = self.noma_view.to_dict()
        if self.selected_slot is not None:
            d["selected_uplink_slot"] = self.selected_slot
        return d


def coefficients_for(bits: np.ndarray, config: SchemeConfig, h: np.ndarray,
                     params: SystemParams):
    """``(upsilon, gamma)`` for a batch of search vectors ``(S, K, N)``."""
    bits = np.asarray(bits, dtype=bool)
    if config.level is Level.STATIC:
        return coefficients_from_bits(bits[:, 0], bits[:, 0], h, params)
    if config.level is Level.FULL and config.access is Access.TDMA:
        return coefficients_from_bits(bits[:, 0], bits[:, 1:], h, params)
    return coefficients_from_bits(bits[:, 0], bits[:, 1], h, params)


def batch_objective(config: SchemeConfig, h: np.ndarray, params: SystemParams,
                    evaluator: Evaluator = solve_batch, noma_slots: bool = False):
    """Objective ``(S, K, N) -> (S,)`` for the outer search.

    With ``noma_slots`` the NOMA full-dynamic configuration is searched with
    its ``L`` per-slot uplink patterns, each candidate scored by its best
    slot; otherwise it shares the partial-activation search space.
    """
    def fn(bits):
        bits = np.asarray(bits, dtype=bool)
        if noma_slots and config == SchemeConfig(Access.NOMA, Level.FULL):
            best = None
            for k in range(1, bits.shape[1]):
                ups, gam = coefficients_from_bits(bits[:, 0], bits[:, k], h, params)
                v = evaluator(ups, gam, params).objective_bits
                best = v if best is None else np.maximum(best, v)
            return best
        ups, gam = coefficients_for(bits, config, h, params)
        return evaluator(ups, gam, params).objective_bits
    return fn


def reconstruct_noma(tdma_solution: InnerSolution) -> NomaView:
    """NOMA schedule with the same energies over the combined uplink window."""
    t1 = float(np.sum(tdma_solution.tau_s))
    if t1 <= 0:
        raise DegenerateUplink("no uplink time allocated")
    return NomaView(t1_s=t1, power_w=np.asarray(tdma_solution.offload_energy_j) / t1)


def noma_rate(t1: float, power_w, gamma_joint, bandwidth_hz: float) -> float:
    """Sum offload bits when all devices transmit together with SIC decoding."""
    if t1 <= 0:
        raise DegenerateUplink("uplink window must be positive")
    snr = float(np.dot(np.asarray(power_w, dtype=float), np.asarray(gamma_joint, dtype=float)))
    return bandwidth_hz * t1 * math.log2(1.0 + snr)


def evaluate(topology: Topology, params: SystemParams, config: SchemeConfig,
             activations: ActivationSet, h: np.ndarray | None = None) -> SchemeSolution:
    activations.validate(config, topology.n_devices)
    if h is None:
        h = channel_matrix(topology, derive_wavelengths(params))
    if config == SchemeConfig(Access.NOMA, Level.FULL):
        # best single uplink pattern, scored as partial activation
        cands = [evaluate(topology, params, SchemeConfig(Access.NOMA, Level.PARTIAL),
                          ActivationSet(activations.downlink, (u,)), h)
                 for u in activations.uplink]
        k = int(np.argmax([c.objective_bits for c in cands]))
        best = cands[k]
        best.config, best.activations, best.selected_slot = config, activations, k
        return best
    bits = activations.bits()
    if config.level is Level.STATIC:
        bits = bits[:1]
    ups, gam = coefficients_for(bits[None], config, h, params)
    inner = solve_batch(ups, gam, params).row(0)
    sol = SchemeSolution(inner=inner, config=config, activations=activations,
                         upsilon=ups[0], gamma_snr=gam[0], params=params)
    if config.access is Access.NOMA and inner.t1_s > 0:
        sol.noma_view = reconstruct_noma(inner)
    return sol


@dataclass
class OuterResult:
    solution: SchemeSolution
    trace: ce.CETrace | None = None


def optimize_config(topology: Topology, params: SystemParams, config: SchemeConfig,
                    ce_params: ce.CEParams, rng: np.random.Generator | None = None,
                    noma_slots: bool = False) -> OuterResult:
    """Cross-entropy outer search followed by a full evaluation of the winner."""
    h = channel_matrix(topology, derive_wavelengths(params))
    search, k = config, config.n_vectors(topology.n_devices)
    if config == SchemeConfig(Access.NOMA, Level.FULL):
        if noma_slots:
            k = topology.n_devices + 1
        else:
            search = SchemeConfig(Access.NOMA, Level.PARTIAL)
    fn = batch_objective(search, h, params, noma_slots=noma_slots)
    bits, _, trace = ce.optimize(fn, (k, topology.n_antennas), ce_params, rng)
    acts = ActivationSet.from_bits(bits, search)
    if search != config:
        acts = ActivationSet(acts.downlink, acts.uplink * topology.n_devices)
    return OuterResult(evaluate(topology, params, config, acts, h), trace)


@dataclass
class ChainReport:
    objectives: dict
    violations: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_chain(obj: dict, slack: float = 0.0, eq_rtol: float = 1e-9) -> list:
    """Ordering violations among the six objectives (keyed by config name).

    ``slack`` is the relative shortfall tolerated on each inequality; the
    TDMA/NOMA equalities are checked at ``max(slack, eq_rtol)``.
    """
    out = []

    def le(a, b):
        if obj[a] > obj[b] * (1.0 + slack) and obj[a] - obj[b] > 0:
            out.append(f"{a} = {obj[a]!r} > {b} = {obj[b]!r}")

    def eq(a, b):
        tol = max(slack, eq_rtol)
        if abs(obj[a] - obj[b]) > tol * max(abs(obj[a]), abs(obj[b])):
            out.append(f"{a} = {obj[a]!r} != {b} = {obj[b]!r}")

    le("tdma-static", "tdma-partial")
    le("tdma-partial", "tdma-full")
    le("noma-static", "noma-partial")
    eq("noma-partial", "noma-full")
    eq("tdma-static", "noma-static")
    eq("tdma-partial", "noma-partial")
    return out


_COARSER = {Level.PARTIAL: "static", Level.FULL: "partial"}


def theorem_chain(topology: Topology, params: SystemParams, optimizer_budget="exhaustive",
                  slack: float | None = None) -> ChainReport:
    """Optimise all six configurations and check their ordering.

    ``optimizer_budget`` is ``"exhaustive"`` (small ``N`` only) or a
    :class:`CEParams`; with the cross-entropy search every configuration uses
    the same seed, each finer configuration also scores the coarser winner,
    and the inequalities get a 0.5 % slack by default.
    """
    sols = {}
    if optimizer_budget == "exhaustive":
        from .oracle import exhaustive_outer
        for cfg in ALL_CONFIGS:
            sols[cfg.name] = exhaustive_outer(topology, params, cfg).solution
        slack = 0.0 if slack is None else slack
    else:
        h = channel_matrix(topology, derive_wavelengths(params))
        for cfg in ALL_CONFIGS:  # static before partial before full, per access
            rng = np.random.default_rng(optimizer_budget.seed)
            best = optimize_config(topology, params, cfg, optimizer_budget, rng).solution
            # the coarser configuration's winner is feasible here too
            if cfg.level is not Level.STATIC:
                coarse = sols[SchemeConfig(cfg.access, Level(_COARSER[cfg.level])).name]
                ul = coarse.activations.uplink[:1]
                if cfg.level is Level.FULL:
                    ul = ul * topology.n_devices
                cand = evaluate(topology, params, cfg,
                                ActivationSet(coarse.activations.downlink, ul), h)
                if cand.objective_bits > best.objective_bits:
                    best = cand
            sols[cfg.name] = best
        slack = 0.005 if slack is None else slack
    obj = {k: s.objective_bits for k, s in sols.items()}
    return ChainReport(objectives=obj, violations=check_chain(obj, slack), solutions=sols)
