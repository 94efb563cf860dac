"""Cross-entropy search over binary activation vectors.

The search distribution is a product of independent Bernoulli variables, one
per antenna and per activation vector being learned (shape ``(K, N)``).
Each iteration samples a population, keeps the top ``elites`` by objective,
refits the probabilities to the elite bit frequencies and blends the refit
with the previous probabilities.

Random draws happen in one fixed serial order, so a run is reproducible from
its seed no matter how the objective itself is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MAX_REDRAWS = 32


@dataclass(frozen=True)
class CEParams:
    samples: int = 500
    elites: int = 50
    smoothing: float = 0.9
    max_iters: int = 50
    stall_iters: int = 5
    seed: int = 0
    rel_tol: float = 1e-9

    def __post_init__(self):
        if not 1 <= self.elites <= self.samples:
            raise ValueError("need 1 <= elites <= samples")
        if not 0 < self.smoothing <= 1:
            raise ValueError("smoothing must lie in (0, 1]")
        if self.max_iters < 1 or self.stall_iters < 1:
            raise ValueError("iteration limits must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("samples", "elites", "smoothing", "max_iters", "stall_iters", "seed")}


@dataclass
class BernoulliField:
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim == 1:
            self.probs = self.probs[None, :]
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def uniform(cls, shape, p: float = 0.5) -> "BernoulliField":
        return cls(np.full(shape, p))

    @property
    def shape(self):
        return self.probs.shape

    def mode(self) -> np.ndarray:
        return self.probs >= 0.5

    def entropy_bits(self) -> float:
        """Mean binary entropy per entry."""
        p = np.clip(self.probs, 1e-300, 1.0)
        q = np.clip(1.0 - self.probs, 1e-300, 1.0)
        h = -(self.probs * np.log2(p) + (1.0 - self.probs) * np.log2(q))
        return float(h.mean())


@dataclass
class CETrace:
    best: list = field(default_factory=list)
    mean_elite: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    converged_at: int = 0

    @property
    def iterations(self) -> int:
        return len(self.best)

    def rows(self):
        for i, (b, m, h) in enumerate(zip(self.best, self.mean_elite, self.entropy), start=1):
            yield {"iteration": i, "best_bits": b, "mean_elite": m, "field_entropy": h}


def sample(field: BernoulliField, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw activation bits from the field.

    Returns a bool array of shape ``field.shape`` (``size=None``) or
    ``(size, *field.shape)``. An all-zero vector is redrawn up to 32 times;
    if it is still empty one uniformly chosen bit is switched on.
    """
    single = size is None
    n = 1 if single else size
    probs = field.probs
    k, n_ant = probs.shape
    bits = rng.random((n, k, n_ant)) < probs
    empty = ~bits.any(axis=-1)
    for _ in range(MAX_REDRAWS):
        if not empty.any():
            break
        si, ki = np.nonzero(empty)
        bits[si, ki] = rng.random((si.size, n_ant)) < probs[ki]
        empty = ~bits.any(axis=-1)
    if empty.any():
        si, ki = np.nonzero(empty)
        bits[si, ki, rng.integers(0, n_ant, size=si.size)] = True
    return bits[0] if single else bits


def select_elite(samples: np.ndarray, objectives: np.ndarray, n_elite: int) -> np.ndarray:
    """Top ``n_elite`` samples by objective; earlier samples win ties."""
    objectives = np.asarray(objectives, dtype=float)
    if n_elite > len(objectives):
        raise ValueError("more elites requested than samples")
    order = np.argsort(-objectives, kind="stable")
    return np.asarray(samples)[order[:n_elite]]


def update(field: BernoulliField, elites: np.ndarray) -> BernoulliField:
    elites = np.asarray(elites)
    if len(elites) == 0:
        raise ValueError("elite set is empty")
    return BernoulliField(elites.reshape(len(elites), *field.shape).mean(axis=0))


def smooth(old: BernoulliField, updated: BernoulliField, zeta: float) -> BernoulliField:
    if not 0 < zeta <= 1:
        raise ValueError("smoothing must lie in (0, 1]")
    return BernoulliField((1.0 - zeta) * old.probs + zeta * updated.probs)


def optimize(objective_fn: Callable[[np.ndarray], np.ndarray], field_shape,
             ce_params: CEParams = CEParams(), rng: np.random.Generator | None = None):
    """Maximise ``objective_fn`` over activation bits.

    ``objective_fn`` takes a bool array ``(S, K, N)`` and returns ``S``
    objective values. Stops once the best value seen has not improved by
    more than ``rel_tol`` for ``stall_iters`` consecutive iterations, or
    after ``max_iters``. Returns ``(best_bits, best_value, trace)`` where
    ``best_bits`` is the best sample ever drawn.
    """
    if rng is None:
        rng = np.random.default_rng(ce_params.seed)
    fld = BernoulliField.uniform(field_shape)
    trace = CETrace()
    best_bits, best_val = None, -np.inf
    stall = 0
    for it in range(1, ce_params.max_iters + 1):
        pop = sample(fld, rng, ce_params.samples)
        vals = np.asarray(objective_fn(pop), dtype=float)
        i_best = int(np.argmax(vals))
        improved = best_bits is None or vals[i_best] > best_val + ce_params.rel_tol * abs(best_val)
        if vals[i_best] > best_val:
            best_val, best_bits = float(vals[i_best]), pop[i_best].copy()
        if improved:
            stall = 0
            trace.converged_at = it
        else:
            stall += 1
        order = np.argsort(-vals, kind="stable")[:ce_params.elites]
        fld = smooth(fld, update(fld, pop[order]), ce_params.smoothing)
        trace.best.append(best_val)
        trace.mean_elite.append(float(vals[order].mean()))
        trace.entropy.append(fld.entropy_bits())
        trace.probs.append(fld.probs.copy())
        if stall >= ce_params.stall_iters:
            break
    return best_bits, best_val, trace
