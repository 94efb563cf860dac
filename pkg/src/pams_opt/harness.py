"""Seeded experiment runs, parameter sweeps and CSV/report output.

Random streams: replication ``r`` of base seed ``s`` draws its topology from
``SeedSequence(s, spawn_key=(r, 0))`` and seeds every cross-entropy search
from ``SeedSequence(s, spawn_key=(r, 1))``. Every sweep value and scheme of
that replication reuses the same streams (common random numbers), and adding
replications leaves earlier ones untouched.

For sweeps over a system parameter, the activation sets found by the searches
at every sweep value of a replication are pooled and each sweep value reports
the best pooled candidate. Each candidate's value is monotone in ``P_b`` for
instance, so pooling carries that over to the reported optimum even when
the stochastic search lands on different patterns at neighbouring points.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import cross_entropy as ce
from .config import ExperimentConfig
from .inner import InnerSolution
from .model import SystemParams, Topology, channel_matrix, derive_wavelengths, sample_topology
from .schemes import (ActivationSet, SchemeConfig, batch_objective, evaluate,
                      optimize_config)

THREADS_ENV = "PAMS_OPT_THREADS"
TOPOLOGY_STREAM, CE_STREAM = 0, 1

COLUMNS = ("sweep_variable", "sweep_value", "seed", "scheme", "objective_bits",
           "avg_bits_per_device", "t0", "t1", "offload_ratio", "harvested_power_avg",
           "ce_iterations")
TRACE_COLUMNS = ("sweep_variable", "sweep_value", "seed", "scheme", "iteration", "best_bits",
                 "mean_elite", "field_entropy")

PARAM_SWEEPS = ("pb_dbm", "gamma", "bandwidth_hz", "intensity_cycles_per_bit", "height_m")

# search space and evaluator of the baselines that keep an activation search
_BASELINE_SEARCH = {
    "fixed-tdma": ("tdma-partial", bl.fixed_tdma_batch),
    "full-offload": ("tdma-partial", bl.full_offload_batch),
    "full-local": ("tdma-static", bl.full_local_batch),
}


@dataclass(frozen=True)
class ResultRow:
    sweep_variable: str
    sweep_value: object
    seed: int
    scheme: str
    objective_bits: float
    avg_bits_per_device: float
    t0: float
    t1: float
    offload_ratio: float
    harvested_power_avg: float
    ce_iterations: int

    def cells(self) -> list:
        return [_fmt(v) for v in astuple(self)]


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        return _csv_text(COLUMNS, [r.cells() for r in self.rows])

    def traces_csv(self) -> str:
        return _csv_text(TRACE_COLUMNS, [[_fmt(v) for v in t] for t in self.traces])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def stream(base_seed: int, replication: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(replication, purpose)))


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# single points

def point_setup(cfg: ExperimentConfig, replication: int, value=None):
    """Parameters and topology of one (sweep value, replication) point."""
    params, n, l = cfg.params, cfg.n_antennas, cfg.n_devices
    var = cfg.sweep.variable if cfg.sweep is not None and value is not None else None
    if var == "n_antennas":
        n = int(value)
    elif var == "n_devices":
        l = int(value)
    elif var is not None:
        params = params.replace(**{var: value})
    if cfg.topology is not None:
        topo = cfg.topology
        if var == "height_m":
            topo = Topology(topo.pa_x_m, topo.devices, (topo.feed[0], topo.feed[1], float(value)))
    else:
        topo = sample_topology(params, n, l, stream(cfg.seed, replication, TOPOLOGY_STREAM))
    return params, topo


def _search_space(scheme: str):
    if scheme == "discrete":
        return SchemeConfig.from_name("tdma-partial"), None
    if scheme in _BASELINE_SEARCH:
        name, ev = _BASELINE_SEARCH[scheme]
        return SchemeConfig.from_name(name), ev
    return SchemeConfig.from_name(scheme), None


def search(scheme: str, topology: Topology, params: SystemParams, ce_params: ce.CEParams,
           rng: np.random.Generator):
    """Run the activation search of ``scheme``; returns ``(activations, trace)``."""
    cfg, ev = _search_space(scheme)
    if ev is None:
        res = optimize_config(topology, params, cfg, ce_params, rng)
        return res.solution.activations, res.trace
    h = channel_matrix(topology, derive_wavelengths(params))
    fn = batch_objective(cfg, h, params, evaluator=ev)
    bits, _, trace = ce.optimize(fn, (cfg.n_vectors(topology.n_devices), topology.n_antennas),
                                 ce_params, rng)
    return ActivationSet.from_bits(bits, cfg), trace


def score(scheme: str, topology: Topology, params: SystemParams,
          activations: ActivationSet | None = None):
    """``(objective_bits, inner solution)`` of a scheme at given activations."""
    if scheme == "full-pa":
        sol = bl.full_pa(topology, params)
        return sol.objective_bits, sol.inner
    if scheme == "conventional-array":
        sol = bl.conventional_array(topology, params)
        return sol.objective_bits, sol.inner
    cfg, ev = _search_space(scheme)
    if ev is None:
        sol = evaluate(topology, params, cfg, activations)
        return sol.objective_bits, sol.inner
    inner = bl._single(ev, topology, params, activations, cfg)
    return inner.objective_bits, inner


def metrics(objective: float, inner: InnerSolution, topology: Topology, params: SystemParams,
            upsilon) -> dict:
    n_dev = topology.n_devices
    local = inner.local_bits(params)
    ratio = 0.0 if objective <= 0 else min(1.0, max(0.0, (objective - local) / objective))
    harvested = np.asarray(upsilon) * inner.t0_s
    return dict(objective_bits=float(objective), avg_bits_per_device=float(objective) / n_dev,
                t0=float(inner.t0_s), t1=float(inner.t1_s), offload_ratio=float(ratio),
                harvested_power_avg=float(np.mean(harvested)) / params.frame_s)


def _upsilon(scheme, topology, params, activations):
    from .model import coefficients_from_bits
    if scheme == "full-pa":
        return bl.full_pa(topology, params).upsilon
    if scheme == "conventional-array":
        return bl.conventional_array(topology, params).upsilon
    h = channel_matrix(topology, derive_wavelengths(params))
    b = activations.downlink.as_array()[None]
    ups, _ = coefficients_from_bits(b, b, h, params)
    return ups[0]


# ---------------------------------------------------------------------------
# runs

def run_replication(cfg: ExperimentConfig, replication: int):
    """All sweep values and schemes of one replication: ``(rows, traces)``."""
    var = cfg.sweep.variable if cfg.sweep else ""
    values = cfg.sweep.values if cfg.sweep else (None,)
    setups = [point_setup(cfg, replication, v) for v in values]
    pooled = var in PARAM_SWEEPS
    rows, traces = [], []
    for scheme in cfg.schemes:
        searched = scheme not in ("full-pa", "conventional-array")
        found = []
        for (params, topo) in setups:
            if searched:
                rng = stream(cfg.seed, replication, CE_STREAM)
                found.append(search(scheme, topo, params, cfg.ce, rng))
            else:
                found.append((None, None))
        for i, (v, (params, topo)) in enumerate(zip(values, setups)):
            acts, trace = found[i]
            obj, inner = score(scheme, topo, params, acts)
            if pooled and searched:
                for j, (other, _) in enumerate(found):
                    if j == i:
                        continue
                    o2, in2 = score(scheme, topo, params, other)
                    if o2 > obj:
                        obj, inner, acts = o2, in2, other
            m = metrics(obj, inner, topo, params, _upsilon(scheme, topo, params, acts))
            iters = trace.iterations if trace is not None else 0
            rows.append(ResultRow(sweep_variable=var, sweep_value=v, seed=replication,
                                  scheme=scheme, ce_iterations=iters, **m))
            if trace is not None:
                for t in trace.rows():
                    traces.append((var, v, replication, scheme, t["iteration"], t["best_bits"],
                                   t["mean_elite"], t["field_entropy"]))
    return rows, traces


def run(cfg: ExperimentConfig, out_dir=None, threads: int | None = None) -> ResultTable:
    """Execute every (sweep value, replication, scheme) point.

    Rows are sorted by sweep value index, replication and scheme order, so
    the output does not depend on ``threads``. With ``out_dir`` the table is
    written to ``results.csv`` there.
    """
    threads = thread_count() if threads is None else threads
    reps = range(cfg.replications)
    if cfg.sweep is not None and len(cfg.sweep.values) == 0:
        parts = []
    elif threads > 1 and cfg.replications > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_replication, [cfg] * cfg.replications, reps))
    else:
        parts = [run_replication(cfg, r) for r in reps]
    values = list(cfg.sweep.values) if cfg.sweep else [None]
    order = {s: i for i, s in enumerate(cfg.schemes)}

    def key(r):
        return (values.index(r.sweep_value), r.seed, order[r.scheme])

    table = ResultTable(
        rows=sorted((r for p in parts for r in p[0]), key=key),
        traces=sorted((t for p in parts for t in p[1]),
                      key=lambda t: (values.index(t[1]), t[2], order[t[3]], t[4])),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(table.to_csv(), newline="")
    return table


# ---------------------------------------------------------------------------
# report

FIGURES = {
    "fig4_bits_vs_pb.csv": ("pb_dbm", "avg_bits_per_device"),
    "fig5_bits_vs_N.csv": ("n_antennas", "avg_bits_per_device"),
    "fig7_t0_vs_gamma.csv": ("gamma", "t0"),
    "fig8_offload_ratio_vs_B.csv": ("bandwidth_hz", "offload_ratio"),
    "fig9_harvest_vs_pb.csv": ("pb_dbm", "harvested_power_avg"),
}
METRICS = ("objective_bits", "avg_bits_per_device", "t0", "t1", "offload_ratio",
           "harvested_power_avg")
CONFIG_FIGURE = "fig6_bits_vs_config.csv"
TRACE_FIGURE = "fig3_convergence.csv"


def aggregate(rows, metric: str):
    """Mean of ``metric`` over seeds per (sweep variable, value, scheme), in row order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.sweep_variable, r.sweep_value, r.scheme), []).append(
            getattr(r, metric))
    return [(k, math.fsum(v) / len(v), len(v)) for k, v in groups.items()]


def report(table: ResultTable, out_dir) -> str:
    """Write the per-figure CSV files into ``out_dir``; returns a text summary."""
    from .config import CONFIG_SCHEMES
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = table.rows

    def write(name, text):
        (out / name).write_text(text, newline="")

    for name, (var, metric) in FIGURES.items():
        agg = aggregate([r for r in rows if r.sweep_variable == var], metric)
        write(name, _csv_text((var, "scheme", f"{metric}_mean", "replications"),
                              [[_fmt(k[1]), k[2], _fmt(m), n] for k, m, n in agg]))
    cfg_rows = [r for r in rows if r.scheme in CONFIG_SCHEMES or r.scheme == "discrete"]
    a_bits = aggregate(cfg_rows, "avg_bits_per_device")
    a_obj = aggregate(cfg_rows, "objective_bits")
    write(CONFIG_FIGURE, _csv_text(
        ("sweep_variable", "sweep_value", "scheme", "avg_bits_per_device_mean",
         "objective_bits_mean", "replications"),
        [[k[0], _fmt(k[1]), k[2], _fmt(m), _fmt(o), n]
         for (k, m, n), (_, o, _) in zip(a_bits, a_obj)]))
    write(TRACE_FIGURE, table.traces_csv())
    for var in sorted({r.sweep_variable for r in rows} - {v for v, _ in FIGURES.values()} - {""}):
        sel = [r for r in rows if r.sweep_variable == var]
        per = [aggregate(sel, m) for m in METRICS]
        write(f"sweep_{var}.csv", _csv_text(
            (var, "scheme") + tuple(f"{m}_mean" for m in METRICS) + ("replications",),
            [[_fmt(g[0][0][1]), g[0][0][2]] + [_fmt(x[1]) for x in g] + [g[0][2]]
             for g in zip(*per)]))
    text = summary(rows)
    write("summary.txt", text)
    return text


def summary(rows) -> str:
    if not rows:
        return "no results\n"
    lines = [f"{'variable':<26}{'value':>14}  {'scheme':<20}{'bits/device':>16}{'t0':>10}"
             f"{'offload':>9}{'reps':>6}"]
    bits = aggregate(rows, "avg_bits_per_device")
    t0 = aggregate(rows, "t0")
    off = aggregate(rows, "offload_ratio")
    for (k, b, n), (_, t, _), (_, o, _) in zip(bits, t0, off):
        val = "-" if k[1] is None else f"{k[1]:g}"
        lines.append(f"{k[0] or '-':<26}{val:>14}  {k[2]:<20}{b:>16.6g}{t:>10.4f}{o:>9.4f}{n:>6}")
    return "\n".join(lines) + "\n"


def row_fields():
    return tuple(f.name for f in fields(ResultRow))
