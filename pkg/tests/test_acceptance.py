"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -rA``; the verdicts
also appear in the "acceptance criteria" section of the terminal summary.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from pams_opt import baselines as bl
from pams_opt.config import ExperimentConfig, SweepSpec
from pams_opt.cross_entropy import CEParams
from pams_opt import harness
from pams_opt.inner import solve
from pams_opt.model import ActivationPattern, SystemParams, sample_topology
from pams_opt.oracle import GridSpec, exhaustive_outer
from pams_opt.schemes import Access, ActivationSet, Level, SchemeConfig, check_chain
from pams_opt.validation import (ce_versus_exhaustive, kkt_stats, noma_equality, oracle_gap,
                                 random_problems)

P = SystemParams.default()
P_DEVICES = 3  # reference setup device count
TS, TP = SchemeConfig(Access.TDMA, Level.STATIC), SchemeConfig(Access.TDMA, Level.PARTIAL)


@pytest.fixture(scope="module")
def instances():
    return random_problems(P, 100, np.random.default_rng(2024))


@pytest.fixture(scope="module")
def solved(instances):
    t = time.perf_counter()
    sols = [solve(pr) for pr in instances]
    return sols, time.perf_counter() - t


def test_criterion_1_kkt(instances, solved, verdict):
    sols, elapsed = solved
    st = [kkt_stats(pr, s) for pr, s in zip(instances, sols)]
    res = max(s.residual for s in st)
    tgap = max(s.time_gap for s in st)
    egap = max(s.energy_gap for s in st)
    ok = res <= 1e-10 and tgap <= 1e-9 and egap <= 1e-12 and elapsed < 1.0
    verdict(1, "KKT residual", ok,
            f"100 instances, max |residual| {res:.1e}, time gap {tgap:.1e} T, "
            f"energy gap {egap:.1e}, {elapsed:.3f} s")


def test_criterion_2_equal_snr(instances, solved, verdict):
    sols, _ = solved
    spread = max(kkt_stats(pr, s).snr_spread for pr, s in zip(instances, sols))
    verdict(2, "equal SNR", spread <= 1e-9, f"max relative SNR spread {spread:.1e}")


def test_criterion_3_grid_oracle(verdict):
    t = time.perf_counter()
    probs = random_problems(P, 25, np.random.default_rng(77), device_counts=(1, 2))
    res = [oracle_gap(pr, GridSpec(400, 400)) for pr in probs]
    elapsed = time.perf_counter() - t
    worst = max(abs(g) for g, _, _ in res)
    above = max((o - v) / v for _, v, o in res)
    ok = worst <= 5e-3 and above <= 1e-9 and elapsed < 120
    verdict(3, "inner oracle", ok,
            f"25 instances, max gap {worst:.2e}, oracle above solver by at most {above:.1e}, "
            f"{elapsed:.1f} s")


def test_criterion_4_tdma_noma_equality(verdict):
    rng = np.random.default_rng(404)
    worst_obj = worst_rate = 0.0
    for i in range(50):
        n = 40
        topo = sample_topology(P, n, 1 + i % 3, rng)
        bits = rng.random((2, n)) < 0.5
        bits[:, rng.integers(n)] = True
        dl, ul = ActivationPattern(bits[0]), ActivationPattern(bits[1])
        for level, acts in ((Level.STATIC, ActivationSet.static(dl)),
                            (Level.PARTIAL, ActivationSet(dl, (ul,)))):
            g_obj, g_rate = noma_equality(topo, P, acts, level)
            worst_obj, worst_rate = max(worst_obj, g_obj), max(worst_rate, g_rate)
    ok = worst_obj <= 1e-9 and worst_rate <= 1e-9
    verdict(4, "TDMA/NOMA equality", ok,
            f"50 instances, objective gap {worst_obj:.1e}, NOMA rate gap {worst_rate:.1e}")


def test_criterion_5_exact_chain(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(505)
    bad = []
    for k in range(10):
        topo = sample_topology(P, 8, 2, rng)
        obj = {}
        for access in Access:
            for level in Level:
                cfg = SchemeConfig(access, level)
                obj[cfg.name] = exhaustive_outer(topo, P, cfg).objective_bits
        viol = check_chain(obj)
        if viol:
            bad.append((k, viol))
    elapsed = time.perf_counter() - t
    ok = not bad and elapsed < 600
    verdict(5, "configuration chain", ok,
            f"{10 - len(bad)}/10 topologies exact at N=8, L=2, {elapsed:.1f} s"
            + (f"; {bad}" if bad else ""))


def test_criterion_6_cross_entropy(verdict):
    t = time.perf_counter()
    hits, monotone, converged, short = 0, True, True, []
    for k in range(20):
        topo = sample_topology(P, 8, P_DEVICES, np.random.default_rng(k))
        s, trace = ce_versus_exhaustive(topo, P, CEParams(seed=k))
        short.append(s)
        hits += s <= 5e-3
        monotone &= all(b >= a for a, b in zip(trace.best, trace.best[1:]))
        converged &= trace.converged_at is not None and trace.converged_at <= 10
    elapsed = time.perf_counter() - t
    ok = hits >= 19 and monotone and converged and elapsed < 300
    verdict(6, "cross-entropy quality", ok,
            f"{hits}/20 runs within 0.5% (need 19), worst shortfall {max(short):.2%}, "
            f"monotone trace {monotone}, stalled within 10 iterations {converged}, "
            f"{elapsed:.1f} s")


def test_criterion_7_baseline_dominance(verdict):
    rng = np.random.default_rng(707)
    exact_bad, ca_wins = [], 0
    for k in range(20):
        topo = sample_topology(P, 8, P_DEVICES, rng)
        best = exhaustive_outer(topo, P, TP).objective_bits
        others = {
            "full-pa": bl.full_pa(topo, P).objective_bits,
            "fixed-tdma": exhaustive_outer(topo, P, TP, bl.fixed_tdma_batch).objective_bits,
            "full-offload": exhaustive_outer(topo, P, TP, bl.full_offload_batch).objective_bits,
            "full-local": exhaustive_outer(topo, P, TS, bl.full_local_batch).objective_bits,
        }
        exact_bad += [(k, n) for n, v in others.items() if v > best]
        ca_wins += best >= bl.conventional_array(topo, P).objective_bits
    ok = not exact_bad and ca_wins >= 18
    verdict(7, "baseline dominance", ok,
            f"subset baselines never above optimum on 20 topologies ({len(exact_bad)} "
            f"violations), beats conventional array on {ca_wins}/20")


def _sweep(variable, values, schemes):
    cfg = ExperimentConfig(schemes=schemes, sweep=SweepSpec(variable, values), replications=10,
                           seed=8)
    return harness.run(cfg, threads=harness.thread_count())


def _series(table, scheme, seed, metric):
    return [getattr(r, metric) for r in table.rows if r.scheme == scheme and r.seed == seed]


def test_criterion_8_monotone_sweeps(verdict):
    pb = _sweep("pb_dbm", (35, 37, 39, 41, 43), ("discrete",))
    gm = _sweep("gamma", (0.2, 0.4, 0.6, 0.8, 1.0), ("discrete",))
    three = ("discrete", "full-pa", "conventional-array")
    bw = _sweep("bandwidth_hz", (10e6, 20e6, 30e6, 40e6, 50e6), three)
    v_pb = v_gm = v_bw = 0
    for s in range(10):
        b = _series(pb, "discrete", s, "avg_bits_per_device")
        v_pb += sum(y < x for x, y in zip(b, b[1:]))
        t0 = _series(gm, "discrete", s, "t0")
        v_gm += sum(y >= x for x, y in zip(t0, t0[1:]))
        for sch in three:
            r = _series(bw, sch, s, "offload_ratio")
            v_bw += sum(y < x for x, y in zip(r, r[1:]))
    ok = v_pb == 0 and v_gm == 0 and v_bw == 0
    verdict(8, "monotone sweeps", ok,
            f"10 seeds: bits vs P_b {v_pb} violations, t0 vs gamma {v_gm}, "
            f"offload ratio vs B {v_bw} (three schemes)")


def test_criterion_9_determinism(tmp_path, verdict):
    cfg = tmp_path / "det.json"
    cfg.write_text('{"topology": {"mode": "sampled", "n_antennas": 16, "n_devices": 3},\n'
                   ' "schemes": ["discrete", "tdma-full", "full-pa"],\n'
                   ' "sweep": {"variable": "pb_dbm", "values": [39, 43]},\n'
                   ' "replications": 4, "seed": 11}\n')
    outs = []
    for i, threads in enumerate((1, 4, 1)):
        d = tmp_path / f"run{i}"
        subprocess.run([sys.executable, "-m", "pams_opt.cli", "sweep", "--config", str(cfg),
                        "--out", str(d), "--threads", str(threads)],
                       check=True, capture_output=True)
        outs.append((d / "results.csv").read_bytes())
    ok = outs[0] == outs[1] == outs[2] and len(outs[0]) > 0
    verdict(9, "determinism", ok,
            f"three sweep runs (threads 1, 4, 1) byte-identical: {ok}, {len(outs[0])} bytes")
