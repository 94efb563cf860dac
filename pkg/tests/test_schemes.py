import numpy as np
import pytest

from pams_opt import cross_entropy as ce
from pams_opt.errors import ConfigMismatch, DegenerateUplink
from pams_opt.inner import InnerSolution
from pams_opt.model import ActivationPattern, SystemParams, sample_topology
from pams_opt.oracle import exhaustive_outer
from pams_opt.schemes import (ALL_CONFIGS, Access, ActivationSet, Level, SchemeConfig,
                              check_chain, evaluate, noma_rate, optimize_config,
                              reconstruct_noma, theorem_chain)

P = SystemParams.default()
TS, TP, TF = (SchemeConfig(Access.TDMA, l) for l in Level)
NS, NP, NF = (SchemeConfig(Access.NOMA, l) for l in Level)


def random_pattern(rng, n):
    b = rng.random(n) < 0.5
    b[rng.integers(n)] = True
    return ActivationPattern(b)


def bare_solution(tau, e):
    z = np.zeros(len(tau))
    return InnerSolution(t0_s=0.5, tau_s=np.asarray(tau, float), power_w=z, freq_hz=z,
                         offload_energy_j=np.asarray(e, float), active_set=np.ones(len(tau), bool),
                         z_star=1.0, objective_bits=0.0, lam=0.0, alpha=z)


def test_config_names():
    assert [c.name for c in ALL_CONFIGS] == ["tdma-static", "tdma-partial", "tdma-full",
                                             "noma-static", "noma-partial", "noma-full"]
    assert SchemeConfig.from_name("NOMA-full") == NF
    with pytest.raises(ValueError):
        SchemeConfig.from_name("fdma-static")
    assert TF.n_vectors(3) == 4 and NF.n_vectors(3) == 2 and TS.n_vectors(3) == 1


def test_activation_validation():
    a, b = ActivationPattern((1, 0, 1)), ActivationPattern((0, 1, 1))
    with pytest.raises(ConfigMismatch):
        ActivationSet(a, (b,)).validate(TS, 2)
    with pytest.raises(ConfigMismatch):
        ActivationSet(a, (b,)).validate(TF, 2)
    with pytest.raises(ConfigMismatch):
        ActivationSet(a, (ActivationPattern((0, 0, 0)),)).validate(TP, 2)
    with pytest.raises(ConfigMismatch):
        ActivationSet(a, (ActivationPattern((1, 0)),)).validate(TP, 2)
    ActivationSet(a, (b, a)).validate(TF, 2)


def test_static_equals_partial_with_same_pattern():
    rng = np.random.default_rng(0)
    topo = sample_topology(P, 12, 3, rng)
    p = random_pattern(rng, 12)
    s = evaluate(topo, P, TS, ActivationSet.static(p))
    d = evaluate(topo, P, TP, ActivationSet(p, (p,)))
    f = evaluate(topo, P, TF, ActivationSet(p, (p,) * 3))
    assert s.objective_bits == d.objective_bits == f.objective_bits


def test_tdma_noma_equal_on_shared_activations():
    rng = np.random.default_rng(1)
    for _ in range(20):
        topo = sample_topology(P, 16, int(rng.integers(1, 4)), rng)
        dl, ul = random_pattern(rng, 16), random_pattern(rng, 16)
        for t_cfg, n_cfg, acts in ((TP, NP, ActivationSet(dl, (ul,))),
                                   (TS, NS, ActivationSet.static(dl))):
            t = evaluate(topo, P, t_cfg, acts)
            n = evaluate(topo, P, n_cfg, acts)
            assert n.objective_bits == pytest.approx(t.objective_bits, rel=1e-9)
            view = reconstruct_noma(t.inner)
            rate = noma_rate(view.t1_s, view.power_w, t.gamma_snr, P.bandwidth_hz)
            assert rate == pytest.approx(t.inner.offload_bits(P), rel=1e-9)
            # energy preserved per device
            assert np.allclose(view.power_w * view.t1_s, t.inner.offload_energy_j, rtol=1e-15)


def test_reconstruct_example():
    v = reconstruct_noma(bare_solution([0.2, 0.3], [1e-6, 2e-6]))
    assert v.t1_s == pytest.approx(0.5)
    assert v.power_w == pytest.approx([2e-6, 4e-6])


def test_reconstruct_all_local_raises():
    with pytest.raises(DegenerateUplink):
        reconstruct_noma(bare_solution([0.0, 0.0], [0.0, 0.0]))


def test_noma_rate_cases():
    assert noma_rate(0.5, [0.0, 0.0], [1e6, 1e6], 5e7) == 0.0
    # single device: one slot of length t1
    assert noma_rate(0.4, [1e-6], [2e6], 5e7) == pytest.approx(5e7 * 0.4 * np.log2(1 + 2.0))
    e, g, t1 = np.array([1e-6, 3e-7]), np.array([2e6, 5e6]), 0.6
    assert noma_rate(t1, e / t1, g, 5e7) == pytest.approx(5e7 * t1 * np.log2(1 + e @ g / t1))
    with pytest.raises(DegenerateUplink):
        noma_rate(0.0, [1.0], [1.0], 5e7)


def test_noma_full_is_best_single_slot():
    rng = np.random.default_rng(2)
    topo = sample_topology(P, 10, 2, rng)
    dl = random_pattern(rng, 10)
    ups = [random_pattern(rng, 10) for _ in range(2)]
    full = evaluate(topo, P, NF, ActivationSet(dl, tuple(ups)))
    single = [evaluate(topo, P, NP, ActivationSet(dl, (u,))).objective_bits for u in ups]
    assert full.objective_bits == max(single)
    assert full.selected_slot == int(np.argmax(single))


def test_single_antenna_all_configs_coincide():
    topo = sample_topology(P, 1, 2, np.random.default_rng(3))
    one = ActivationPattern((1,))
    vals = []
    for cfg in ALL_CONFIGS:
        k = 2 if cfg.level is Level.FULL else 1
        acts = ActivationSet(one, (one,) * k)
        vals.append(evaluate(topo, P, cfg, acts).objective_bits)
    assert max(vals) - min(vals) <= 1e-9 * max(vals)


def test_exhaustive_chain_small():
    rng = np.random.default_rng(4)
    for _ in range(3):
        rep = theorem_chain(sample_topology(P, 5, 2, rng), P, "exhaustive")
        assert rep.ok, rep.violations


def test_ce_chain_with_slack():
    rep = theorem_chain(sample_topology(P, 8, 2, np.random.default_rng(5)), P,
                        ce.CEParams(seed=1))
    assert rep.ok, rep.violations


def test_check_chain_flags_violations():
    obj = {c.name: 1.0 for c in ALL_CONFIGS}
    assert check_chain(obj) == []
    obj["tdma-static"] = 2.0
    obj["noma-static"] = 2.0
    assert any("tdma-static" in v for v in check_chain(obj))


def test_optimize_config_decodes_search_space():
    topo = sample_topology(P, 6, 2, np.random.default_rng(6))
    cep = ce.CEParams(samples=100, elites=10, seed=0)
    for cfg in ALL_CONFIGS:
        res = optimize_config(topo, P, cfg, cep)
        res.solution.activations.validate(cfg, 2)
        assert res.trace.iterations >= 1
    best = exhaustive_outer(topo, P, TP).objective_bits
    assert optimize_config(topo, P, TP, cep).solution.objective_bits <= best * (1 + 1e-12)


def test_solution_dict_is_json_ready():
    import json
    topo = sample_topology(P, 4, 2, np.random.default_rng(7))
    one = ActivationPattern.ones(4)
    d = evaluate(topo, P, NP, ActivationSet(one, (one,))).to_dict()
    json.dumps(d)
    assert d["config"] == "noma-partial" and "noma" in d
