"""Tests for error targets, correlations, squash, updates, and the loop."""

import numpy as np
import pytest

from wuxingnet import core, trainer as tr
from wuxingnet import topology as tp
from wuxingnet.core import NeuronParams
from wuxingnet.engine import SimConfig
from wuxingnet.trainer import Trainer, TrainingConfig

SIM = SimConfig(horizon_T=1.0, step_h=0.05)

ALL = frozenset(tr.STRATEGIES)


def _toy_data(n, rng, n_features=6):
    half = n_features // 2
    X = np.zeros((n, n_features))
    y = np.zeros(n, dtype=int)
    for i in range(n):
        c = int(rng.integers(2))
        y[i] = c
        base = np.zeros(n_features)
        base[:half] = 1.0
        if c == 1:
            base = 1.0 - base
        X[i] = base * rng.uniform(0.6, 1.0) + rng.uniform(0.0, 0.08, n_features)
    return X, y


def test_output_error_branches():
    cfg = TrainingConfig()
    leb = np.array([0.8, 0.3, -0.1])
    err = tr.output_error(leb, 0, cfg)
    assert err[0] == pytest.approx(0.2)     # below target1: pull up
    assert err[1] == pytest.approx(-0.3)    # above target2: push down
    assert err[2] == 0.0                    # already below target2
    err = tr.output_error(np.array([1.2, 0.0, 0.0]), 0, cfg)
    assert err[0] == 0.0                    # label already past target1
    assert np.all(err == 0.0)
    with pytest.raises(ValueError):
        tr.output_error(leb, 5, cfg)


def test_correlation_proportional():
    fwd = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    bwd = np.array([2.0, 5.0, 5.0, 5.0, 5.0])
    assert np.array_equal(tr.correlation_proportional(fwd, bwd),
                          [2.0, 0.0, 0.0, 0.0, 0.0])
    assert np.all(tr.correlation_proportional(fwd, np.zeros(5)) == 0.0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 5))
    g1 = tr.correlation_proportional(a, b)
    assert np.array_equal(np.sign(g1), np.sign(a) * np.sign(b))


def test_correlation_integral():
    ones = np.ones(5)
    assert tr.correlation_integral(ones, ones) == pytest.approx(25.0)
    balanced = np.array([1.0, -1.0, 2.0, -2.0, 0.0])
    assert tr.correlation_integral(balanced, ones) == pytest.approx(0.0)
    rng = np.random.default_rng(1)
    fwd, bwd = rng.normal(size=(2, 5))
    assert tr.correlation_integral(fwd[::-1].copy(), bwd) == pytest.approx(
        tr.correlation_integral(fwd, bwd))
    # batch form: one scalar per neuron
    out = tr.correlation_integral(rng.normal(size=(7, 5)), rng.normal(size=(7, 5)))
    assert out.shape == (7,)


def test_correlation_differential_masks_by_flag():
    rng = np.random.default_rng(2)
    fwd, bwd = rng.normal(size=(2, 5))
    assert np.all(tr.correlation_differential(fwd, bwd, 0) == 0.0)
    assert np.array_equal(tr.correlation_differential(fwd, bwd, 1),
                          tr.correlation_proportional(fwd, bwd))


def test_squash_bound_odd_monotone():
    assert tr.squash(0.0, 2.0) == 0.0
    for kt in (0.5, 1.0, 3.0):
        assert tr.squash(1e300, kt) == pytest.approx(np.pi / (2 * kt))
        xs = np.random.default_rng(3).normal(scale=10, size=1000)
        g2 = tr.squash(xs, kt)
        assert np.max(np.abs(g2)) <= np.pi / (2 * kt)
        assert np.allclose(tr.squash(-xs, kt), -g2)
        order = np.argsort(xs)
        assert np.all(np.diff(g2[order]) >= 0)
    with pytest.raises(ValueError):
        tr.squash(1.0, 0.0)


def test_apply_updates_signs_and_gate():
    cfg = TrainingConfig(strategies=ALL)
    p = NeuronParams.uniform(1.0, 0.5, 0.5)
    zero = np.zeros(5)

    same, clamps = tr.apply_updates(p, 0.0, zero, zero, True, cfg)
    assert np.array_equal(same.k1, p.k1) and clamps == 0
    assert np.array_equal(same.k2, p.k2) and np.array_equal(same.k3, p.k3)

    frozen, _ = tr.apply_updates(p, 5.0, zero + 3, zero + 3, False, cfg)
    assert frozen is p

    up, _ = tr.apply_updates(p, 0.2, zero + 0.1, zero + 0.3, True, cfg)
    assert np.all(up.k1 > p.k1)
    assert np.all(up.k2 < p.k2)
    assert np.all(up.k3 < p.k3)
    assert np.allclose(up.k1, p.k1 * np.exp(0.2))
    assert np.allclose(up.k2, p.k2 * np.exp(-0.1))
    assert np.allclose(up.k3, p.k3 * np.exp(-0.3))


def test_apply_updates_respects_strategy_subset():
    cfg = TrainingConfig(strategies=frozenset({"proportional_K3"}))
    p = NeuronParams.uniform(1.0, 0.5, 0.5)
    g2 = np.full(5, 0.2)
    up, _ = tr.apply_updates(p, 0.7, g2, g2, True, cfg)
    assert np.array_equal(up.k1, p.k1)
    assert np.array_equal(up.k2, p.k2)
    assert np.all(up.k3 < p.k3)


def test_apply_updates_clamps_and_counts():
    cfg = TrainingConfig(strategies=ALL, clamp_min=0.4, clamp_max=1.1)
    p = NeuronParams.uniform(1.0, 0.5, 0.5)
    up, clamps = tr.apply_updates(p, 3.0, np.full(5, 3.0), np.full(5, 3.0), True, cfg)
    assert np.all(up.k1 == 1.1)
    assert np.all(up.k2 == 0.4) and np.all(up.k3 == 0.4)
    assert clamps == 15
    assert up.within_bounds(cfg.clamp_min, cfg.clamp_max)


def test_case2_pairs_k1_against_k3():
    cfg = TrainingConfig(strategies=frozenset({"proportional_K3"}),
                         case2_paired_k1=True)
    p = NeuronParams.uniform(1.0, 0.5, 0.5)
    g2 = np.full(5, 0.25)
    up, _ = tr.apply_updates(p, 0.0, np.zeros(5), g2, True, cfg)
    assert np.allclose(up.k1, p.k1 * np.exp(+g2))
    assert np.allclose(up.k3, p.k3 * np.exp(-g2))
    assert np.array_equal(up.k2, p.k2)


def test_vectorized_update_matches_reference():
    g = tp.build_network((3, 4, 2), wiring="random", seed=5)
    cfg = TrainingConfig(strategies=ALL)
    t = Trainer(g, cfg, SIM)
    rng = np.random.default_rng(11)
    n = g.n_neurons
    fwd = rng.normal(scale=0.4, size=(n, 5))
    bwd = rng.normal(scale=0.4, size=(n, 5))
    gates = rng.uniform(size=n) > 0.3
    flags = rng.uniform(size=n) > 0.5
    before = (t.k1.copy(), t.k2.copy(), t.k3.copy())
    t._vector_update(fwd, bwd, flags, gates)

    g2_prop = tr.squash(tr.correlation_proportional(fwd, bwd), cfg.kt)
    g2_int = tr.squash(tr.correlation_integral(fwd, bwd), cfg.kt)
    g2_diff = tr.squash(tr.correlation_differential(fwd, bwd, flags), cfg.kt)
    for i in range(n):
        p = NeuronParams(before[0][i], before[1][i], before[2][i])
        want, _ = tr.apply_updates(p, g2_int[i], g2_diff[i], g2_prop[i],
                                   bool(gates[i]), cfg)
        assert np.array_equal(t.k1[i], want.k1), f"neuron {i}"
        assert np.array_equal(t.k2[i], want.k2)
        assert np.array_equal(t.k3[i], want.k3)


def test_gate_soundness_against_reachability():
    from collections import deque

    def reach(edges, sources, forward=True):
        adj = {}
        for s, _, d, _ in edges:
            a, b = (int(s), int(d)) if forward else (int(d), int(s))
            adj.setdefault(a, set()).add(b)
        seen, q = set(), deque(sources)
        while q:
            u = q.popleft()
            if u not in seen:
                seen.add(u)
                q.extend(adj.get(u, ()))
        return seen

    g = tp.build_network((4, 4, 4, 4), wiring="random", seed=17)
    cfg = TrainingConfig(strategies=frozenset({"proportional_K3"}))
    t = Trainer(g, cfg, SIM)
    # order-1 injections: one driven input, one error-bearing class port
    x = np.zeros(4)
    x[2] = 0.7
    err = np.zeros(4)
    err[1] = 1.0
    fwd = t.sim.run_forward(x, params=t.params, b0=t.b0f)
    bwd = t.sim.run_backward(err, params=t.params, b0=t.b0b)
    gates = t._gates(fwd.integrals, bwd.integrals)
    fwd_reach = reach(g.edges, [g.external_inputs[2][0]], True)
    bwd_reach = reach(g.edges, [g.external_outputs[1][0]], False)
    assert set(np.flatnonzero(gates).tolist()) == (fwd_reach & bwd_reach)
    # and the applied update set is exactly the gated set
    flags = t._inputnode_flags(fwd.drive_max)
    _, updated, reverted = t._vector_update(fwd.integrals, bwd.integrals,
                                            flags, gates)
    assert set(updated.tolist()) | set(reverted.tolist()) \
        == set(np.flatnonzero(gates).tolist())
    assert len(reverted) == 0


def test_strategy_separation_is_bitwise():
    rng = np.random.default_rng(7)
    X, y = _toy_data(12, rng)
    for strat, frozen in [("integral_K1", ("k2", "k3")),
                          ("differential_K2", ("k1", "k3")),
                          ("proportional_K3", ("k1", "k2"))]:
        g = tp.build_network((6, 4, 2), wiring="paper", seed=3)
        t = Trainer(g, TrainingConfig(strategies=frozenset({strat})), SIM)
        t.train_epoch(X, y)
        moved = {"k1": t.k1, "k2": t.k2, "k3": t.k3}
        for name in frozen:
            assert np.array_equal(moved[name], np.array(getattr(g, name))), \
                f"{name} must not move under {strat}"
        active = ({"k1", "k2", "k3"} - set(frozen)).pop()
        assert not np.array_equal(moved[active], np.array(getattr(g, active)))


def test_empty_strategy_set_freezes_parameters():
    rng = np.random.default_rng(8)
    X, y = _toy_data(10, rng)
    g = tp.build_network((6, 4, 2), wiring="paper", seed=3)
    t = Trainer(g, TrainingConfig(strategies=frozenset()), SIM)
    accs = []
    for _ in range(3):
        m = t.train_epoch(X, y)
        accs.append(m.accuracy)
        assert m.updated_neurons == 0
    assert np.array_equal(t.k1, g.k1)
    assert np.array_equal(t.k2, g.k2)
    assert np.array_equal(t.k3, g.k3)
    assert len(set(accs)) == 1


def test_zero_error_epoch_changes_nothing():
    # single-class net with target1 below any reachable Leb: the label
    # branch never fires and there are no other classes to push down
    g = tp.build_network((2, 1), wiring="random", seed=4)
    cfg = TrainingConfig(target1=-5.0, target2=-6.0, strategies=ALL)
    t = Trainer(g, cfg, SIM)
    X = np.array([[0.3, 0.6], [0.8, 0.1], [0.5, 0.5]])
    m = t.train_epoch(X, np.zeros(3, dtype=int))
    assert m.updated_neurons == 0 and m.clamp_events == 0
    assert np.array_equal(t.k1, g.k1)
    assert np.array_equal(t.k2, g.k2)
    assert np.array_equal(t.k3, g.k3)


def test_training_error_non_increasing_on_toy_set():
    # proportional-only strategy on the two-class toy task; the elementwise
    # median error trace across 3 seeds must not increase over 5 epochs.
    # Narrow gain clamps keep the inverse dynamics out of the blow-up region
    # (large K3 makes the quadratic term hair-trigger to negative drive).
    traces = []
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        X, y = _toy_data(80, rng)
        g = tp.build_network((6, 5, 2), wiring="paper", seed=seed)
        t = Trainer(g, TrainingConfig(strategies=frozenset({"proportional_K3"}),
                                      clamp_min=0.25, clamp_max=4.0),
                    SimConfig(horizon_T=2.0, step_h=0.05))
        metrics = [t.train_epoch(X, y) for _ in range(5)]
        assert not any(m.aborted for m in metrics)
        traces.append([m.mean_abs_error for m in metrics])
    med = np.median(np.array(traces), axis=0)
    assert np.all(np.diff(med) <= 1e-9), med


def test_fixed_point_refresh_invariant_after_training():
    rng = np.random.default_rng(10)
    X, y = _toy_data(20, rng)
    g = tp.build_network((6, 5, 2), wiring="paper", seed=6)
    t = Trainer(g, TrainingConfig(strategies=ALL), SIM)
    m = t.train_epoch(X, y)
    assert m.updated_neurons > 0
    fwd_resid = np.abs(core.forward_rhs(t.b0f, t.k1, t.k2, t.k3)).max()
    bwd_resid = np.abs(core.inverse_rhs(t.b0b, t.k1, t.k2, t.k3)).max()
    assert fwd_resid < 1e-8
    assert bwd_resid < 1e-8
    assert t.k1.min() >= t.cfg.clamp_min and t.k1.max() <= t.cfg.clamp_max
    assert t.k3.min() > 0


def test_divergence_aborts_epoch_with_partial_metrics():
    g = tp.build_network((2, 2), wiring="random", seed=0)
    t = Trainer(g, TrainingConfig(), SIM)
    X = np.array([[0.1, 0.1], [1e12, 1e12], [0.1, 0.1]])
    y = np.array([0, 0, 0])
    with np.errstate(over="ignore", invalid="ignore"):
        m = t.train_epoch(X, y)
    assert m.aborted
    assert m.n_samples == 1
    assert m.diverged_neuron is not None


def test_inputnode_flag_modes():
    g = tp.build_network((3, 3, 3), wiring="paper", seed=2)
    broad = Trainer(g, TrainingConfig(), SIM)
    strict = Trainer(g, TrainingConfig(inputnode_first_layer_only=True), SIM)
    res = broad.sim.run_forward(np.array([0.5, 0.5, 0.0]),
                                params=broad.params, b0=broad.b0f)
    broad_flags = broad._inputnode_flags(res.drive_max)
    strict_flags = strict._inputnode_flags(res.drive_max)
    assert broad_flags.sum() > strict_flags.sum()
    assert np.all(strict_flags[~broad.first_layer] == False)  # noqa: E712
    assert np.all(broad_flags[strict_flags])


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    X, y = _toy_data(10, rng)
    g = tp.build_network((6, 4, 2), wiring="paper", seed=5)
    t = Trainer(g, TrainingConfig(strategies=ALL), SIM)
    t.train_epoch(X, y)
    state = {"bit_generator": "PCG64", "note": "opaque"}
    text = tr.checkpoint_to_json(t, rng_state=state)
    t2, rng_state = tr.trainer_from_checkpoint(text)
    assert rng_state == state
    assert np.array_equal(t2.k1, t.k1)
    assert np.array_equal(t2.k2, t.k2)
    assert np.array_equal(t2.k3, t.k3)
    assert np.array_equal(t2.b0f, t.b0f)
    assert t2.cfg == t.cfg and t2.sim_cfg == t.sim_cfg
    # training continues identically from the restored state
    m1 = t.train_epoch(X, y)
    m2 = t2.train_epoch(X, y)
    assert m1 == m2
    assert np.array_equal(t2.k3, t.k3)
    with pytest.raises(ValueError):
        tr.trainer_from_checkpoint(text.replace('"version": 1', '"version": 9', 1))


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(target1=0.0, target2=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(kt=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(signal_gate_eps=-1.0)
    with pytest.raises(ValueError):
        TrainingConfig(clamp_min=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(strategies=frozenset({"momentum"}))
