"""Acceptance scorecard: one numbered criterion per test.

Each test prints a single CRITERION line on success so a captured log
shows the whole scorecard at a glance. Criteria 6 and 7 share one
module fixture that trains the desk-scale MNIST configuration six
times (two strategy sets, three seeds) and dominate the runtime of
this file; everything else finishes in seconds.
"""

import pathlib
import time
from statistics import median

import numpy as np
import pytest

from wuxingnet import core, experiment, mnist, topology
from wuxingnet.engine import SimConfig
from wuxingnet.trainer import Trainer, TrainingConfig, apply_updates, squash

DATA_DIR = pathlib.Path(__file__).resolve().parents[1] / "data" / "mnist"

DESK_SEEDS = (0, 1, 2)


def _random_uniform_params(rng):
    # k1 > k2 > 0 and k3 in [0.1, 2], uniform across the five elements
    k2 = rng.uniform(0.05, 2.0)
    k1 = k2 + rng.uniform(0.05, 2.0)
    k3 = rng.uniform(0.1, 2.0)
    return core.NeuronParams.uniform(k1, k2, k3), k1, k2, k3


def test_criterion_1_fixed_point_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_match = 0.0
    worst_drift = 0.0
    for _ in range(100):
        p, k1, k2, k3 = _random_uniform_params(rng)
        b = core.numeric_fixed_point(p)
        analytic = (k1 - k2) / k3
        worst_match = max(worst_match, float(np.max(np.abs(b - analytic))))
        e_end = core.simulate_unforced(p, b, horizon=10.0, step=0.02)
        worst_drift = max(worst_drift, float(np.max(np.abs(e_end - b))))
    elapsed = time.perf_counter() - t0
    assert worst_match <= 1e-6
    assert worst_drift < 1e-6
    assert elapsed < 10.0
    print(f"CRITERION 1: PASS — 100 draws, numeric vs (k1-k2)/k3 within "
          f"{worst_match:.2e}, T=10 drift {worst_drift:.2e}, {elapsed:.1f}s")


def test_criterion_2_reversibility():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        p, _, _, _ = _random_uniform_params(rng)
        b_fwd = core.numeric_fixed_point(p, direction="forward")
        b_inv = core.numeric_fixed_point(p, direction="inverse")
        worst = max(worst, float(np.max(np.abs(b_fwd - b_inv))))
    assert worst <= 1e-6

    wirings = ("paper", "random", "dense_in", "spread", "contrast")
    for i in range(100):
        n_layers = int(rng.integers(2, 5))
        # non-increasing sizes keep every wiring mode buildable
        sizes = tuple(int(s) for s in
                      np.sort(rng.integers(2, 10, size=n_layers))[::-1])
        g = topology.build_network(sizes, wiring=wirings[i % len(wirings)],
                                   seed=int(rng.integers(10_000)))
        assert topology.reverse(topology.reverse(g)) == g
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"CRITERION 2: PASS — settled forward vs inverse within "
          f"{worst:.2e} on 100 draws; reverse(reverse(g)) == g on 100 "
          f"graphs, {elapsed:.1f}s")


def test_criterion_3_squash_and_update_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    g1 = rng.standard_normal(10_000) * 10.0 ** rng.uniform(-3.0, 3.0, 10_000)
    order = np.argsort(g1)
    for kt in (0.3, 1.0, 7.0):
        s = squash(g1, kt)
        assert np.all(np.abs(s) <= np.pi / (2.0 * kt))
        assert np.allclose(squash(-g1, kt), -s, rtol=1e-15, atol=0.0)
        assert np.all(np.diff(s[order]) >= 0.0)

    wide = {"clamp_min": 1e-12, "clamp_max": 1e12}
    n_checks = 0
    for _ in range(100):
        p = core.NeuronParams(rng.uniform(0.2, 2.0, 5),
                              rng.uniform(0.2, 2.0, 5),
                              rng.uniform(0.2, 2.0, 5))
        v = float(rng.uniform(0.01, 2.0))

        cfg = TrainingConfig(strategies=frozenset({"integral_K1"}), **wide)
        up, clamps = apply_updates(p, +v, 0.0, 0.0, True, cfg)
        assert np.all(up.k1 > p.k1) and clamps == 0
        assert up.k2.tobytes() == p.k2.tobytes()
        assert up.k3.tobytes() == p.k3.tobytes()

        cfg = TrainingConfig(strategies=frozenset({"differential_K2"}), **wide)
        up, clamps = apply_updates(p, 0.0, +v, 0.0, True, cfg)
        assert np.all(up.k2 < p.k2) and clamps == 0
        assert up.k1.tobytes() == p.k1.tobytes()
        assert up.k3.tobytes() == p.k3.tobytes()

        cfg = TrainingConfig(strategies=frozenset({"proportional_K3"}), **wide)
        up, clamps = apply_updates(p, 0.0, 0.0, +v, True, cfg)
        assert np.all(up.k3 < p.k3) and clamps == 0
        assert up.k1.tobytes() == p.k1.tobytes()
        assert up.k2.tobytes() == p.k2.tobytes()

        cfg = TrainingConfig(strategies=frozenset(
            {"integral_K1", "differential_K2", "proportional_K3"}), **wide)
        up, clamps = apply_updates(p, 0.0, 0.0, 0.0, True, cfg)
        assert clamps == 0
        assert up.k1.tobytes() == p.k1.tobytes()
        assert up.k2.tobytes() == p.k2.tobytes()
        assert up.k3.tobytes() == p.k3.tobytes()

        up, clamps = apply_updates(p, +v, +v, +v, False, cfg)
        assert up is p and clamps == 0
        n_checks += 5
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"CRITERION 3: PASS — squash bound/odd/monotone on 10^4 values x "
          f"3 kt, {n_checks} update sign/no-op checks, {elapsed:.1f}s")


def _reachable_neurons(n_neurons, edges, starts, backward=False):
    """Plain BFS over the neuron-level edge list; the gating oracle."""
    adj = [[] for _ in range(n_neurons)]
    for src, _, dst, _ in edges:
        if backward:
            adj[int(dst)].append(int(src))
        else:
            adj[int(src)].append(int(dst))
    seen = set(int(s) for s in starts)
    stack = list(seen)
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def test_criterion_4_gating_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    sizes = (16, 10, 7, 5)
    nonempty = 0
    for _ in range(12):
        g = topology.build_network(sizes, wiring="random",
                                   seed=int(rng.integers(100_000)))
        # kt large keeps updates tiny: no clamps, no fixed-point reverts,
        # so the updated set is exactly the gated set
        cfg = TrainingConfig(strategies=frozenset({"proportional_K3"}),
                             target1=2.0, target2=1.0, kt=100.0,
                             clamp_min=1e-9, clamp_max=1e9,
                             signal_gate_eps=1e-8, epochs=1)
        trainer = Trainer(g, cfg, SimConfig(horizon_T=2.0, step_h=0.1))
        x = np.zeros(sizes[0])
        driven = rng.choice(sizes[0], size=int(rng.integers(2, 6)),
                            replace=False)
        x[driven] = 1.0
        label = int(rng.integers(sizes[-1]))
        pred, err, clamps, updated, reverted = trainer.train_step(x, label)
        assert np.count_nonzero(err) == 1 and err[label] > 0.0
        assert reverted.size == 0 and clamps == 0
        fwd = _reachable_neurons(g.n_neurons, g.edges,
                                 [g.external_inputs[int(f)][0]
                                  for f in driven])
        bwd = _reachable_neurons(g.n_neurons, g.edges,
                                 [g.external_outputs[label][0]],
                                 backward=True)
        oracle = fwd & bwd
        assert set(int(i) for i in updated) == oracle
        nonempty += bool(oracle)
    elapsed = time.perf_counter() - t0
    assert nonempty >= 6
    assert elapsed < 30.0
    print(f"CRITERION 4: PASS — updated set == forward∩backward reachable "
          f"on 12 random 4-layer graphs ({nonempty} non-empty), "
          f"{elapsed:.1f}s")


def test_criterion_5_integrator_convergence():
    t0 = time.perf_counter()
    p = core.NeuronParams.uniform(1.0, 0.5, 0.5)
    drive = np.array([0.6, 0.0, 0.3, 0.0, 0.0])
    b0 = core.numeric_fixed_point(p)
    horizon = 2.0

    def run(h):
        e = b0.copy()
        for _ in range(round(horizon / h)):
            e = core.rk4_step(
                lambda x: core.forward_rhs(x, p.k1, p.k2, p.k3, drive), e, h)
        return e

    ref = run(0.00125)
    errs = [float(np.max(np.abs(run(h) - ref))) for h in (0.04, 0.02, 0.01)]
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    elapsed = time.perf_counter() - t0
    assert r1 >= 8.0
    assert r2 >= 8.0
    assert elapsed < 10.0
    print(f"CRITERION 5: PASS — error shrink x{r1:.1f} then x{r2:.1f} per "
          f"halving (errors {errs[0]:.2e}/{errs[1]:.2e}/{errs[2]:.2e}), "
          f"{elapsed:.1f}s")


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Six desk-scale runs: {proportional-only, combined} x 3 seeds.

    Returns {(case, seed): (best_test_acc, wall_seconds, diverged)} with
    best taken over the per-epoch evaluations of one run.
    """
    results = {}
    for case in ("case1_K3_only", "pid_IP"):
        for seed in DESK_SEEDS:
            doc = experiment.default_config("desk")
            doc["case"] = case
            doc["seed"] = seed
            doc["out_dir"] = str(tmp_path_factory.mktemp(
                f"desk-{case}-{seed}"))
            spec = experiment.spec_from_dict(doc)
            t0 = time.perf_counter()
            res = experiment.run_train(spec)
            wall = time.perf_counter() - t0
            best = max(float(row[2]) for row in res.rows)
            results[(case, seed)] = (best, wall, res.diverged)
    return results


def test_criterion_6_learning_happens(desk_runs):
    bests = [desk_runs[("case1_K3_only", s)][0] for s in DESK_SEEDS]
    walls = [desk_runs[("case1_K3_only", s)][1] for s in DESK_SEEDS]
    assert not any(desk_runs[("case1_K3_only", s)][2] for s in DESK_SEEDS)
    med = median(bests)
    assert med > 0.30
    note = "within" if max(walls) < 1200.0 else "over"
    print(f"CRITERION 6: PASS — proportional-only test accuracy "
          f"{[round(b, 3) for b in bests]} across seeds {list(DESK_SEEDS)}, "
          f"median {med:.3f} > 0.30; per-run wall "
          f"{[int(w) for w in walls]}s ({note} the 20 min target)")


def test_criterion_7_combined_vs_proportional(desk_runs):
    wins = 0
    pairs = []
    for s in DESK_SEEDS:
        prop = desk_runs[("case1_K3_only", s)][0]
        comb = desk_runs[("pid_IP", s)][0]
        pairs.append((s, round(prop, 3), round(comb, 3)))
        wins += comb >= prop
    # reported rather than asserted: the trend carries no numeric margin,
    # and a miss calls for investigation instead of a red build
    verdict = "PASS" if wins >= 2 else "REPORTED"
    print(f"CRITERION 7: {verdict} — combined >= proportional in {wins}/3 "
          f"seeds (seed, proportional, combined): {pairs}")


def test_criterion_8_strategy_separation():
    t0 = time.perf_counter()
    g = topology.build_network((8, 6, 4), wiring="random", seed=8)
    rng = np.random.default_rng(808)
    X = (rng.random((12, 8)) < 0.4) * rng.uniform(0.5, 1.5, (12, 8))
    y = rng.integers(0, 4, size=12)
    untouched_by = {
        "integral_K1": ("k2", "k3"),
        "differential_K2": ("k1", "k3"),
        "proportional_K3": ("k1", "k2"),
    }
    for strategy, untouched in untouched_by.items():
        trainer = Trainer(g, TrainingConfig(strategies=frozenset({strategy}),
                                            epochs=1),
                          SimConfig(horizon_T=2.0, step_h=0.1))
        before = {name: getattr(trainer, name).tobytes()
                  for name in untouched}
        trainer.train_epoch(X, y)
        for name in untouched:
            assert getattr(trainer, name).tobytes() == before[name]
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    print(f"CRITERION 8: PASS — each single strategy left the other two "
          f"parameter sets bitwise unchanged over an epoch, {elapsed:.1f}s")


def test_criterion_9_idx_parser():
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    img = mnist.ImageSet(7, 4, 3,
                         rng.integers(0, 256, (7, 4, 3), dtype=np.uint8))
    blob = mnist.write_idx_images(img)
    assert mnist.write_idx_images(mnist.parse_idx_images(blob)) == blob
    lab = mnist.LabelSet(9, rng.integers(0, 10, 9, dtype=np.uint8))
    lblob = mnist.write_idx_labels(lab)
    assert mnist.write_idx_labels(mnist.parse_idx_labels(lblob)) == lblob

    with pytest.raises(mnist.IdxFormatError):
        mnist.parse_idx_images(b"\x00\x00\x08\x01" + blob[4:])
    with pytest.raises(mnist.IdxFormatError):
        mnist.parse_idx_labels(b"\x00\x00\x08\x03" + lblob[4:])

    canonical = DATA_DIR / "train-images-idx3-ubyte"
    if canonical.exists():
        full = mnist.parse_idx_images(canonical.read_bytes())
        full_lab = mnist.parse_idx_labels(
            (DATA_DIR / "train-labels-idx1-ubyte").read_bytes())
        assert (full.count, full.rows, full.cols) == (60000, 28, 28)
        assert full_lab.count == 60000
        dims = "canonical 60000x28x28 verified"
    else:
        subset = mnist.parse_idx_images(
            (DATA_DIR / "subset-images-idx3-ubyte").read_bytes())
        assert (subset.rows, subset.cols) == (28, 28)
        dims = (f"canonical files absent; bundled subset "
                f"{subset.count}x28x28 verified")
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"CRITERION 9: PASS — round-trip byte-exact, wrong magic "
          f"rejected, {dims}, {elapsed:.1f}s")
