"""The ten acceptance criteria, each at its stated tolerance and time budget.

Each test prints a single ``criterion N PASS|FAIL`` line; the lines are also
collected into the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from ubknn import ensemble, experiments, kdtree, knn, oracle
from ubknn.ensemble import UnderBagConfig
from ubknn.generators import CubeSpec, TwoMoonsSpec, gen_cube, gen_two_moons
from ubknn.metrics import empirical_balanced_risk, evaluate
from ubknn.sampler import AcceptanceRule, draw, make_rng, underbag_rule

from conftest import random_dataset, record_criterion

pytestmark = pytest.mark.acceptance

SEEDS = range(10)


def finish(number, title, passed, detail, elapsed=None, budget=None):
    if budget is not None:
        detail += f"; {elapsed:.1f}s of {budget}s budget"
        passed = passed and elapsed < budget
    record_criterion(number, title, passed, detail)
    assert passed, detail


def test_c01_kdtree_exactness():
    rng = make_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for t in range(200):
        n = int(rng.integers(1, 2001))
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, min(25, n) + 1))
        # every third instance sits on a coarse grid to create many distance ties
        P = rng.integers(0, 5, (n, d)).astype(float) if t % 3 == 0 else rng.normal(size=(n, d))
        x = rng.integers(0, 5, d).astype(float) if t % 3 == 0 else rng.normal(size=d)
        got = kdtree.knn_query(kdtree.build(P, int(rng.integers(1, 33))), x, k)
        ref = oracle.brute_knn(P, x, k)
        if not (np.array_equal(got.indices, ref.indices) and np.array_equal(got.distances, ref.distances)):
            mismatches += 1
    finish(1, "k-d tree exactness", mismatches == 0, f"{mismatches}/200 mismatches",
           time.perf_counter() - t0, 30)


def test_c02_formulation_equivalence():
    rng = make_rng(202)
    bad = 0
    done = 0
    while done < 50:
        M = int(rng.integers(2, 5))
        ds = random_dataset(rng, int(rng.integers(M, 300)), M, int(rng.integers(1, 5)))
        sample = draw(ds, AcceptanceRule(rng.uniform(0.05, 1.0, M)), int(rng.integers(0, 2**63)))
        if sample.size == 0:
            continue
        k = int(rng.integers(1, 20))
        x = rng.random(ds.d)
        got = knn.posterior(knn.fit(ds, sample.indices, k), x)
        bad += not np.array_equal(got, oracle.weighted_round_posterior(ds, sample.indices, x, k))
        done += 1
    finish(2, "formulation equivalence", bad == 0, f"{bad}/50 triples differ (zero tolerance)")


def test_c03_gp_oracle_convergence():
    rng = make_rng(303)
    ds = random_dataset(rng, 200, 2, 2, weights=[0.75, 0.25])
    k, s, B = 5, 40, 10000
    t0 = time.perf_counter()
    model = ensemble.fit(ds, UnderBagConfig(B=B, k=k, s=s, master_seed=303))
    Q = rng.random((20, 2))
    got = ensemble.posterior_batch(model, Q)
    target = np.array([oracle.infinite_bag_posterior(ds, model.rule, x, k) for x in Q])
    gap = float(np.abs(got - target).max())
    envelope = math.sqrt(math.log(2 / 0.001) / (2 * k * B))
    finish(3, "GP oracle convergence", gap <= 0.02,
           f"sup-norm gap {gap:.4f} (tolerance 0.02, envelope {envelope:.4f})",
           time.perf_counter() - t0, 120)


def test_c04_gp_closed_form_and_tail():
    rng = make_rng(404)
    worst = 0.0
    draws = [(200, 20, 0.5), (200, 1, 0.99), (20, 20, 0.05)]
    draws += [(int(n), int(rng.integers(1, min(n, 20) + 1)), float(rng.uniform(0.01, 1.0)))
              for n in rng.integers(1, 201, 100)]
    for n, j, p in draws:
        f = oracle.gp_pmf_all(oracle.GPParams(np.full(n, p), j))
        ref = np.array([oracle.negative_binomial_pmf(i, j, p) for i in range(1, n + 1)])
        worst = max(worst, float(np.abs(f - ref).max()))
    tail_ok = 0
    for _ in range(100):
        n = int(rng.integers(5, 201))
        probs = rng.uniform(0.01, 1.0, n)
        j = int(rng.integers(1, min(20, int(probs.sum())) + 1))
        ell = int(rng.integers(int(np.searchsorted(np.cumsum(probs), j)) + 1, n + 1))
        params = oracle.GPParams(probs, j)
        tail = oracle.gp_tail(params, ell)
        # truncated mass agrees whether taken from the tail or from the head of the pmf
        assert abs(tail - (1 - oracle.gp_pmf_all(oracle.GPParams(probs[:ell], j)).sum())) <= 1e-12
        tail_ok += tail <= oracle.gp_tail_bound(params, ell)
    finish(4, "GP pmf closed form", worst <= 1e-12 and tail_ok == 100,
           f"max abs error {worst:.2e} (tolerance 1e-12); tail bound held {tail_ok}/100")


def test_c05_deficiency_bounds():
    rng = make_rng(505)
    broken_def = broken_max = tight = 0
    for _ in range(100):
        M = int(rng.integers(2, 5))
        ds = random_dataset(rng, int(rng.integers(4 * M, 400)), M, 2,
                            weights=rng.dirichlet(np.ones(M)) * 0.9 + 0.1 / M)
        upper = M * ds.minority_count
        k = int(rng.integers(1, upper + 1))
        s = float(rng.uniform(k, upper))
        w = oracle.exact_bagged_weights(ds, underbag_rule(ds, s), rng.random(2), k)
        broken_def += w.deficiency > math.exp(-((s - k) ** 2) / (2 * ds.n))
        # same operation order as the acceptance probability, since the bound is attained
        # with equality when the nearest point belongs to the minority class
        bound = s / upper / k
        broken_max += w.vbar.max() > bound
        tight += w.vbar.max() == bound
    finish(5, "deficiency bounds", broken_def == 0 and broken_max == 0,
           f"deficiency bound broken {broken_def}/100, max-weight bound broken {broken_max}/100 "
           f"(attained with equality {tight}/100)")


def test_c06_am_identity():
    rng = make_rng(606)
    worst = 0.0
    for _ in range(1000):
        M = int(rng.integers(2, 8))
        n = int(rng.integers(M, 500))
        true = rng.integers(1, M + 1, n)
        true[:M] = rng.permutation(M) + 1
        pred = rng.integers(1, M + 1, n)
        worst = max(worst, abs(evaluate(true, pred, M).am - (1 - empirical_balanced_risk(true, pred, M))))
    finish(6, "AM equals one minus balanced risk", worst <= 1e-12, f"max gap {worst:.1e} (tolerance 1e-12)")


def moons_pair(seed, test_major=200000, test_minor=2000):
    train = gen_two_moons(TwoMoonsSpec(20000, 200, 0.2, seed=experiments.derive_seed(seed, 0)))
    test = gen_two_moons(TwoMoonsSpec(test_major, test_minor, 0.2, seed=experiments.derive_seed(seed, 1)))
    return train, test


def test_c07_two_moons_am_improvement():
    t0 = time.perf_counter()
    specs = {
        "knn": experiments.MethodSpec("knn"),
        "undersample": experiments.MethodSpec("undersample-knn"),
        "underbag": experiments.MethodSpec("underbag-knn", B=20, s_frac=1.0),
    }
    am = {name: [] for name in specs}
    for seed in SEEDS:
        train, test = moons_pair(seed)
        for name, spec in specs.items():
            am[name].append(experiments.run_method(train, test, spec, seed).am)
    mean = {name: float(np.mean(v)) for name, v in am.items()}
    passed = mean["underbag"] - mean["knn"] >= 0.05 and mean["undersample"] > mean["knn"]
    finish(7, "two-moons AM improvement", passed,
           f"mean AM knn {mean['knn']:.4f}, under-sampling {mean['undersample']:.4f}, "
           f"under-bagging {mean['underbag']:.4f} (need gain >= 0.05)",
           time.perf_counter() - t0, 900)


def test_c08_timing_reduction():
    rng_seed = 808
    train = gen_two_moons(TwoMoonsSpec(985000, 15000, 0.2, seed=rng_seed))
    X_test = gen_two_moons(TwoMoonsSpec(99000, 1000, 0.2, seed=rng_seed + 1)).features
    grid = (1, 2, 3, 5, 7, 10, 15, 20, 25, 30)
    std = experiments.MethodSpec("knn", k_grid=grid, tune_folds=3)
    und = experiments.MethodSpec("undersample-knn", k_grid=grid, tune_folds=3)
    k_std, _ = experiments.tune_k(train, std, rng_seed)
    k_und, _ = experiments.tune_k(train, und, rng_seed)

    def total(spec, k):
        return float(np.median([sum(experiments.time_fit_predict(train, X_test, spec, k, r))
                                for r in range(5)]))

    ratio_tuned = total(und, k_und) / total(std, k_std)
    ratio_common = max(total(und, k) / total(std, k) for k in {k_std, k_und})
    passed = ratio_tuned <= 0.5 and ratio_common <= 0.5
    finish(8, "fit+predict time reduction", passed,
           f"time ratio {ratio_tuned:.3f} at tuned k ({k_und} vs {k_std}), "
           f"worst {ratio_common:.3f} at a shared k (need <= 0.5)")


def test_c09_hyperparameter_shape():
    Bs = [1, 2, 5, 10, 20, 50]
    ks = list(range(1, 31))
    grids = []
    for seed in SEEDS:
        train, test = moons_pair(seed, 50000, 500)
        grids.append(experiments.bagging_sweep(train, test, Bs, ks, None, seed))
    grids = np.array(grids)
    mean = grids.mean(axis=0)
    best_1, best_50 = mean[0].max(), mean[-1].max()
    tail = slice(4, 30)  # k in 5..30
    per_seed_var = grids[:, :, tail].var(axis=2).mean(axis=0)
    averaged_var = mean[:, tail].var(axis=1)
    passed = best_50 >= best_1 - 0.005 and per_seed_var[-1] < per_seed_var[0]
    finish(9, "hyper-parameter shape", passed,
           f"best AM B=50 {best_50:.4f} vs B=1 {best_1:.4f}; variance over k in [5,30] "
           f"B=50 {per_seed_var[-1]:.2e} vs B=1 {per_seed_var[0]:.2e} "
           f"(seed-averaged curve: {averaged_var[-1]:.2e} vs {averaged_var[0]:.2e})")


def test_c10_am_regret_trend():
    ns = [2000, 4000, 8000, 16000, 32000]
    X = make_rng(1010).random((100000, 2))
    auto = experiments.MethodSpec("underbag-knn", auto_params=True)
    means = []
    for n in ns:
        regrets = []
        for seed in SEEDS:
            ds, truth = gen_cube(CubeSpec(d=2, n=n, pi=(0.95, 0.05), seed=experiments.derive_seed(seed, n)))
            choice = experiments.auto_choice(ds, auto, seed)
            spec = experiments.MethodSpec("underbag-knn", B=choice.B, s=float(choice.s))
            fitted = experiments.fit_method(ds, spec, choice.k, seed)
            regrets.append(oracle.am_regret(truth, fitted.predict, X)[0])
        means.append(float(np.mean(regrets)))
    inversions = int(sum(b > a for a, b in zip(means, means[1:])))
    finish(10, "AM-regret trend", inversions <= 1,
           "mean regret " + ", ".join(f"{m:.4f}" for m in means) + f"; {inversions} inversion(s) (allowed 1)")
