"""Quick oracle-versus-implementation checks behind ``ubknn oracle-check``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kdtree, knn, oracle
from .dataset import Dataset
from .metrics import empirical_balanced_risk, evaluate
from .sampler import AcceptanceRule, draw, make_rng, underbag_rule


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_kdtree(rng: np.random.Generator, instances: int = 40) -> CheckResult:
    for t in range(instances):
        n = int(rng.integers(1, 800))
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, min(n, 25) + 1))
        # coarse grid coordinates force plenty of distance ties
        P = rng.integers(0, 6, (n, d)).astype(float) if t % 2 else rng.random((n, d))
        x = rng.random(d) * 5
        tree = kdtree.build(P, int(rng.integers(1, 20)))
        got = kdtree.knn_query(tree, x, k)
        ref = oracle.brute_knn(P, x, k)
        if not (np.array_equal(got.indices, ref.indices) and np.array_equal(got.distances, ref.distances)):
            return CheckResult("kdtree-exactness", False, f"mismatch on instance {t} (n={n}, d={d}, k={k})")
    return CheckResult("kdtree-exactness", True, f"{instances} instances")


def check_gp_closed_form(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 120))
        j = int(rng.integers(1, min(n, 20) + 1))
        p = float(rng.uniform(0.05, 1.0))
        f = oracle.gp_pmf_all(oracle.GPParams(np.full(n, p), j))
        ref = np.array([oracle.negative_binomial_pmf(i, j, p) for i in range(1, n + 1)])
        worst = max(worst, float(np.abs(f - ref).max()))
    return CheckResult("gp-closed-form", worst <= 1e-12, f"max abs error {worst:.2e}")


def _random_dataset(rng: np.random.Generator, n: int, M: int, d: int) -> Dataset:
    y = rng.integers(1, M + 1, n)
    y[:M] = np.arange(1, M + 1)
    return Dataset(rng.random((n, d)), y, M)


def check_formulation(rng: np.random.Generator, instances: int = 20) -> CheckResult:
    for t in range(instances):
        ds = _random_dataset(rng, int(rng.integers(5, 150)), int(rng.integers(2, 4)), int(rng.integers(1, 4)))
        rule = AcceptanceRule(rng.uniform(0.1, 1.0, ds.n_classes))
        sample = draw(ds, rule, int(rng.integers(0, 2**32)))
        if sample.size == 0:
            continue
        k = int(rng.integers(1, 12))
        model = knn.fit(ds, sample.indices, k)
        x = rng.random(ds.d)
        if not np.array_equal(knn.posterior(model, x), oracle.weighted_round_posterior(ds, sample.indices, x, k)):
            return CheckResult("weighted-formulation", False, f"mismatch on instance {t}")
    return CheckResult("weighted-formulation", True, f"{instances} instances")


def check_bagged_weight_bounds(rng: np.random.Generator, instances: int = 20) -> CheckResult:
    for t in range(instances):
        ds = _random_dataset(rng, int(rng.integers(20, 300)), 2, 2)
        upper = ds.n_classes * ds.minority_count
        k = int(rng.integers(1, max(2, upper // 2)))
        s = float(rng.uniform(k, upper))
        w = oracle.exact_bagged_weights(ds, underbag_rule(ds, s), rng.random(2), k)
        if w.deficiency > math.exp(-((s - k) ** 2) / (2 * ds.n)):
            return CheckResult("bagged-weight-bounds", False, f"deficiency bound broken on instance {t}")
        if abs((1 - w.vbar.sum()) - w.deficiency) > 1e-13:
            return CheckResult("bagged-weight-bounds", False, f"deficiency identity broken on instance {t}")
        if w.vbar.max() > s / upper / k:
            return CheckResult("bagged-weight-bounds", False, f"max weight bound broken on instance {t}")
    return CheckResult("bagged-weight-bounds", True, f"{instances} instances")


def check_am_identity(rng: np.random.Generator, instances: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        M = int(rng.integers(2, 6))
        n = int(rng.integers(M, 400))
        y = rng.integers(1, M + 1, n)
        y[:M] = np.arange(1, M + 1)
        pred = rng.integers(1, M + 1, n)
        rep = evaluate(y, pred, M)
        worst = max(worst, abs(rep.am - (1 - empirical_balanced_risk(y, pred, M))))
    return CheckResult("am-balanced-risk-identity", worst <= 1e-12, f"max gap {worst:.2e}")


def run_all(seed: int = 0) -> list[CheckResult]:
    rng = make_rng(seed)
    return [
        check_kdtree(rng),
        check_gp_closed_form(rng),
        check_formulation(rng),
        check_bagged_weight_bounds(rng),
        check_am_identity(rng),
    ]
