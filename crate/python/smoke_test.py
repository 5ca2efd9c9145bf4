"""Smoke test for the selinf_py extension module."""

import math
import random

import selinf_py as si


def main():
    rng = random.Random(3)
    n, p = 100, 4
    x = [[rng.gauss(0, 1) for _ in range(p)] for _ in range(n)]
    y = [2.0 * row[0] + rng.gauss(0, 1) for row in x]

    assert len(si.METHODS) == 10
    fit = si.lasso(x, y, 5.0)
    assert fit.converged and 0 in fit.active_set, fit

    lam = si.tune_lambda(x, y, tuning="negahban", seed=1)
    cis = si.exact_intervals(x, y, lam, sigma=1.0, alpha=0.1)
    first = next(c for c in cis if c.variable == 0)
    assert first.lower > 0 and first.lower <= first.estimate <= first.upper, first

    k = si.posi_constant([[v] for v in y], alpha=0.1, n_mc=20000, seed=2)
    assert abs(k - 1.645) < 0.05, k

    t = si.submodel_target([[1.0, 0.5], [0.5, 1.0]], [1.0, 1.0], [0])
    assert math.isclose(t[0], 1.5)

    assert len(si.grid_scenarios("toy-full")) == 630
    sc = si.Scenario("toy", "uncorrelated", "v1", 0.5, 10)
    xs, ys, yv = sc.sample(7)
    assert len(xs) == sc.n == 40 and len(ys) == len(yv) == 40
    rows = sc.run(methods="Full,Lasso-CV-SI", iterations=20, seed=1)
    assert [r["method"] for r in rows] == ["Full", "Lasso-CV-SI"]
    assert 0.0 <= rows[0]["coverage"] <= 1.0

    report = si.analyze(x, y, ["a", "b", "c", "d"], methods="Full,Lasso-CV-SI", n_boot=10)
    assert len(report) == 8
    print("selinf_py smoke test passed:", sc, first)


if __name__ == "__main__":
    main()
