import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import integrate

from onlinefw import kernels
from onlinefw.oracles import random_flow_polytope

needs_numba = pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba path disabled")


def both(name):
    return kernels.IMPLEMENTATIONS[name]


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_dag_paths_agree(seed):
    rng = np.random.default_rng(seed)
    spec = random_flow_polytope(15, edge_prob=0.4, seed=seed)
    costs = rng.standard_normal(len(spec.edges))
    args = (spec._order, spec._indptr, spec._heads, spec._eids, costs, spec.source)
    jit, ref = both("dag_shortest_path")
    d1, p1 = jit(*args)
    d2, p2 = ref(*args)
    np.testing.assert_allclose(d1, d2, atol=1e-12)
    np.testing.assert_array_equal(p1, p2)


@needs_numba
@pytest.mark.parametrize("seed", range(3))
def test_power_iteration_agrees(seed):
    rng = np.random.default_rng(seed)
    m, n, nnz = 40, 50, 600
    rows, cols = rng.integers(0, m, nnz), rng.integers(0, n, nnz)
    vals = rng.standard_normal(nnz)
    v0 = rng.standard_normal(n)
    jit, ref = both("coo_power_iteration")
    s1, u1, v1, it1, c1 = jit(rows, cols, vals, m, n, v0, 1e-6, 5000)
    s2, u2, v2, it2, c2 = ref(rows, cols, vals, m, n, v0, 1e-6, 5000)
    assert (it1, c1) == (it2, c2)
    assert s1 == pytest.approx(s2, rel=1e-10)
    np.testing.assert_allclose(v1, v2, atol=1e-8)


@needs_numba
def test_mix_cache_agrees():
    rng = np.random.default_rng(0)
    rows, cols = rng.integers(0, 10, 300), rng.integers(0, 12, 300)
    left, right = rng.standard_normal(10), rng.standard_normal(12)
    start = rng.standard_normal(300)
    a, b = start.copy(), start.copy()
    jit, ref = both("mix_entry_cache")
    jit(a, rows, cols, 0.3, -2.0, left, right)
    ref(b, rows, cols, 0.3, -2.0, left, right)
    np.testing.assert_allclose(a, b, atol=1e-14)
    np.testing.assert_allclose(a, 0.7 * start + 0.3 * -2.0 * left[rows] * right[cols], atol=1e-14)


@needs_numba
@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
def test_smoothed_abs_agrees(n):
    rng = np.random.default_rng(n)
    x = rng.uniform(-1, 1, n)
    targets = rng.uniform(-1, 1, (200, n))
    deltas = rng.uniform(0.05, 2.0, 200)
    jit, ref = both("smoothed_abs_sums")
    v1, g1 = jit(x, targets, deltas, n)
    v2, g2 = ref(x, targets, deltas, n)
    assert v1 == pytest.approx(v2, rel=1e-12)
    np.testing.assert_allclose(g1, g2, atol=1e-11)


@pytest.mark.parametrize("two_q", [0, 1, 2, 3, 4, 9])
def test_jq_against_quadrature(two_q):
    q = two_q / 2.0
    for w in (-0.9, -0.3, 0.0, 0.4, 0.95):
        want = integrate.quad(lambda s: (1 - s * s) ** q, 0, w, epsabs=1e-14)[0]
        assert kernels._jq_np(w, two_q) == pytest.approx(want, abs=1e-12)
        assert kernels._jq_jit(w, two_q) == pytest.approx(want, abs=1e-12)
    # full half-integral is a Beta function
    full = 0.5 * math.sqrt(math.pi) * math.gamma(q + 1) / math.gamma(q + 1.5)
    assert kernels._jq_np(1.0, two_q) == pytest.approx(full, abs=1e-14)
    assert kernels._jq_jit(1.0, two_q) == pytest.approx(full, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_ball_marginal_cdf_against_sampling(n):
    rng = np.random.default_rng(n)
    g = rng.standard_normal((200_000, n))
    u = g / np.linalg.norm(g, axis=1, keepdims=True) * rng.random((200_000, 1)) ** (1 / n)
    for w in (-0.5, 0.0, 0.2, 0.7):
        emp = np.mean(u[:, 0] <= w)
        p = kernels.ball_marginal_cdf(w, n)
        assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / 200_000) + 1e-12
    assert kernels.ball_marginal_cdf(1.0, n) == pytest.approx(1.0)
    assert kernels.ball_marginal_cdf(-1.0, n) == pytest.approx(0.0)


def test_stop_rule():
    # without history it is the plain relative test
    assert kernels.stop_rule(1e-6, -1.0, 1.0, 1e-5)
    assert not kernels.stop_rule(2e-5, -1.0, 1.0, 1e-5)
    # slow contraction: the remaining distance is diff / (1 - rho)
    assert not kernels.stop_rule(9e-6, 1e-5, 1.0, 1e-5)
    assert kernels.stop_rule(1e-7, 1e-6, 1.0, 1e-5)


_SCRIPT = """
import json, numpy as np
from onlinefw import kernels
from onlinefw.cfbench import BenchConfig, planted_records, run_cf_compare
from onlinefw.harness import StreamSpec, gen_stream
from onlinefw.ofw import run_ofw
from onlinefw.oracles import Ball
recs, tau = planted_records(20, 25, 3, T=300, seed=0)
cf = run_cf_compare(BenchConfig(20, 25, tau, 300, algorithms="ofw"), recs).ofw_trace.loss
d = Ball(3)
ab = run_ofw(d, gen_stream(StreamSpec("absolute", T=300, seed=0, spread=0.3), d), "stoch_nonsmooth").loss
print(json.dumps({"numba": kernels.NUMBA_ENABLED, "cf": cf.tolist(), "abs": ab.tolist()}))
"""


def _run_script(no_numba):
    env = dict(os.environ)
    env.pop("ONLINEFW_NO_NUMBA", None)
    if no_numba:
        env["ONLINEFW_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@needs_numba
def test_numpy_fallback_matches_numba_path():
    fast, slow = _run_script(False), _run_script(True)
    assert fast["numba"] is True and slow["numba"] is False
    cf_fast, cf_slow = np.array(fast["cf"]), np.array(slow["cf"])
    # summation order differs between the paths; once two top singular values
    # nearly tie the oracles may pick different atoms, so only early rounds match exactly
    np.testing.assert_allclose(cf_fast[:150], cf_slow[:150], rtol=1e-7, atol=1e-9)
    w_fast, w_slow = cf_fast.reshape(6, 50).mean(axis=1), cf_slow.reshape(6, 50).mean(axis=1)
    np.testing.assert_allclose(w_fast, w_slow, rtol=0.15)
    np.testing.assert_allclose(fast["abs"], slow["abs"], rtol=1e-9, atol=1e-12)
