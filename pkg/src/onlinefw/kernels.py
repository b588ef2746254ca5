"""Hot inner loops.

Every kernel exists twice: a loop form compiled with numba and a numpy (or
plain Python) form. The public names at the bottom of the module resolve to
one of the two according to :data:`onlinefw._accel.NUMBA_ENABLED`; both are
importable by name (``*_jit`` / ``*_np``) so the benchmark and the tests can
compare them side by side.
"""

import math

import numpy as np

from ._accel import NUMBA_ENABLED, njit, pick

__all__ = [
    "NUMBA_ENABLED",
    "stop_rule",
    "dag_shortest_path",
    "coo_power_iteration",
    "mix_entry_cache",
    "smoothed_abs_sums",
    "ball_marginal_cdf",
    "warm_up",
]


# ---------------------------------------------------------------------------
# DAG shortest path (flow-polytope LMO)
# ---------------------------------------------------------------------------

def _dag_sp_loops(order, indptr, heads, eids, costs, source):
    n_nodes = indptr.shape[0] - 1
    dist = np.full(n_nodes, np.inf)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    dist[source] = 0.0
    for k in range(order.shape[0]):
        u = order[k]
        du = dist[u]
        if du == np.inf:
            continue
        for p in range(indptr[u], indptr[u + 1]):
            w = heads[p]
            e = eids[p]
            nd = du + costs[e]
            if nd < dist[w] or (nd == dist[w] and e < pred[w]):
                dist[w] = nd
                pred[w] = e
    return dist, pred


def _dag_sp_np(order, indptr, heads, eids, costs, source):
    # numba-free path; the DP is inherently sequential over the topological order
    n_nodes = len(indptr) - 1
    dist = [math.inf] * n_nodes
    pred = [-1] * n_nodes
    dist[source] = 0.0
    indptr = indptr.tolist()
    heads = heads.tolist()
    eids = eids.tolist()
    cl = costs.tolist()
    for u in order.tolist():
        du = dist[u]
        if du == math.inf:
            continue
        for p in range(indptr[u], indptr[u + 1]):
            w = heads[p]
            e = eids[p]
            nd = du + cl[e]
            if nd < dist[w] or (nd == dist[w] and e < pred[w]):
                dist[w] = nd
                pred[w] = e
    return np.array(dist), np.array(pred, dtype=np.int64)


_dag_sp_jit = njit(_dag_sp_loops)


# ---------------------------------------------------------------------------
# Power iteration on a COO matrix (trace-norm LMO)
# ---------------------------------------------------------------------------

# The sigma estimates increase monotonically and converge geometrically, so
# the distance to the limit is about diff / (1 - rho) with rho the observed
# ratio of successive differences. Stopping on diff alone undershoots badly
# when the top two singular values are close.

def stop_rule(diff, diff_prev, sigma, tol):
    if diff >= tol * sigma:
        return False
    rho = 0.0
    if diff_prev > 0.0:
        rho = min(max(diff / diff_prev, 0.0), 0.999)
    return diff / (1.0 - rho) < tol * sigma


_stop = njit(stop_rule)


def _coo_power_loops(rows, cols, vals, m, n, v0, tol, max_iters):
    v = v0 / np.sqrt(np.sum(v0 * v0))
    w = np.zeros(m)
    sigma = 0.0
    sigma_prev = -1.0
    diff_prev = -1.0
    iters = 0
    converged = False
    nnz = rows.shape[0]
    for it in range(1, max_iters + 1):
        iters = it
        w[:] = 0.0
        for k in range(nnz):
            w[rows[k]] += vals[k] * v[cols[k]]
        sigma = np.sqrt(np.sum(w * w))
        if sigma == 0.0:
            break
        if sigma_prev >= 0.0:
            diff = abs(sigma - sigma_prev)
            if _stop(diff, diff_prev, sigma, tol):
                converged = True
                break
            diff_prev = diff
        z = np.zeros(n)
        for k in range(nnz):
            z[cols[k]] += vals[k] * w[rows[k]]
        v = z / np.sqrt(np.sum(z * z))
        sigma_prev = sigma
    return sigma, w, v, iters, converged


def _coo_power_np(rows, cols, vals, m, n, v0, tol, max_iters):
    v = v0 / np.linalg.norm(v0)
    w = np.zeros(m)
    sigma = 0.0
    sigma_prev = -1.0
    diff_prev = -1.0
    iters = 0
    converged = False
    for it in range(1, max_iters + 1):
        iters = it
        w = np.bincount(rows, weights=vals * v[cols], minlength=m)
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            break
        if sigma_prev >= 0.0:
            diff = abs(sigma - sigma_prev)
            if stop_rule(diff, diff_prev, sigma, tol):
                converged = True
                break
            diff_prev = diff
        z = np.bincount(cols, weights=vals * w[rows], minlength=n)
        v = z / np.linalg.norm(z)
        sigma_prev = sigma
    return sigma, w, v, iters, converged


_coo_power_jit = njit(_coo_power_loops)


# ---------------------------------------------------------------------------
# Entry cache update under a rank-one mix
# ---------------------------------------------------------------------------

def _mix_cache_loops(cache, rows, cols, alpha, scale, left, right):
    keep = 1.0 - alpha
    coef = alpha * scale
    for k in range(cache.shape[0]):
        cache[k] = keep * cache[k] + coef * left[rows[k]] * right[cols[k]]


def _mix_cache_np(cache, rows, cols, alpha, scale, left, right):
    cache *= 1.0 - alpha
    cache += (alpha * scale) * left[rows] * right[cols]


_mix_cache_jit = njit(_mix_cache_loops)


# ---------------------------------------------------------------------------
# Ball-smoothed absolute value
#
# For u uniform in the n-ball, each coordinate u_i has density proportional
# to (1 - w^2)^q with q = (n-1)/2. J_q(w) = int_0^w (1-s^2)^q ds obeys
# J_q = (w (1-w^2)^q + 2q J_{q-1}) / (2q+1), seeded by J_0 or J_{1/2}.
# ---------------------------------------------------------------------------

def _jq_pow_loops(w, two_q):
    # returns (J_q(w), (1 - w^2)^(q+1)); powers built by repeated products
    one_m = 1.0 - w * w
    if one_m < 0.0:
        one_m = 0.0
    if two_q % 2 == 0:
        p = 0
        pw = 1.0
        acc = w
    else:
        p = 1
        pw = math.sqrt(one_m)
        acc = 0.5 * (w * pw + math.asin(w))
    while p < two_q:
        p += 2
        pw *= one_m
        acc = (w * pw + p * acc) / (p + 1.0)
    return acc, pw * one_m


_jq_pow_jit = njit(_jq_pow_loops)


def _jq_loops(w, two_q):
    return _jq_pow_jit(w, two_q)[0]
_jq_jit = njit(_jq_loops)


def _jq_np(w, two_q):
    w = np.asarray(w, dtype=float)
    one_m = np.clip(1.0 - w * w, 0.0, None)
    if two_q % 2 == 0:
        p = 0.0
        acc = w.copy()
    else:
        p = 0.5
        acc = 0.5 * (w * np.sqrt(one_m) + np.arcsin(np.clip(w, -1.0, 1.0)))
    while 2.0 * p < two_q:
        p += 1.0
        acc = (w * one_m ** p + 2.0 * p * acc) / (2.0 * p + 1.0)
    return acc


def ball_marginal_cdf(w, n):
    """CDF of one coordinate of a uniform point in the unit ``n``-ball."""
    w = np.clip(np.asarray(w, dtype=float), -1.0, 1.0)
    return 0.5 + 0.5 * _jq_np(w, n - 1) / _jq_np(1.0, n - 1)


def _smoothed_abs_loops(x, targets, deltas, n_ball):
    # returns (sum_tau fhat_tau(x), sum_tau grad fhat_tau(x))
    two_q = n_ball - 1
    jq1 = _jq_jit(1.0, two_q)
    k = 0.5 * two_q + 1.0
    tail_coef = 1.0 / (k * 2.0 * jq1)
    n = x.shape[0]
    grad = np.zeros(n)
    value = 0.0
    for tau in range(targets.shape[0]):
        d = deltas[tau]
        for i in range(n):
            z = x[i] - targets[tau, i]
            zeta = z / d
            if zeta >= 1.0:
                grad[i] += 1.0
                value += z
            elif zeta <= -1.0:
                grad[i] -= 1.0
                value -= z
            else:
                jz, tail = _jq_pow_jit(zeta, two_q)
                g = jz / jq1
                grad[i] += g
                value += d * (zeta * g + tail_coef * tail)
    return value, grad


_smoothed_abs_jit = njit(_smoothed_abs_loops)


def _smoothed_abs_np(x, targets, deltas, n_ball):
    two_q = n_ball - 1
    jq1 = float(_jq_np(1.0, two_q))
    k = 0.5 * two_q + 1.0
    z = x[None, :] - targets
    zeta = z / deltas[:, None]
    inside = np.abs(zeta) < 1.0
    g = np.sign(zeta)
    val = np.abs(z)
    if inside.any():
        zi = zeta[inside]
        gi = _jq_np(zi, two_q) / jq1
        g[inside] = gi
        dl = np.broadcast_to(deltas[:, None], z.shape)[inside]
        val[inside] = dl * (zi * gi + (1.0 - zi * zi) ** k / (k * 2.0 * jq1))
    return float(val.sum()), g.sum(axis=0)


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

dag_shortest_path = pick(_dag_sp_jit, _dag_sp_np)
coo_power_iteration = pick(_coo_power_jit, _coo_power_np)
mix_entry_cache = pick(_mix_cache_jit, _mix_cache_np)
smoothed_abs_sums = pick(_smoothed_abs_jit, _smoothed_abs_np)

_warm = False


def warm_up():
    """Compile (or load from cache) every jitted kernel so timings exclude it."""
    global _warm
    if _warm or not NUMBA_ENABLED:
        return
    i2 = np.array([0, 1], dtype=np.int64)
    f2 = np.array([1.0, 2.0])
    dag_shortest_path(np.array([0, 1], dtype=np.int64), np.array([0, 1, 1], dtype=np.int64),
                      np.array([1], dtype=np.int64), np.array([0], dtype=np.int64),
                      np.array([1.0]), 0)
    coo_power_iteration(i2, i2, f2, 2, 2, np.ones(2), 1e-5, 5)
    frozen = f2.copy()
    frozen.setflags(write=False)  # atom factors are read-only, a separate signature
    mix_entry_cache(np.zeros(2), i2, i2, 0.5, 1.0, frozen, frozen)
    smoothed_abs_sums(f2, np.zeros((1, 2)), np.ones(1), 2)
    _warm = True


IMPLEMENTATIONS = {
    "dag_shortest_path": (_dag_sp_jit, _dag_sp_np),
    "coo_power_iteration": (_coo_power_jit, _coo_power_np),
    "mix_entry_cache": (_mix_cache_jit, _mix_cache_np),
    "smoothed_abs_sums": (_smoothed_abs_jit, _smoothed_abs_np),
}
