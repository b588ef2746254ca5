"""Self-check suites behind ``lmo-check`` and ``bounds-check``.

The oracle checks compare each LMO's objective value with exhaustive
enumeration of the domain's vertices; the bound checks run the learner and
assert the guarantees it is supposed to meet.
"""

from __future__ import annotations

import itertools
import math
import time
from typing import Callable, Iterator, List, NamedTuple

import numpy as np

from .costs import make_adversarial_surrogate
from .harness import StreamSpec, gen_stream
from .ofw import run_ofw
from .oracles import Ball, FlowPolytope, Simplex, TraceNormBall, UniformMatroid, random_flow_polytope


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# enumerators
# ---------------------------------------------------------------------------

def simplex_vertices(n: int) -> np.ndarray:
    return np.eye(n)


def independent_sets(n: int, k: int) -> np.ndarray:
    """Indicators of every subset of size at most ``k`` (the empty set included)."""
    out = []
    for size in range(k + 1):
        for combo in itertools.combinations(range(n), size):
            row = np.zeros(n)
            row[list(combo)] = 1.0
            out.append(row)
    return np.array(out)


def dag_paths(spec: FlowPolytope) -> np.ndarray:
    """Edge indicators of every source-to-sink path, by depth-first search."""
    out_edges = [[] for _ in range(spec.n_nodes)]
    for e, (u, v) in enumerate(spec.edges):
        out_edges[u].append((e, v))
    paths = []

    def walk(u, used):
        if u == spec.sink:
            row = np.zeros(len(spec.edges))
            row[used] = 1.0
            paths.append(row)
            return
        for e, v in out_edges[u]:
            walk(v, used + [e])

    walk(spec.source, [])
    return np.array(paths)


# ---------------------------------------------------------------------------
# oracle equivalence
# ---------------------------------------------------------------------------

def _vertex_check(name, make_case: Callable, trials: int, rng, tol=1e-12) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        domain, vertices = make_case(rng)
        c = rng.standard_normal(domain.dim)
        got = float(c @ domain.lmo(c).to_dense())
        best = float((vertices @ c).min())
        worst = max(worst, abs(got - best))
    return CheckResult(name, worst <= tol, f"{trials} costs, max |lmo - brute force| = {worst:.3g}")


def lmo_checks(trials: int = 200, seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []

    def simplex_case(r):
        n = int(r.integers(1, 11))
        return Simplex(n), simplex_vertices(n)

    def flow_case(r):
        spec = random_flow_polytope(int(r.integers(2, 9)), edge_prob=0.5, seed=int(r.integers(2 ** 31)))
        return spec, dag_paths(spec)

    cache = {}

    def matroid_case(r):
        n = int(r.integers(1, 13))
        k = int(r.integers(1, min(n, 4) + 1))
        if (n, k) not in cache:
            cache[(n, k)] = independent_sets(n, k)
        return UniformMatroid(n, k), cache[(n, k)]

    results.append(_vertex_check("simplex", simplex_case, trials, rng))
    results.append(_vertex_check("flow", flow_case, trials, rng))
    results.append(_vertex_check("matroid", matroid_case, trials, rng))

    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 11))
        r = float(rng.uniform(0.1, 3.0))
        c = rng.standard_normal(n)
        got = float(c @ Ball(n, r).lmo(c).to_dense())
        worst = max(worst, abs(got + r * np.linalg.norm(c)))
    results.append(CheckResult("ball", worst <= 1e-10,
                               f"{trials} costs, max |lmo + r|c|| = {worst:.3g}"))

    worst = 0.0
    n_trace = max(1, trials // 4)
    for k in range(n_trace):
        G = rng.standard_normal((20, 30))
        tau = float(rng.uniform(0.5, 10.0))
        atom = TraceNormBall(20, 30, tau).lmo(G, seed=k)
        got = float(np.sum(G.ravel() * atom.to_dense()))
        ref = -tau * np.linalg.svd(G, compute_uv=False)[0]
        worst = max(worst, abs(got - ref) / abs(ref))
    results.append(CheckResult("trace", worst <= 1e-4,
                               f"{n_trace} matrices, max relative gap to -tau sigma_max = {worst:.3g}"))
    return results


# ---------------------------------------------------------------------------
# guarantees
# ---------------------------------------------------------------------------

def gap_bound_check(T: int = 10_000, seed: int = 0) -> CheckResult:
    domain = Ball(5, 1.0)
    spec = StreamSpec("quadratic", T=T, seed=seed, center=(0.3, -0.2, 0.1, 0.0, 0.2), spread=0.5)
    start = time.perf_counter()
    trace = run_ofw(domain, gen_stream(spec, domain), "stoch_smooth", seed=seed)
    secs = time.perf_counter() - start
    sched = trace.info["schedule"]
    bound = sched.C * trace.t.astype(float) ** -sched.d + 1e-9
    viol = int(np.sum(trace.delta_t > bound))
    ratio = float(np.max(trace.delta_t / bound))
    return CheckResult("gap bound (smooth stochastic)", viol == 0,
                       f"T={T}, violations={viol}, max gap/bound={ratio:.3g}, {secs:.2f}s")


def adversarial_regret_checks(T: int = 4096, seed: int = 0) -> Iterator[CheckResult]:
    for domain in (Simplex(10), Ball(20, 1.0)):
        for pattern in ("alternating", "random", "drifting"):
            stream = gen_stream(StreamSpec("linear_adversarial", T=T, seed=seed, pattern=pattern), domain)
            trace = run_ofw(domain, stream, "adversarial", seed=seed)
            bound = 57.0 * stream.meta.L * domain.diameter * T ** 0.75
            regret = float(trace.cum_regret[-1])
            yield CheckResult(f"regret bound ({type(domain).__name__.lower()}, {pattern})",
                              regret <= bound, f"regret={regret:.4g} <= {bound:.4g}")


def surrogate_checks(points: int = 1000, T: int = 100_000, seed: int = 0) -> Iterator[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for domain in (Simplex(10), Ball(20, 1.0)):
        n, L, D = domain.dim, 1.0, domain.diameter
        x1 = domain.lmo(np.ones(n)).to_dense()
        sig_sum, g_sum = 0.0, np.zeros(n)
        for t in range(1, 51):
            g = rng.standard_normal(n)
            g *= L * rng.random() / np.linalg.norm(g)
            s = make_adversarial_surrogate(g, x1, t, L, D)
            sig_sum += s.sigma
            g_sum += g
            for _ in range(points // 50):
                x = _random_point(domain, rng)
                grad = g_sum / t + 2.0 * (sig_sum / t) * (x - x1)
                worst = max(worst, float(np.linalg.norm(grad)) / (3.0 * L))
    yield CheckResult("surrogate gradient <= 3L", worst <= 1.0, f"max |grad|/3L = {worst:.3g}")
    total = float(np.sum(np.arange(1, T + 1, dtype=float) ** -0.25))
    bound = 3.0 * T ** 0.75
    yield CheckResult("sum of sigma_t", total <= bound,
                      f"T={T}: sum t^-1/4 = {total:.6g} <= {bound:.6g}")


def _random_point(domain, rng):
    if isinstance(domain, Simplex):
        return rng.dirichlet(np.ones(domain.dim))
    u = rng.standard_normal(domain.dim)
    return domain.radius * rng.random() ** (1.0 / domain.dim) * u / np.linalg.norm(u)


def bounds_checks(T: int = 10_000, seed: int = 0) -> List[CheckResult]:
    out = [gap_bound_check(T, seed)]
    out.extend(adversarial_regret_checks(min(T, 4096), seed))
    out.extend(surrogate_checks(seed=seed))
    return out


def all_passed(results) -> bool:
    return all(r.passed for r in results)
