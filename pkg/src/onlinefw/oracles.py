"""Linear-minimization oracles and (for the OGD baseline) Euclidean projections.

Domains:

* :class:`Simplex` -- probability simplex in R^n
* :class:`Ball` -- Euclidean ball of a given radius
* :class:`FlowPolytope` -- hull of s-t path indicators of a DAG
* :class:`UniformMatroid` -- hull of indicators of sets of size <= k
* :class:`TraceNormBall` -- m x n matrices with nuclear norm <= tau

All argmins break ties towards the lowest index so runs are reproducible.
"""

from __future__ import annotations

import graphlib
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .core import BoundaryAtom
from .errors import (
    ConvergenceWarning,
    InfeasibleDomainError,
    NumericError,
    ParameterError,
    ParseError,
    ShapeError,
)

DEFAULT_TOL = 1e-5
DEFAULT_MAX_ITERS = 2000


def _as_cost(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ParameterError("cost must be a non-empty vector")
    if np.isnan(c).any():
        raise NumericError("NaN in cost vector")
    return c


# ---------------------------------------------------------------------------
# elementary domains
# ---------------------------------------------------------------------------

def lmo_simplex(c) -> BoundaryAtom:
    c = _as_cost(c)
    e = np.zeros(c.size)
    e[int(np.argmin(c))] = 1.0  # argmin returns the first minimiser
    return BoundaryAtom.vector(e)


def lmo_ball(c, r: float) -> BoundaryAtom:
    """Minimiser of ``c . x`` over the radius-``r`` ball.

    For ``|c| < 1e-12`` every point is optimal and ``r * e_1`` is returned.
    """
    c = _as_cost(c)
    if not r > 0:
        raise ParameterError("radius must be positive")
    norm = float(np.linalg.norm(c))
    if norm < 1e-12:
        e = np.zeros(c.size)
        e[0] = r
        return BoundaryAtom.vector(e)
    return BoundaryAtom.vector(-r * c / norm)


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    y = np.asarray(y, dtype=float)
    if np.isnan(y).any():
        raise NumericError("NaN in projection input")
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def project_ball(y, r: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    norm = float(np.linalg.norm(y))
    if norm <= r:
        return y.copy()
    return (r / norm) * y


class Domain:
    """Common surface: ``dim``, ``diameter``, ``lmo``, ``contains``."""

    is_matrix = False
    dim: int

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def lmo(self, c, **kwargs) -> BoundaryAtom:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-8) -> bool:
        raise NotImplementedError

    def project(self, y):
        raise NotImplementedError(f"no projection oracle for {type(self).__name__}")

    @property
    def can_project(self) -> bool:
        return type(self).project is not Domain.project


@dataclass(frozen=True)
class Simplex(Domain):
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("simplex dimension must be positive")

    @property
    def dim(self):
        return self.n

    @property
    def diameter(self):
        return math.sqrt(2.0)

    def lmo(self, c, **kwargs):
        return lmo_simplex(c)

    def project(self, y):
        return project_simplex(y)

    def contains(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float)
        return bool(x.min() >= -tol and abs(x.sum() - 1.0) <= tol)


@dataclass(frozen=True)
class Ball(Domain):
    n: int
    radius: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("ball dimension must be positive")
        if not self.radius > 0:
            raise ParameterError("radius must be positive")

    @property
    def dim(self):
        return self.n

    @property
    def diameter(self):
        return 2.0 * self.radius

    def lmo(self, c, **kwargs):
        return lmo_ball(c, self.radius)

    def project(self, y):
        return project_ball(y, self.radius)

    def contains(self, x, tol=1e-8):
        return bool(np.linalg.norm(x) <= self.radius + tol)


# ---------------------------------------------------------------------------
# flow polytope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowPolytope(Domain):
    """Convex hull of s->t path indicator vectors (one coordinate per edge)."""

    n_nodes: int
    edges: tuple
    source: int
    sink: int
    _order: np.ndarray = field(init=False, repr=False, compare=False)
    _indptr: np.ndarray = field(init=False, repr=False, compare=False)
    _heads: np.ndarray = field(init=False, repr=False, compare=False)
    _eids: np.ndarray = field(init=False, repr=False, compare=False)
    _tails: np.ndarray = field(init=False, repr=False, compare=False)
    _max_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        n = self.n_nodes
        if not edges:
            raise ParameterError("flow polytope needs at least one edge")
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"edge ({u}, {v}) references a missing node")
        if not (0 <= self.source < n and 0 <= self.sink < n) or self.source == self.sink:
            raise ParameterError("source and sink must be distinct nodes")
        ts = graphlib.TopologicalSorter({k: () for k in range(n)})
        for u, v in edges:
            ts.add(v, u)
        try:
            order = np.fromiter(ts.static_order(), dtype=np.int64, count=n)
        except graphlib.CycleError as exc:
            raise ParameterError("flow graph has a cycle") from exc
        tails = np.array([u for u, _ in edges], dtype=np.int64)
        heads = np.array([v for _, v in edges], dtype=np.int64)
        by_tail = np.lexsort((np.arange(len(edges)), tails))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, tails + 1, 1)
        np.cumsum(indptr, out=indptr)
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_indptr", indptr)
        object.__setattr__(self, "_heads", heads[by_tail])
        object.__setattr__(self, "_eids", by_tail.astype(np.int64))
        object.__setattr__(self, "_tails", tails)
        dist, _ = kernels.dag_shortest_path(
            order, indptr, self._heads, self._eids, -np.ones(len(edges)), self.source
        )
        if not np.isfinite(dist[self.sink]):
            raise InfeasibleDomainError("no path from source to sink")
        object.__setattr__(self, "_max_len", int(round(-dist[self.sink])))

    @property
    def dim(self):
        return len(self.edges)

    @property
    def max_path_length(self) -> int:
        return self._max_len

    @property
    def diameter(self):
        return math.sqrt(2.0 * self._max_len)

    def lmo(self, c, **kwargs):
        return lmo_flow_dag(self, c)

    def contains(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or x.min() < -tol:
            return False
        net = np.zeros(self.n_nodes)
        np.add.at(net, self._tails, x)
        np.add.at(net, np.array([v for _, v in self.edges]), -x)
        want = np.zeros(self.n_nodes)
        want[self.source], want[self.sink] = 1.0, -1.0
        return bool(np.abs(net - want).max() <= tol)


def lmo_flow_dag(spec: FlowPolytope, c) -> BoundaryAtom:
    """Edge indicator of a minimum-cost s->t path (DP in topological order).

    Ties prefer the smallest predecessor edge index. Negative costs are fine.
    """
    c = _as_cost(c)
    if c.size != spec.dim:
        raise ShapeError(f"expected {spec.dim} edge costs, got {c.size}")
    dist, pred = kernels.dag_shortest_path(
        spec._order, spec._indptr, spec._heads, spec._eids, c, spec.source
    )
    if not np.isfinite(dist[spec.sink]):
        raise InfeasibleDomainError("no path from source to sink")
    x = np.zeros(spec.dim)
    node = spec.sink
    while node != spec.source:
        e = pred[node]
        x[e] = 1.0
        node = spec._tails[e]
    return BoundaryAtom.vector(x)


def parse_flow_graph(text: str) -> FlowPolytope:
    """Read the small flow-graph text format.

    First line ``nodes <m> edges <k> <s> <t>`` (the two keywords are optional),
    then ``k`` lines ``u v`` with 0-based node ids. ``#`` starts a comment.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body.split()))
    if not lines:
        raise ParseError("empty flow graph")
    lineno, head = lines[0]
    nums = [tok for tok in head if tok.lower() not in ("nodes", "edges")]
    if len(nums) != 4:
        raise ParseError("header must be 'nodes m edges k s t'", lineno)
    try:
        m, k, s, t = (int(tok) for tok in nums)
    except ValueError as exc:
        raise ParseError(f"non-integer header field: {exc}", lineno) from None
    body = lines[1:]
    if len(body) != k:
        raise ParseError(f"header declares {k} edges, found {len(body)}", lineno)
    edges = []
    for lineno, toks in body:
        if len(toks) != 2:
            raise ParseError("edge lines are 'u v'", lineno)
        try:
            edges.append((int(toks[0]), int(toks[1])))
        except ValueError:
            raise ParseError(f"bad edge {' '.join(toks)!r}", lineno) from None
    return FlowPolytope(n_nodes=m, edges=tuple(edges), source=s, sink=t)


def format_flow_graph(spec: FlowPolytope) -> str:
    lines = [f"nodes {spec.n_nodes} edges {len(spec.edges)} {spec.source} {spec.sink}"]
    lines += [f"{u} {v}" for u, v in spec.edges]
    return "\n".join(lines) + "\n"


def random_flow_polytope(n_nodes: int, edge_prob: float = 0.5, seed: int = 0) -> FlowPolytope:
    """Random DAG on nodes ``0..n-1`` (edges go forward), source 0, sink n-1.

    The chain ``0 -> 1 -> ... -> n-1`` is always included so a path exists.
    """
    rng = np.random.default_rng(seed)
    edges = []
    for u in range(n_nodes):
        for v in range(u + 1, n_nodes):
            if v == u + 1 or rng.random() < edge_prob:
                edges.append((u, v))
    perm = rng.permutation(len(edges))
    return FlowPolytope(n_nodes, tuple(edges[p] for p in perm), 0, n_nodes - 1)


# ---------------------------------------------------------------------------
# uniform matroid
# ---------------------------------------------------------------------------

def lmo_uniform_matroid(n: int, k: int, c) -> BoundaryAtom:
    """Greedy: take the most negative coordinates, at most ``k`` of them."""
    c = _as_cost(c)
    if c.size != n:
        raise ShapeError(f"expected {n} costs, got {c.size}")
    if not 1 <= k <= n:
        raise ParameterError("rank must satisfy 1 <= k <= n")
    order = np.argsort(c, kind="stable")[:k]
    x = np.zeros(n)
    x[order[c[order] < 0.0]] = 1.0
    return BoundaryAtom.vector(x)


@dataclass(frozen=True)
class UniformMatroid(Domain):
    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ParameterError("rank must satisfy 1 <= k <= n")

    @property
    def dim(self):
        return self.n

    @property
    def diameter(self):
        return math.sqrt(2.0 * self.k)

    def lmo(self, c, **kwargs):
        return lmo_uniform_matroid(self.n, self.k, c)

    def contains(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float)
        return bool(x.min() >= -tol and x.max() <= 1 + tol and x.sum() <= self.k + tol)


# ---------------------------------------------------------------------------
# trace-norm ball
# ---------------------------------------------------------------------------

class EntryGradient:
    """Sparse m x n matrix given by (row, col, value) triplets.

    Duplicate positions add up. Supports ``G @ v`` and ``G.T @ w``.
    """

    def __init__(self, rows, cols, vals, shape):
        self.rows = np.ascontiguousarray(rows, dtype=np.int64)
        self.cols = np.ascontiguousarray(cols, dtype=np.int64)
        self.vals = np.ascontiguousarray(vals, dtype=float)
        self.shape = (int(shape[0]), int(shape[1]))

    @property
    def nnz(self):
        return self.vals.size

    def __matmul__(self, v):
        return np.bincount(self.rows, weights=self.vals * v[self.cols], minlength=self.shape[0])

    def rmatvec(self, w):
        return np.bincount(self.cols, weights=self.vals * w[self.rows], minlength=self.shape[1])

    def toarray(self):
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out

    def inner(self, atom: BoundaryAtom) -> float:
        """``<G, atom>`` for a rank-one atom."""
        return float(atom.scale * np.sum(self.vals * atom.left[self.rows] * atom.right[self.cols]))


class TopPair(NamedTuple):
    sigma: float
    u: np.ndarray
    v: np.ndarray
    iters: int
    converged: bool


def _as_coo(G):
    if isinstance(G, EntryGradient):
        return G.rows, G.cols, G.vals, G.shape
    if sp.issparse(G):
        coo = G.tocoo()
        return (coo.row.astype(np.int64), coo.col.astype(np.int64),
                coo.data.astype(float), coo.shape)
    return None


def power_iteration_top_pair(G, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                             seed: int = 0) -> TopPair:
    """Top singular triple by power iteration on ``G^T G``.

    Starts from a seeded Gaussian vector and stops once the estimated
    distance of sigma to its limit (successive difference over one minus the
    observed contraction ratio) is below ``tol`` relatively. On hitting ``max_iters``
    a :class:`ConvergenceWarning` is issued and the last iterate returned.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    coo = _as_coo(G)
    if coo is not None:
        rows, cols, vals, (m, n) = coo
    else:
        G = np.asarray(G, dtype=float)
        if G.ndim != 2:
            raise ShapeError("power iteration needs a matrix")
        m, n = G.shape
    v0 = np.random.default_rng(seed).standard_normal(n)
    if coo is not None:
        sigma, w, v, iters, converged = kernels.coo_power_iteration(
            rows, cols, vals, m, n, v0, float(tol), int(max_iters)
        )
    else:
        sigma, w, v, iters, converged = _dense_power(G, v0, tol, max_iters)
    if not sigma > 0:
        raise NumericError("power iteration on a zero matrix")
    if not converged:
        warnings.warn(
            f"power iteration stopped after {iters} iterations without reaching tol={tol}",
            ConvergenceWarning, stacklevel=2,
        )
    return TopPair(float(sigma), w / sigma, v, int(iters), bool(converged))


def _dense_power(G, v0, tol, max_iters):
    v = v0 / np.linalg.norm(v0)
    w = G @ v
    sigma, sigma_prev, diff_prev = 0.0, -1.0, -1.0
    iters, converged = 0, False
    for it in range(1, max_iters + 1):
        iters = it
        w = G @ v
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            break
        if sigma_prev >= 0.0:
            diff = abs(sigma - sigma_prev)
            if kernels.stop_rule(diff, diff_prev, sigma, tol):
                converged = True
                break
            diff_prev = diff
        z = G.T @ w
        v = z / np.linalg.norm(z)
        sigma_prev = sigma
    return sigma, w, v, iters, converged


@dataclass(frozen=True)
class TraceNormBall(Domain):
    m: int
    n: int
    tau: float
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS

    is_matrix = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if self.m < 1 or self.n < 1:
            raise ParameterError("matrix dimensions must be positive")

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def dim(self):
        return self.m * self.n

    @property
    def diameter(self):
        return 2.0 * self.tau

    def lmo(self, G, seed: int = 0, **kwargs):
        return lmo_trace_ball(self, G, tol=self.tol, seed=seed, max_iters=self.max_iters)

    def project(self, Y):
        return project_trace_ball(Y, self.tau)

    def contains(self, X, tol=1e-8):
        X = np.asarray(X, dtype=float).reshape(self.shape)
        return bool(np.linalg.svd(X, compute_uv=False).sum() <= self.tau + tol)


def lmo_trace_ball(spec: TraceNormBall, G, tol: float = DEFAULT_TOL, seed: int = 0,
                   max_iters: int = DEFAULT_MAX_ITERS) -> BoundaryAtom:
    """``-tau * u v^T`` for the top singular pair (u, v) of ``G``.

    A zero gradient returns ``tau * e_1 e_1^T`` (every point is optimal).
    """
    shape = G.shape
    if tuple(shape) != (spec.m, spec.n):
        raise ShapeError(f"gradient of shape {shape} for a {spec.m}x{spec.n} domain")
    if _is_zero(G):
        e_m, e_n = np.zeros(spec.m), np.zeros(spec.n)
        e_m[0] = e_n[0] = 1.0
        return BoundaryAtom.rank_one(spec.tau, e_m, e_n)
    top = power_iteration_top_pair(G, tol=tol, max_iters=max_iters, seed=seed)
    return BoundaryAtom.rank_one(-spec.tau, top.u, top.v / np.linalg.norm(top.v))


def _is_zero(G) -> bool:
    if isinstance(G, EntryGradient):
        return G.nnz == 0 or not np.any(G.vals)
    if sp.issparse(G):
        return G.count_nonzero() == 0
    return not np.any(G)


def project_trace_ball(Y, tau: float) -> np.ndarray:
    """Nearest point of the nuclear-norm ball via a full SVD.

    Only the OGD baseline and tests use this; the Frank-Wolfe path never does.
    """
    Y = np.asarray(Y, dtype=float)
    try:
        U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    if s.sum() <= tau:
        return Y.copy()
    s_proj = tau * project_simplex(s / tau)
    return (U * s_proj) @ Vt


DOMAINS = {
    "simplex": Simplex,
    "ball": Ball,
    "flow": FlowPolytope,
    "matroid": UniformMatroid,
    "trace": TraceNormBall,
}
