"""Cost-stream generators, best-in-hindsight comparators and regret accounting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .core import CostMetadata, RegretTrace, TraceRecord
from .costs import (
    Absolute,
    ExpectedCost,
    Linear,
    MatrixEntry,
    Quadratic,
    box_absolute_expected,
    cost_metadata,
    quadratic_expected,
    sample_unit_ball,
)
from .errors import InputError, ParameterError, UnsupportedDomainError
from .oracles import Ball, Domain, EntryGradient, Simplex, TraceNormBall

STREAM_FAMILIES = ("quadratic", "absolute", "linear_adversarial", "matrix_entry")
PATTERNS = ("alternating", "random", "drifting")


@dataclass(frozen=True)
class StreamSpec:
    """What to generate.

    ``support``: ``ball`` (uniform in a ball of radius ``spread`` around
    ``center``), ``two_point`` (``center +- spread e_1``), ``dirichlet``
    (flat Dirichlet on the simplex) or ``vertices`` (oracle answers for
    Gaussian costs) for quadratic streams; absolute streams draw
    each coordinate uniformly from ``center_i +- spread``. ``pattern`` selects
    the adversarial gradient sequence, scaled to norm ``L``. Matrix-entry
    streams plant a rank-``rank`` matrix of RMS entry ``scale``.
    """

    family: str
    T: int
    seed: int = 0
    dim: int = 2
    support: str = "ball"
    center: Optional[tuple] = None
    spread: float = 0.5
    pattern: str = "alternating"
    L: float = 1.0
    shape: tuple = (100, 120)
    rank: int = 5
    scale: float = 1.0
    offset: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        if self.family not in STREAM_FAMILIES:
            raise ParameterError(f"unknown stream family {self.family!r}")
        if self.T < 1:
            raise ParameterError("horizon must be positive")
        if self.family == "linear_adversarial" and self.pattern not in PATTERNS:
            raise ParameterError(f"unknown pattern {self.pattern!r}")


@dataclass
class Stream:
    events: list
    meta: Optional[CostMetadata] = None
    expected: Optional[ExpectedCost] = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.events)

    def __getitem__(self, k):
        return self.events[k]


def _center(spec, n):
    return np.zeros(n) if spec.center is None else np.asarray(spec.center, dtype=float)


def gen_stream(spec: StreamSpec, domain: Optional[Domain] = None) -> Stream:
    """Deterministic event sequence for ``spec`` (given its seed).

    With ``domain`` supplied, the stream also carries cost metadata and, for
    stochastic families, the expected cost ``f*`` with its minimiser.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.family == "quadratic":
        return _quadratic_stream(spec, domain, rng)
    if spec.family == "absolute":
        return _absolute_stream(spec, domain, rng)
    if spec.family == "linear_adversarial":
        return _linear_stream(spec, domain, rng)
    return _matrix_stream(spec, domain, rng)


def _quadratic_stream(spec, domain, rng):
    n = domain.dim if domain is not None else spec.dim
    T = spec.T
    if spec.support == "ball":
        c = _center(spec, n)
        Y = c + spec.spread * sample_unit_ball(rng, n, T)
        mean, total_var = c, n * spec.spread ** 2 / (n + 2.0)
    elif spec.support == "two_point":
        c = _center(spec, n)
        signs = rng.choice([-1.0, 1.0], size=T)
        Y = np.tile(c, (T, 1))
        Y[:, 0] += spec.spread * signs
        mean, total_var = c, spec.spread ** 2
    elif spec.support == "vertices":
        if domain is None:
            raise ParameterError("vertex targets need a domain")
        Y = np.array([domain.lmo(c).to_dense() for c in rng.standard_normal((T, n))])
        mean, total_var = None, None
    elif spec.support == "dirichlet":
        Y = rng.dirichlet(np.ones(n), size=T)
        mean, total_var = np.full(n, 1.0 / n), (1.0 - 1.0 / n) / (n + 1.0)
    else:
        raise ParameterError(f"unknown quadratic support {spec.support!r}")
    stream = Stream(events=[Quadratic(y) for y in Y])
    stream.info.update(mean=mean, total_var=total_var)
    if domain is not None:
        if isinstance(domain, Ball) and mean is not None and np.linalg.norm(mean) + (
                spec.spread if spec.support != "dirichlet" else 0) > domain.radius + 1e-12:
            raise ParameterError("targets must stay inside the ball for the declared L")
        stream.meta = cost_metadata("quadratic", domain)
        if mean is not None and isinstance(domain, (Ball, Simplex)):
            stream.expected = quadratic_expected(mean, total_var, domain)
    return stream


def _absolute_stream(spec, domain, rng):
    n = domain.dim if domain is not None else spec.dim
    c = _center(spec, n)
    lo, hi = c - spec.spread, c + spec.spread
    Y = rng.uniform(lo, hi, size=(spec.T, n))
    stream = Stream(events=[Absolute(y) for y in Y])
    stream.info.update(lo=lo, hi=hi)
    if domain is not None:
        stream.meta = cost_metadata("absolute", domain)
        stream.expected = box_absolute_expected(lo, hi, domain)
    return stream


def _linear_stream(spec, domain, rng):
    n = domain.dim if domain is not None else spec.dim
    T, L = spec.T, spec.L
    ts = np.arange(1, T + 1)
    if spec.pattern == "alternating":
        if n < 2:
            raise ParameterError("alternating pattern needs dim >= 2")
        G = np.zeros((T, n))
        G[np.arange(T), (ts - 1) % 2] = L
    elif spec.pattern == "random":
        G = L * rng.choice([-1.0, 1.0], size=(T, n)) / math.sqrt(n)
    else:
        # a direction rotating by half a turn over the horizon
        basis, _ = np.linalg.qr(rng.standard_normal((n, 2)))
        theta = math.pi * ts / T
        G = L * (np.cos(theta)[:, None] * basis[:, 0] + np.sin(theta)[:, None] * basis[:, 1])
    stream = Stream(events=[Linear(g) for g in G])
    if domain is not None:
        stream.meta = CostMetadata(L=L, dim=n, beta=0.0, sigma=0.0)
    return stream


def planted_matrix(shape, rank, scale=1.0, seed=0):
    """Rank-``rank`` factors ``U, V`` with ``U @ V.T`` of RMS entry ``scale``."""
    rng = np.random.default_rng(seed)
    m, n = shape
    U = rng.standard_normal((m, rank))
    V = rng.standard_normal((n, rank))
    rms = math.sqrt(np.mean((U @ V.T) ** 2))
    f = math.sqrt(scale / rms)
    return U * f, V * f


def _matrix_stream(spec, domain, rng):
    m, n = spec.shape if domain is None else domain.shape
    # factors come from their own child stream so they do not echo the entry draws
    U, V = planted_matrix((m, n), spec.rank, spec.scale, seed=[spec.seed, 1])
    M = U @ V.T + spec.offset
    rows = rng.integers(0, m, size=spec.T)
    cols = rng.integers(0, n, size=spec.T)
    ratings = M[rows, cols]
    if spec.noise:
        ratings = ratings + spec.noise * rng.standard_normal(spec.T)
    events = [MatrixEntry(int(i), int(j), float(y)) for i, j, y in zip(rows, cols, ratings)]
    stream = Stream(events=events)
    stream.info.update(U=U, V=V, offset=spec.offset,
                       trace_norm=float(np.linalg.svd(M, compute_uv=False).sum()))
    if domain is not None:
        stream.meta = cost_metadata("matrix_entry", domain, events)
    return stream


# ---------------------------------------------------------------------------
# best in hindsight
# ---------------------------------------------------------------------------

class Hindsight(NamedTuple):
    x: np.ndarray
    value: float
    gap: float

    @property
    def lower_bound(self) -> float:
        return self.value - self.gap


def _average_cost(events, domain):
    """(F, grad F) of the running average over ``events``."""
    fam = events[0].family
    T = len(events)
    if fam == "absolute":
        Y = np.array([ev.target for ev in events])
        return (lambda x: float(np.abs(x - Y).sum()) / T,
                lambda x: np.sign(x - Y).sum(axis=0) / T)
    if fam == "quadratic":
        Y = np.array([ev.target for ev in events])
        ybar, sq = Y.mean(axis=0), float((Y * Y).sum()) / T
        return (lambda x: float(x @ x - 2 * x @ ybar + sq), lambda x: 2 * (x - ybar))
    if fam == "linear":
        gbar = np.mean([ev.g for ev in events], axis=0)
        return (lambda x: float(gbar @ x), lambda x: gbar)
    if fam == "matrix_entry":
        r = np.array([ev.i for ev in events])
        c = np.array([ev.j for ev in events])
        y = np.array([ev.rating for ev in events])
        shape = domain.shape
        return (lambda X: float(np.mean((X.reshape(shape)[r, c] - y) ** 2)),
                lambda X: EntryGradient(r, c, 2.0 * (X.reshape(shape)[r, c] - y) / T, shape))
    raise UnsupportedDomainError(f"no offline comparator for {fam} costs")


def best_in_hindsight(domain: Domain, events, iters: Optional[int] = None) -> Hindsight:
    """Minimiser of ``F_T`` over ``domain`` and ``F_T`` there.

    Closed forms for quadratic costs on balls/simplices and linear costs on
    any vector domain (gap 0). Otherwise offline Frank-Wolfe with step
    ``2/(k+2)`` for ``iters`` iterations (default ``10 sqrt(T)``), returning the
    best iterate and the Frank-Wolfe gap at it.
    """
    events = list(getattr(events, "events", events))
    if not events:
        raise InputError("empty stream")
    fam = events[0].family
    T = len(events)
    F, gradF = _average_cost(events, domain)
    if fam == "quadratic" and isinstance(domain, (Ball, Simplex)):
        xs = domain.project(np.mean([ev.target for ev in events], axis=0))
        return Hindsight(xs, F(xs), 0.0)
    if fam == "linear" and not domain.is_matrix:
        xs = domain.lmo(gradF(None)).dense
        return Hindsight(np.array(xs), F(xs), 0.0)

    iters = int(iters if iters is not None else math.ceil(10 * math.sqrt(T)))
    ones = np.ones(domain.shape) if domain.is_matrix else np.ones(domain.dim)
    x = domain.lmo(ones).to_dense()
    best = (math.inf, x, math.inf)
    for k in range(iters + 1):
        g = gradF(x)
        v = domain.lmo(g, seed=k).to_dense()
        if isinstance(g, EntryGradient):
            gap = float(np.sum(g.vals * (x.reshape(domain.shape)[g.rows, g.cols]
                                         - v.reshape(domain.shape)[g.rows, g.cols])))
        else:
            gap = float(g @ (x - v))
        val = F(x)
        if val < best[0]:
            best = (val, x.copy(), max(gap, 0.0))
        if k == iters:
            break
        gamma = 2.0 / (k + 2.0)
        x = (1.0 - gamma) * x + gamma * v
    val, xs, gap = best
    return Hindsight(xs, val, gap)


def regret_of(losses, comparator, mode: str = "per_round") -> np.ndarray:
    """Cumulative regret series.

    ``mode="per_round"``: ``comparator`` holds the comparator's cost each round
    (a scalar is broadcast, e.g. ``f*(x*)`` in stochastic mode).
    ``mode="prefix"``: ``comparator[t]`` is ``min_x sum_{tau<=t} f_tau(x)``.
    """
    losses = np.asarray(losses, dtype=float)
    comp = np.asarray(comparator, dtype=float)
    if comp.ndim == 0:
        comp = np.full_like(losses, float(comp))
    if comp.shape != losses.shape:
        raise InputError(f"{losses.size} losses but {comp.size} comparator values")
    if mode == "per_round":
        return np.cumsum(losses - comp)
    if mode == "prefix":
        return np.cumsum(losses) - comp
    raise ParameterError(f"unknown regret mode {mode!r}")


def loglog_slope(t, y, lo_frac: float = 0.1, points: int = 200) -> float:
    """Least-squares slope of ``log y`` against ``log t`` over the tail ``[lo_frac T, T]``.

    Uses ``points`` geometrically spaced rounds so every decade weighs the same.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    T = t[-1]
    grid = np.unique(np.geomspace(max(1.0, lo_frac * T), T, points).round().astype(int))
    idx = np.searchsorted(t, grid)
    idx = idx[idx < t.size]
    ys = y[idx]
    if np.any(ys <= 0):
        raise ParameterError("log-log fit needs a positive series on the tail")
    slope, _ = np.polyfit(np.log(t[idx]), np.log(ys), 1)
    return float(slope)


def windowed_mean(values, window: int) -> np.ndarray:
    """Means of consecutive non-overlapping windows (a short tail window is kept)."""
    values = np.asarray(values, dtype=float)
    window = max(1, int(window))
    return np.array([values[k:k + window].mean() for k in range(0, values.size, window)])


# ---------------------------------------------------------------------------
# trace CSV
# ---------------------------------------------------------------------------

CSV_HEADER = ("t", "loss", "cum_regret", "delta_t", "support_size", "elapsed_ns")


def _fmt(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


class TraceCSVWriter:
    """Append-only trace writer; flushes every ``flush_every`` rows."""

    def __init__(self, path, flush_every: int = 100):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(CSV_HEADER)
        self._fh.flush()
        self.flush_every = flush_every
        self.rows = 0

    def __call__(self, rec: TraceRecord):
        self._w.writerow([_fmt(v) for v in rec])
        self.rows += 1
        if self.rows % self.flush_every == 0:
            self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace_csv(trace: RegretTrace, path):
    with TraceCSVWriter(path) as w:
        for rec in trace.records():
            w(rec)


def read_trace_csv(path) -> RegretTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise InputError(f"unexpected trace header {header}")
        recs = []
        for row in reader:
            t, loss, cum, delta, supp, ns = row
            recs.append(TraceRecord(int(t), float(loss), float(cum) if cum else math.nan,
                                    float(delta) if delta else math.nan, int(supp), int(ns)))
    return RegretTrace.from_records(recs)
