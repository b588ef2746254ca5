"""Online Frank-Wolfe.

Each round the learner plays ``x_t``, observes ``f_t``, folds it into a
running average ``F_t``, calls the domain's linear-minimization oracle on
``grad F_t(x_t)`` and mixes the returned boundary point in with weight
``t^-a``. The three regimes differ only in what gets averaged:

* ``stoch_smooth`` -- the costs themselves
* ``stoch_nonsmooth`` -- ball-smoothed absolute costs with radius delta_t
* ``adversarial`` -- linearised costs plus a shrinking proximity term

Every cost family keeps O(1)-per-round sufficient statistics except the
smoothed absolute family, which has to revisit all past targets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    BoundaryAtom,
    PRUNE_BELOW,
    CostMetadata,
    RegretTrace,
    Schedule,
    SparseIterate,
    TraceRecord,
    iterate_densify,
    iterate_entry,
    iterate_mix,
    schedule_from_setting,
)
from .costs import (
    Absolute,
    ExpectedCost,
    Linear,
    MatrixEntry,
    Quadratic,
    SmoothingConfig,
    Surrogate,
    cost_metadata,
    make_adversarial_surrogate,
)
from .errors import ConfigurationError, InputError, UnsupportedDomainError
from .oracles import Ball, Domain, EntryGradient, Simplex, TraceNormBall


class _Growable:
    """Append-only float/int buffer with amortised doubling."""

    def __init__(self, width=None, dtype=float, capacity=64):
        shape = (capacity,) if width is None else (capacity, width)
        self._buf = np.zeros(shape, dtype=dtype)
        self.size = 0

    def append(self, value):
        if self.size == self._buf.shape[0]:
            new = np.zeros((2 * self._buf.shape[0],) + self._buf.shape[1:], dtype=self._buf.dtype)
            new[: self.size] = self._buf[: self.size]
            self._buf = new
        self._buf[self.size] = value
        self.size += 1

    @property
    def view(self) -> np.ndarray:
        return self._buf[: self.size]


# ---------------------------------------------------------------------------
# running averages F_t
# ---------------------------------------------------------------------------

class AggregateState:
    """Sufficient statistics of ``F_t = (1/t) sum f_tau`` for one cost family."""

    family = None

    def __init__(self):
        self.t = 0

    def absorb(self, event, **kwargs):
        raise NotImplementedError

    def gradient(self, x, smoothing=None):
        raise NotImplementedError

    def value(self, x) -> float:
        raise NotImplementedError

    def minimizer(self, domain: Domain):
        """Closed-form ``argmin_K F_t`` or ``None`` when there is none."""
        return None


class QuadraticAggregate(AggregateState):
    family = "quadratic"

    def __init__(self, dim):
        super().__init__()
        self.sum_y = np.zeros(dim)
        self.sum_sq = 0.0

    def absorb(self, event: Quadratic, **kwargs):
        self.t += 1
        self.sum_y += event.target
        self.sum_sq += float(event.target @ event.target)

    @property
    def mean(self):
        return self.sum_y / self.t

    def gradient(self, x, smoothing=None):
        return 2.0 * (x - self.mean)

    def value(self, x):
        x = np.asarray(x)
        return float(x @ x - 2.0 * (x @ self.mean) + self.sum_sq / self.t)

    def minimizer(self, domain):
        if isinstance(domain, (Ball, Simplex)):
            return domain.project(self.mean)
        return None


class LinearAggregate(AggregateState):
    family = "linear"

    def __init__(self, dim):
        super().__init__()
        self.sum_g = np.zeros(dim)

    def absorb(self, event: Linear, **kwargs):
        self.t += 1
        self.sum_g += event.g

    @property
    def mean(self):
        return self.sum_g / self.t

    def gradient(self, x, smoothing=None):
        return self.mean

    def value(self, x):
        return float(self.mean @ x)

    def minimizer(self, domain):
        if domain.is_matrix:
            return None
        return domain.lmo(self.mean).dense


class SurrogateAggregate(AggregateState):
    """Average of ``g_tau . x + sigma_tau |x - x_1|^2``."""

    family = "surrogate"

    def __init__(self, anchor):
        super().__init__()
        self.anchor = np.asarray(anchor, dtype=float)
        self.sum_g = np.zeros_like(self.anchor)
        self.sum_sigma = 0.0

    def absorb(self, event: Surrogate, **kwargs):
        self.t += 1
        self.sum_g += event.g
        self.sum_sigma += event.sigma

    @property
    def mean_g(self):
        return self.sum_g / self.t

    @property
    def mean_sigma(self):
        return self.sum_sigma / self.t

    def gradient(self, x, smoothing=None):
        return self.mean_g + 2.0 * self.mean_sigma * (x - self.anchor)

    def value(self, x):
        d = np.asarray(x) - self.anchor
        return float(self.mean_g @ x + self.mean_sigma * (d @ d))

    def minimizer(self, domain):
        if isinstance(domain, (Ball, Simplex)):
            return domain.project(self.anchor - self.mean_g / (2.0 * self.mean_sigma))
        return None


class AbsoluteAggregate(AggregateState):
    """Stores every target; evaluating the average costs O(t n) per call."""

    family = "absolute"

    def __init__(self, dim):
        super().__init__()
        self.targets = _Growable(width=dim)
        self.deltas = _Growable()

    def absorb(self, event: Absolute, delta: Optional[float] = None, **kwargs):
        self.t += 1
        self.targets.append(event.target)
        self.deltas.append(np.nan if delta is None else delta)

    def gradient(self, x, smoothing=None):
        if smoothing is None:
            return np.sign(x[None, :] - self.targets.view).sum(axis=0) / self.t
        _, g = kernels.smoothed_abs_sums(
            np.ascontiguousarray(x, dtype=float), self.targets.view, self.deltas.view, x.size
        )
        return np.asarray(g) / self.t

    def value(self, x):
        return float(np.abs(x[None, :] - self.targets.view).sum() / self.t)

    def smoothed_value(self, x):
        v, _ = kernels.smoothed_abs_sums(
            np.ascontiguousarray(x, dtype=float), self.targets.view, self.deltas.view, x.size
        )
        return float(v) / self.t


class MatrixEntryAggregate(AggregateState):
    """Observed entries plus a cache of the iterate on those entries.

    The cache is advanced under each rank-one mix in O(t), so the iterate
    is never formed as a dense matrix.
    """

    family = "matrix_entry"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)
        self.rows = _Growable(dtype=np.int64)
        self.cols = _Growable(dtype=np.int64)
        self.ratings = _Growable()
        self.cache = _Growable()

    def absorb(self, event: MatrixEntry, entry: float = 0.0, **kwargs):
        self.t += 1
        self.rows.append(event.i)
        self.cols.append(event.j)
        self.ratings.append(event.rating)
        self.cache.append(entry)

    def gradient(self, x=None, smoothing=None):
        resid = (2.0 / self.t) * (self.cache.view - self.ratings.view)
        return EntryGradient(self.rows.view, self.cols.view, resid, self.shape)

    def value(self, x=None):
        r = self.cache.view - self.ratings.view
        return float(r @ r) / self.t

    def on_mix(self, atom: BoundaryAtom, alpha: float):
        kernels.mix_entry_cache(
            self.cache.view, self.rows.view, self.cols.view,
            float(alpha), float(atom.scale), atom.left, atom.right,
        )

    def spot_check(self, x: SparseIterate, rng: np.random.Generator, k: int = 20) -> float:
        """Largest deviation between cached and recomputed entries over ``k`` draws."""
        if self.t == 0:
            return 0.0
        idx = rng.integers(0, self.t, size=k)
        cache = self.cache.view
        rows, cols = self.rows.view, self.cols.view
        return max(abs(cache[p] - iterate_entry(x, int(rows[p]), int(cols[p]))) for p in idx)


def make_aggregate(family: str, domain: Domain, anchor=None) -> AggregateState:
    if family == "quadratic":
        return QuadraticAggregate(domain.dim)
    if family == "linear":
        return LinearAggregate(domain.dim)
    if family == "absolute":
        return AbsoluteAggregate(domain.dim)
    if family == "surrogate":
        return SurrogateAggregate(anchor)
    if family == "matrix_entry":
        if not isinstance(domain, TraceNormBall):
            raise UnsupportedDomainError("matrix-entry costs need a trace-norm ball")
        return MatrixEntryAggregate(domain.shape)
    raise ConfigurationError(f"unknown cost family {family!r}")


def aggregate_gradient(state: AggregateState, x, schedule: Optional[Schedule] = None,
                       smoothing: Optional[SmoothingConfig] = None, rng_seed=None):
    """``grad F_t`` at ``x`` (a dense point or a :class:`SparseIterate`).

    Matrix-entry states ignore ``x`` and read their entry cache; they return an
    :class:`EntryGradient`. Smoothing is only meaningful for absolute costs.
    """
    if state.t < 1:
        raise InputError("aggregate has not absorbed any event yet")
    if smoothing is not None and state.family != "absolute":
        raise ConfigurationError(f"smoothing is not defined for {state.family} costs")
    if isinstance(x, SparseIterate):
        x = None if state.family == "matrix_entry" else iterate_densify(x)
    elif x is not None:
        x = np.asarray(x, dtype=float)
    return state.gradient(x, smoothing)


# ---------------------------------------------------------------------------
# one round, and the lazy sampler
# ---------------------------------------------------------------------------

class OFWStep(NamedTuple):
    x_next: SparseIterate
    v: BoundaryAtom
    alpha: float


def ofw_round(x: SparseIterate, grad, schedule: Schedule, lmo: Callable) -> OFWStep:
    """``v = lmo(grad)``, ``x_next = (1 - t^-a) x + t^-a v`` with ``t = x.round``."""
    alpha = schedule.alpha(x.round)
    v = lmo(grad)
    return OFWStep(iterate_mix(x, v, alpha), v, alpha)


def sample_play(x: SparseIterate, prev_atom: Optional[BoundaryAtom], v_new: BoundaryAtom,
                t: int, schedule: Schedule, rng: np.random.Generator) -> BoundaryAtom:
    """Lazy play: keep ``prev_atom`` unless a ``t^-a`` coin says to switch to ``v_new``.

    If ``prev_atom`` was distributed as the weights of ``x`` (round ``t``), the
    result is distributed as the weights of the next iterate. ``x`` is not
    read; it is accepted so call sites line up with :func:`ofw_round`.
    """
    if prev_atom is None or t <= 1:
        return v_new
    return v_new if rng.random() < schedule.alpha(t) else prev_atom


# ---------------------------------------------------------------------------
# the learner
# ---------------------------------------------------------------------------

class _FactorStack:
    """Rank-one atoms of the live iterate stacked row-wise, for O(support) entry reads."""

    def __init__(self, atom: BoundaryAtom):
        m, n = atom.shape
        self.left = _Growable(width=m)
        self.right = _Growable(width=n)
        self.scale = _Growable()
        self.rows = np.zeros(0, dtype=np.int64)
        self.push(atom)

    def push(self, atom: BoundaryAtom, keep: Optional[np.ndarray] = None):
        """Append ``atom``; ``keep`` masks the old rows plus the new one."""
        k = self.scale.size
        self.left.append(atom.left)
        self.right.append(atom.right)
        self.scale.append(atom.scale)
        rows = np.append(self.rows, k)
        self.rows = rows if keep is None else rows[keep]

    def entry(self, weights: np.ndarray, i: int, j: int) -> float:
        r = self.rows
        return float(weights @ (self.scale.view[r] * self.left.view[r, i] * self.right.view[r, j]))


class StepInfo(NamedTuple):
    loss: float
    alpha: float
    atom: BoundaryAtom
    delta_t: float
    elapsed_ns: int


class OnlineFrankWolfe:
    """Stateful OFW learner over ``domain`` for one cost family and setting.

    ``point`` is the current play as a dense vector (vector domains only);
    ``iterate`` is the same point as an explicit convex combination.
    """

    def __init__(self, domain: Domain, setting: str, family: str, meta: CostMetadata,
                 seed: int = 0, mc_samples: int = 0, D: Optional[float] = None):
        self.domain = domain
        self.setting = setting
        self.family = family
        self.meta = meta
        self.seed = int(seed)
        kernels.warm_up()
        D = domain.diameter if D is None else float(D)
        self.schedule = schedule_from_setting(meta, D, setting)
        self.smoothing = None
        if setting == "stoch_smooth" and family == "absolute":
            raise ConfigurationError("absolute costs are non-smooth; use stoch_nonsmooth")
        if setting == "stoch_nonsmooth":
            if family != "absolute":
                raise ConfigurationError(f"smoothing is not defined for {family} costs")
            self.smoothing = SmoothingConfig(dim=meta.dim, D=D, mc_samples=mc_samples, seed=seed)
        if domain.is_matrix and (family != "matrix_entry" or setting == "adversarial"):
            raise UnsupportedDomainError("trace-norm runs support stochastic matrix-entry costs only")

        first = domain.lmo(np.ones(domain.shape) if domain.is_matrix else np.ones(domain.dim),
                           seed=self._lmo_seed(0))
        self.iterate = SparseIterate.single(first)
        self._factors = _FactorStack(first) if domain.is_matrix else None
        self.point = None if domain.is_matrix else np.array(first.to_dense())
        self.x1 = None if self.point is None else self.point.copy()

        if setting == "adversarial":
            self.state = make_aggregate("surrogate", domain, anchor=self.x1)
        else:
            self.state = make_aggregate(family, domain)

    @property
    def t(self) -> int:
        return self.iterate.round

    def _lmo_seed(self, t):
        return (self.seed * 1_000_003 + t) % (2 ** 32)

    def entry(self, i, j) -> float:
        if self._factors is not None:
            return self._factors.entry(self.iterate.weights, i, j)
        return iterate_entry(self.iterate, i, j)

    def loss(self, event) -> float:
        if isinstance(event, MatrixEntry):
            return event.value_at(self.entry(event.i, event.j))
        return event.value(self.point)

    def step(self, event) -> StepInfo:
        """Play the current point against ``event`` and advance one round."""
        t = self.t
        x_t = self.point
        if isinstance(event, MatrixEntry):
            entry = self.entry(event.i, event.j)
            loss = event.value_at(entry)
        else:
            entry = None
            loss = event.value(x_t)

        start = time.perf_counter_ns()
        if self.setting == "adversarial":
            g = event.subgradient(x_t)
            term = make_adversarial_surrogate(g, self.x1, t, self.meta.L, self.schedule.D)
            self.state.absorb(term)
        elif self.smoothing is not None:
            self.state.absorb(event, delta=self.smoothing.delta(t))
        else:
            self.state.absorb(event, entry=entry)
        grad = self.state.gradient(x_t, self.smoothing)
        lmo_seed = self._lmo_seed(t)
        step = ofw_round(self.iterate, grad, self.schedule,
                         lambda c: self.domain.lmo(c, seed=lmo_seed))
        if self.point is not None:
            self.point = (1.0 - step.alpha) * self.point + step.alpha * step.v.dense
        else:
            self.state.on_mix(step.v, step.alpha)
            keep = np.append(self.iterate.weights * (1.0 - step.alpha), step.alpha) >= PRUNE_BELOW
            self._factors.push(step.v, keep)
        self.iterate = step.x_next
        elapsed = time.perf_counter_ns() - start

        delta = np.nan
        if x_t is not None:
            xs = self.state.minimizer(self.domain)
            if xs is not None:
                delta = self.state.value(x_t) - self.state.value(xs)
        return StepInfo(loss, step.alpha, step.v, delta, elapsed)


# ---------------------------------------------------------------------------
# regret bookkeeping shared with the OGD baseline
# ---------------------------------------------------------------------------

class RegretBook:
    """Cumulative regret of a run.

    With ``expected`` set, regret is ``sum f*(x_t) - f*(x*)`` (stochastic
    regret). Otherwise it is measured against the per-prefix best point in
    hindsight whenever that has a closed form, and NaN when it does not.
    """

    def __init__(self, domain: Domain, family: str, expected: Optional[ExpectedCost] = None):
        self.domain = domain
        self.expected = expected
        self.costs = None
        self.total_loss = 0.0
        self.total_excess = 0.0
        if expected is None and family in ("quadratic", "linear") and not domain.is_matrix:
            self.costs = make_aggregate(family, domain)

    def update(self, event, loss: float, x_t) -> float:
        self.total_loss += loss
        if self.expected is not None:
            self.total_excess += self.expected.excess(x_t)
            return self.total_excess
        if self.costs is None:
            return np.nan
        self.costs.absorb(event)
        xs = self.costs.minimizer(self.domain)
        if xs is None:
            return np.nan
        return self.total_loss - self.costs.t * self.costs.value(xs)


def _family_of(events) -> str:
    fams = {ev.family for ev in events}
    if len(fams) != 1:
        raise InputError(f"stream mixes cost families {sorted(fams)}")
    return fams.pop()


def _resolve_stream(stream, T):
    events = getattr(stream, "events", stream)
    if T is None:
        T = len(events)
    if len(events) < T:
        raise InputError(f"stream has {len(events)} events, horizon is {T}")
    return list(events[:T]), T


@dataclass
class RunConfig:
    T: Optional[int] = None
    seed: int = 0
    mc_samples: int = 0
    meta: Optional[CostMetadata] = None
    expected: Optional[ExpectedCost] = None
    cache_check_every: int = 0
    sink: Optional[Callable[[TraceRecord], None]] = None
    keep_atoms: bool = False
    D: Optional[float] = None


def run_ofw(domain: Domain, stream, setting: str, config: Optional[RunConfig] = None,
            **overrides) -> RegretTrace:
    """Run OFW for ``T`` rounds and return the per-round trace.

    ``stream`` is a sequence of cost events or any object with an ``events``
    attribute (and optionally ``meta`` / ``expected``). ``x_1`` is the oracle's
    answer for the all-ones direction. Timing covers absorbing the cost,
    the gradient, the oracle call and the mix.
    """
    config = config or RunConfig()
    for k, v in overrides.items():
        setattr(config, k, v)
    events, T = _resolve_stream(stream, config.T)
    family = _family_of(events)
    meta = config.meta or getattr(stream, "meta", None) or cost_metadata(family, domain, events)
    expected = config.expected or getattr(stream, "expected", None)

    learner = OnlineFrankWolfe(domain, setting, family, meta, seed=config.seed,
                               mc_samples=config.mc_samples, D=config.D)
    book = RegretBook(domain, family, expected)
    check_rng = np.random.default_rng(config.seed + 7919)
    cache_dev = 0.0
    records = []
    played = [] if config.keep_atoms else None
    for ev in events:
        t = learner.t
        x_t = learner.point
        support = learner.iterate.support_size
        if played is not None:
            played.append(learner.iterate)
        info = learner.step(ev)
        cum = book.update(ev, info.loss, x_t)
        rec = TraceRecord(t, info.loss, cum, info.delta_t, support, info.elapsed_ns)
        records.append(rec)
        if config.sink is not None:
            config.sink(rec)
        if config.cache_check_every and learner.t % config.cache_check_every == 0 \
                and isinstance(learner.state, MatrixEntryAggregate):
            cache_dev = max(cache_dev, learner.state.spot_check(learner.iterate, check_rng))

    trace = RegretTrace.from_records(records)
    trace.info.update(
        setting=setting, family=family, schedule=learner.schedule,
        final_iterate=learner.iterate, max_support=int(max(r.support_size for r in records)),
        cache_deviation=cache_dev,
    )
    if played is not None:
        trace.info["iterates"] = played
    return trace
