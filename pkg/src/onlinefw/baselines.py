"""Projected online gradient descent, the comparison learner."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CostMetadata, RegretTrace, TraceRecord
from .costs import MatrixEntry, cost_metadata
from .errors import ParameterError, UnsupportedDomainError
from .ofw import RegretBook, RunConfig, _family_of, _resolve_stream, make_aggregate
from .oracles import Domain


@dataclass
class OgdConfig:
    """Step sizes ``eta_t = D / (L sqrt(t))`` unless ``eta`` overrides them."""

    D: float
    L: float
    projector: Callable
    x1: np.ndarray
    eta: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if not (self.D > 0 and self.L > 0):
            raise ParameterError("D and L must be positive")

    def eta_t(self, t: int) -> float:
        if self.eta is not None:
            return float(self.eta(t))
        return self.D / (self.L * math.sqrt(t))

    @classmethod
    def for_domain(cls, domain: Domain, meta: CostMetadata, eta=None) -> "OgdConfig":
        if not domain.can_project:
            raise UnsupportedDomainError(f"no projection oracle for {type(domain).__name__}")
        ones = np.ones(domain.shape) if domain.is_matrix else np.ones(domain.dim)
        x1 = domain.lmo(ones, seed=0).to_dense()
        if domain.is_matrix:
            x1 = x1.reshape(domain.shape)
        return cls(D=domain.diameter, L=meta.L, projector=domain.project, x1=x1, eta=eta)


def ogd_round(x, g, eta: float, projector: Callable) -> np.ndarray:
    """``projector(x - eta g)``."""
    return projector(np.asarray(x) - eta * np.asarray(g))


class OnlineGradientDescent:
    """OGD learner. On the trace-norm ball the iterate is a dense matrix."""

    def __init__(self, domain: Domain, config: OgdConfig):
        self.domain = domain
        self.config = config
        self.x = np.array(config.x1, dtype=float)
        self.t = 1

    def loss(self, event) -> float:
        return event.value(self.x)

    def step(self, event):
        """Play ``x_t`` against ``event``; returns (loss, elapsed_ns)."""
        loss = self.loss(event)
        start = time.perf_counter_ns()
        if isinstance(event, MatrixEntry):
            g = np.zeros_like(self.x)
            g[event.i, event.j] = 2.0 * (self.x[event.i, event.j] - event.rating)
        else:
            g = event.subgradient(self.x)
        self.x = ogd_round(self.x, g, self.config.eta_t(self.t), self.config.projector)
        elapsed = time.perf_counter_ns() - start
        self.t += 1
        return loss, elapsed


def ogd_run(domain: Domain, stream, config: Optional[OgdConfig] = None,
            T: Optional[int] = None, run: Optional[RunConfig] = None) -> RegretTrace:
    """OGD on the instantaneous gradients; same trace fields as OFW.

    ``support_size`` is recorded as 1 (the play is one point, not a mixture);
    ``delta_t`` is the gap of the running average where it has a closed form.
    """
    run = run or RunConfig()
    events, T = _resolve_stream(stream, T if T is not None else run.T)
    family = _family_of(events)
    meta = run.meta or getattr(stream, "meta", None) or cost_metadata(family, domain, events)
    expected = run.expected or getattr(stream, "expected", None)
    config = config or OgdConfig.for_domain(domain, meta)

    learner = OnlineGradientDescent(domain, config)
    book = RegretBook(domain, family, expected)
    gap_state = None
    if not domain.is_matrix and family in ("quadratic", "linear"):
        gap_state = make_aggregate(family, domain)
    records = []
    for ev in events:
        t = learner.t
        x_t = learner.x
        loss, elapsed = learner.step(ev)
        cum = book.update(ev, loss, x_t) if not domain.is_matrix else np.nan
        delta = np.nan
        if gap_state is not None:
            gap_state.absorb(ev)
            xs = gap_state.minimizer(domain)
            delta = gap_state.value(x_t) - gap_state.value(xs)
        rec = TraceRecord(t, loss, cum, delta, 1, elapsed)
        records.append(rec)
        if run.sink is not None:
            run.sink(rec)
    trace = RegretTrace.from_records(records)
    trace.info.update(algorithm="ogd", family=family, final_point=learner.x)
    return trace
