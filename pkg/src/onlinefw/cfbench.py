"""Online collaborative filtering: OFW against projected OGD on a trace-norm ball.

Ratings files are CSV lines ``user,item,rating`` with 1-based indices and an
optional header; in memory every index is 0-based.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .baselines import OgdConfig, ogd_run
from .core import CostMetadata, RegretTrace
from .costs import MatrixEntry
from .errors import InputError, ParameterError, ParseError
from .harness import StreamSpec, TraceCSVWriter, gen_stream, windowed_mean
from .ofw import RunConfig, run_ofw
from .oracles import DEFAULT_TOL, TraceNormBall

ALGORITHMS = ("ofw", "ogd", "both")


class RatingRecord(NamedTuple):
    user: int
    item: int
    rating: float

    def event(self) -> MatrixEntry:
        return MatrixEntry(self.user, self.item, self.rating)


class Ratings(NamedTuple):
    m: int
    n: int
    records: list


@dataclass
class BenchConfig:
    m: int
    n: int
    tau: float
    T: int
    seed: int = 0
    algorithms: str = "both"
    tol: float = DEFAULT_TOL
    out: Optional[str] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if self.T < 1:
            raise ParameterError("horizon must be positive")
        if self.algorithms not in ALGORITHMS:
            raise ParameterError(f"algorithms must be one of {ALGORITHMS}")

    @property
    def window(self) -> int:
        return max(1, self.T // 20)


def parse_ratings(text: str, m: Optional[int] = None, n: Optional[int] = None) -> Ratings:
    records = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 3:
            raise ParseError(f"expected user,item,rating, got {len(row)} fields", lineno)
        try:
            i, j, y = int(row[0]), int(row[1]), float(row[2])
        except ValueError:
            if not records and lineno == 1:
                continue  # header
            raise ParseError(f"cannot parse {','.join(row)!r}", lineno) from None
        if i < 1 or j < 1:
            raise ParseError("indices are 1-based and must be positive", lineno)
        if not math.isfinite(y):
            raise ParseError("rating must be finite", lineno)
        records.append(RatingRecord(i - 1, j - 1, y))
    if not records:
        raise InputError("no ratings found")
    mm = max(r.user for r in records) + 1
    nn = max(r.item for r in records) + 1
    if m is not None:
        if m < mm:
            raise InputError(f"user index {mm} exceeds declared m={m}")
        mm = m
    if n is not None:
        if n < nn:
            raise InputError(f"item index {nn} exceeds declared n={n}")
        nn = n
    return Ratings(mm, nn, records)


def load_ratings(path, m: Optional[int] = None, n: Optional[int] = None) -> Ratings:
    """Records in file order; ``(m, n)`` default to the largest indices seen."""
    return parse_ratings(Path(path).read_text(), m, n)


def save_ratings(path, records, header: bool = True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["user", "item", "rating"])
        for r in records:
            w.writerow([r.user + 1, r.item + 1, repr(float(r.rating))])


def planted_records(m: int = 100, n: int = 120, rank: int = 5, T: int = 5000, seed: int = 0,
                    noise: float = 0.0):
    """Ratings sampled uniformly from a planted rank-``rank`` matrix.

    Returns ``(records, trace_norm)``; the trace norm is the natural ``tau``.
    """
    stream = gen_stream(StreamSpec("matrix_entry", T=T, seed=seed, shape=(m, n), rank=rank,
                                   noise=noise))
    recs = [RatingRecord(ev.i, ev.j, ev.rating) for ev in stream.events]
    return recs, stream.info["trace_norm"]


class CompareResult(NamedTuple):
    ofw_trace: Optional[RegretTrace]
    ogd_trace: Optional[RegretTrace]
    summary: dict


def _out_path(out, tag):
    p = Path(out)
    return p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}")


def _window_stats(trace, window):
    w = windowed_mean(trace.loss, window)
    return w[0], w[-1]


def run_cf_compare(config: BenchConfig, records) -> CompareResult:
    """Run the selected learners on the first ``T`` records and summarise.

    OFW uses the smooth stochastic schedule with ``beta = 1`` and
    ``L = 2 (tau + max |y|)``. The two runs execute one after the other.
    """
    records = list(records)
    if len(records) < config.T:
        raise InputError(f"{len(records)} ratings, horizon is {config.T}")
    for k, r in enumerate(records[: config.T]):
        if not (0 <= r.user < config.m and 0 <= r.item < config.n):
            raise InputError(f"record {k + 1} outside a {config.m}x{config.n} matrix")
    events = [r.event() for r in records[: config.T]]
    domain = TraceNormBall(config.m, config.n, config.tau, tol=config.tol)
    ymax = max(abs(ev.rating) for ev in events)
    meta = CostMetadata(L=2.0 * (config.tau + ymax), dim=config.m * config.n, beta=1.0)

    summary = {"T": config.T, "window": config.window, "tau": config.tau}
    ofw_trace = ogd_trace = None
    if config.algorithms in ("ofw", "both"):
        sink = TraceCSVWriter(_out_path(config.out, "ofw")) if config.out else None
        try:
            ofw_trace = run_ofw(domain, events, "stoch_smooth",
                                RunConfig(T=config.T, seed=config.seed, meta=meta,
                                          cache_check_every=500, sink=sink))
        finally:
            if sink is not None:
                sink.close()
        first, last = _window_stats(ofw_trace, config.window)
        summary.update(
            ofw_total_ns=ofw_trace.total_ns,
            ofw_mean_round_ns=ofw_trace.total_ns / config.T,
            ofw_first_window_loss=first,
            ofw_final_window_loss=last,
            ofw_max_support=ofw_trace.info["max_support"],
            ofw_cache_deviation=ofw_trace.info["cache_deviation"],
        )
    if config.algorithms in ("ogd", "both"):
        sink = TraceCSVWriter(_out_path(config.out, "ogd")) if config.out else None
        try:
            ogd_trace = ogd_run(domain, events, OgdConfig.for_domain(domain, meta),
                                T=config.T, run=RunConfig(sink=sink))
        finally:
            if sink is not None:
                sink.close()
        first, last = _window_stats(ogd_trace, config.window)
        summary.update(
            ogd_total_ns=ogd_trace.total_ns,
            ogd_mean_round_ns=ogd_trace.total_ns / config.T,
            ogd_first_window_loss=first,
            ogd_final_window_loss=last,
        )
    if ofw_trace is not None and ogd_trace is not None:
        ofw_w = windowed_mean(ofw_trace.elapsed_ns, config.window)
        ogd_w = windowed_mean(ogd_trace.elapsed_ns, config.window)
        summary["time_ratio"] = ogd_trace.total_ns / max(ofw_trace.total_ns, 1)
        summary["time_ratio_series"] = ogd_w / np.maximum(ofw_w, 1e-9)
    return CompareResult(ofw_trace, ogd_trace, summary)


def format_summary(summary: dict) -> str:
    """``key=value`` lines; series are comma-joined."""
    lines = []
    for key, val in summary.items():
        if isinstance(val, np.ndarray):
            val = ",".join(f"{v:.4g}" for v in val)
        elif isinstance(val, float):
            val = f"{val:.6g}"
        lines.append(f"{key}={val}")
    return "\n".join(lines)
