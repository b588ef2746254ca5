"""Per-round cost functions, their metadata, and delta-smoothing.

Smoothing of the absolute-value family is done in closed form. For ``u``
uniform in the unit n-ball every coordinate has the same marginal, so the
smoothed cost splits into per-coordinate terms ``h(z) = E|z + delta W|``
with ``W`` that marginal. In one dimension this is the familiar
``(z^2 + delta^2) / (2 delta)`` inside ``|z| <= delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .core import CostMetadata
from .errors import ContractViolation, ParameterError, UnsupportedDomainError
from .oracles import Ball, Domain, EntryGradient, Simplex, TraceNormBall

FAMILIES = ("quadratic", "absolute", "linear", "matrix_entry", "surrogate")


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``f(x) = |x - target|^2``."""

    target: np.ndarray
    family = "quadratic"

    def value(self, x) -> float:
        d = np.asarray(x) - self.target
        return float(d @ d)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * (np.asarray(x) - self.target)

    subgradient = gradient


@dataclass(frozen=True, eq=False)
class Absolute:
    """``f(x) = sum_i |x_i - target_i|``. Subgradient 0 at kinks."""

    target: np.ndarray
    family = "absolute"

    def value(self, x) -> float:
        return float(np.abs(np.asarray(x) - self.target).sum())

    def subgradient(self, x) -> np.ndarray:
        return np.sign(np.asarray(x) - self.target)


@dataclass(frozen=True, eq=False)
class Linear:
    """``f(x) = g . x``."""

    g: np.ndarray
    family = "linear"

    def value(self, x) -> float:
        return float(self.g @ np.asarray(x))

    def gradient(self, x=None) -> np.ndarray:
        return self.g

    subgradient = gradient


@dataclass(frozen=True)
class MatrixEntry:
    """``f(X) = (X[i, j] - rating)^2`` with 0-based ``(i, j)``."""

    i: int
    j: int
    rating: float
    family = "matrix_entry"

    def value_at(self, entry: float) -> float:
        return (entry - self.rating) ** 2

    def value(self, X) -> float:
        X = np.asarray(X)
        return self.value_at(float(X[self.i, self.j]))

    def subgradient(self, X) -> EntryGradient:
        X = np.asarray(X)
        return EntryGradient([self.i], [self.j], [2.0 * (X[self.i, self.j] - self.rating)], X.shape)


@dataclass(frozen=True, eq=False)
class Surrogate:
    """Regularised linearisation ``g . x + sigma |x - anchor|^2``."""

    g: np.ndarray
    sigma: float
    anchor: np.ndarray
    family = "surrogate"

    def value(self, x) -> float:
        d = np.asarray(x) - self.anchor
        return float(self.g @ x + self.sigma * (d @ d))

    def gradient(self, x) -> np.ndarray:
        return self.g + 2.0 * self.sigma * (np.asarray(x) - self.anchor)

    subgradient = gradient


def make_adversarial_surrogate(g_t, x1, t: int, L: float, D: float) -> Surrogate:
    """Surrogate term of round ``t``: ``sigma_t = (L / D) t^(-1/4)``.

    Raises :class:`ContractViolation` when ``|g_t|`` exceeds the declared ``L``.
    """
    g_t = np.asarray(g_t, dtype=float)
    norm = float(np.linalg.norm(g_t))
    if norm > L * (1.0 + 1e-6):
        raise ContractViolation(f"|g_t| = {norm:.6g} exceeds declared L = {L:.6g}")
    return Surrogate(g=g_t, sigma=(L / D) * float(t) ** -0.25, anchor=np.asarray(x1, dtype=float))


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------

def cost_metadata(family: str, domain: Domain, events=None) -> CostMetadata:
    """Declared constants for ``family`` on ``domain``.

    Quadratic: L = 2D (targets inside the domain), beta = sigma = 1.
    Absolute: L = sqrt(n). Linear: L = max |g| over ``events``.
    Matrix entry on a trace-norm ball: L = 2 (tau + max |y|), beta = 1.
    """
    n = domain.dim
    if family == "quadratic":
        return CostMetadata(L=2.0 * domain.diameter, dim=n, beta=1.0, sigma=1.0)
    if family == "absolute":
        return CostMetadata(L=math.sqrt(n), dim=n)
    if family == "linear":
        if events is None:
            raise ParameterError("linear metadata needs the events to bound |g|")
        L = max(float(np.linalg.norm(ev.g)) for ev in events)
        return CostMetadata(L=max(L, 1e-12), dim=n, beta=0.0, sigma=0.0)
    if family == "matrix_entry":
        if not isinstance(domain, TraceNormBall):
            raise UnsupportedDomainError("matrix-entry costs live on a trace-norm ball")
        ymax = max((abs(ev.rating) for ev in events), default=0.0) if events is not None else 0.0
        return CostMetadata(L=2.0 * (domain.tau + ymax), dim=n, beta=1.0)
    raise ParameterError(f"no metadata rule for family {family!r}")


# ---------------------------------------------------------------------------
# smoothing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothingConfig:
    """Radius schedule ``delta_t = sqrt(n) D t^(-1/3)``."""

    dim: int
    D: float
    mc_samples: int = 0
    seed: int = 0

    def delta(self, t) -> float:
        return math.sqrt(self.dim) * self.D * float(t) ** (-1.0 / 3.0)

    def deltas(self, t_max: int) -> np.ndarray:
        ts = np.arange(1, t_max + 1, dtype=float)
        return math.sqrt(self.dim) * self.D * ts ** (-1.0 / 3.0)


def smoothed_abs_value(x, target, delta: float) -> float:
    """Closed-form ball smoothing of ``sum_i |x_i - target_i|``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(target, dtype=float)).reshape(1, -1)
    value, _ = kernels.smoothed_abs_sums(x, y, np.array([float(delta)]), x.size)
    return float(value)


def smoothed_abs_gradient(x, target, delta: float) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(target, dtype=float)).reshape(1, -1)
    _, grad = kernels.smoothed_abs_sums(x, y, np.array([float(delta)]), x.size)
    return np.asarray(grad)


def sample_unit_ball(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    g = rng.standard_normal((size, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((size, 1)) ** (1.0 / n)


def sample_unit_sphere(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    g = rng.standard_normal((size, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _batch_values(f, pts: np.ndarray) -> np.ndarray:
    if isinstance(f, Absolute):
        return np.abs(pts - f.target).sum(axis=1)
    if isinstance(f, Quadratic):
        d = pts - f.target
        return np.einsum("ij,ij->i", d, d)
    if isinstance(f, Linear):
        return pts @ f.g
    return np.array([f.value(p) for p in pts])


def smoothed_value(f, x, delta: float, samples: int = 10_000, seed: int = 0) -> float:
    """``E_u f(x + delta u)`` over ``u`` uniform in the unit ball.

    Exact for the absolute family; Monte Carlo (``samples`` draws) otherwise.
    """
    if not delta > 0:
        raise ParameterError("delta must be positive")
    if samples < 1:
        raise ParameterError("need at least one sample")
    if isinstance(f, Absolute):
        return smoothed_abs_value(x, f.target, delta)
    return mc_smoothed_value(f, x, delta, samples, seed)[0]


def mc_smoothed_value(f, x, delta: float, samples: int, seed: int = 0):
    """Monte Carlo mean of ``f(x + delta u)``, ``u`` in the ball; returns (mean, stderr)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = np.random.default_rng(seed)
    vals = _batch_values(f, x + delta * sample_unit_ball(rng, x.size, samples))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0


def mc_smoothed_gradient(f, x, delta: float, samples: int, seed: int = 0):
    """Sphere-sampling estimate ``(n / delta) E_u[f(x + delta u) u]``.

    Returns (mean, per-coordinate stderr).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    rng = np.random.default_rng(seed)
    u = sample_unit_sphere(rng, n, samples)
    fx = _batch_values(f, x + delta * u)
    # subtracting f(x) leaves the mean unchanged (E u = 0) and cuts the variance
    terms = (n / delta) * (fx - _batch_values(f, x[None, :]))[:, None] * u
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / math.sqrt(samples)


# ---------------------------------------------------------------------------
# expected cost for stochastic streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpectedCost:
    """``f* = E[f_t]`` in closed form together with its minimiser over the domain."""

    value: Callable[[np.ndarray], float]
    minimizer: np.ndarray
    minimum: float

    def excess(self, x) -> float:
        return self.value(x) - self.minimum


def quadratic_expected(mean: np.ndarray, total_var: float, domain: Domain) -> ExpectedCost:
    """``f*(x) = |x - mean|^2 + total_var``."""
    mean = np.asarray(mean, dtype=float)

    def value(x):
        d = np.asarray(x) - mean
        return float(d @ d) + total_var

    if isinstance(domain, (Ball, Simplex)):
        xs = domain.project(mean)
    else:
        raise UnsupportedDomainError("closed-form f* minimiser needs a ball or simplex")
    return ExpectedCost(value=value, minimizer=xs, minimum=value(xs))


def box_absolute_expected(lo: np.ndarray, hi: np.ndarray, domain: Domain) -> ExpectedCost:
    """``f*(x) = E sum_i |x_i - y_i|`` with ``y_i ~ U[lo_i, hi_i]`` independently.

    The minimiser is the coordinate-wise median when it lies in the domain.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = hi - lo
    mid = 0.5 * (lo + hi)

    def value(x):
        x = np.asarray(x, dtype=float)
        inside = ((x - lo) ** 2 + (hi - x) ** 2) / (2.0 * width)
        return float(np.where((x >= lo) & (x <= hi), inside, np.abs(x - mid)).sum())

    if not domain.contains(mid):
        raise UnsupportedDomainError("target median must lie inside the domain")
    return ExpectedCost(value=value, minimizer=mid, minimum=value(mid))
