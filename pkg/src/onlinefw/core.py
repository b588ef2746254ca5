"""Value types shared by every other module: boundary atoms, sparse iterates,
cost metadata, step-size schedules and regret traces.

Matrix quantities are identified with vectors by row-major flattening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, ParameterError, ShapeError, UnsupportedDomainError

PRUNE_BELOW = 1e-15
_UNIT_TOL = 1e-9
_SUM_TOL = 1e-9

SETTINGS = ("stoch_smooth", "stoch_nonsmooth", "adversarial")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BoundaryAtom:
    """A boundary point of a domain.

    Either a dense coordinate vector, or ``scale * outer(left, right)`` with
    unit-norm factors. Use :meth:`vector` / :meth:`rank_one` to build one.
    """

    dense: Optional[np.ndarray] = None
    scale: float = 0.0
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dense is not None:
            if self.left is not None or self.right is not None:
                raise ParameterError("atom is either dense or rank-one, not both")
            if self.dense.ndim != 1:
                raise ShapeError("dense atoms are 1-d coordinate vectors")
            return
        if self.left is None or self.right is None:
            raise ParameterError("rank-one atom needs left and right factors")
        for name, f in (("left", self.left), ("right", self.right)):
            if f.ndim != 1 or abs(np.linalg.norm(f) - 1.0) > _UNIT_TOL:
                raise ParameterError(f"rank-one {name} factor must be a unit vector")

    @classmethod
    def vector(cls, coords) -> "BoundaryAtom":
        return cls(dense=_frozen(coords))

    @classmethod
    def rank_one(cls, scale, left, right) -> "BoundaryAtom":
        return cls(scale=float(scale), left=_frozen(left), right=_frozen(right))

    @property
    def is_rank_one(self) -> bool:
        return self.dense is None

    @property
    def shape(self) -> tuple:
        if self.dense is not None:
            return self.dense.shape
        return (self.left.shape[0], self.right.shape[0])

    def to_dense(self) -> np.ndarray:
        """Flat coordinates (row-major for matrix atoms)."""
        if self.dense is not None:
            return np.array(self.dense)
        return (self.scale * np.outer(self.left, self.right)).ravel()

    def entry(self, i: int, j: int) -> float:
        if self.dense is not None:
            raise UnsupportedDomainError("entry access needs a rank-one matrix atom")
        return self.scale * self.left[i] * self.right[j]

    def __repr__(self):
        if self.dense is not None:
            return f"BoundaryAtom.vector({self.dense.tolist()!r})"
        return f"BoundaryAtom.rank_one(scale={self.scale!r}, shape={self.shape})"


@dataclass(frozen=True, eq=False)
class SparseIterate:
    """A point written as an explicit convex combination of boundary atoms.

    At round ``t`` the combination has at most ``t`` atoms.
    """

    atoms: tuple
    weights: np.ndarray
    round: int = 1

    def __post_init__(self):
        w = self.weights
        if not isinstance(w, np.ndarray) or w.flags.writeable:
            object.__setattr__(self, "weights", _frozen(w))
            w = self.weights
        if len(self.atoms) != w.shape[0]:
            raise ShapeError("one weight per atom")
        if self.round < 1:
            raise ParameterError("round is a positive integer")
        if len(self.atoms) > self.round:
            raise ParameterError(f"{len(self.atoms)} atoms at round {self.round}")
        if w.size and w.min() < 0.0:
            raise ParameterError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise ParameterError(f"weights sum to {w.sum()!r}, not 1")

    @classmethod
    def single(cls, atom: BoundaryAtom, round: int = 1) -> "SparseIterate":
        return cls(atoms=(atom,), weights=np.ones(1), round=round)

    @property
    def support_size(self) -> int:
        return len(self.atoms)

    @property
    def shape(self) -> tuple:
        return self.atoms[0].shape

    def __iter__(self) -> Iterator:
        return iter(zip(self.atoms, self.weights))


def iterate_mix(x: SparseIterate, v: BoundaryAtom, alpha: float) -> SparseIterate:
    """Return ``(1 - alpha) * x + alpha * v`` one round later.

    Atoms whose weight drops below 1e-15 are pruned.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0 or math.isnan(alpha):
        raise ParameterError(f"mixing weight {alpha!r} outside [0, 1]")
    w = np.append(x.weights * (1.0 - alpha), alpha)
    atoms = x.atoms + (v,)
    keep = w >= PRUNE_BELOW
    if not keep.all():
        idx = np.flatnonzero(keep)
        atoms = tuple(atoms[k] for k in idx)
        w = w[keep]
    w.setflags(write=False)
    return SparseIterate(atoms=atoms, weights=w, round=x.round + 1)


def iterate_densify(x: SparseIterate) -> np.ndarray:
    """Weighted sum of the atoms as a flat vector (debugging / test path)."""
    shape = x.atoms[0].shape
    out = np.zeros(int(np.prod(shape)))
    for atom, w in x:
        if atom.shape != shape:
            raise ShapeError(f"atoms of shape {atom.shape} and {shape} in one iterate")
        if atom.dense is not None:
            out += w * atom.dense
        else:
            out += (w * atom.scale * np.outer(atom.left, atom.right)).ravel()
    return out


def iterate_entry(x: SparseIterate, i: int, j: int) -> float:
    """Entry ``(i, j)`` (0-based) of a rank-one-atom iterate without densifying."""
    m, n = x.shape if x.atoms[0].is_rank_one else (None, None)
    if m is None:
        raise UnsupportedDomainError("iterate_entry needs rank-one matrix atoms")
    if not (0 <= i < m and 0 <= j < n):
        raise ParameterError(f"entry ({i}, {j}) outside {m}x{n}")
    total = 0.0
    for atom, w in x:
        if not atom.is_rank_one:
            raise UnsupportedDomainError("iterate_entry needs rank-one matrix atoms")
        total += w * atom.scale * atom.left[i] * atom.right[j]
    return total


@dataclass(frozen=True)
class CostMetadata:
    """Lipschitz, smoothness and strong-convexity constants of a cost family.

    ``beta`` and ``sigma`` use the unhalved convention
    ``f(x+y) <= f(x) + grad f(x) . y + beta |y|^2`` (resp. ``>=`` with sigma).
    """

    L: float
    dim: int
    beta: Optional[float] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError("Lipschitz constant must be positive")
        if self.beta is not None and self.beta < 0:
            raise ParameterError("beta must be nonnegative")
        if self.sigma is not None and self.sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        if self.dim < 1:
            raise ParameterError("dim must be positive")


def _branch_one(b):
    return (1.0 + b) / 2.0


def _branch_two(b, s):
    return (2.0 + 2.0 * b - s) / 3.0


@dataclass(frozen=True)
class Schedule:
    """Step-size and gap-bound parameters for the online Frank-Wolfe loop.

    Smoothness ``B t^-b``, strong convexity ``S t^-s``, gap bound
    ``C t^-d`` and step size ``t^-a`` with ``a = d - b``.
    """

    B: float
    b: float
    S: float
    s: float
    C: float
    d: float
    a: float
    L: float
    D: float
    setting: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.B < 0 or self.S < 0:
            raise ConfigurationError("B and S must be nonnegative")
        if not -1.0 <= self.b <= 0.5:
            raise ConfigurationError(f"b={self.b} outside [-1, 1/2]")
        if not 0.0 <= self.s <= 1.0:
            raise ConfigurationError(f"s={self.s} outside [0, 1]")
        if not (self.L > 0 and self.D > 0 and self.C > 0):
            raise ConfigurationError("L, D and C must be positive")
        if not 0.0 < self.d <= 1.0:
            raise ConfigurationError(f"d={self.d} outside (0, 1]")
        if self.a != self.d - self.b:
            raise ConfigurationError("a must equal d - b")
        if self.a < 0:
            raise ConfigurationError("a must be nonnegative")
        first = math.isclose(self.d, _branch_one(self.b), rel_tol=0, abs_tol=1e-12)
        second = math.isclose(self.d, _branch_two(self.b, self.s), rel_tol=0, abs_tol=1e-12)
        if not (first or second):
            raise ConfigurationError("d matches neither (1+b)/2 nor (2+2b-s)/3")
        need = max(9.0 * self.D ** 2 * self.B, 3.0 * self.L * self.D)
        if second and not first and self.S > 0:
            need = max(need, 36.0 * self.L ** 2 / self.S)
        if self.C < need * (1.0 - 1e-12):
            raise ConfigurationError(f"C={self.C} below required {need}")

    def alpha(self, t: int) -> float:
        """Mixing weight ``t^-a`` of round ``t``."""
        return float(t) ** -self.a

    def gap_bound(self, t: int) -> float:
        return self.C * float(t) ** -self.d


def schedule_from_setting(meta: CostMetadata, D: float, setting: str) -> Schedule:
    """Parameter bundle for one of the three regimes.

    ``stoch_smooth`` needs ``meta.beta``; ``stoch_nonsmooth`` uses
    ``meta.dim`` for the smoothing radius; ``adversarial`` refers to the
    regularised linear surrogate built by the engine.
    """
    L = float(meta.L)
    D = float(D)
    if not D > 0:
        raise ParameterError("diameter must be positive")
    if setting == "stoch_smooth":
        if meta.beta is None:
            raise ConfigurationError("stoch_smooth needs a smoothness constant beta")
        B, b, S, s = float(meta.beta), 0.0, 0.0, 0.0
        d = _branch_one(b)
        C = max(9.0 * D ** 2 * B, 3.0 * L * D)
    elif setting == "stoch_nonsmooth":
        B, b, S, s = math.sqrt(meta.dim) * L / D, -1.0 / 3.0, 0.0, 0.0
        d = _branch_one(b)
        C = max(9.0 * D ** 2 * B, 3.0 * L * D)
    elif setting == "adversarial":
        B, b, S, s = L / D, 0.25, L / D, 0.25
        d = _branch_two(b, s)
        C = max(9.0 * D ** 2 * B, 36.0 * L ** 2 / S, 3.0 * L * D)
    else:
        raise ConfigurationError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    return Schedule(B=B, b=b, S=S, s=s, C=C, d=d, a=d - b, L=L, D=D, setting=setting)


class TraceRecord(NamedTuple):
    t: int
    loss: float
    cum_regret: float
    delta_t: float
    support_size: int
    elapsed_ns: int


TRACE_FIELDS = TraceRecord._fields


@dataclass
class RegretTrace:
    """Per-round columns of one run. ``delta_t``/``cum_regret`` are NaN when unknown."""

    t: np.ndarray
    loss: np.ndarray
    cum_regret: np.ndarray
    delta_t: np.ndarray
    support_size: np.ndarray
    elapsed_ns: np.ndarray
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = len(self.t)
        for name in TRACE_FIELDS:
            if len(getattr(self, name)) != n:
                raise ShapeError(f"trace column {name} has the wrong length")
        if n and np.any(self.support_size > self.t):
            raise ParameterError("support size exceeds round index")

    @classmethod
    def from_records(cls, records) -> "RegretTrace":
        records = list(records)
        cols = list(zip(*records)) if records else [()] * len(TRACE_FIELDS)
        return cls(
            t=np.array(cols[0], dtype=np.int64),
            loss=np.array(cols[1], dtype=float),
            cum_regret=np.array(cols[2], dtype=float),
            delta_t=np.array(cols[3], dtype=float),
            support_size=np.array(cols[4], dtype=np.int64),
            elapsed_ns=np.array(cols[5], dtype=np.int64),
        )

    def __len__(self):
        return len(self.t)

    def records(self) -> Iterator[TraceRecord]:
        for k in range(len(self)):
            yield TraceRecord(
                int(self.t[k]), float(self.loss[k]), float(self.cum_regret[k]),
                float(self.delta_t[k]), int(self.support_size[k]), int(self.elapsed_ns[k]),
            )

    @property
    def total_ns(self) -> int:
        return int(self.elapsed_ns.sum())
