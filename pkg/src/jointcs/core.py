"""Domain types shared by generation, solver, analysis and experiments.

Shapes follow one convention throughout: a signal ensemble is an ``(N, L)``
array whose column ``i`` is signal ``i``, measurements are ``(M, L)``, and the
sensing ensemble is a stacked ``(L, M, N)`` array. Indices are 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


class DimensionMismatchError(ValueError):
    """Raised when array shapes disagree; the message names the field."""


class SparsityViolationError(ValueError):
    """Raised when a signal ensemble breaks its joint-sparsity contract."""


class EnumerationLimitError(ValueError):
    """Raised when an exact enumeration would exceed its budget."""


class SolverStateError(RuntimeError):
    """Raised when the greedy iteration has no admissible index left."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ProblemDims:
    """Problem sizes: signal length ``n``, measurements per sensor ``m``,
    ensemble size ``l`` and joint sparsity ``k``."""

    n: int
    m: int
    l: int
    k: int

    def __post_init__(self) -> None:
        for name in ("n", "m", "l", "k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")


@dataclass(frozen=True)
class SupportSet:
    """Sorted, duplicate-free column indices in ``[0, n)``."""

    indices: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"support indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise ValueError(f"support indices must lie in [0, {self.n}): {idx}")

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> "SupportSet":
        """Build from any iterable; sorts and rejects duplicates."""
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate support indices: {idx}")
        return cls(tuple(sorted(idx)), n)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item: object) -> bool:
        return item in self.indices

    def issubset(self, other: "SupportSet") -> bool:
        return set(self.indices) <= set(other.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)


@dataclass(frozen=True)
class SignalEnsemble:
    """Jointly sparse signals ``x`` (N x L) with ground-truth support ``omega``."""

    x: np.ndarray
    omega: SupportSet

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DimensionMismatchError(f"x must be a 2-D (N, L) array, got shape {x.shape}")
        if x.shape[0] != self.omega.n:
            raise DimensionMismatchError(
                f"x has {x.shape[0]} rows but omega is defined on n={self.omega.n}"
            )
        off = np.ones(x.shape[0], dtype=bool)
        off[self.omega.as_array()] = False
        if np.any(x[off] != 0.0):
            bad = np.flatnonzero(np.any(x[off] != 0.0, axis=1))
            rows = np.flatnonzero(off)[bad]
            raise SparsityViolationError(f"nonzero entries outside omega at rows {rows.tolist()}")
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def l(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class SensingEnsemble:
    """Per-sensor matrices stored as one ``(L, M, N)`` array."""

    phis: np.ndarray
    stacked_a: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        phis = self.phis
        if isinstance(phis, (list, tuple)):
            shapes = {np.shape(p) for p in phis}
            if len(shapes) != 1:
                raise DimensionMismatchError(
                    f"phis: sensing matrices differ in shape: {sorted(shapes)}"
                )
            phis = np.stack([np.asarray(p, dtype=float) for p in phis])
        phis = np.asarray(phis, dtype=float)
        if phis.ndim == 2:
            phis = phis[None]
        if phis.ndim != 3:
            raise DimensionMismatchError(f"phis must be (L, M, N), got shape {phis.shape}")
        phis = _frozen(phis)
        object.__setattr__(self, "phis", phis)
        stacked = phis.reshape(-1, phis.shape[2])
        stacked.flags.writeable = False
        object.__setattr__(self, "stacked_a", stacked)

    @property
    def l(self) -> int:
        return self.phis.shape[0]

    @property
    def m(self) -> int:
        return self.phis.shape[1]

    @property
    def n(self) -> int:
        return self.phis.shape[2]

    @property
    def scaled_a(self) -> np.ndarray:
        """Stack divided by sqrt(L), the normalisation the recovery conditions use."""
        return self.stacked_a / math.sqrt(self.l)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.phis[i]


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Measurements ``ys`` (M x L); column ``i`` belongs to sensor ``i``."""

    ys: np.ndarray

    def __post_init__(self) -> None:
        ys = np.asarray(self.ys, dtype=float)
        if ys.ndim == 1:
            ys = ys[:, None]
        if ys.ndim != 2:
            raise DimensionMismatchError(f"ys must be a 2-D (M, L) array, got shape {ys.shape}")
        object.__setattr__(self, "ys", _frozen(ys))

    @property
    def stacked_y(self) -> np.ndarray:
        # column-major flatten puts y^1 first, then y^2, ...
        return self.ys.T.reshape(-1)

    @property
    def m(self) -> int:
        return self.ys.shape[0]

    @property
    def l(self) -> int:
        return self.ys.shape[1]


class Detection(str, enum.Enum):
    """Support detection rule: sum of magnitudes (A) or magnitude of sum (B)."""

    A = "a"
    B = "b"


class Estimation(str, enum.Enum):
    """Signal estimation rule: per-sensor (C) or stacked least squares (D)."""

    C = "c"
    D = "d"


@dataclass(frozen=True)
class SolverConfig:
    """Configuration of one SOMP variant.

    ``max_iters`` defaults to the sparsity passed to the solver. The early-stop
    threshold is ``residual_floor * ||Y||_F``.
    """

    detection: Detection = Detection.A
    estimation: Estimation = Estimation.C
    max_iters: Optional[int] = None
    residual_floor: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "detection", Detection(self.detection))
        object.__setattr__(self, "estimation", Estimation(self.estimation))
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.residual_floor > 0:
            raise ValueError(f"residual_floor must be > 0, got {self.residual_floor}")

    @property
    def name(self) -> str:
        return f"{self.detection.value}+{self.estimation.value}"


@dataclass(frozen=True)
class Problem:
    dims: ProblemDims
    signals: SignalEnsemble
    sensing: SensingEnsemble


def validate_problem(dims: ProblemDims, x: SignalEnsemble, phis: SensingEnsemble) -> Problem:
    """Check that signals and sensing matrices agree with ``dims``."""
    if x.n != dims.n:
        raise DimensionMismatchError(f"x: expected N={dims.n} rows, got {x.n}")
    if x.l != dims.l:
        raise DimensionMismatchError(f"x: expected L={dims.l} columns, got {x.l}")
    if phis.l != dims.l:
        raise DimensionMismatchError(f"phis: expected L={dims.l} matrices, got {phis.l}")
    if phis.m != dims.m or phis.n != dims.n:
        raise DimensionMismatchError(
            f"phis: expected {dims.m}x{dims.n} matrices, got {phis.m}x{phis.n}"
        )
    if len(x.omega) != dims.k:
        raise SparsityViolationError(f"omega: expected |omega|=K={dims.k}, got {len(x.omega)}")
    return Problem(dims, x, phis)
