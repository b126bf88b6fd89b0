"""Ensemble geometry constants, restricted isometry constants and the
sufficient recovery conditions built from them.

The epsilon constants maximise over every nonempty subset ``U`` of the true
support, so they are computed by exact enumeration (``2**K - 1`` subsets,
``K <= 24``). Subset sums are built from a lookup table over the first 16
support indices, with the remaining indices swept chunk by chunk, so memory
stays at ``2**16`` rows.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import EnumerationLimitError, SensingEnsemble, SignalEnsemble
from .generation import Seed

MAX_ENUM_K = 24
RIC_BUDGET = 10**6

_LOW_BITS = 16
_RIC_CHUNK = 20_000


class DomainError(ValueError):
    """Raised when a condition is evaluated outside its domain."""


def _subset_sums(sq: np.ndarray) -> Iterator[np.ndarray]:
    """Yield column sums of ``sq`` (K x C) over every nonempty row subset.

    Chunks come in no particular subset order; only order-free reductions
    (max/min) should be applied to them.
    """
    k, c = sq.shape
    if k > MAX_ENUM_K:
        raise EnumerationLimitError(
            f"K={k} exceeds the subset enumeration limit K<={MAX_ENUM_K}; "
            "sampled estimation is not supported for the epsilon constants"
        )
    lo = min(k, _LOW_BITS)
    low = np.zeros((1, c))
    for i in range(lo):
        low = np.concatenate([low, low + sq[i]])
    high = np.zeros((1, c))
    for i in range(lo, k):
        high = np.concatenate([high, high + sq[i]])
    for h, offset in enumerate(high):
        chunk = low + offset
        yield chunk[1:] if h == 0 else chunk


def _on_support(x: SignalEnsemble) -> np.ndarray:
    return x.x[x.omega.as_array()]


def epsilon1(x: SignalEnsemble, conservative: bool = False) -> float:
    """Norm-ratio uniformity of the ensemble.

    For every nonempty ``U`` inside the support, the smallest over signals of
    ``||x^j_U||_2`` is divided by the largest; the result is the maximum of
    that ratio over ``U`` (or the minimum with ``conservative=True``).
    A subset on which every signal vanishes contributes a ratio of 0.
    """
    sq = _on_support(x) ** 2
    best = -np.inf if not conservative else np.inf
    for chunk in _subset_sums(sq):
        hi = chunk.max(axis=1)
        lo = chunk.min(axis=1)
        ratio = np.sqrt(np.divide(lo, hi, out=np.zeros_like(lo), where=hi > 0))
        best = max(best, ratio.max()) if not conservative else min(best, ratio.min())
    return float(best)


def ensemble_mean(x: SignalEnsemble) -> np.ndarray:
    return x.x.mean(axis=1)


def epsilon2(x: SignalEnsemble) -> float:
    """Spread of the signals around their mean, restricted to ``U``.

    ``max_U sum_i ||x^i_U - x*_U||_2 / (L ||x*_U||_2)``; returns ``inf`` when
    ``x*`` vanishes on some subset.
    """
    xs = _on_support(x)
    mean = xs.mean(axis=1)
    if np.any(mean == 0.0):
        return math.inf
    sq = np.column_stack([(xs - mean[:, None]) ** 2, mean**2])
    best = 0.0
    for chunk in _subset_sums(sq):
        num = np.sqrt(chunk[:, :-1]).sum(axis=1)
        den = x.l * np.sqrt(chunk[:, -1])
        best = max(best, float((num / den).max()))
    return best


def epsilon3(x: SignalEnsemble) -> float:
    """Full-vector spread ``sum_i ||x^i - x*||_2`` over ``L min_U ||x*_U||_2``.

    The numerator does not depend on ``U`` and the restricted mean norm is
    smallest on a singleton, so the maximum over ``U`` is attained at the
    support index where ``|x*|`` is smallest.
    """
    mean = ensemble_mean(x)
    num = float(np.linalg.norm(x.x - mean[:, None], axis=0).sum())
    den = x.l * float(np.abs(mean[x.omega.as_array()]).min())
    if den == 0.0:
        return math.inf
    return num / den


@dataclass(frozen=True)
class EnsembleMetrics:
    eps1: float
    eps2: float
    eps3: float
    x_star: np.ndarray


def ensemble_metrics(x: SignalEnsemble, conservative_eps1: bool = False) -> EnsembleMetrics:
    return EnsembleMetrics(
        eps1=epsilon1(x, conservative=conservative_eps1),
        eps2=epsilon2(x),
        eps3=epsilon3(x),
        x_star=ensemble_mean(x),
    )


class RicMode(str, enum.Enum):
    EXACT = "Exact"
    SAMPLED = "SampledLowerBound"


@dataclass(frozen=True)
class RicValue:
    order: int
    value: float
    mode: RicMode
    samples: int = 0


def _isometry_gap(gram: np.ndarray, supports: np.ndarray, rows: int) -> float:
    sub = gram[supports[:, :, None], supports[:, None, :]]
    w = np.linalg.eigvalsh(sub)
    # Gram blocks are PSD, and singular once the support outgrows the row
    # count; pin those eigenvalues so rounding cannot break monotonicity
    lo = np.zeros(len(w)) if supports.shape[1] > rows else np.maximum(w[:, 0], 0.0)
    return float(np.maximum(w[:, -1] - 1.0, 1.0 - lo).max())


def _check_order(phi: np.ndarray, order: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2:
        raise ValueError(f"phi must be a matrix, got shape {phi.shape}")
    if not 1 <= order <= phi.shape[1]:
        raise ValueError(f"order must lie in [1, {phi.shape[1]}], got {order}")
    return phi


def ric_exact(phi: np.ndarray, order: int, budget: int = RIC_BUDGET) -> RicValue:
    """Restricted isometry constant by enumerating every support of size ``order``.

    ``delta = max_S max(lambda_max(G_S) - 1, 1 - lambda_min(G_S))`` with
    ``G_S = phi_S^T phi_S``. No scaling is applied to ``phi``.
    """
    phi = _check_order(phi, order)
    n = phi.shape[1]
    total = math.comb(n, order)
    if total > budget:
        raise EnumerationLimitError(
            f"C({n}, {order}) = {total} supports exceeds the enumeration budget of "
            f"{budget}; use ric_sampled for a lower bound"
        )
    gram = phi.T @ phi
    combos = itertools.combinations(range(n), order)
    best = 0.0
    while True:
        block = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _RIC_CHUNK)), dtype=np.intp
        )
        if block.size == 0:
            break
        best = max(best, _isometry_gap(gram, block.reshape(-1, order), phi.shape[0]))
    return RicValue(order, best, RicMode.EXACT, 0)


def ric_sampled(phi: np.ndarray, order: int, samples: int, seed: Seed | int) -> RicValue:
    """Lower bound on the restricted isometry constant from random supports.

    Supports are drawn one after another from a single stream, so a run with
    more samples extends (and can only raise) a run with fewer.
    """
    phi = _check_order(phi, order)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = (seed if isinstance(seed, Seed) else Seed(int(seed))).rng()
    n = phi.shape[1]
    gram = phi.T @ phi
    best = 0.0
    remaining = samples
    while remaining:
        b = min(remaining, _RIC_CHUNK)
        keys = rng.random((b, n))
        # sorted so a sampled support forms the same Gram block as in ric_exact
        supports = np.sort(np.argsort(keys, axis=1, kind="stable")[:, :order], axis=1)
        best = max(best, _isometry_gap(gram, supports, phi.shape[0]))
        remaining -= b
    return RicValue(order, best, RicMode.SAMPLED, samples)


def check_theorem1(deltas: Sequence[float], eps1: float, k: int) -> bool:
    """Sum over sensors of
    ``(eps1 d^2 - (sqrt(K) + 2 eps1) d + eps1) / (1 - d)`` with ``d = delta_{K+1}(Phi^i)``,
    compared against zero."""
    d = np.asarray(deltas, dtype=float)
    if np.any(d >= 1.0):
        raise DomainError(f"every delta must be < 1, got {d.tolist()}")
    terms = (eps1 * d**2 - (math.sqrt(k) + 2 * eps1) * d + eps1) / (1.0 - d)
    return bool(terms.sum() > 0)


def check_corollary1(delta_max: float, k: int) -> bool:
    """``delta_max < 1 / (sqrt(K) + 2)``."""
    return bool(delta_max < 1.0 / (math.sqrt(k) + 2.0))


def check_theorem2(delta_a: float, delta_max: float, eps2: float, k: int, l: int) -> bool:
    """``(sqrt(K)+1) delta_A + (1 + (sqrt(K)+1) L eps2) delta_max < 1``.

    ``delta_a`` must be measured on the stack scaled by ``1/sqrt(L)``.
    """
    sk = math.sqrt(k)
    return bool((sk + 1) * delta_a + (1 + (sk + 1) * l * eps2) * delta_max < 1)


def check_theorem3(delta_a: float, delta_max: float, eps3: float, k: int, l: int) -> bool:
    """``sqrt(K) (1 + L^2 eps3) delta_A + (1 + L eps3) delta_max < 1``."""
    return bool(math.sqrt(k) * (1 + l**2 * eps3) * delta_a + (1 + l * eps3) * delta_max < 1)


@dataclass(frozen=True)
class ConditionReport:
    k: int
    l: int
    metrics: EnsembleMetrics
    sensor_deltas: tuple[RicValue, ...]
    stack_delta: RicValue
    theorem1: Optional[bool]
    corollary1: bool
    theorem2: bool
    theorem3: bool

    @property
    def delta_max(self) -> float:
        return max(d.value for d in self.sensor_deltas)


def normalized_rics(
    phis: SensingEnsemble,
    order: int,
    samples: Optional[int] = None,
    seed: Seed | int = 0,
) -> tuple[tuple[RicValue, ...], RicValue]:
    """RICs of ``Phi^i / sqrt(M)`` and of the stack ``A / sqrt(L M)``.

    Exact when ``samples`` is None, otherwise sampled lower bounds (each
    matrix gets its own child stream of ``seed``).
    """
    seed = seed if isinstance(seed, Seed) else Seed(int(seed))
    scale = 1.0 / math.sqrt(phis.m)

    def ric(mat: np.ndarray, child: int) -> RicValue:
        if samples is None:
            return ric_exact(mat, order)
        return ric_sampled(mat, order, samples, seed.child(child))

    sensors = tuple(ric(phis.phis[i] * scale, i) for i in range(phis.l))
    stack = ric(phis.scaled_a * scale, phis.l)
    return sensors, stack


def evaluate_conditions(
    x: SignalEnsemble,
    phis: SensingEnsemble,
    samples: Optional[int] = None,
    seed: Seed | int = 0,
    conservative_eps1: bool = False,
) -> ConditionReport:
    """Evaluate every sufficient condition at order ``K+1`` on normalised matrices.

    ``theorem1`` is None when some sensor RIC is >= 1, where that condition is
    undefined.
    """
    k = x.k
    metrics = ensemble_metrics(x, conservative_eps1)
    sensors, stack = normalized_rics(phis, min(k + 1, phis.n), samples, seed)
    deltas = [d.value for d in sensors]
    delta_max = max(deltas)
    try:
        t1: Optional[bool] = check_theorem1(deltas, metrics.eps1, k)
    except DomainError:
        t1 = None
    return ConditionReport(
        k=k,
        l=x.l,
        metrics=metrics,
        sensor_deltas=sensors,
        stack_delta=stack,
        theorem1=t1,
        corollary1=check_corollary1(delta_max, k),
        theorem2=check_theorem2(stack.value, delta_max, metrics.eps2, k, x.l),
        theorem3=check_theorem3(stack.value, delta_max, metrics.eps3, k, x.l),
    )
