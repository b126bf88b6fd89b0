"""Simultaneous orthogonal matching pursuit with pluggable detection/estimation.

One iteration detects an index from residual correlations (rule A or B),
grows the support, re-estimates the signals on that support (rule C or D)
and refreshes the residuals. After the last iteration every signal is
re-estimated from its own sensor, ``xbar^i = pinv(Phi^i_S) y^i``, whatever
rule was used inside the loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np
import scipy.linalg

from .core import (
    Detection,
    DimensionMismatchError,
    Estimation,
    MeasurementEnsemble,
    SensingEnsemble,
    SolverConfig,
    SolverStateError,
    SupportSet,
)

# a new column whose orthogonal remainder is this small relative to its norm
# is treated as lying in the span of the columns already selected
_DEPENDENCE_TOL = 1e-10


def _residual_array(phis: SensingEnsemble, residuals) -> np.ndarray:
    r = np.asarray(residuals, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    if r.shape != (phis.m, phis.l):
        raise DimensionMismatchError(
            f"residuals: expected shape ({phis.m}, {phis.l}), got {r.shape}"
        )
    return r


def _correlations(phis: np.ndarray, r: np.ndarray) -> np.ndarray:
    # (L, N): row i is Phi^i.T @ r^i
    return np.matmul(r.T[:, None, :], phis)[:, 0, :]


def correlate_a(phis: SensingEnsemble, residuals) -> np.ndarray:
    """``u[j] = sum_i |<phi^i_j, r^i>|``."""
    r = _residual_array(phis, residuals)
    return np.abs(_correlations(phis.phis, r)).sum(axis=0)


def correlate_b(phis: SensingEnsemble, residuals) -> np.ndarray:
    """``u[j] = |sum_i <phi^i_j, r^i>|``; opposite-sign contributions cancel."""
    r = _residual_array(phis, residuals)
    return np.abs(_correlations(phis.phis, r).sum(axis=0))


def select_index(u: np.ndarray, excluded: SupportSet | Iterable[int] = ()) -> int:
    """Index of the largest ``u`` outside ``excluded``; ties go to the lowest index."""
    u = np.array(u, dtype=float)
    excl = np.fromiter((int(i) for i in excluded), dtype=np.intp)
    if excl.size >= u.size:
        raise SolverStateError(f"all {u.size} candidate indices are excluded")
    u[excl] = -np.inf
    return int(np.argmax(u))


def lstsq_min_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution, ``pinv(a) @ b``.

    Uses a complete orthogonal factorisation (LAPACK ``gelsy``); columns are
    treated as dependent below a relative threshold of ``max(a.shape) * eps``.
    """
    cond = np.finfo(float).eps * max(a.shape)
    return scipy.linalg.lstsq(a, b, cond=cond, lapack_driver="gelsy", check_finite=False)[0]


def _support_columns(s: SupportSet) -> np.ndarray:
    cols = s.as_array()
    if cols.size == 0:
        raise ValueError("support must contain at least one index")
    return cols


def _ys_array(phis: SensingEnsemble, ys: MeasurementEnsemble) -> np.ndarray:
    y = ys.ys if isinstance(ys, MeasurementEnsemble) else MeasurementEnsemble(ys).ys
    if y.shape != (phis.m, phis.l):
        raise DimensionMismatchError(
            f"ys: expected shape ({phis.m}, {phis.l}), got {y.shape}"
        )
    return y


def estimate_c(phis: SensingEnsemble, s: SupportSet, ys: MeasurementEnsemble) -> np.ndarray:
    """Per-sensor minimum-norm least squares on the selected columns."""
    cols = _support_columns(s)
    y = _ys_array(phis, ys)
    est = np.zeros((phis.n, phis.l))
    for i in range(phis.l):
        est[cols, i] = lstsq_min_norm(phis.phis[i][:, cols], y[:, i])
    return est


def estimate_d(phis: SensingEnsemble, s: SupportSet, ys: MeasurementEnsemble) -> np.ndarray:
    """One minimum-norm least-squares fit of the stacked system, shared by all signals.

    Uses the unscaled stack ``[Phi^1; ...; Phi^L]`` against ``[y^1; ...; y^L]``.
    """
    cols = _support_columns(s)
    y = _ys_array(phis, ys)
    z = lstsq_min_norm(phis.stacked_a[:, cols], y.T.reshape(-1))
    est = np.zeros((phis.n, phis.l))
    est[cols, :] = z[:, None]
    return est


def update_residuals(
    phis: SensingEnsemble, s: SupportSet, estimates: np.ndarray, ys: MeasurementEnsemble
) -> np.ndarray:
    """``r^i = y^i - Phi^i_S xhat^i_S`` for every sensor."""
    y = _ys_array(phis, ys)
    estimates = np.asarray(estimates, dtype=float)
    if estimates.shape != (phis.n, phis.l):
        raise DimensionMismatchError(
            f"estimates: expected shape ({phis.n}, {phis.l}), got {estimates.shape}"
        )
    cols = s.as_array()
    if cols.size == 0:
        return y.copy()
    fitted = np.matmul(phis.phis[:, :, cols], estimates[cols].T[:, :, None])[:, :, 0]
    return y - fitted.T


@dataclass(frozen=True)
class SompState:
    """Solver state after ``t`` completed iterations."""

    t: int
    s: SupportSet
    residuals: np.ndarray
    history: tuple[int, ...]


@dataclass(frozen=True)
class RecoveryResult:
    support: SupportSet
    estimates: np.ndarray
    iterations_run: int
    early_stopped: bool
    history: tuple[int, ...] = ()


def _greedy_path(
    phis: np.ndarray,
    y: np.ndarray,
    max_iters: int,
    detection: Detection,
    estimation: Estimation,
    floor: float,
) -> Iterator[tuple[int, np.ndarray]]:
    """Core loop; yields ``(index, residuals)`` after each iteration.

    Residuals are kept as projections of the measurements onto the orthogonal
    complement of the selected columns: one orthonormal basis per sensor for
    rule C, one basis of the stacked system for rule D. That projection is
    the least-squares residual for any minimum-norm estimate, including when
    the selected columns are linearly dependent.
    """
    l, m, n = phis.shape
    if estimation is Estimation.C:
        mats = phis
        r = y.T.copy()  # (L, M)
    else:
        mats = phis.reshape(1, l * m, n)
        r = y.T.reshape(1, -1).copy()  # (1, L*M)
    basis = np.zeros((mats.shape[0], max_iters, mats.shape[1]))
    excluded = np.zeros(n, dtype=bool)
    for t in range(max_iters):
        if t >= n:
            raise SolverStateError(f"all {n} candidate indices are excluded")
        corr = np.matmul(r.reshape(l, 1, m), phis)[:, 0, :]
        if detection is Detection.A:
            u = np.abs(corr).sum(axis=0)
        else:
            u = np.abs(corr.sum(axis=0))
        u[excluded] = -np.inf
        j = int(np.argmax(u))
        excluded[j] = True

        v = mats[:, :, j].copy()
        scale = np.sqrt(np.einsum("br,br->b", v, v))
        if t:
            q = basis[:, :t]
            for _ in range(2):  # classical Gram-Schmidt, re-orthogonalised once
                v -= np.matmul(np.matmul(q, v[:, :, None]).transpose(0, 2, 1), q)[:, 0, :]
        norm = np.sqrt(np.einsum("br,br->b", v, v))
        keep = norm > _DEPENDENCE_TOL * np.where(scale > 0, scale, 1.0)
        if keep.all():
            v /= norm[:, None]
        else:
            v = np.where(keep[:, None], v / np.where(keep, norm, 1.0)[:, None], 0.0)
        basis[:, t] = v
        r -= v * np.einsum("br,br->b", v, r)[:, None]

        residuals = r.reshape(l, m).T
        yield j, residuals
        if np.sqrt(np.einsum("lm,lm->l", r.reshape(l, m), r.reshape(l, m))).max() <= floor:
            return


def somp_iterations(
    phis: SensingEnsemble,
    ys: MeasurementEnsemble,
    k: int,
    config: Optional[SolverConfig] = None,
) -> Iterator[SompState]:
    """Yield the solver state after each iteration.

    Stops after ``config.max_iters`` (default ``k``) iterations, or earlier once
    every residual column norm is at most ``residual_floor * ||Y||_F``.
    """
    config = config or SolverConfig()
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    y = _ys_array(phis, ys)
    max_iters = config.max_iters if config.max_iters is not None else k
    floor = config.residual_floor * np.linalg.norm(y)
    history: list[int] = []
    path = _greedy_path(phis.phis, y, max_iters, config.detection, config.estimation, floor)
    for t, (j, residuals) in enumerate(path, start=1):
        history.append(j)
        yield SompState(t, SupportSet.of(history, phis.n), residuals.copy(), tuple(history))


def final_estimates(phis: SensingEnsemble, s: SupportSet, ys: MeasurementEnsemble) -> np.ndarray:
    """Per-signal output ``pinv(Phi^i_S) y^i``, zero off ``s``."""
    if len(s) == 0:
        return np.zeros((phis.n, phis.l))
    return estimate_c(phis, s, ys)


def somp_run(
    phis: SensingEnsemble,
    ys: MeasurementEnsemble,
    k: int,
    config: Optional[SolverConfig] = None,
) -> RecoveryResult:
    """Run SOMP with the configured detection/estimation rules."""
    config = config or SolverConfig()
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    y = MeasurementEnsemble(_ys_array(phis, ys))
    max_iters = config.max_iters if config.max_iters is not None else k
    floor = config.residual_floor * np.linalg.norm(y.ys)
    path = _greedy_path(phis.phis, y.ys, max_iters, config.detection, config.estimation, floor)
    history = tuple(j for j, _ in path)
    support = SupportSet.of(history, phis.n)
    return RecoveryResult(
        support=support,
        estimates=final_estimates(phis, support, y),
        iterations_run=len(history),
        early_stopped=len(history) < max_iters,
        history=history,
    )
