"""Monte Carlo recovery experiments over an (M, K) grid.

Each trial draws one instance and runs SOMP-(a+c), SOMP-(b+c) and SOMP-(b+d)
on exactly the same data. Full success means the summed per-signal l2 error
is at most 1e-5; support success (``somp_bd_supp``) only asks that the
(b+d) support contains the true one.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import ProblemDims, SignalEnsemble, SolverConfig, SupportSet
from .generation import Seed, SignalType, draw_instance
from .solver import somp_run

SUCCESS_TOL = 1e-5

ALGORITHMS = ("somp_ac", "somp_bc", "somp_bd", "somp_bd_supp")

SOLVER_CONFIGS = {
    "somp_ac": SolverConfig("a", "c"),
    "somp_bc": SolverConfig("b", "c"),
    "somp_bd": SolverConfig("b", "d"),
}

DEFAULT_GRID = tuple(range(5, 101, 5))

SWEEP_HEADER = ("signal_type", "N", "M", "K", "L", "algorithm", "trials", "successes", "probability")
PHASE_HEADER = ("signal_type", "N", "L", "algorithm", "level", "K", "M_min")
AGREEMENT_HEADER = ("signal_type", "N", "M", "K", "L", "trials", "agree")


def fmt_float(value: float) -> str:
    return "nan" if math.isnan(value) else format(value, ".17g")


def success_full(estimates: np.ndarray, truth: SignalEnsemble) -> bool:
    """Summed per-signal l2 error at most 1e-5 (inclusive)."""
    return total_error(estimates, truth) <= SUCCESS_TOL


def total_error(estimates: np.ndarray, truth: SignalEnsemble) -> float:
    estimates = np.asarray(estimates, dtype=float)
    if estimates.shape != truth.x.shape:
        raise ValueError(f"estimates shape {estimates.shape} != truth shape {truth.x.shape}")
    return float(np.linalg.norm(estimates - truth.x, axis=0).sum())


def success_support(detected: SupportSet, omega: SupportSet) -> bool:
    """True iff every true index was detected."""
    return omega.issubset(detected)


@dataclass(frozen=True)
class TrialOutcome:
    success: dict[str, bool]
    errors: dict[str, float]


def trial_seed(dims: ProblemDims, signal_type: SignalType | int, trial_index: int, master_seed: Seed | int) -> Seed:
    """Seed of one trial; depends only on the cell coordinates and the trial index."""
    master = master_seed if isinstance(master_seed, Seed) else Seed(int(master_seed))
    return master.child(dims.n, dims.m, dims.k, dims.l, int(signal_type), trial_index)


def _solvers_needed(algorithms: Iterable[str]) -> list[str]:
    algs = set(algorithms)
    unknown = algs - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms {sorted(unknown)}; valid: {', '.join(ALGORITHMS)}")
    needed = {a for a in algs if a in SOLVER_CONFIGS}
    if "somp_bd_supp" in algs:
        needed.add("somp_bd")
    return [a for a in SOLVER_CONFIGS if a in needed]


def run_trial(
    dims: ProblemDims,
    signal_type: SignalType | int,
    trial_index: int,
    master_seed: Seed | int,
    algorithms: Sequence[str] = ALGORITHMS,
) -> TrialOutcome:
    """Draw one instance and evaluate every requested algorithm on it."""
    x, phis, ys = draw_instance(dims, signal_type, trial_seed(dims, signal_type, trial_index, master_seed))
    success: dict[str, bool] = {}
    errors: dict[str, float] = {}
    for name in _solvers_needed(algorithms):
        result = somp_run(phis, ys, dims.k, SOLVER_CONFIGS[name])
        errors[name] = total_error(result.estimates, x)
        if name in algorithms:
            success[name] = errors[name] <= SUCCESS_TOL
        if name == "somp_bd" and "somp_bd_supp" in algorithms:
            success["somp_bd_supp"] = success_support(result.support, x.omega)
            errors["somp_bd_supp"] = errors[name]
    return TrialOutcome(success, errors)


@dataclass(frozen=True)
class SweepConfig:
    signal_type: SignalType = SignalType.TYPE_I
    n: int = 100
    l: int = 3
    m_grid: tuple[int, ...] = DEFAULT_GRID
    k_grid: tuple[int, ...] = DEFAULT_GRID
    trials: int = 100
    master_seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS

    def __post_init__(self) -> None:
        object.__setattr__(self, "signal_type", SignalType(self.signal_type))
        object.__setattr__(self, "m_grid", tuple(sorted(set(int(m) for m in self.m_grid))))
        object.__setattr__(self, "k_grid", tuple(sorted(set(int(k) for k in self.k_grid))))
        object.__setattr__(self, "algorithms", tuple(a for a in ALGORITHMS if a in set(self.algorithms)))
        if not self.m_grid or not self.k_grid:
            raise ValueError("grid axes must be nonempty")
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        if not self.algorithms:
            raise ValueError("no algorithms selected")
        _solvers_needed(self.algorithms)
        for m in self.m_grid:
            for k in self.k_grid:
                ProblemDims(self.n, m, self.l, k)


@dataclass
class SweepResult:
    """Success counts indexed ``counts[algorithm][k_index, m_index]``."""

    signal_type: SignalType
    n: int
    l: int
    m_grid: tuple[int, ...]
    k_grid: tuple[int, ...]
    trials: int
    counts: dict[str, np.ndarray]
    master_seed: Optional[int] = None
    # trials where (b+d) full success and (b+d) support success agree
    bd_agreement: Optional[np.ndarray] = field(default=None)

    @property
    def algorithms(self) -> tuple[str, ...]:
        return tuple(a for a in ALGORITHMS if a in self.counts)

    def probability(self, algorithm: str) -> np.ndarray:
        if self.trials == 0:
            return np.full(self.counts[algorithm].shape, np.nan)
        return self.counts[algorithm] / self.trials

    def count(self, algorithm: str, m: int, k: int) -> int:
        return int(self.counts[algorithm][self.k_grid.index(k), self.m_grid.index(m)])


def _run_cell(args) -> tuple[dict[str, int], int]:
    config, m, k = args
    dims = ProblemDims(config.n, m, config.l, k)
    counts = dict.fromkeys(config.algorithms, 0)
    agree = 0
    for t in range(config.trials):
        try:
            outcome = run_trial(dims, config.signal_type, t, config.master_seed, config.algorithms)
        except Exception as exc:
            raise RuntimeError(
                f"sweep cell (M={m}, K={k}, L={config.l}, type={int(config.signal_type)}) "
                f"trial {t} failed: {exc}"
            ) from exc
        for alg in config.algorithms:
            counts[alg] += outcome.success[alg]
        if "somp_bd" in outcome.success and "somp_bd_supp" in outcome.success:
            agree += outcome.success["somp_bd"] == outcome.success["somp_bd_supp"]
    return counts, agree


def sweep(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Run ``config.trials`` trials in every (M, K) cell.

    Cells are independent, so ``workers > 1`` distributes them over processes
    without changing any count.
    """
    cells = [(config, m, k) for k in config.k_grid for m in config.m_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        outputs = [_run_cell(c) for c in cells]

    shape = (len(config.k_grid), len(config.m_grid))
    counts = {alg: np.zeros(shape, dtype=np.int64) for alg in config.algorithms}
    agreement = np.zeros(shape, dtype=np.int64)
    for (_, m, k), (cell_counts, agree) in zip(cells, outputs):
        ki, mi = config.k_grid.index(k), config.m_grid.index(m)
        for alg, c in cell_counts.items():
            counts[alg][ki, mi] = c
        agreement[ki, mi] = agree
    has_bd_pair = {"somp_bd", "somp_bd_supp"} <= set(config.algorithms)
    return SweepResult(
        signal_type=config.signal_type,
        n=config.n,
        l=config.l,
        m_grid=config.m_grid,
        k_grid=config.k_grid,
        trials=config.trials,
        counts=counts,
        master_seed=config.master_seed,
        bd_agreement=agreement if has_bd_pair else None,
    )


@dataclass(frozen=True)
class PhaseCurve:
    """Smallest grid M reaching ``level`` success for each K (None if never)."""

    signal_type: SignalType
    n: int
    l: int
    algorithm: str
    level: float
    k_values: tuple[int, ...]
    m_min: tuple[Optional[int], ...]

    def at(self, k: int) -> Optional[int]:
        return self.m_min[self.k_values.index(k)]


def phase_transition(result: SweepResult, algorithm: str, level: float = 0.5) -> PhaseCurve:
    """Scan M upward for each K and keep the first M with success rate >= level."""
    if not 0 < level <= 1:
        raise ValueError(f"level must lie in (0, 1], got {level}")
    prob = result.probability(algorithm)
    m_min: list[Optional[int]] = []
    for ki in range(len(result.k_grid)):
        hits = np.flatnonzero(prob[ki] >= level)
        m_min.append(result.m_grid[hits[0]] if hits.size else None)
    return PhaseCurve(result.signal_type, result.n, result.l, algorithm, level, result.k_grid, tuple(m_min))


def write_sweep_csv(results: Iterable[SweepResult], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for res in results:
            for ki, k in enumerate(res.k_grid):
                for mi, m in enumerate(res.m_grid):
                    for alg in res.algorithms:
                        c = int(res.counts[alg][ki, mi])
                        p = c / res.trials if res.trials else math.nan
                        w.writerow((int(res.signal_type), res.n, m, k, res.l, alg, res.trials, c, fmt_float(p)))


def write_agreement_csv(results: Iterable[SweepResult], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGREEMENT_HEADER)
        for res in results:
            if res.bd_agreement is None:
                continue
            for ki, k in enumerate(res.k_grid):
                for mi, m in enumerate(res.m_grid):
                    w.writerow((int(res.signal_type), res.n, m, k, res.l, res.trials, int(res.bd_agreement[ki, mi])))


def write_phase_csv(curves: Iterable[PhaseCurve], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PHASE_HEADER)
        for c in curves:
            for k, m in zip(c.k_values, c.m_min):
                w.writerow((int(c.signal_type), c.n, c.l, c.algorithm, fmt_float(c.level), k, "" if m is None else m))


def read_sweep_csv(path: Path | str) -> list[SweepResult]:
    """Rebuild sweep results (one per signal type, N and L) from a sweep CSV."""
    groups: dict[tuple[int, int, int], list[dict[str, str]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SWEEP_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (int(row["signal_type"]), int(row["N"]), int(row["L"]))
            groups.setdefault(key, []).append(row)

    results = []
    for (stype, n, l), rows in groups.items():
        m_grid = tuple(sorted({int(r["M"]) for r in rows}))
        k_grid = tuple(sorted({int(r["K"]) for r in rows}))
        trials = {int(r["trials"]) for r in rows}
        if len(trials) != 1:
            raise ValueError(f"{path}: mixed trial counts {sorted(trials)} for type {stype}")
        algs = [a for a in ALGORITHMS if any(r["algorithm"] == a for r in rows)]
        counts = {a: np.zeros((len(k_grid), len(m_grid)), dtype=np.int64) for a in algs}
        for r in rows:
            counts[r["algorithm"]][k_grid.index(int(r["K"])), m_grid.index(int(r["M"]))] = int(r["successes"])
        results.append(SweepResult(SignalType(stype), n, l, m_grid, k_grid, trials.pop(), counts))
    return results
