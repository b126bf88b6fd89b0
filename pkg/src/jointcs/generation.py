"""Seeded construction of supports, signal ensembles and sensing matrices."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatchError,
    MeasurementEnsemble,
    ProblemDims,
    SensingEnsemble,
    SignalEnsemble,
    SupportSet,
)

# stream roles; sensor i draws from (ROLE_MATRIX, i)
ROLE_SUPPORT = 0
ROLE_SIGNAL = 1
ROLE_MATRIX = 2

_MASK64 = (1 << 64) - 1


class SignalType(enum.IntEnum):
    """Distribution of the on-support entries."""

    TYPE_I = 1    # N(0, 1)
    TYPE_II = 2   # |N(0, 1)|
    TYPE_III = 3  # N(1, 0.25)
    TYPE_IV = 4   # constant 1

    @property
    def label(self) -> str:
        return ("I", "II", "III", "IV")[self.value - 1]


@dataclass(frozen=True)
class Seed:
    """A master seed plus a derivation path.

    The same ``(master, path)`` always produces the same stream, and streams
    with different paths are statistically independent.
    """

    master: int
    path: tuple[int, ...] = ()

    def child(self, *keys: int) -> "Seed":
        return Seed(self.master, self.path + tuple(int(k) for k in keys))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master) & _MASK64, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def _as_seed(seed: Seed | int) -> Seed:
    return seed if isinstance(seed, Seed) else Seed(int(seed))


def draw_support(n: int, k: int, seed: Seed | int) -> SupportSet:
    """Uniformly random ``k``-subset of ``range(n)``, sorted."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = _as_seed(seed).rng()
    idx = rng.choice(n, size=k, replace=False)
    return SupportSet(tuple(np.sort(idx).tolist()), n)


def _draw_entries(signal_type: SignalType, rng: np.random.Generator, shape) -> np.ndarray:
    if signal_type is SignalType.TYPE_I:
        return rng.standard_normal(shape)
    if signal_type is SignalType.TYPE_II:
        return np.abs(rng.standard_normal(shape))
    if signal_type is SignalType.TYPE_III:
        return rng.normal(1.0, 0.5, shape)
    if signal_type is SignalType.TYPE_IV:
        return np.ones(shape)
    raise ValueError(f"unknown signal type {signal_type!r}")


def gen_signals(
    signal_type: SignalType | int,
    dims: ProblemDims,
    omega: SupportSet,
    seed: Seed | int,
) -> SignalEnsemble:
    """Draw an ``(N, L)`` ensemble whose columns all share the support ``omega``."""
    signal_type = SignalType(signal_type)
    if len(omega) != dims.k:
        raise ValueError(f"|omega|={len(omega)} does not match K={dims.k}")
    if omega.n != dims.n:
        raise ValueError(f"omega is defined on n={omega.n}, expected N={dims.n}")
    x = np.zeros((dims.n, dims.l))
    x[omega.as_array()] = _draw_entries(signal_type, _as_seed(seed).rng(), (dims.k, dims.l))
    return SignalEnsemble(x, omega)


def draw_sensing(dims: ProblemDims, seed: Seed | int) -> SensingEnsemble:
    """``L`` i.i.d. standard normal ``M x N`` matrices, one stream per sensor.

    No normalisation is applied.
    """
    seed = _as_seed(seed)
    phis = np.empty((dims.l, dims.m, dims.n))
    for i in range(dims.l):
        phis[i] = seed.child(i).rng().standard_normal((dims.m, dims.n))
    return SensingEnsemble(phis)


def sense(phis: SensingEnsemble, x: SignalEnsemble) -> MeasurementEnsemble:
    """Apply each sensor to its own signal: ``y^i = Phi^i x^i``."""
    if phis.n != x.n or phis.l != x.l:
        raise DimensionMismatchError(
            f"cannot sense: phis is L={phis.l} x {phis.m}x{phis.n}, x is {x.n}x{x.l}"
        )
    ys = np.einsum("lmn,nl->ml", phis.phis, x.x)
    return MeasurementEnsemble(ys)


def draw_instance(
    dims: ProblemDims, signal_type: SignalType | int, seed: Seed | int
) -> tuple[SignalEnsemble, SensingEnsemble, MeasurementEnsemble]:
    """Support, signals and sensing matrices from role-split child streams."""
    seed = _as_seed(seed)
    omega = draw_support(dims.n, dims.k, seed.child(ROLE_SUPPORT))
    x = gen_signals(signal_type, dims, omega, seed.child(ROLE_SIGNAL))
    phis = draw_sensing(dims, seed.child(ROLE_MATRIX))
    return x, phis, sense(phis, x)
