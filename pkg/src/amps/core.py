"""Shared domain types: sampled waveforms, module voltage arrays, module states
and the set of output levels a cascade can reach."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_MODULES = 12
LEVEL_MERGE_TOL = 1e-12
SUM_TOL = 1e-9


class AmpsError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(AmpsError, ValueError):
    """An input violated a documented precondition."""


class InfeasibleError(AmpsError):
    """The requested problem has no admissible solution."""


class UnsupportedConfigurationError(AmpsError, ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled real signal in units of total bus voltage."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float).reshape(-1)
        if samples.size == 0:
            raise ContractError("waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ContractError("waveform samples must be finite")
        if not self.sample_rate > 0:
            raise ContractError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


@dataclass(frozen=True)
class VoltageArray:
    """Per-module voltages as fractions of the total bus voltage.

    Values are stored sorted ascending; the achievable output levels do not
    depend on module order. Use :meth:`normalized` to build one from arbitrary
    positive weights or percentages.
    """

    voltages: np.ndarray

    def __post_init__(self):
        v = np.array(self.voltages, dtype=float).reshape(-1)
        if v.size < 1:
            raise ContractError("a voltage array needs at least one module")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ContractError(f"module voltages must be positive, got {v.tolist()}")
        if abs(v.sum() - 1.0) > SUM_TOL:
            raise ContractError(f"module voltages must sum to 1, got sum {v.sum()!r}")
        object.__setattr__(self, "voltages", _frozen(np.sort(v)))

    @classmethod
    def normalized(cls, values: Sequence[float]) -> "VoltageArray":
        v = np.asarray(values, dtype=float)
        if v.size and np.all(v > 0):
            v = v / v.sum()
        return cls(v)

    @classmethod
    def symmetric(cls, n: int) -> "VoltageArray":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.voltages.size

    @property
    def n_modules(self) -> int:
        return self.voltages.size

    @property
    def spread(self) -> float:
        return float(self.voltages[-1] - self.voltages[0])

    def is_symmetric(self, tol: float = SUM_TOL) -> bool:
        return self.spread <= tol

    def key(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.voltages)

    def percentages(self) -> list[float]:
        return [100.0 * float(x) for x in self.voltages]


@dataclass(frozen=True)
class StateVector:
    states: tuple[int, ...]

    def __post_init__(self):
        s = tuple(int(x) for x in self.states)
        if any(x not in (-1, 0, 1) for x in s):
            raise ContractError(f"module states must be -1, 0 or +1, got {s}")
        object.__setattr__(self, "states", s)

    def __len__(self):
        return len(self.states)

    def __neg__(self) -> "StateVector":
        return StateVector(tuple(-x for x in self.states))


@dataclass(frozen=True)
class StateTrajectory:
    """Module states over time, one row per output sample (shape ``(K, N)``)."""

    states: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.array(self.states, dtype=np.int8)
        if s.ndim != 2:
            raise ContractError("trajectory must be a 2-D array of shape (samples, modules)")
        if s.size and not np.all(np.isin(s, (-1, 0, 1))):
            raise ContractError("trajectory entries must be -1, 0 or +1")
        object.__setattr__(self, "states", _frozen(s))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.states.shape[0]

    @property
    def n_modules(self) -> int:
        return self.states.shape[1]

    def vector(self, k: int) -> StateVector:
        return StateVector(tuple(self.states[k].tolist()))

    def switch_counts(self) -> list[int]:
        """Number of state transitions of each module."""
        if len(self) < 2:
            return [0] * self.n_modules
        return np.count_nonzero(np.diff(self.states, axis=0), axis=0).astype(int).tolist()


@dataclass(frozen=True)
class LevelSet:
    levels: np.ndarray
    witnesses: np.ndarray = field(repr=False)

    def __len__(self):
        return self.levels.size

    def witness(self, i: int) -> StateVector:
        return StateVector(tuple(self.witnesses[i].tolist()))

    @property
    def max_gap(self) -> float:
        if self.levels.size < 2:
            return 0.0
        return float(np.max(np.diff(self.levels)))


def all_states(n: int) -> np.ndarray:
    """Every state vector in {-1, 0, +1}^n, in lexicographic order."""
    return np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)


def _state_sums(v: np.ndarray, states: np.ndarray) -> np.ndarray:
    # Column-by-column accumulation keeps dot(V, -S) == -dot(V, S) bit-exact.
    out = np.zeros(states.shape[0])
    for i, vi in enumerate(v):
        out += states[:, i] * vi
    return out


def check_module_count(n: int) -> None:
    if n > MAX_MODULES:
        raise ContractError(
            f"{n} modules exceeds the supported maximum of {MAX_MODULES} "
            f"(3^{n} states would need exhaustive enumeration)"
        )


@lru_cache(maxsize=4096)
def _levels_cached(key: tuple[float, ...]) -> LevelSet:
    v = np.array(key)
    states = all_states(v.size)
    sums = _state_sums(v, states)
    nnz = np.count_nonzero(states, axis=1)
    # lexsort: last key is primary -> value, then fewest nonzero, then state order
    order = np.lexsort((np.arange(sums.size), nnz, sums))
    sums, states = sums[order], states[order]

    starts = np.flatnonzero(np.r_[True, np.diff(sums) > LEVEL_MERGE_TOL])
    ends = np.r_[starts[1:], sums.size] - 1
    levels = (sums[starts] + sums[ends]) / 2.0
    # one witness per cluster: fewest nonzero, then lexicographically smallest
    witnesses = np.empty((starts.size, v.size), dtype=np.int8)
    for j, (a, b) in enumerate(zip(starts, ends + 1)):
        cand = states[a:b]
        if cand.shape[0] > 1:
            counts = np.count_nonzero(cand, axis=1)
            cand = cand[counts == counts.min()]
            cand = cand[np.lexsort(cand.T[::-1])]
        witnesses[j] = cand[0]
    return LevelSet(_frozen(levels), _frozen(witnesses))


def enumerate_levels(v: VoltageArray) -> LevelSet:
    """All distinct output levels ``dot(V, S)`` with one witness state each.

    Values closer than 1e-12 are merged. Among the states producing a level
    the witness has the fewest active modules, ties going to the
    lexicographically smallest state sequence.
    """
    check_module_count(v.n_modules)
    return _levels_cached(v.key())


def output_voltage(v: VoltageArray, s: StateVector | Sequence[int]) -> float:
    states = s.states if isinstance(s, StateVector) else tuple(s)
    if len(states) != v.n_modules:
        raise ContractError(
            f"state vector has {len(states)} entries but there are {v.n_modules} modules"
        )
    return float(np.dot(v.voltages, np.asarray(states, dtype=float)))
