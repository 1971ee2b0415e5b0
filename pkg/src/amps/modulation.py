"""Nearest level modulation and the carrier-based PWM baseline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import (
    LEVEL_MERGE_TOL,
    ContractError,
    SampledWaveform,
    StateTrajectory,
    UnsupportedConfigurationError,
    VoltageArray,
    check_module_count,
    enumerate_levels,
)
from .metrics import total_distortion

TIE_TOL = LEVEL_MERGE_TOL


class TieBreak(str, enum.Enum):
    TOWARD_ZERO = "toward_zero"
    TOWARD_NEGATIVE = "toward_negative"


@dataclass(frozen=True)
class NlmConfig:
    tie_break: TieBreak = TieBreak.TOWARD_ZERO
    min_dwell_samples: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))
        if int(self.min_dwell_samples) < 1:
            raise ContractError("min_dwell_samples must be at least 1")


@dataclass(frozen=True)
class PscPwmConfig:
    carrier_frequency: float = 50e3
    carriers_per_module: int = 1

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise ContractError("carrier_frequency must be positive")
        if self.carriers_per_module != 1:
            raise ContractError("exactly one carrier per module is supported")

    def phase_offsets(self, n_modules: int) -> np.ndarray:
        return 2 * np.pi * np.arange(n_modules) / n_modules


@dataclass(frozen=True)
class ModulationReport:
    output: SampledWaveform
    trajectory: StateTrajectory
    total_distortion: float
    switch_count: list[int]
    level_usage: dict[float, int]
    warnings: list[str] = field(default_factory=list)

    @property
    def clamped(self) -> bool:
        return any(w.startswith("clamped") for w in self.warnings)


def _relative_error(output: SampledWaveform, ref: SampledWaveform) -> float:
    if not np.any(ref.samples):
        # zero reference: metric undefined unless the output is zero as well
        return 0.0 if not np.any(output.samples) else float("inf")
    return total_distortion(output, ref)


def _usage(levels: np.ndarray, idx: np.ndarray) -> dict[float, int]:
    counts = np.bincount(idx, minlength=levels.size)
    return {float(levels[i]): int(c) for i, c in enumerate(counts) if c}


def nearest_level_indices(levels: np.ndarray, x: np.ndarray, tie_break: TieBreak) -> np.ndarray:
    """Index of the level closest to each entry of ``x`` (``levels`` sorted)."""
    hi = np.clip(np.searchsorted(levels, x), 1, max(levels.size - 1, 1))
    if levels.size == 1:
        return np.zeros(x.shape, dtype=int)
    lo = hi - 1
    d_lo = np.abs(x - levels[lo])
    d_hi = np.abs(levels[hi] - x)
    tie = np.abs(d_lo - d_hi) <= TIE_TOL
    pick_hi = d_hi < d_lo
    if tie_break is TieBreak.TOWARD_ZERO:
        tie_pick_hi = np.abs(levels[hi]) < np.abs(levels[lo])
    else:
        tie_pick_hi = np.zeros_like(tie)
    pick_hi = np.where(tie, tie_pick_hi, pick_hi)
    return np.where(pick_hi, hi, lo)


def _apply_dwell(idx: np.ndarray, dwell: int) -> np.ndarray:
    out = idx.copy()
    held = dwell
    for k in range(1, out.size):
        if held < dwell or idx[k] == out[k - 1]:
            out[k] = out[k - 1]
            held += 1
        else:
            held = 1
    return out


def nlm_modulate(
    ref: SampledWaveform, v: VoltageArray, cfg: NlmConfig | None = None
) -> ModulationReport:
    """Emit, for every sample, the achievable level nearest to the reference.

    The level set is enumerated exhaustively and searched with a binary
    search, so the choice is the exact arg-min over all 3^N module states.
    References beyond the largest level are clamped and flagged.
    """
    cfg = cfg or NlmConfig()
    check_module_count(v.n_modules)
    ls = enumerate_levels(v)
    x = ref.samples
    warnings = []
    top = ls.levels[-1]
    over = np.abs(x) > top + TIE_TOL
    if np.any(over):
        warnings.append(
            f"clamped {int(over.sum())} samples exceeding the largest level {top:.12g}"
        )
        x = np.clip(x, -top, top)

    idx = nearest_level_indices(ls.levels, x, cfg.tie_break)
    if cfg.min_dwell_samples > 1:
        idx = _apply_dwell(idx, int(cfg.min_dwell_samples))

    out = SampledWaveform(ls.levels[idx], ref.sample_rate)
    traj = StateTrajectory(ls.witnesses[idx], ref.sample_rate)
    return ModulationReport(
        output=out,
        trajectory=traj,
        total_distortion=_relative_error(out, ref),
        switch_count=traj.switch_counts(),
        level_usage=_usage(ls.levels, idx),
        warnings=warnings,
    )


def unipolar_triangle(phase: np.ndarray) -> np.ndarray:
    """Triangle in [0, 1] with period 1, valley at integer phase."""
    frac = np.mod(phase, 1.0)
    return 1.0 - np.abs(2.0 * frac - 1.0)


def psc_pwm_modulate(
    ref: SampledWaveform, v: VoltageArray, cfg: PscPwmConfig | None = None
) -> ModulationReport:
    """Carrier-based PWM for a symmetric cascade.

    Module ``n`` of ``N`` owns the band ``[n/N, (n+1)/N]`` of ``|ref|``; its
    triangular carrier is shifted into that band and delayed by ``2 pi n / N``.
    For negative references the carrier is inverted within its band, so the
    switching ripple keeps one phase across both polarities and appears at the
    carrier frequency. The module fires with ``sign(ref)`` whenever ``|ref|``
    reaches its carrier.
    """
    cfg = cfg or PscPwmConfig()
    if not v.is_symmetric():
        raise UnsupportedConfigurationError(
            "PSC-PWM is only defined for symmetric modules; got voltages "
            f"{v.voltages.tolist()}"
        )
    n = v.n_modules
    x = ref.samples
    warnings = []
    if np.any(np.abs(x) > 1.0 + TIE_TOL):
        warnings.append(f"clamped {int(np.sum(np.abs(x) > 1.0 + TIE_TOL))} samples exceeding full scale")
        x = np.clip(x, -1.0, 1.0)

    t = ref.time
    mag = np.abs(x)
    sign = np.sign(x).astype(np.int8)
    states = np.zeros((x.size, n), dtype=np.int8)
    for m, phi in enumerate(cfg.phase_offsets(n)):
        c = unipolar_triangle(cfg.carrier_frequency * t + phi / (2 * np.pi))
        c = np.where(x < 0, 1.0 - c, c)
        states[:, m] = np.where(mag >= (m + c) / n, sign, 0)

    levels_out = states.astype(float) @ v.voltages
    out = SampledWaveform(levels_out, ref.sample_rate)
    traj = StateTrajectory(states, ref.sample_rate)
    values, counts = np.unique(np.round(levels_out, 12), return_counts=True)
    return ModulationReport(
        output=out,
        trajectory=traj,
        total_distortion=_relative_error(out, ref),
        switch_count=traj.switch_counts(),
        level_usage={float(a): int(b) for a, b in zip(values, counts)},
        warnings=warnings,
    )
