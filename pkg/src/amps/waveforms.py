"""Reference pulse shapes: monophasic, biphasic and Gaussian polyphasic.

Every generator returns a :class:`SampledWaveform` scaled to unit peak
magnitude. Monophasic and biphasic pulses start at t = 0 and are followed by
trailing zeros; the Gaussian pulse is centred in its window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, SampledWaveform

DEFAULT_SAMPLE_RATE = 1e6

MONOPHASIC_DEFAULTS = {"rise_f": 5e3, "tail_tau": 400e-6, "duration": 2e-3}
BIPHASIC_DEFAULTS = {"f": 2.5e3, "damping": 100.0, "duration": 1e-3}
GAUSSIAN_DEFAULTS = {"f0": 10e3, "sigma": 8e-5, "duration": 8e-4}


class AliasingError(ContractError):
    pass


class PulseTruncationError(ContractError):
    pass


class WaveformKind(str, enum.Enum):
    MONOPHASIC = "monophasic"
    BIPHASIC = "biphasic"
    GAUSSIAN = "gaussian"


def _n_samples(duration: float, sample_rate: float) -> int:
    if not duration > 0:
        raise ContractError(f"duration must be positive, got {duration}")
    if not sample_rate > 0:
        raise ContractError(f"sample_rate must be positive, got {sample_rate}")
    return max(1, int(round(duration * sample_rate)))


def _check_nyquist(freq: float, sample_rate: float) -> None:
    if sample_rate < 2 * freq:
        raise AliasingError(
            f"sample rate {sample_rate:g} Hz is below twice the {freq:g} Hz pulse frequency"
        )


def _unit_peak(w: np.ndarray, sample_rate: float) -> SampledWaveform:
    peak = np.max(np.abs(w))
    if peak > 0:
        w = w / peak
    return SampledWaveform(w, sample_rate)


def gaussian_polyphasic(
    f0: float = GAUSSIAN_DEFAULTS["f0"],
    sigma: float = GAUSSIAN_DEFAULTS["sigma"],
    duration: float = GAUSSIAN_DEFAULTS["duration"],
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> SampledWaveform:
    """Sine at ``f0`` under a Gaussian envelope, centred in the window."""
    if not f0 > 0 or not sigma > 0:
        raise ContractError("f0 and sigma must be positive")
    _check_nyquist(f0, sample_rate)
    n = _n_samples(duration, sample_rate)
    # offsets from t_c = duration / 2 computed in sample units so that
    # w(t_c + tau) == -w(t_c - tau) holds bit-exactly
    tau = (np.arange(n) - n / 2.0) / sample_rate
    w = np.sin(2 * np.pi * f0 * tau) * np.exp(-(tau**2) / (2 * sigma**2))
    return _unit_peak(w, sample_rate)


def biphasic(
    f: float = BIPHASIC_DEFAULTS["f"],
    damping: float = BIPHASIC_DEFAULTS["damping"],
    duration: float = BIPHASIC_DEFAULTS["duration"],
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> SampledWaveform:
    """One damped cosine period ``cos(2 pi f t) exp(-damping t)``, zero padded."""
    if not f > 0:
        raise ContractError("f must be positive")
    if damping < 0:
        raise ContractError("damping must be nonnegative")
    _check_nyquist(f, sample_rate)
    if duration < 1.0 / f:
        raise PulseTruncationError(
            f"duration {duration:g} s is shorter than one period ({1.0 / f:g} s)"
        )
    n = _n_samples(duration, sample_rate)
    t = np.arange(n) / sample_rate
    w = np.where(t <= 1.0 / f, np.cos(2 * np.pi * f * t) * np.exp(-damping * t), 0.0)
    return _unit_peak(w, sample_rate)


def monophasic(
    rise_f: float = MONOPHASIC_DEFAULTS["rise_f"],
    tail_tau: float = MONOPHASIC_DEFAULTS["tail_tau"],
    duration: float = MONOPHASIC_DEFAULTS["duration"],
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> SampledWaveform:
    """Quarter-sine rise to 1 followed by an exponential tail."""
    if not rise_f > 0 or not tail_tau > 0:
        raise ContractError("rise_f and tail_tau must be positive")
    _check_nyquist(rise_f, sample_rate)
    t_peak = 1.0 / (4 * rise_f)
    if duration < t_peak:
        raise PulseTruncationError(
            f"duration {duration:g} s cannot contain the {t_peak:g} s rise"
        )
    n = _n_samples(duration, sample_rate)
    t = np.arange(n) / sample_rate
    rise = np.sin(2 * np.pi * rise_f * np.minimum(t, t_peak))
    tail = np.exp(-np.maximum(t - t_peak, 0.0) / tail_tau)
    w = np.where(t <= t_peak, rise, tail)
    return _unit_peak(w, sample_rate)


@dataclass(frozen=True)
class WaveformSpec:
    kind: WaveformKind
    sample_rate: float = DEFAULT_SAMPLE_RATE
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveformKind(self.kind))

    def resolved_parameters(self) -> dict:
        defaults = {
            WaveformKind.MONOPHASIC: MONOPHASIC_DEFAULTS,
            WaveformKind.BIPHASIC: BIPHASIC_DEFAULTS,
            WaveformKind.GAUSSIAN: GAUSSIAN_DEFAULTS,
        }[self.kind]
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ContractError(
                f"unknown parameters for {self.kind.value}: {', '.join(sorted(unknown))}"
            )
        return {**defaults, **self.parameters}

    def generate(self) -> SampledWaveform:
        params = self.resolved_parameters()
        gen = {
            WaveformKind.MONOPHASIC: monophasic,
            WaveformKind.BIPHASIC: biphasic,
            WaveformKind.GAUSSIAN: gaussian_polyphasic,
        }[self.kind]
        return gen(sample_rate=self.sample_rate, **params)


def make_reference(kind: str | WaveformKind, sample_rate: float = DEFAULT_SAMPLE_RATE, **params) -> SampledWaveform:
    return WaveformSpec(WaveformKind(kind), sample_rate, params).generate()
