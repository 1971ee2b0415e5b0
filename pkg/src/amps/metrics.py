"""Output quality metrics: relative RMS distortion and magnitude spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AmpsError, ContractError, SampledWaveform

DEFAULT_ZERO_PAD = 2**18


class UndefinedMetricError(AmpsError, ValueError):
    pass


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if scale == 0.0:
        return 0.0
    # scale first so tiny or huge samples do not underflow or overflow when squared
    return scale * float(np.sqrt(np.mean(np.square(x / scale))))


def total_distortion(output: SampledWaveform, ref: SampledWaveform) -> float:
    """RMS of ``output - ref`` divided by RMS of ``ref`` (a fraction, not %)."""
    if len(output) != len(ref):
        raise ContractError(f"length mismatch: output {len(output)} vs reference {len(ref)}")
    if output.sample_rate != ref.sample_rate:
        raise ContractError(
            f"sample rate mismatch: {output.sample_rate} vs {ref.sample_rate}"
        )
    denom = rms(ref.samples)
    if denom == 0:
        raise UndefinedMetricError("total distortion is undefined for an all-zero reference")
    return rms(output.samples - ref.samples) / denom


@dataclass(frozen=True)
class Spectrum:
    """One-sided DFT magnitudes of a zero-padded, rectangular-windowed signal."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    resolution: float
    n_fft: int
    normalized: bool = False

    def __len__(self):
        return self.frequencies.size

    @property
    def nyquist(self) -> float:
        return float(self.frequencies[-1])

    def two_sided_energy(self) -> float:
        """Sum of squared magnitudes over the full two-sided DFT."""
        e = np.square(self.magnitudes)
        total = e[0] + 2 * e[1:].sum()
        if self.n_fft % 2 == 0:
            total -= e[-1]  # Nyquist bin has no mirror image
        return float(total)

    def normalized_to_peak(self) -> "Spectrum":
        peak = np.max(self.magnitudes)
        mags = self.magnitudes / peak if peak > 0 else self.magnitudes.copy()
        return Spectrum(self.frequencies, mags, self.resolution, self.n_fft, True)


def spectrum(w: SampledWaveform, zero_pad_to: int = DEFAULT_ZERO_PAD) -> Spectrum:
    if zero_pad_to < len(w):
        raise ContractError(
            f"zero_pad_to ({zero_pad_to}) must be at least the signal length ({len(w)})"
        )
    mags = np.abs(np.fft.rfft(w.samples, n=zero_pad_to))
    freqs = np.fft.rfftfreq(zero_pad_to, d=1.0 / w.sample_rate)
    return Spectrum(freqs, mags, w.sample_rate / zero_pad_to, int(zero_pad_to))


def band_energy_ratio(s: Spectrum, f_lo: float, f_hi: float) -> float:
    """Share of one-sided spectral energy falling in ``[f_lo, f_hi]``."""
    if not (0 <= f_lo < f_hi <= s.nyquist + s.resolution / 2):
        raise ContractError(
            f"band [{f_lo}, {f_hi}] must satisfy 0 <= f_lo < f_hi <= Nyquist ({s.nyquist})"
        )
    in_band = (s.frequencies >= f_lo) & (s.frequencies <= f_hi)
    if not np.any(in_band):
        raise ContractError(f"no spectral bins fall inside [{f_lo}, {f_hi}] Hz")
    e = np.square(s.magnitudes)
    total = e.sum()
    if total == 0:
        raise UndefinedMetricError("band energy ratio is undefined for an all-zero spectrum")
    return float(e[in_band].sum() / total)
