"""Trial definitions and the comparison matrix driver used by the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, SampledWaveform, VoltageArray, enumerate_levels
from .metrics import DEFAULT_ZERO_PAD, Spectrum, band_energy_ratio, spectrum
from .modulation import ModulationReport, NlmConfig, PscPwmConfig, nlm_modulate, psc_pwm_modulate
from .optimizer import DEFAULT_BUDGET, OptimizationProblem, OptimizationResult, geometric_array, optimize
from .waveforms import DEFAULT_SAMPLE_RATE, WaveformKind, WaveformSpec

WAVEFORMS = (WaveformKind.MONOPHASIC, WaveformKind.BIPHASIC, WaveformKind.GAUSSIAN)
METHODS = ("nlm", "psc-pwm")


def parse_fraction_list(text: str) -> list[float]:
    """Parse comma-separated fractions or percentages (sum ~1 or ~100)."""
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ContractError(f"cannot parse voltage list {text!r}") from None
    if not vals:
        raise ContractError("empty voltage list")
    if any(x <= 0 for x in vals):
        raise ContractError(f"voltages must be positive, got {vals}")
    total = sum(vals)
    if abs(total - 1.0) > 1e-2 and abs(total - 100.0) > 1.0:
        raise ContractError(
            f"voltages {text!r} sum to {total:g}; give fractions (sum 1) or percentages (sum 100)"
        )
    # either unit renormalises to exact fractions of the bus voltage
    return [x / total for x in vals]


@dataclass(frozen=True)
class Settings:
    sample_rate: float = DEFAULT_SAMPLE_RATE
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    max_gap: float | None = None
    carrier_frequency: float = 50e3
    nlm: NlmConfig = field(default_factory=NlmConfig)
    band: tuple[float, float] = (45e3, 55e3)
    zero_pad: int = DEFAULT_ZERO_PAD
    waveform_params: dict = field(default_factory=dict)

    def reference(self, kind: WaveformKind | str) -> SampledWaveform:
        kind = WaveformKind(kind)
        params = self.waveform_params.get(kind.value, {})
        return WaveformSpec(kind, self.sample_rate, params).generate()


@dataclass(frozen=True)
class TrialConfig:
    label: str
    modules: int
    voltages: str = "symmetric"
    method: str = "nlm"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.modules < 1:
            raise ContractError("modules must be at least 1")

    @classmethod
    def parse(cls, text: str) -> "TrialConfig":
        """``LABEL:MODULES:VOLTAGES:METHOD``, e.g. ``geo3:3:geometric:1.5:nlm``."""
        parts = text.split(":")
        if len(parts) < 4:
            raise ContractError(f"trial {text!r} must look like LABEL:MODULES:VOLTAGES:METHOD")
        try:
            modules = int(parts[1])
        except ValueError:
            raise ContractError(f"bad module count in trial {text!r}") from None
        return cls(parts[0], modules, ":".join(parts[2:-1]), parts[-1])


FIG9_MATRIX = (
    TrialConfig("sym3-nlm", 3, "symmetric", "nlm"),
    TrialConfig("sym3-pwm", 3, "symmetric", "psc-pwm"),
    TrialConfig("sym6-nlm", 6, "symmetric", "nlm"),
    TrialConfig("sym6-pwm", 6, "symmetric", "psc-pwm"),
    TrialConfig("geo3-nlm", 3, "geometric:1.5", "nlm"),
    TrialConfig("opt3-nlm", 3, "optimized", "nlm"),
)
PRESETS = {"paper-fig9": FIG9_MATRIX}


def resolve_voltages(
    mode: str, modules: int, reference: SampledWaveform, settings: Settings
) -> tuple[VoltageArray, OptimizationResult | None]:
    mode = mode.strip()
    if mode == "symmetric":
        return VoltageArray.symmetric(modules), None
    if mode.startswith("geometric"):
        _, _, ratio = mode.partition(":")
        try:
            r = float(ratio) if ratio else 1.5
        except ValueError:
            raise ContractError(f"bad geometric ratio in {mode!r}") from None
        return geometric_array(modules, r), None
    if mode == "optimized":
        problem = OptimizationProblem(reference, modules, settings.max_gap, settings.nlm)
        res = optimize(problem, settings.budget, settings.seed)
        return res.best, res
    vals = parse_fraction_list(mode)
    if len(vals) != modules:
        raise ContractError(f"{len(vals)} voltages given for {modules} modules")
    return VoltageArray.normalized(vals), None


@dataclass(frozen=True)
class TrialResult:
    trial: TrialConfig
    waveform: WaveformKind
    reference: SampledWaveform
    voltages: VoltageArray
    report: ModulationReport
    spectrum: Spectrum
    band_energy_ratio: float
    optimization: OptimizationResult | None = None

    @property
    def distortion(self) -> float:
        return self.report.total_distortion

    @property
    def level_count(self) -> int:
        return len(enumerate_levels(self.voltages))

    def summary(self) -> dict:
        d = {
            "label": self.trial.label,
            "waveform": self.waveform.value,
            "modules": self.trial.modules,
            "method": self.trial.method,
            "voltages_pct": [round(x, 10) for x in self.voltages.percentages()],
            "distortion_pct": 100.0 * self.distortion,
            "switch_counts": list(self.report.switch_count),
            "level_count": self.level_count,
            "band_energy_ratio": self.band_energy_ratio,
            "warnings": list(self.report.warnings),
        }
        if self.optimization is not None:
            d["optimizer_evaluations"] = self.optimization.evaluations
        return d


def modulate(method: str, ref: SampledWaveform, v: VoltageArray, settings: Settings) -> ModulationReport:
    if method == "nlm":
        return nlm_modulate(ref, v, settings.nlm)
    if method == "psc-pwm":
        return psc_pwm_modulate(ref, v, PscPwmConfig(settings.carrier_frequency))
    raise ContractError(f"unknown method {method!r}")


def run_trial(trial: TrialConfig, waveform: WaveformKind | str, settings: Settings) -> TrialResult:
    kind = WaveformKind(waveform)
    ref = settings.reference(kind)
    v, opt = resolve_voltages(trial.voltages, trial.modules, ref, settings)
    if v.n_modules != trial.modules:
        raise ContractError(f"trial {trial.label}: {v.n_modules} voltages for {trial.modules} modules")
    report = modulate(trial.method, ref, v, settings)
    spec = spectrum(report.output, max(settings.zero_pad, len(ref)))
    ber = band_energy_ratio(spec, *settings.band) if np.any(report.output.samples) else 0.0
    return TrialResult(trial, kind, ref, v, report, spec, ber, opt)


def run_matrix(trials, waveforms=WAVEFORMS, settings: Settings | None = None) -> list[TrialResult]:
    settings = settings or Settings()
    trials = list(trials)
    if not trials:
        raise ContractError("no trials to run")
    return [run_trial(t, w, settings) for t in trials for w in waveforms]


def distortion_table(results: list[TrialResult]) -> dict[str, dict[str, float]]:
    """``{label: {waveform: distortion fraction}}`` in trial order."""
    table: dict[str, dict[str, float]] = {}
    for r in results:
        table.setdefault(r.trial.label, {})[r.waveform.value] = r.distortion
    return table
