import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amps.core import SampledWaveform, UnsupportedConfigurationError, VoltageArray, enumerate_levels
from amps.metrics import band_energy_ratio, spectrum
from amps.modulation import (
    NlmConfig,
    PscPwmConfig,
    TieBreak,
    nlm_modulate,
    psc_pwm_modulate,
    unipolar_triangle,
)
from amps.waveforms import make_reference

FS = 1e6
ASYM_MONO = VoltageArray([0.278, 0.320, 0.402])


def exhaustive_best_error(v, x):
    """Smallest |dot(V, S) - x| over all 3^N states."""
    return min(abs(np.dot(v, s) - x) for s in itertools.product((-1, 0, 1), repeat=len(v)))


def wf(values):
    return SampledWaveform(np.asarray(values, dtype=float), FS)


class TestNlm:
    def test_zero_reference(self):
        rep = nlm_modulate(wf(np.zeros(50)), ASYM_MONO)
        assert not np.any(rep.output.samples)
        assert not np.any(rep.trajectory.states)
        assert rep.total_distortion == 0.0
        assert rep.switch_count == [0, 0, 0]

    def test_single_sample_asymmetric(self):
        rep = nlm_modulate(wf([0.60]), ASYM_MONO)
        assert exhaustive_best_error(ASYM_MONO.voltages, 0.60) == pytest.approx(0.002)
        assert rep.output.samples[0] == pytest.approx(0.598, abs=1e-12)
        assert rep.trajectory.vector(0).states == (1, 1, 0)

    def test_symmetric_nearest(self):
        rep = nlm_modulate(wf([0.49]), VoltageArray.symmetric(3))
        assert rep.output.samples[0] == pytest.approx(1 / 3)

    def test_tie_breaks(self):
        v = VoltageArray([0.5, 0.5])
        zero = nlm_modulate(wf([0.25, -0.25, 0.75]), v, NlmConfig(TieBreak.TOWARD_ZERO))
        neg = nlm_modulate(wf([0.25, -0.25, 0.75]), v, NlmConfig(TieBreak.TOWARD_NEGATIVE))
        assert zero.output.samples.tolist() == [0.0, 0.0, 0.5]
        assert neg.output.samples.tolist() == [0.0, -0.5, 0.5]

    def test_clamp_warning(self):
        rep = nlm_modulate(wf([0.2, 1.5, -2.0]), VoltageArray.symmetric(2))
        assert rep.clamped
        assert rep.output.samples.tolist() == [0.0, 1.0, -1.0]

    def test_report_lengths_and_usage(self):
        ref = make_reference("biphasic")
        rep = nlm_modulate(ref, ASYM_MONO)
        assert len(rep.output) == len(ref) == len(rep.trajectory)
        assert sum(rep.level_usage.values()) == len(ref)
        np.testing.assert_allclose(rep.trajectory.states @ ASYM_MONO.voltages, rep.output.samples, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(2, 4).flatmap(lambda n: st.lists(st.floats(0.02, 1.0), min_size=n, max_size=n)),
        st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=8),
    )
    def test_optimal_against_exhaustive_search(self, raw, xs):
        v = VoltageArray.normalized(raw)
        rep = nlm_modulate(wf(xs), v)
        for x, y in zip(xs, rep.output.samples):
            assert abs(y - x) <= exhaustive_best_error(v.voltages, x) + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 5).flatmap(lambda n: st.lists(st.floats(0.02, 1.0), min_size=n, max_size=n)))
    def test_error_bound(self, raw):
        v = VoltageArray.normalized(raw)
        ref = make_reference("gaussian")
        rep = nlm_modulate(ref, v)
        bound = enumerate_levels(v).max_gap / 2 + 1e-12
        assert np.max(np.abs(rep.output.samples - ref.samples)) <= bound

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(1, 4).flatmap(lambda n: st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)),
        st.integers(0, 3),
        st.floats(0.05, 0.95),
    )
    def test_splitting_a_module_never_hurts(self, raw, which, frac):
        v = VoltageArray.normalized(raw)
        i = which % v.n_modules
        parts = list(v.voltages)
        a = parts.pop(i)
        split = VoltageArray.normalized(parts + [a * frac, a * (1 - frac)])
        ref = make_reference("monophasic")
        assert (
            nlm_modulate(ref, split).total_distortion
            <= nlm_modulate(ref, v).total_distortion + 1e-12
        )

    def test_dwell_holds_levels(self):
        ref = wf([0.0, 0.4, 0.0, 0.4, 0.4, 0.4, 0.0, 0.0])
        v = VoltageArray.symmetric(3)
        rep = nlm_modulate(ref, v, NlmConfig(min_dwell_samples=3))
        # after each change the level stays put for three samples
        changes = np.flatnonzero(np.diff(rep.output.samples)) + 1
        assert np.all(np.diff(changes) >= 3)

    def test_deterministic(self):
        ref = make_reference("gaussian")
        a = nlm_modulate(ref, ASYM_MONO)
        b = nlm_modulate(ref, ASYM_MONO)
        assert a.output.samples.tobytes() == b.output.samples.tobytes()
        assert a.trajectory.states.tobytes() == b.trajectory.states.tobytes()


class TestPscPwm:
    def test_triangle(self):
        assert unipolar_triangle(np.array([0.0, 0.25, 0.5, 0.75, 1.0])).tolist() == [0, 0.5, 1, 0.5, 0]

    def test_zero_reference(self):
        rep = psc_pwm_modulate(wf(np.zeros(200)), VoltageArray.symmetric(3))
        assert not np.any(rep.output.samples)

    def test_full_scale(self):
        rep = psc_pwm_modulate(wf(np.ones(200)), VoltageArray.symmetric(3))
        assert np.all(rep.trajectory.states == 1)
        np.testing.assert_allclose(rep.output.samples, 1.0)

    @pytest.mark.parametrize("level", [0.5, -0.5, 0.2, 0.9])
    def test_volt_second_balance(self, level):
        # 100 whole carrier periods at 50 kHz / 1 MHz
        rep = psc_pwm_modulate(wf(np.full(2000, level)), VoltageArray.symmetric(3), PscPwmConfig(50e3))
        assert np.mean(rep.output.samples) == pytest.approx(level, abs=0.01)

    def test_rejects_asymmetric(self):
        with pytest.raises(UnsupportedConfigurationError):
            psc_pwm_modulate(wf([0.1]), ASYM_MONO)

    def test_phase_offsets(self):
        np.testing.assert_allclose(PscPwmConfig().phase_offsets(3), [0, 2 * np.pi / 3, 4 * np.pi / 3])

    def test_each_module_switches_near_carrier_rate(self):
        ref = make_reference("gaussian")
        rep = psc_pwm_modulate(ref, VoltageArray.symmetric(3))
        # at most two transitions per carrier period per module over the pulse
        periods = ref.duration * 50e3
        assert max(rep.switch_count) <= 2 * periods + 2

    def test_sidebands_sit_at_carrier(self):
        ref = make_reference("gaussian")
        out = psc_pwm_modulate(ref, VoltageArray.symmetric(3)).output
        err = SampledWaveform(out.samples - ref.samples, FS)
        s = spectrum(err)
        above_ref_band = s.frequencies >= 25e3
        f_peak = s.frequencies[above_ref_band][np.argmax(s.magnitudes[above_ref_band])]
        assert f_peak >= 40e3
        assert band_energy_ratio(spectrum(out), 45e3, 55e3) > band_energy_ratio(
            spectrum(nlm_modulate(ref, VoltageArray.symmetric(3)).output), 45e3, 55e3
        )
