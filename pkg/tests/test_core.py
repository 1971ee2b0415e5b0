import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amps.core import (
    ContractError,
    SampledWaveform,
    StateTrajectory,
    StateVector,
    VoltageArray,
    all_states,
    enumerate_levels,
    output_voltage,
)

ASYMMETRIC_ARRAYS = {
    "monophasic": [0.278, 0.320, 0.402],
    "biphasic": [0.234, 0.350, 0.416],
    "gaussian": [0.243, 0.351, 0.406],
}


def brute_force_levels(v):
    """Distinct values of dot(V, S) over all 3^N states, by plain iteration."""
    sums = sorted(
        sum(vi * si for vi, si in zip(v, s)) for s in itertools.product((-1, 0, 1), repeat=len(v))
    )
    merged = [sums[0]]
    for x in sums[1:]:
        if x - merged[-1] > 1e-12:
            merged.append(x)
    return merged


voltage_lists = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.floats(0.02, 1.0), min_size=n, max_size=n)
)


def test_symmetric_three_modules_have_seven_levels():
    ls = enumerate_levels(VoltageArray.symmetric(3))
    np.testing.assert_allclose(ls.levels, np.arange(-3, 4) / 3, atol=1e-15)


@pytest.mark.parametrize("row", sorted(ASYMMETRIC_ARRAYS))
def test_asymmetric_arrays_have_27_levels(row):
    assert len(enumerate_levels(VoltageArray.normalized(ASYMMETRIC_ARRAYS[row]))) == 27


def test_two_equal_modules():
    ls = enumerate_levels(VoltageArray([0.5, 0.5]))
    assert ls.levels.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_quarter_three_quarter_gives_nine_levels():
    ls = enumerate_levels(VoltageArray([0.25, 0.75]))
    assert ls.levels.tolist() == [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
    assert ls.levels.tolist() == brute_force_levels([0.25, 0.75])


def test_witness_prefers_fewest_active_modules_then_lexicographic():
    ls = enumerate_levels(VoltageArray([0.5, 0.5]))
    w = {float(l): ls.witness(i).states for i, l in enumerate(ls.levels)}
    assert w[0.0] == (0, 0)
    assert w[0.5] == (0, 1)
    assert w[-0.5] == (-1, 0)
    assert w[1.0] == (1, 1)


def test_generic_array_reaches_all_states():
    v = VoltageArray.normalized([1.0, np.sqrt(2), np.pi])
    assert len(enumerate_levels(v)) == 27


@settings(max_examples=60, deadline=None)
@given(voltage_lists)
def test_levels_match_brute_force(raw):
    v = VoltageArray.normalized(raw)
    ls = enumerate_levels(v)
    expected = brute_force_levels(v.voltages.tolist())
    assert len(ls) == len(expected)
    np.testing.assert_allclose(ls.levels, expected, rtol=0, atol=1e-12)


def test_levels_match_brute_force_eight_modules():
    v = VoltageArray.normalized([1, 2, 3, 5, 7, 11, 13, 17])
    np.testing.assert_allclose(
        enumerate_levels(v).levels, brute_force_levels(v.voltages.tolist()), rtol=0, atol=1e-12
    )


@settings(max_examples=40, deadline=None)
@given(voltage_lists)
def test_level_set_symmetric_and_contains_zero(raw):
    ls = enumerate_levels(VoltageArray.normalized(raw))
    assert np.all(np.diff(ls.levels) > 0)
    np.testing.assert_array_equal(ls.levels, -ls.levels[::-1])
    assert 0.0 in ls.levels.tolist()


@settings(max_examples=40, deadline=None)
@given(voltage_lists)
def test_witnesses_achieve_their_levels_and_negation(raw):
    v = VoltageArray.normalized(raw)
    ls = enumerate_levels(v)
    for i, level in enumerate(ls.levels):
        w = ls.witness(i)
        assert output_voltage(v, w) == pytest.approx(level, abs=1e-12)
        assert output_voltage(v, -w) == pytest.approx(-level, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(voltage_lists, st.randoms(use_true_random=False))
def test_permutation_invariance(raw, rnd):
    shuffled = list(raw)
    rnd.shuffle(shuffled)
    a = enumerate_levels(VoltageArray.normalized(raw))
    b = enumerate_levels(VoltageArray.normalized(shuffled))
    np.testing.assert_allclose(a.levels, b.levels, rtol=0, atol=1e-12)


def test_equal_voltages_give_2n_plus_1_levels():
    for n in range(1, 9):
        assert len(enumerate_levels(VoltageArray.symmetric(n))) == 2 * n + 1


def test_module_cap():
    enumerate_levels(VoltageArray.symmetric(12))
    with pytest.raises(ContractError, match="maximum"):
        enumerate_levels(VoltageArray.symmetric(13))


def test_output_voltage_examples():
    v = VoltageArray([0.278, 0.320, 0.402])
    assert output_voltage(v, StateVector((1, 1, 0))) == pytest.approx(0.598, abs=1e-15)
    assert output_voltage(v, (0, 0, 0)) == 0.0
    assert output_voltage(v, (1, 1, 1)) == pytest.approx(1.0, abs=1e-15)


def test_output_voltage_length_mismatch():
    with pytest.raises(ContractError):
        output_voltage(VoltageArray([0.5, 0.5]), (1, 0, 1))


class TestVoltageArray:
    def test_sorted_canonical(self):
        assert VoltageArray([0.5, 0.2, 0.3]).voltages.tolist() == [0.2, 0.3, 0.5]

    def test_requires_unit_sum(self):
        with pytest.raises(ContractError, match="sum"):
            VoltageArray([0.5, 0.6])

    @pytest.mark.parametrize("bad", [[], [0.0, 1.0], [-0.2, 1.2], [float("nan"), 1.0]])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ContractError):
            VoltageArray(bad)

    def test_normalized_from_percentages(self):
        v = VoltageArray.normalized([27.8, 32.0, 40.2])
        np.testing.assert_allclose(v.voltages, [0.278, 0.32, 0.402])

    def test_immutable(self):
        v = VoltageArray([0.5, 0.5])
        with pytest.raises(ValueError):
            v.voltages[0] = 0.1


class TestSampledWaveform:
    def test_invariants(self):
        with pytest.raises(ContractError):
            SampledWaveform([], 1e6)
        with pytest.raises(ContractError):
            SampledWaveform([0.0, np.inf], 1e6)
        with pytest.raises(ContractError):
            SampledWaveform([0.0], 0.0)

    def test_time_axis(self):
        w = SampledWaveform([0, 1, 0, -1], 4.0)
        assert w.time.tolist() == [0.0, 0.25, 0.5, 0.75]
        assert w.duration == 1.0


def test_state_vector_rejects_other_values():
    with pytest.raises(ContractError):
        StateVector((0, 2))


def test_trajectory_switch_counts():
    traj = StateTrajectory([[0, 0], [1, 0], [1, 0], [0, -1], [0, -1]], 1e6)
    assert traj.switch_counts() == [2, 1]
    assert traj.vector(3).states == (0, -1)


def test_all_states_lexicographic():
    s = all_states(2)
    assert s.tolist() == [list(x) for x in itertools.product((-1, 0, 1), repeat=2)]
