import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jointcs.core import DimensionMismatchError, ProblemDims, SensingEnsemble, SignalEnsemble, SupportSet
from jointcs.generation import (
    Seed,
    SignalType,
    draw_instance,
    draw_sensing,
    draw_support,
    gen_signals,
    sense,
)


def test_full_support_is_forced():
    assert draw_support(5, 5, Seed(1)).indices == (0, 1, 2, 3, 4)


def test_singleton_support():
    s = draw_support(5, 1, Seed(2))
    assert len(s) == 1 and 0 <= s.indices[0] < 5


def test_support_is_deterministic():
    assert draw_support(100, 10, Seed(9)) == draw_support(100, 10, Seed(9))
    assert draw_support(100, 10, Seed(9)) != draw_support(100, 10, Seed(10))


def test_support_rejects_k_above_n():
    with pytest.raises(ValueError):
        draw_support(3, 4, Seed(0))


def test_support_is_roughly_uniform():
    counts = np.zeros(10)
    for t in range(2000):
        counts[list(draw_support(10, 3, Seed(5).child(t)))] += 1
    # each index is included with probability 3/10
    assert np.all(np.abs(counts / 2000 - 0.3) < 0.05)


def test_type_iv_entries_are_exactly_one():
    dims = ProblemDims(50, 10, 4, 7)
    omega = draw_support(50, 7, Seed(0))
    x = gen_signals(SignalType.TYPE_IV, dims, omega, Seed(1))
    assert np.all(x.x[omega.as_array()] == 1.0)


def test_type_ii_entries_nonnegative():
    dims = ProblemDims(50, 10, 6, 20)
    omega = draw_support(50, 20, Seed(0))
    x = gen_signals(SignalType.TYPE_II, dims, omega, Seed(1))
    assert np.all(x.x[omega.as_array()] >= 0)


def test_type_iii_moments():
    dims = ProblemDims(1, 1, 10_000, 1)
    x = gen_signals(SignalType.TYPE_III, dims, SupportSet((0,), 1), Seed(4))
    sample = x.x[0]
    assert abs(sample.mean() - 1.0) <= 0.02
    assert abs(sample.var() - 0.25) <= 0.02


def test_type_i_moments():
    dims = ProblemDims(1, 1, 10_000, 1)
    sample = gen_signals(SignalType.TYPE_I, dims, SupportSet((0,), 1), Seed(4)).x[0]
    assert abs(sample.mean()) <= 0.05 and abs(sample.var() - 1.0) <= 0.05


def test_sensing_matrices_independent_and_deterministic():
    dims = ProblemDims(4, 3, 2, 1)
    a = draw_sensing(dims, Seed(8))
    b = draw_sensing(dims, Seed(8))
    assert a.phis.shape == (2, 3, 4)
    assert not np.any(a.phis[0] == a.phis[1])
    np.testing.assert_array_equal(a.phis, b.phis)


def test_sensing_entry_moments():
    phis = draw_sensing(ProblemDims(100, 100, 1, 1), Seed(12)).phis
    assert abs(phis.mean()) <= 0.05
    assert abs(phis.var() - 1.0) <= 0.05


def test_adding_sensors_keeps_existing_streams():
    small = draw_instance(ProblemDims(30, 8, 2, 4), 1, Seed(3))
    large = draw_instance(ProblemDims(30, 8, 3, 4), 1, Seed(3))
    assert small[0].omega == large[0].omega
    np.testing.assert_array_equal(small[1].phis, large[1].phis[:2])


def test_sense_zero_signal():
    phis = draw_sensing(ProblemDims(6, 4, 2, 1), Seed(0))
    x = SignalEnsemble(np.zeros((6, 2)), SupportSet((3,), 6))
    np.testing.assert_array_equal(sense(phis, x).ys, 0.0)


def test_sense_identity():
    x = SignalEnsemble(np.array([[1.0, 0.0], [0.0, 0.0], [2.0, -3.0]]), SupportSet((0, 2), 3))
    y = sense(SensingEnsemble(np.stack([np.eye(3), np.eye(3)])), x)
    np.testing.assert_array_equal(y.ys, x.x)


def test_sense_hand_product():
    x = SignalEnsemble(np.array([[1.0], [2.0], [0.0]]), SupportSet((0, 1), 3))
    y = sense(SensingEnsemble(np.array([[[1.0, 0, 0], [1, 1, 1]]])), x)
    np.testing.assert_array_equal(y.ys[:, 0], [1.0, 3.0])


def test_sense_dimension_mismatch():
    x = SignalEnsemble(np.ones((3, 1)), SupportSet((0, 1, 2), 3))
    with pytest.raises(DimensionMismatchError):
        sense(SensingEnsemble(np.ones((1, 2, 4))), x)


@settings(max_examples=60, deadline=None)
@given(
    signal_type=st.sampled_from(list(SignalType)),
    n=st.integers(1, 40),
    l=st.integers(1, 5),
    data=st.data(),
)
def test_generated_signals_satisfy_invariants(signal_type, n, l, data):
    k = data.draw(st.integers(1, n))
    seed = Seed(data.draw(st.integers(0, 2**63)))
    dims = ProblemDims(n, 3, l, k)
    omega = draw_support(n, k, seed.child(0))
    x = gen_signals(signal_type, dims, omega, seed.child(1))
    # constructor re-validates; also check the shared support explicitly
    SignalEnsemble(x.x, omega)
    off = np.setdiff1d(np.arange(n), omega.as_array())
    assert np.all(x.x[off] == 0.0)
    assert x.x.shape == (n, l)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 2**32))
def test_sense_is_linear(a, b, seed):
    dims = ProblemDims(12, 5, 3, 4)
    s = Seed(seed)
    phis = draw_sensing(dims, s.child(0))
    omega = draw_support(12, 4, s.child(1))
    x1 = gen_signals(1, dims, omega, s.child(2))
    x2 = gen_signals(3, dims, omega, s.child(3))
    combo = SignalEnsemble(a * x1.x + b * x2.x, omega)
    lhs = sense(phis, combo).ys
    rhs = a * sense(phis, x1).ys + b * sense(phis, x2).ys
    scale = max(np.linalg.norm(rhs), np.linalg.norm(lhs), 1e-300)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale + 1e-300
