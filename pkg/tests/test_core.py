import numpy as np
import pytest

from jointcs.core import (
    DimensionMismatchError,
    MeasurementEnsemble,
    ProblemDims,
    SensingEnsemble,
    SignalEnsemble,
    SolverConfig,
    SparsityViolationError,
    SupportSet,
    validate_problem,
)
from jointcs.generation import Seed, draw_sensing, sense


def _ensemble(n, support, l=1):
    x = np.zeros((n, l))
    x[list(support)] = 1.0 + np.arange(len(support))[:, None]
    return SignalEnsemble(x, SupportSet.of(support, n))


def test_consistent_instance_accepted():
    dims = ProblemDims(n=4, m=3, l=1, k=2)
    x = _ensemble(4, [0, 2])
    phis = SensingEnsemble(np.ones((1, 3, 4)))
    problem = validate_problem(dims, x, phis)
    assert problem.signals is x


def test_off_support_entry_rejected():
    x = np.zeros((4, 1))
    x[[0, 2]] = 1.0
    x[3] = 0.5
    with pytest.raises(SparsityViolationError):
        SignalEnsemble(x, SupportSet.of([0, 2], 4))


def test_mismatched_sensor_shapes_rejected():
    with pytest.raises(DimensionMismatchError, match="phis"):
        SensingEnsemble([np.zeros((3, 4)), np.zeros((3, 5))])


def test_wrong_support_size_rejected():
    dims = ProblemDims(n=4, m=3, l=1, k=3)
    with pytest.raises(SparsityViolationError, match="omega"):
        validate_problem(dims, _ensemble(4, [0, 2]), SensingEnsemble(np.ones((1, 3, 4))))


@pytest.mark.parametrize(
    "field, phis_shape, x_cols",
    [("x", (2, 3, 4), 1), ("phis", (1, 3, 4), 2), ("phis", (2, 2, 4), 2)],
)
def test_dimension_mismatch_names_field(field, phis_shape, x_cols):
    dims = ProblemDims(n=4, m=3, l=2, k=2)
    with pytest.raises(DimensionMismatchError, match=field):
        validate_problem(dims, _ensemble(4, [0, 2], l=x_cols), SensingEnsemble(np.ones(phis_shape)))


@pytest.mark.parametrize("kwargs", [dict(n=4, m=3, l=1, k=0), dict(n=4, m=3, l=1, k=5),
                                    dict(n=4, m=0, l=1, k=1), dict(n=4, m=3, l=0, k=1)])
def test_problem_dims_invariants(kwargs):
    with pytest.raises(ValueError):
        ProblemDims(**kwargs)


def test_support_set_invariants():
    assert SupportSet.of([3, 1], 5).indices == (1, 3)
    with pytest.raises(ValueError):
        SupportSet((2, 1), 5)
    with pytest.raises(ValueError):
        SupportSet.of([1, 1], 5)
    with pytest.raises(ValueError):
        SupportSet((5,), 5)


def test_types_are_immutable():
    phis = SensingEnsemble(np.ones((2, 3, 4)))
    with pytest.raises(ValueError):
        phis.phis[0, 0, 0] = 2.0
    with pytest.raises(ValueError):
        phis.stacked_a[0, 0] = 2.0


def test_stacked_views():
    phis = SensingEnsemble(np.arange(24.0).reshape(2, 3, 4))
    assert phis.stacked_a.shape == (6, 4)
    np.testing.assert_array_equal(phis.stacked_a[3:], phis.phis[1])
    np.testing.assert_allclose(phis.scaled_a, phis.stacked_a / np.sqrt(2))
    ys = MeasurementEnsemble(np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]))
    np.testing.assert_array_equal(ys.stacked_y, [1, 2, 3, 4, 5, 6])


def test_stacked_measurements_match_stacked_matrix_for_identical_signals():
    n, l = 12, 4
    x_hat = np.zeros(n)
    x_hat[[1, 5, 9]] = [0.3, -2.0, 1.7]
    x = SignalEnsemble(np.repeat(x_hat[:, None], l, axis=1), SupportSet.of([1, 5, 9], n))
    phis = draw_sensing(ProblemDims(n, 6, l, 3), Seed(3))
    y = sense(phis, x).stacked_y
    expected = phis.stacked_a @ x_hat
    assert np.linalg.norm(y - expected) <= 1e-12 * np.linalg.norm(expected)


def test_solver_config_validation():
    cfg = SolverConfig("b", "d")
    assert cfg.name == "b+d"
    with pytest.raises(ValueError):
        SolverConfig("z", "c")
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(residual_floor=0.0)
