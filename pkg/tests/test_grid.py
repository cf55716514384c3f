import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brownchain.errors import DomainError
from brownchain.grid import FieldGrid


def test_nodes():
    g = FieldGrid(2.0, 4)
    np.testing.assert_allclose(g.t_nodes, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(g.v_nodes, [0, 0.25, 0.5, 0.75, 1])
    assert g.n_points == 5


def test_refined_axes_contain_nodes():
    g = FieldGrid(1.0, 8, refine=4)
    assert g.n_points == 33
    np.testing.assert_allclose(g.v[g.node_index], g.v_nodes)
    np.testing.assert_allclose(g.times[g.node_index], g.t_nodes)


def test_hat_indices_floor_to_nodes():
    g = FieldGrid(1.0, 4, refine=3)
    np.testing.assert_array_equal(g.v_hat_index[:7], [0, 0, 0, 3, 3, 3, 6])
    np.testing.assert_allclose(g.v[g.v_hat_index], g.v_hat(g.v))
    np.testing.assert_allclose(g.times[g.t_hat_index], g.t_hat(g.times))


@given(st.integers(2, 64), st.floats(0, 1))
def test_v_hat_is_idempotent_floor(d, v):
    g = FieldGrid(1.0, d)
    h = g.v_hat(v)
    assert h <= v + 1e-12
    assert v - h < 1 / d + 1e-12
    assert g.v_hat(h) == h


def test_out_of_range():
    g = FieldGrid(1.0, 4)
    with pytest.raises(DomainError):
        g.v_hat(1.5)
    with pytest.raises(DomainError):
        g.t_hat(-0.1)


@pytest.mark.parametrize("args", [(0.0, 4), (1.0, 1), (1.0, 4, 0)])
def test_invalid(args):
    with pytest.raises(DomainError):
        FieldGrid(*args)


def test_same_as():
    assert FieldGrid(1.0, 4).same_as(FieldGrid(1.0, 4))
    assert not FieldGrid(1.0, 4).same_as(FieldGrid(1.0, 8))
