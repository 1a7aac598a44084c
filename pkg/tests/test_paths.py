import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gcpower.paths import (
    DiscretePath,
    concatenate_paths,
    constant_path,
    reverse_path,
)


def random_nodes(draw_shape=(8, 2)):
    return arrays(
        float,
        draw_shape,
        elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False),
    )


class TestDiscretePath:
    def test_basic_properties(self):
        p = DiscretePath(dt=0.5, nodes=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
        assert p.n_segments == 2
        assert p.duration == pytest.approx(1.0)
        np.testing.assert_array_equal(p.start, [0.0, 0.0])
        np.testing.assert_array_equal(p.end, [1.0, 1.0])
        assert not p.closed
        np.testing.assert_allclose(p.times(), [0.0, 0.5, 1.0])

    def test_closed_flag_requires_exact_equality(self):
        nodes = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        assert DiscretePath(dt=1.0, nodes=nodes).closed
        nodes[-1, 0] += 1e-15
        assert not DiscretePath(dt=1.0, nodes=nodes).closed

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            DiscretePath(dt=0.0, nodes=np.zeros((3, 2)))
        with pytest.raises(ValueError):
            DiscretePath(dt=0.1, nodes=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            DiscretePath(dt=0.1, nodes=np.zeros((4, 3)))
        nodes = np.zeros((4, 2))
        nodes[2, 1] = np.inf
        with pytest.raises(ValueError):
            DiscretePath(dt=0.1, nodes=nodes)


class TestReverse:
    @given(nodes=random_nodes())
    @settings(max_examples=50, deadline=None)
    def test_involution(self, nodes):
        p = DiscretePath(dt=0.25, nodes=nodes)
        rr = reverse_path(reverse_path(p))
        np.testing.assert_array_equal(rr.nodes, p.nodes)
        assert rr.dt == p.dt

    def test_preserves_closure(self):
        nodes = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]])
        assert reverse_path(DiscretePath(dt=1.0, nodes=nodes)).closed


class TestConcatenate:
    def test_joins_and_counts_segments(self):
        a = DiscretePath(dt=0.1, nodes=np.array([[0.0, 0.0], [1.0, 0.0]]))
        b = DiscretePath(dt=0.1, nodes=np.array([[1.0, 0.0], [1.0, 1.0], [2.0, 1.0]]))
        joined = concatenate_paths(a, b)
        assert joined.n_segments == 3
        np.testing.assert_array_equal(joined.nodes[1], [1.0, 0.0])

    def test_rejects_mismatched_dt(self):
        a = DiscretePath(dt=0.1, nodes=np.zeros((2, 2)))
        b = DiscretePath(dt=0.2, nodes=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            concatenate_paths(a, b)

    def test_rejects_disjoint_junction(self):
        a = DiscretePath(dt=0.1, nodes=np.array([[0.0, 0.0], [1.0, 0.0]]))
        b = DiscretePath(dt=0.1, nodes=np.array([[5.0, 0.0], [6.0, 0.0]]))
        with pytest.raises(ValueError):
            concatenate_paths(a, b)


class TestConstantPath:
    def test_shape_and_closure(self):
        p = constant_path((2.0, -1.0), T=1.0, dt=0.25)
        assert p.nodes.shape == (5, 2)
        assert p.closed
        np.testing.assert_array_equal(p.nodes[3], [2.0, -1.0])

    def test_rejects_non_multiple_duration(self):
        with pytest.raises(ValueError):
            constant_path((0.0, 0.0), T=1.0, dt=0.3)
