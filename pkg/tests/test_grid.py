import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rlse_delta.grid import (
    GridSpec, MeshFunction, diff_backward, diff_central, diff_forward, diff_second,
    forward_difference, h1_seminorm, inner_product, l2_norm, linf_norm, lq_norm, restrict,
    restrict_to, second_difference,
)
from rlse_delta.solutions import GaussonParams, gausson

# e^2 sqrt(pi) (1 + erf(1/2)), the mass of the omega = lam = 1 Gausson (mpmath, 40 digits)
GAUSSON_MASS = 19.913623404617145


def random_zh0(grid, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.n_nodes) + 1j * rng.standard_normal(grid.n_nodes)
    v[0] = v[-1] = 0
    return MeshFunction(v, grid)


class TestGridSpec:
    def test_nodes(self):
        g = GridSpec(12.0, 37)
        assert g.x[0] == -12.0 and g.x[-1] == 12.0 and g.x[g.M] == 0.0
        assert len(g.x) == 75
        assert math.isclose(g.h * 2 * g.M, 24.0, rel_tol=1e-15)

    def test_from_h(self):
        assert GridSpec.from_h(12, 0.0625).M == 192
        with pytest.raises(ValueError):
            GridSpec.from_h(12, 0.7)

    @pytest.mark.parametrize("a, M", [(0.0, 4), (-1.0, 4), (1.0, 1), (1.0, 2.5)])
    def test_rejects_bad_parameters(self, a, M):
        with pytest.raises(ValueError):
            GridSpec(a, M)

    def test_mesh_function_length(self):
        with pytest.raises(ValueError):
            MeshFunction(np.zeros(5), GridSpec(1.0, 4))


class TestDifferences:
    def test_zero(self):
        u = GridSpec(1.0, 4).zeros()
        for j in range(8):
            assert diff_forward(u, j) == 0
        for j in range(1, 8):
            assert diff_central(u, j) == 0 and diff_second(u, j) == 0

    def test_linear(self):
        g = GridSpec(1.0, 4)
        u = g.sample(lambda x: x, zero_ends=False)
        for j in range(1, 8):
            assert diff_central(u, j) == pytest.approx(1.0, abs=1e-14)
            assert diff_second(u, j) == pytest.approx(0.0, abs=1e-12)
            assert diff_backward(u, j) == pytest.approx(1.0, abs=1e-14)

    def test_quadratic(self):
        # (x+h)^2 - 2x^2 + (x-h)^2 = 2h^2, so the stencil gives 2 exactly
        g = GridSpec(1.0, 4)
        u = g.sample(lambda x: x**2, zero_ends=False)
        for j in range(1, 8):
            assert diff_second(u, j) == pytest.approx(2.0, abs=1e-13)

    @pytest.mark.parametrize("op, j", [(diff_forward, 8), (diff_forward, -1), (diff_central, 0),
                                       (diff_second, 8), (diff_backward, 0)])
    def test_index_contract(self, op, j):
        with pytest.raises(IndexError):
            op(GridSpec(1.0, 4).zeros(), j)

    def test_vectorised_match_pointwise(self):
        g = GridSpec(2.0, 6)
        u = random_zh0(g, 1)
        fd, sd = forward_difference(u), second_difference(u)
        for j in range(12):
            assert fd[j] == pytest.approx(diff_forward(u, j))
        for j in range(1, 12):
            assert sd[j] == pytest.approx(diff_second(u, j))


class TestInnerProduct:
    def test_constant(self):
        g = GridSpec(3.0, 10)
        one = MeshFunction(np.ones(g.n_nodes), g)
        assert inner_product(one, one) == pytest.approx(6.0, rel=1e-14)

    def test_disjoint_supports(self):
        g = GridSpec(1.0, 5)
        u, v = g.zeros().values.copy(), g.zeros().values.copy()
        u[:5], v[5:] = 1.0, 2.0
        assert inner_product(MeshFunction(u, g), MeshFunction(v, g)) == 0

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(GridSpec(1.0, 4).zeros(), GridSpec(1.0, 8).zeros())

    def test_gausson_mass_against_quadrature(self):
        g = GridSpec(12.0, 4800)
        u = g.sample(lambda x: gausson(x, GaussonParams(1.0, 1.0)))
        # trapezoid-type sum of a profile with a kink at a node: O(h^2)
        assert l2_norm(u) ** 2 == pytest.approx(GAUSSON_MASS, abs=10 * g.h**2)

    def test_norm_relations(self):
        g = GridSpec(1.0, 8)
        u = random_zh0(g, 3)
        assert l2_norm(u) == pytest.approx(math.sqrt(inner_product(u, u).real))
        assert lq_norm(u, 2) == pytest.approx(l2_norm(u))
        assert linf_norm(u) == np.max(np.abs(u.values))
        assert h1_seminorm(u) == pytest.approx(l2_norm(forward_difference(u)))
        with pytest.raises(ValueError):
            lq_norm(u, 0.5)


@settings(max_examples=50, deadline=None)
@given(M=st.integers(2, 60), a=st.floats(0.5, 20), seed=st.integers(0, 2**32 - 1))
def test_summation_by_parts(M, a, seed):
    g = GridSpec(a, M)
    u, v = random_zh0(g, seed), random_zh0(g, seed + 1)
    lhs = inner_product(second_difference(u), v)
    rhs = -inner_product(forward_difference(u), forward_difference(v))
    # |rhs| <= |d+u| |d+v|, which sets the rounding scale
    assert abs(lhs - rhs) <= 1e-13 * h1_seminorm(u) * h1_seminorm(v)

    self_term = inner_product(second_difference(u), u)
    assert abs(self_term.imag) <= 1e-13 * abs(self_term.real)
    assert self_term.real == pytest.approx(-h1_seminorm(u) ** 2, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(M=st.integers(2, 200), seed=st.integers(0, 2**32 - 1))
def test_inverse_inequality(M, seed):
    g = GridSpec(5.0, M)
    u = random_zh0(g, seed)
    assert linf_norm(u) <= l2_norm(u) / math.sqrt(g.h) * (1 + 1e-12)


class TestRestrict:
    def test_sampling_commutes(self):
        fine, coarse = GridSpec(4.0, 32), GridSpec(4.0, 16)
        f = lambda x: np.exp(-x**2) * (1 + 1j * x)
        assert np.array_equal(restrict(fine.sample(f), 2).values, coarse.sample(f).values)
        assert restrict(fine.sample(f), 2).grid == coarse

    def test_identity(self):
        u = random_zh0(GridSpec(1.0, 8), 0)
        assert np.array_equal(restrict(u, 1).values, u.values)

    def test_non_nesting(self):
        u = GridSpec(1.0, 12).zeros()
        with pytest.raises(ValueError):
            restrict(u, 8)
        with pytest.raises(ValueError):
            restrict(u, 3)
        with pytest.raises(ValueError):
            restrict_to(u, GridSpec(1.0, 5))
