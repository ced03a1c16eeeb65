"""Jet-level checks: prolongation, integrability, variations, immersion rank."""

import numpy as np
import pytest

from jetbalance.jet import (
    ParameterGrid,
    SampledSection,
    Variation,
    immersion_rank_check,
    integrability_defect,
    prolong_map,
    prolong_variation,
)
from jetbalance.numeric import maxnorm


def interval(n=101, lo=0.0, hi=1.0):
    return ParameterGrid(bounds=((lo, hi),), samples=(n,))


def test_grid_validation():
    with pytest.raises(ValueError, match=">= 3 samples"):
        ParameterGrid(bounds=((0.0, 1.0),), samples=(2,))
    with pytest.raises(ValueError, match="empty interval"):
        ParameterGrid(bounds=((1.0, 1.0),), samples=(5,))
    g = ParameterGrid(bounds=((0.0, 1.0), (0.0, 2.0)), samples=(5, 9))
    assert g.p == 2
    assert g.spacing == (0.25, 0.25)
    assert g.cell_measure == pytest.approx(0.0625)


def test_prolong_map_exact_on_linear():
    # x(a) = A a reproduces the constant matrix A at every node
    grid = ParameterGrid(bounds=((0.0, 1.0), (-1.0, 1.0)), samples=(7, 9))
    A = np.array([[2.0, -1.0], [0.5, 3.0], [1.0, 0.0]])
    coords = grid.node_coords()
    x = np.einsum("mk,...k->...m", A, coords)
    s = prolong_map(x, grid)
    assert maxnorm(s.xdot_field - A) <= 1e-12


def test_prolong_map_constant_is_zero():
    grid = interval(11)
    s = prolong_map(np.full((11, 3), 2.5), grid)
    assert maxnorm(s.xdot_field) <= 1e-14


def test_prolong_map_analytic_oracle():
    # x(a) = (a^2, sin a): derivative at a = 0.5 is (1, cos 0.5)
    grid = interval(101)
    a = grid.axis_coords(0)
    s = prolong_map(np.stack([a**2, np.sin(a)], axis=-1), grid)
    i = int(np.argmin(np.abs(a - 0.5)))
    assert abs(s.xdot_field[i, 0, 0] - 1.0) <= 1e-4
    assert abs(s.xdot_field[i, 1, 0] - np.cos(0.5)) <= 1e-4


def test_prolong_map_shape_mismatch():
    with pytest.raises(ValueError, match="does not match grid"):
        prolong_map(np.zeros((7, 1)), interval(11))


def test_defect_zero_for_prolonged():
    grid = interval(41)
    a = grid.axis_coords(0)
    s = prolong_map(np.stack([np.exp(a)], axis=-1), grid)
    assert maxnorm(integrability_defect(s)) == 0.0


def test_defect_constant_mismatch():
    # x = 0 with xdot = 1 has defect -1 everywhere
    grid = interval(11)
    s = SampledSection(
        grid=grid, x_field=np.zeros((11, 1)), xdot_field=np.ones((11, 1, 1))
    )
    assert np.allclose(integrability_defect(s), -1.0, atol=1e-14)


def test_defect_analytic_oracle():
    # x = a^2 with stored contact 3a: defect is 2a - 3a = -a
    grid = interval(1001)
    a = grid.axis_coords(0)
    s = SampledSection(
        grid=grid,
        x_field=(a**2)[:, None],
        xdot_field=(3.0 * a)[:, None, None],
    )
    defect = integrability_defect(s)[1:-1, 0, 0]
    assert maxnorm(defect - (-a[1:-1])) <= 1e-6


def test_defect_second_order_against_analytic_jets():
    # against the analytic contact components the defect is the differencing
    # error, which halves its grid spacing into a ~4x drop
    errs = []
    for n in (101, 201):
        grid = interval(n, 0.0, np.pi)
        a = grid.axis_coords(0)
        s = SampledSection(
            grid=grid,
            x_field=np.sin(a)[:, None],
            xdot_field=np.cos(a)[:, None, None],
        )
        errs.append(maxnorm(integrability_defect(s)[1:-1]))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_prolong_variation_constant_and_linear():
    grid = interval(21)
    const = Variation(
        grid=grid, da_field=np.zeros((21, 1)), dx_field=np.full((21, 2), 3.0)
    )
    assert maxnorm(prolong_variation(const).dxdot_field) <= 1e-14

    a = grid.axis_coords(0)
    lin = Variation(
        grid=grid,
        da_field=np.zeros((21, 1)),
        dx_field=np.stack([a, np.zeros_like(a)], axis=-1),
    )
    out = prolong_variation(lin)
    assert np.allclose(out.dxdot_field[:, 0, 0], 1.0, atol=1e-12)
    assert maxnorm(out.dxdot_field[:, 1, 0]) <= 1e-13


def test_prolong_variation_analytic_oracle():
    # d/da cos a = -sin a at a = 0.3
    grid = interval(201)
    a = grid.axis_coords(0)
    v = Variation(
        grid=grid, da_field=np.zeros((201, 1)), dx_field=np.cos(a)[:, None]
    )
    out = prolong_variation(v)
    i = int(np.argmin(np.abs(a - 0.3)))
    assert abs(out.dxdot_field[i, 0, 0] + np.sin(0.3)) <= 1e-4
    assert out.prolonged


def test_prolong_variation_is_linear():
    rng = np.random.default_rng(3)
    grid = interval(17)
    u = Variation(
        grid=grid, da_field=rng.normal(size=(17, 1)), dx_field=rng.normal(size=(17, 2))
    )
    v = Variation(
        grid=grid, da_field=rng.normal(size=(17, 1)), dx_field=rng.normal(size=(17, 2))
    )
    alpha, beta = 0.75, -1.5
    combined = Variation(
        grid=grid,
        da_field=alpha * u.da_field + beta * v.da_field,
        dx_field=alpha * u.dx_field + beta * v.dx_field,
    )
    lhs = prolong_variation(combined).dxdot_field
    rhs = (
        alpha * prolong_variation(u).dxdot_field
        + beta * prolong_variation(v).dxdot_field
    )
    assert maxnorm(lhs - rhs) <= 1e-13


def test_immersion_rank_basic():
    grid = interval(9)
    eye = np.broadcast_to(np.eye(2)[:, :1], (9, 2, 1)).copy()
    ok = SampledSection(grid=grid, x_field=np.zeros((9, 2)), xdot_field=eye)
    assert immersion_rank_check(ok).all()

    flat = SampledSection(
        grid=grid, x_field=np.zeros((9, 2)), xdot_field=np.zeros((9, 2, 1))
    )
    assert not immersion_rank_check(flat).any()


def test_immersion_rank_drops_at_origin():
    # xdot = (a, 2a) loses rank exactly where a = 0
    grid = interval(21, -1.0, 1.0)
    a = grid.axis_coords(0)
    xdot = np.stack([a, 2.0 * a], axis=-1)[..., None]
    s = SampledSection(grid=grid, x_field=np.zeros((21, 2)), xdot_field=xdot)
    flags = immersion_rank_check(s)
    zero_node = int(np.argmin(np.abs(a)))
    assert a[zero_node] == 0.0
    assert not flags[zero_node]
    assert flags[np.arange(21) != zero_node].all()


def test_immersion_rank_requires_p_le_m():
    grid = ParameterGrid(bounds=((0.0, 1.0), (0.0, 1.0)), samples=(5, 5))
    s = SampledSection(
        grid=grid, x_field=np.zeros((5, 5, 1)), xdot_field=np.zeros((5, 5, 1, 2))
    )
    with pytest.raises(ValueError, match="immersion impossible"):
        immersion_rank_check(s)


def test_immersion_rank_reparameterization_invariant():
    rng = np.random.default_rng(11)
    grid = ParameterGrid(bounds=((0.0, 1.0), (0.0, 1.0)), samples=(6, 5))
    xdot = rng.normal(size=(6, 5, 4, 2))
    sec = SampledSection(grid=grid, x_field=np.zeros((6, 5, 4)), xdot_field=xdot)
    reparam = rng.normal(size=(2, 2)) + 3.0 * np.eye(2)  # well-conditioned
    mixed = SampledSection(
        grid=grid,
        x_field=np.zeros((6, 5, 4)),
        xdot_field=np.einsum("...mi,ij->...mj", xdot, reparam),
    )
    assert np.array_equal(
        immersion_rank_check(sec), immersion_rank_check(mixed)
    )
