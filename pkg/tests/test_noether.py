"""Current, tensor, and balance-identity checks."""

import numpy as np
import pytest

from jetbalance.dynamics import FundamentalOneForm
from jetbalance.jet import (
    ParameterGrid,
    SampledSection,
    Variation,
    prolong_map,
)
from jetbalance.noether import (
    GroupActionLinearization,
    balance_check,
    divergence_tolerance,
    fundamental_vector_field,
    induced_variation,
    kinetic_current,
    lagrangian_current,
    lagrangian_stress_energy_tensor,
    noether_current,
    noether_map_matrix,
    spin_tensor,
    stress_energy_tensor,
)
from jetbalance.numeric import grid_divergence, grid_partial, maxnorm


def interval(n, lo=0.0, hi=1.0):
    return ParameterGrid(bounds=((lo, hi),), samples=(n,))


def mass_form(mass=1.0, force=None):
    return FundamentalOneForm(
        force=force or (lambda j: np.zeros(j.m)),
        momentum=lambda j: mass * j.xdot,
        kinetic=lambda j: 0.5 * mass * float(np.sum(j.xdot**2)),
    )


def random_instance(rng, p=2, m=3, shape=(5, 6)):
    """Random section plus a random smooth-free-form dynamical state."""
    grid = ParameterGrid(
        bounds=tuple((0.0, 1.0) for _ in range(p)), samples=shape
    )
    s = SampledSection(
        grid=grid,
        x_field=rng.uniform(-1.0, 1.0, size=shape + (m,)),
        xdot_field=rng.uniform(-1.0, 1.0, size=shape + (m, p)),
    )
    A = rng.uniform(-1.0, 1.0, size=(m, m))
    B = rng.uniform(-1.0, 1.0, size=(m, p, m, p))
    phi = FundamentalOneForm(
        force=lambda j: A @ j.x + np.sin(j.xdot[:, 0]),
        momentum=lambda j: np.einsum("mikl,kl->mi", B, j.xdot) + j.x[:, None] ** 2,
    )
    return grid, s, phi


# ---------------------------------------------------------------------------
# stress-energy, spin, current algebra
# ---------------------------------------------------------------------------

def test_stress_energy_zero_momentum():
    grid = interval(9)
    a = grid.axis_coords(0)
    s = prolong_map(a[:, None], grid)
    zero = FundamentalOneForm(
        force=lambda j: np.zeros(1), momentum=lambda j: np.zeros((1, 1))
    )
    assert maxnorm(stress_energy_tensor(zero, s)) == 0.0


def test_stress_energy_point_mass_kinetic_energy():
    # x = v a: the single component is half the kinetic contraction
    mass, vel = 2.0, 3.0
    grid = interval(11)
    a = grid.axis_coords(0)
    s = prolong_map((vel * a)[:, None], grid)
    t = stress_energy_tensor(mass_form(mass), s)
    assert np.allclose(t[..., 0, 0], 0.5 * mass * vel**2, atol=1e-10)


def test_stress_energy_trace_law():
    rng = np.random.default_rng(21)
    grid, s, phi = random_instance(rng, p=2, m=3)
    t = stress_energy_tensor(phi, s)
    trace = np.trace(t, axis1=-2, axis2=-1)
    # p = 2: the half-convention factor (1 - p/2) vanishes
    assert maxnorm(trace) <= 1e-12
    # and matches the kinetic contraction formula for every p
    for p in (1, 2, 3):
        grid_p, s_p, phi_p = random_instance(rng, p=p, m=2, shape=(4,) * p)
        t_p = stress_energy_tensor(phi_p, s_p)
        from jetbalance.dynamics import fields_along

        _, P = fields_along(phi_p, s_p)
        contraction = np.einsum("...mk,...mk->...", P, s_p.xdot_field)
        trace_p = np.trace(t_p, axis1=-2, axis2=-1)
        assert maxnorm(trace_p - (1.0 - p / 2.0) * contraction) <= 1e-12
        # the alternative convention is trace-free for every p
        t_alt = stress_energy_tensor(phi_p, s_p, convention="traceless")
        assert maxnorm(np.trace(t_alt, axis1=-2, axis2=-1)) <= 1e-12


def test_stress_energy_rejects_unknown_convention():
    grid = interval(5)
    s = prolong_map(np.zeros((5, 1)), grid)
    with pytest.raises(ValueError, match="convention"):
        stress_energy_tensor(mass_form(), s, convention="thirds")


def test_spin_tensor_zero_action():
    grid = interval(7)
    a = grid.axis_coords(0)
    s = prolong_map((a**2)[:, None], grid)
    act = GroupActionLinearization(
        d_param=np.ones((1, 1)), d_config=np.zeros((1, 1))
    )
    assert maxnorm(spin_tensor(mass_form(), s, act)) == 0.0


def test_spin_tensor_rotation_is_angular_momentum():
    # planar point mass with the rotation generator: S = m (v1 (-x2) + v2 x1)
    mass = 1.4
    grid = interval(21)
    a = grid.axis_coords(0)
    x = np.stack([np.cos(a), np.sin(2.0 * a)], axis=-1)
    s = prolong_map(x, grid)
    dbar = np.stack([-s.x_field[:, 1], s.x_field[:, 0]], axis=-1)[..., None]
    act = GroupActionLinearization(d_param=np.zeros((1, 1)), d_config=dbar)
    got = spin_tensor(mass_form(mass), s, act)[..., 0, 0]
    v = s.xdot_field[..., 0]
    oracle = mass * (v[:, 0] * (-s.x_field[:, 1]) + v[:, 1] * s.x_field[:, 0])
    assert maxnorm(got - oracle) <= 1e-12


def test_spin_tensor_translation_picks_momentum_component():
    rng = np.random.default_rng(4)
    grid, s, phi = random_instance(rng, p=2, m=3)
    d_config = np.zeros((3, 1))
    d_config[0, 0] = 1.0
    act = GroupActionLinearization(d_param=np.zeros((2, 1)), d_config=d_config)
    got = spin_tensor(phi, s, act)
    from jetbalance.dynamics import fields_along

    _, P = fields_along(phi, s)
    assert maxnorm(got[..., :, 0] - P[..., 0, :]) == 0.0


def test_noether_current_zero_variation():
    grid = interval(9)
    s = prolong_map(np.zeros((9, 1)), grid)
    v = Variation(
        grid=grid, da_field=np.zeros((9, 1)), dx_field=np.zeros((9, 1))
    )
    assert maxnorm(noether_current(mass_form(), s, v)) == 0.0


def test_noether_current_time_translation_is_kinetic_energy():
    mass, vel = 2.0, 1.5
    grid = interval(15)
    a = grid.axis_coords(0)
    s = prolong_map((vel * a)[:, None], grid)
    v = Variation(
        grid=grid,
        da_field=np.ones((15, 1)),
        dx_field=s.xdot_field[..., 0],
    )
    current = noether_current(mass_form(mass), s, v)
    assert np.allclose(current[..., 0], 0.5 * mass * vel**2, atol=1e-10)


def test_noether_split_identity_randomized():
    # J - (T da + Pi dxbar) vanishes nodewise for any decomposition built on
    # the section's contact components; purely algebraic, so exact
    rng = np.random.default_rng(33)
    for convention in ("half", "traceless"):
        for _ in range(25):
            grid, s, phi = random_instance(rng)
            da = rng.uniform(-1.0, 1.0, size=grid.shape + (grid.p,))
            dxbar = rng.uniform(-1.0, 1.0, size=grid.shape + (s.m,))
            dx = np.einsum("...mi,...i->...m", s.xdot_field, da) + dxbar
            v = Variation(grid=grid, da_field=da, dx_field=dx)
            current = noether_current(phi, s, v, convention=convention)
            t = stress_energy_tensor(phi, s, convention=convention)
            from jetbalance.dynamics import fields_along

            _, P = fields_along(phi, s)
            split = np.einsum("...ij,...j->...i", t, da) + np.einsum(
                "...mi,...m->...i", P, dxbar
            )
            assert maxnorm(current - split) <= 1e-12


# ---------------------------------------------------------------------------
# balance checks
# ---------------------------------------------------------------------------

def damped_trajectory_section(c, v0, n, t1=1.0):
    """Closed-form exponential decay: xdot = v0 e^{-ct}, extremal of F = -c v."""
    grid = interval(n, 0.0, t1)
    t = grid.axis_coords(0)
    x = (v0 / c) * (1.0 - np.exp(-c * t))
    v = v0 * np.exp(-c * t)
    return grid, SampledSection(
        grid=grid, x_field=x[:, None], xdot_field=v[:, None, None]
    )


def time_translation(s):
    return Variation(
        grid=s.grid,
        da_field=np.ones(s.grid.shape + (1,)),
        dx_field=s.xdot_field[..., 0],
    )


def test_balance_check_damped_point_mass():
    c, v0 = 1.0, 1.0
    grid, s = damped_trajectory_section(c, v0, 1001)
    phi = mass_form(force=lambda j: -c * j.xdot[:, 0])
    report = balance_check(phi, s, time_translation(s))
    t = grid.axis_coords(0)
    # divergence tracks dT/dt = -c v^2 < 0
    oracle = -c * (v0 * np.exp(-c * t)) ** 2
    assert maxnorm(report.divergence_field[1:-1] - oracle[1:-1]) <= 1e-5
    assert maxnorm(report.source_field[1:-1] - oracle[1:-1]) <= 1e-12
    assert report.residual_maxnorm <= 1e-5
    assert report.extremality_maxnorm <= 1e-5
    assert report.residual_l2 <= report.residual_maxnorm


def test_balance_check_second_order():
    c, v0 = 1.0, 1.0
    residuals = []
    for n in (501, 1001):
        _, s = damped_trajectory_section(c, v0, n)
        phi = mass_form(force=lambda j: -c * j.xdot[:, 0])
        residuals.append(balance_check(phi, s, time_translation(s)).residual_maxnorm)
    assert 3.2 <= residuals[0] / residuals[1] <= 4.8


def test_balance_check_trivial_zero():
    grid = interval(21)
    a = grid.axis_coords(0)
    s = prolong_map((2.0 * a)[:, None], grid)  # constant momentum
    report = balance_check(mass_form(), s, time_translation(s))
    assert maxnorm(report.divergence_field) <= 1e-11
    assert maxnorm(report.source_field) <= 1e-11


def test_balance_check_rejects_divergent_da():
    grid = interval(31)
    a = grid.axis_coords(0)
    s = prolong_map(a[:, None], grid)
    v = Variation(
        grid=grid, da_field=a[:, None], dx_field=np.zeros((31, 1))
    )
    with pytest.raises(ValueError, match="not divergence-free.*node"):
        balance_check(mass_form(), s, v)


def test_balance_check_fails_off_shell():
    k = 1.0
    grid = interval(201, 0.0, 2.0 * np.pi)
    t = grid.axis_coords(0)
    phi = mass_form(force=lambda j: -k * j.x)
    on_shell = SampledSection(
        grid=grid,
        x_field=np.cos(t)[:, None],
        xdot_field=(-np.sin(t))[:, None, None],
    )
    off = prolong_map((np.cos(t) + 0.5 * np.sin(2.0 * t))[:, None], grid)
    r_on = balance_check(phi, on_shell, time_translation(on_shell))
    r_off = balance_check(phi, off, time_translation(off))
    assert r_off.residual_maxnorm >= 10.0 * r_on.residual_maxnorm
    assert r_off.extremality_maxnorm >= 10.0 * r_on.extremality_maxnorm


def lifted_variation(s, da_const):
    da = np.broadcast_to(
        np.asarray(da_const, dtype=float), s.grid.shape + (s.grid.p,)
    ).copy()
    dx = np.einsum("...mi,...i->...m", s.xdot_field, da)
    return Variation(grid=s.grid, da_field=da, dx_field=dx)


def test_balance_check_p2_poisson_with_source():
    # extremal of a constant force on a two-axis grid: x = (a1^2 + a2^2)/4
    # solves div Pi = F = 1; lifted variations keep the identity, and every
    # field involved is quadratic, so the differencing is exact
    grid = ParameterGrid(bounds=((0.0, 1.0), (0.0, 1.0)), samples=(21, 21))
    coords = grid.node_coords()
    a1, a2 = coords[..., 0], coords[..., 1]
    s = SampledSection(
        grid=grid,
        x_field=((a1**2 + a2**2) / 4.0)[..., None],
        xdot_field=np.stack([a1 / 2.0, a2 / 2.0], axis=-1)[..., None, :],
    )
    phi = FundamentalOneForm(
        force=lambda j: np.ones(1), momentum=lambda j: j.xdot
    )
    report = balance_check(phi, s, lifted_variation(s, (0.3, -0.2)))
    assert report.extremality_maxnorm <= 1e-13
    assert maxnorm(report.source_field) > 0.1  # genuinely sourced
    assert report.residual_maxnorm <= 1e-12


def test_balance_check_p2_harmonic_second_order():
    # harmonic map x = sin(a1) sinh(a2): extremal of the free state; the
    # lifted current is conserved and the discrete residual drops ~4x
    def residual(n):
        grid = ParameterGrid(bounds=((0.0, 1.0), (0.0, 1.0)), samples=(n, n))
        coords = grid.node_coords()
        a1, a2 = coords[..., 0], coords[..., 1]
        s = SampledSection(
            grid=grid,
            x_field=(np.sin(a1) * np.sinh(a2))[..., None],
            xdot_field=np.stack(
                [np.cos(a1) * np.sinh(a2), np.sin(a1) * np.cosh(a2)], axis=-1
            )[..., None, :],
        )
        report = balance_check(mass_form(), s, lifted_variation(s, (1.0, 0.5)))
        assert report.extremality_maxnorm <= 1e-2  # O(h^2) off closed form
        return report.residual_maxnorm

    coarse, fine = residual(21), residual(41)
    assert 3.2 <= coarse / fine <= 4.8


def test_divergence_tolerance_admits_constants():
    grid = interval(11)
    da = np.full((11, 1), 3.0)
    assert maxnorm(grid_divergence(da, grid.spacing)) <= divergence_tolerance(
        grid, da
    )


# ---------------------------------------------------------------------------
# exact-case currents
# ---------------------------------------------------------------------------

def oscillator_closed_form(n=629, k=1.0):
    grid = interval(n, 0.0, 2.0 * np.pi)
    t = grid.axis_coords(0)
    s = SampledSection(
        grid=grid,
        x_field=np.cos(t)[:, None],
        xdot_field=(-np.sin(t))[:, None, None],
    )
    phi = FundamentalOneForm(
        force=lambda j: -k * j.x,
        momentum=lambda j: j.xdot,
        kinetic=lambda j: 0.5 * float(np.sum(j.xdot**2)),
        lagrangian=lambda j: 0.5 * float(np.sum(j.xdot**2))
        - 0.5 * k * float(j.x @ j.x),
    )
    return grid, s, phi


def test_lagrangian_current_conserves_energy():
    grid, s, phi = oscillator_closed_form()
    current = lagrangian_current(phi, s, time_translation(s))
    # J = p v - L = total energy = 1/2 along the closed-form extremal
    assert maxnorm(current - 0.5) <= 1e-9
    div = grid_divergence(current, grid.spacing)
    assert maxnorm(div[1:-1]) <= 1e-6


def test_lagrangian_current_zero_variation():
    grid, s, phi = oscillator_closed_form(101)
    v = Variation(
        grid=grid, da_field=np.zeros((101, 1)), dx_field=np.zeros((101, 1))
    )
    assert maxnorm(lagrangian_current(phi, s, v)) == 0.0


def test_lagrangian_current_momentum_conservation():
    # free particle, space translation: the current is the momentum
    mass, vel = 1.0, 0.7
    grid = interval(51)
    a = grid.axis_coords(0)
    s = prolong_map((vel * a)[:, None], grid)
    phi = FundamentalOneForm(
        force=lambda j: np.zeros(1),
        momentum=lambda j: mass * j.xdot,
        lagrangian=lambda j: 0.5 * mass * float(np.sum(j.xdot**2)),
    )
    v = Variation(
        grid=grid, da_field=np.zeros((51, 1)), dx_field=np.ones((51, 1))
    )
    current = lagrangian_current(phi, s, v)
    assert maxnorm(current - mass * vel) <= 1e-9
    assert maxnorm(grid_divergence(current, grid.spacing)[1:-1]) <= 1e-7


def test_lagrangian_stress_tensor_matches_energy():
    grid, s, phi = oscillator_closed_form(101)
    t = lagrangian_stress_energy_tensor(phi, s)
    # p v - L = total energy for the oscillator
    assert maxnorm(t[..., 0, 0] - 0.5) <= 1e-12


def test_exact_case_degeneration():
    # with a valid Lagrangian, conservation is the zero-source balance:
    # both residuals are O(h^2) on the extremal
    grid, s, phi = oscillator_closed_form()
    h2 = grid.spacing[0] ** 2
    report = balance_check(phi, s, time_translation(s))
    div = grid_divergence(
        lagrangian_current(phi, s, time_translation(s)), grid.spacing
    )
    assert report.residual_maxnorm <= 5.0 * h2
    assert maxnorm(div[1:-1]) <= 5.0 * h2


def test_kinetic_current_free_particle_conserved():
    grid = interval(101)
    a = grid.axis_coords(0)
    s = prolong_map((1.3 * a)[:, None], grid)
    current, report = kinetic_current(mass_form(), s, time_translation(s))
    assert maxnorm(report.divergence_field[1:-1]) <= 1e-10
    assert maxnorm(report.source_field) == 0.0


def test_kinetic_current_matches_balance_check_for_damping():
    c, v0 = 0.5, 1.0
    _, s = damped_trajectory_section(c, v0, 801)
    phi = mass_form(force=lambda j: -c * j.xdot[:, 0])
    v = time_translation(s)
    current, kin_report = kinetic_current(phi, s, v)
    bal_report = balance_check(phi, s, v)
    # same current (T = half the contraction for the quadratic form), so the
    # two reports coincide to rounding
    assert maxnorm(current - noether_current(phi, s, v)) <= 1e-14
    assert maxnorm(
        kin_report.divergence_field - bal_report.divergence_field
    ) <= 1e-12
    assert maxnorm(kin_report.source_field - bal_report.source_field) <= 1e-12
    assert kin_report.residual_maxnorm == pytest.approx(
        bal_report.residual_maxnorm, rel=1e-9
    )


def test_kinetic_current_pure_configuration_variation():
    rng = np.random.default_rng(8)
    grid = interval(41)
    a = grid.axis_coords(0)
    s = prolong_map(np.stack([np.sin(a), a**2], axis=-1), grid)
    dx = rng.normal(size=(41, 2))
    v = Variation(grid=grid, da_field=np.zeros((41, 1)), dx_field=dx)
    current, report = kinetic_current(mass_form(2.0), s, v)
    from jetbalance.dynamics import fields_along

    _, P = fields_along(mass_form(2.0), s)
    assert maxnorm(current - np.einsum("...mi,...m->...i", P, dx)) == 0.0
    assert maxnorm(report.source_field) == 0.0


# ---------------------------------------------------------------------------
# group actions
# ---------------------------------------------------------------------------

def test_fundamental_vector_field_translation():
    c = np.array([0.3, -0.2])

    def action(t, gen, a, x):
        return a, x + t * gen

    da, dx = fundamental_vector_field(action, c, (np.zeros(1), np.zeros(2)))
    assert maxnorm(da) == 0.0
    assert maxnorm(dx - c) <= 1e-12


def test_fundamental_vector_field_rotation():
    omega = 0.7
    point = (np.zeros(1), np.array([0.4, -1.2]))

    def action(t, gen, a, x):
        angle = t * gen[0]
        rot = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        return a, rot @ x

    da, dx = fundamental_vector_field(action, np.array([omega]), point)
    x1, x2 = point[1]
    assert maxnorm(dx - np.array([-omega * x2, omega * x1])) <= 1e-9
    assert maxnorm(da) == 0.0


def test_fundamental_vector_field_time_translation():
    def action(t, gen, a, x):
        return a + t * gen[0], x

    da, dx = fundamental_vector_field(
        action, np.array([1.0]), (np.array([0.2]), np.array([0.5]))
    )
    # exact up to rounding of (a +- step) at step 1e-5
    assert da[0] == pytest.approx(1.0, abs=1e-11)
    assert maxnorm(dx) == 0.0


def test_fundamental_vector_field_linear_in_generator():
    def action(t, gen, a, x):
        angle = t * gen[0]
        rot = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        return a + t * gen[1], rot @ x

    point = (np.array([0.1]), np.array([0.8, 0.3]))
    g1 = np.array([0.6, -0.2])
    g2 = np.array([-0.1, 0.9])
    da1, dx1 = fundamental_vector_field(action, g1, point)
    da2, dx2 = fundamental_vector_field(action, g2, point)
    da12, dx12 = fundamental_vector_field(action, g1 + g2, point)
    assert maxnorm(da12 - da1 - da2) <= 1e-8
    assert maxnorm(dx12 - dx1 - dx2) <= 1e-8


def test_noether_map_zero_action():
    grid = interval(9)
    a = grid.axis_coords(0)
    s = prolong_map(a[:, None], grid)
    act = GroupActionLinearization(
        d_param=np.zeros((1, 2)), d_config=np.zeros((1, 2))
    )
    assert maxnorm(noether_map_matrix(mass_form(), s, act)) == 0.0


def test_noether_map_time_translation_is_kinetic_energy():
    mass, vel = 2.0, 1.1
    grid = interval(11)
    a = grid.axis_coords(0)
    s = prolong_map((vel * a)[:, None], grid)
    act = GroupActionLinearization(
        d_param=np.ones((1, 1)), d_config=np.zeros((1, 1))
    )
    matrix = noether_map_matrix(mass_form(mass), s, act)
    assert np.allclose(matrix[..., 0, 0], 0.5 * mass * vel**2, atol=1e-10)


def test_noether_map_consistency_with_current():
    rng = np.random.default_rng(12)
    grid, s, phi = random_instance(rng, p=2, m=3)
    act = GroupActionLinearization(
        d_param=rng.uniform(-1, 1, size=(2, 3)),
        d_config=rng.uniform(-1, 1, size=grid.shape + (3, 3)),
    )
    gen = rng.uniform(-1, 1, size=3)
    matrix = noether_map_matrix(phi, s, act)
    v = induced_variation(s, act, gen)
    direct = noether_current(phi, s, v)
    assert maxnorm(np.einsum("...iA,A->...i", matrix, gen) - direct) <= 1e-12


def test_current_map_is_not_a_lie_homomorphism():
    # The map from variations to currents is linear but not a Lie-bracket
    # homomorphism: current components enter the bracket of currents
    # quadratically, the bracket of variations only linearly.  Concrete
    # one-dimensional demonstration with a-dependent variations.
    grid, s, phi = oscillator_closed_form(401)
    a = grid.axis_coords(0)
    h = grid.spacing[0]

    u_da, u_dx = np.ones_like(a), np.sin(a)
    w_da, w_dx = np.cos(a), a * 0.1

    def current(da, dx):
        v = Variation(grid=grid, da_field=da[:, None], dx_field=dx[:, None])
        return noether_current(phi, s, v)[:, 0]

    ju = current(u_da, u_dx)
    jw = current(w_da, w_dx)
    bracket_of_currents = ju * grid_partial(jw, 0, h) - jw * grid_partial(ju, 0, h)

    # bracket of the variations (components depend on a only)
    b_da = u_da * grid_partial(w_da, 0, h) - w_da * grid_partial(u_da, 0, h)
    b_dx = u_da * grid_partial(w_dx, 0, h) - w_da * grid_partial(u_dx, 0, h)
    current_of_bracket = current(b_da, b_dx)

    mismatch = maxnorm((bracket_of_currents - current_of_bracket)[1:-1])
    scale = max(maxnorm(bracket_of_currents), maxnorm(current_of_bracket))
    assert mismatch >= 0.1 * scale
