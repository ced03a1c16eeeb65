"""The dynamical state and its diagnostics.

A dynamical state is a 1-form with a force part F (an m-covector at each jet
point) and a momentum part Pi (an (m, p) matrix at each jet point).  Both are
supplied as black-box evaluators of a :class:`~jetbalance.jet.Jet1Point`.
This module evaluates the form along sampled sections, applies the Euler
operator D* whose zeroes are the equations of motion, computes the virtual
work of a prolonged variation, and provides the exactness diagnostics: the
residuals of F = dL/dx, Pi = dL/dxdot, the momentum-gradient tensor and its
symmetry, the Lagrange bracket of the pulled-back momentum, and Euler
homogeneity checks.

Throughout, derivatives of evaluators are taken by central finite differences
with the step :func:`~jetbalance.numeric.central_step`, and derivatives along
the parameter grid by second-order grid differencing.  Where a formula calls
for the parameter derivative of the configuration map we use the stored
contact components of the section; for sections built by
:func:`~jetbalance.jet.prolong_map` these are exactly the grid derivatives of
the sampled map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .jet import Jet1Point, SampledSection, Variation
from .numeric import central_step, grid_partial, maxnorm, quadrature


class EvaluationError(RuntimeError):
    """A user-supplied evaluator failed or returned bad data at a point."""


@dataclass(frozen=True)
class FundamentalOneForm:
    """Force/momentum evaluators defining the dynamical state.

    ``force(j)`` returns the m-covector F and ``momentum(j)`` the (m, p)
    matrix Pi at a jet point j.  ``lagrangian`` being present claims the whole
    form is exact; ``kinetic`` being present claims the momentum part alone is
    exact.  Claims are checkable through the residual operations below, never
    assumed.
    """

    force: Callable[[Jet1Point], np.ndarray]
    momentum: Callable[[Jet1Point], np.ndarray]
    lagrangian: Callable[[Jet1Point], float] | None = None
    kinetic: Callable[[Jet1Point], float] | None = None

    def __add__(self, other: "FundamentalOneForm") -> "FundamentalOneForm":
        if not isinstance(other, FundamentalOneForm):
            return NotImplemented

        def _sum(f, g):
            if f is None or g is None:
                return None
            return lambda j: f(j) + g(j)

        return FundamentalOneForm(
            force=lambda j: np.asarray(self.force(j)) + np.asarray(other.force(j)),
            momentum=lambda j: np.asarray(self.momentum(j))
            + np.asarray(other.momentum(j)),
            lagrangian=_sum(self.lagrangian, other.lagrangian),
            kinetic=_sum(self.kinetic, other.kinetic),
        )


def fields_along(
    phi: FundamentalOneForm, s: SampledSection
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate force and momentum at every node of a section.

    Returns ``(F_field, Pi_field)`` with shapes ``grid.shape + (m,)`` and
    ``grid.shape + (m, p)``.
    """
    shape = s.grid.shape
    m, p = s.m, s.grid.p
    F = np.empty(shape + (m,))
    P = np.empty(shape + (m, p))
    for idx in np.ndindex(*shape):
        j = s.jet_at(idx)
        try:
            F[idx] = np.asarray(phi.force(j), dtype=float).reshape(m)
            P[idx] = np.asarray(phi.momentum(j), dtype=float).reshape(m, p)
        except Exception as exc:
            raise EvaluationError(
                f"evaluator failed at node {idx}, a={j.a}"
            ) from exc
    return F, P


def dstar(phi: FundamentalOneForm, s: SampledSection) -> np.ndarray:
    """Euler operator: F minus the grid divergence of the pulled-back momentum.

    Returns the m-covector field whose vanishing is the equation of motion.
    The divergence differences the composite field a -> Pi(s(a)), which works
    for black-box evaluators with arbitrary parameter dependence.
    """
    F, P = fields_along(phi, s)
    h = s.grid.spacing
    div = np.zeros_like(F)
    for i in range(s.grid.p):
        div += grid_partial(P[..., :, i], i, h[i])
    return F - div


def pulled_back_form(phi: FundamentalOneForm, s: SampledSection) -> np.ndarray:
    """Components of the form pulled back to the parameter grid.

    Nodewise p-covector ``c_i = F_mu xdot^mu_i + Pi^j_mu d(xdot^mu_j)/da^i``,
    with the parameter derivative of the contact components taken by grid
    differencing.
    """
    F, P = fields_along(phi, s)
    h = s.grid.spacing
    c = np.einsum("...m,...mi->...i", F, s.xdot_field)
    for i in range(s.grid.p):
        dxd = grid_partial(s.xdot_field, i, h[i])
        c[..., i] += np.einsum("...mj,...mj->...", P, dxd)
    return c


def virtual_work(phi: FundamentalOneForm, s: SampledSection, v: Variation) -> float:
    """Total virtual work of a prolonged variation along a section.

    Trapezoidal quadrature of ``F . dx + Pi : dxdot - c . da`` over the grid,
    where c is :func:`pulled_back_form`.  The variation must be prolonged.
    """
    if not v.prolonged:
        raise ValueError("virtual_work requires a prolonged variation")
    if v.grid != s.grid or v.m != s.m:
        raise ValueError("variation and section shapes do not match")
    F, P = fields_along(phi, s)
    integrand = (
        np.einsum("...m,...m->...", F, v.dx_field)
        + np.einsum("...mi,...mi->...", P, v.dxdot_field)
        - np.einsum("...i,...i->...", pulled_back_form(phi, s), v.da_field)
    )
    return quadrature(integrand, s.grid.spacing)


def _perturbed(j: Jet1Point, slot: str, index, delta: float) -> Jet1Point:
    arr = getattr(j, slot).copy()
    arr[index] += delta
    return replace(j, **{slot: arr})


def _central(
    f: Callable[[Jet1Point], np.ndarray], j: Jet1Point, slot: str, index
) -> np.ndarray:
    value = getattr(j, slot)[index]
    h = central_step(value)
    plus = np.asarray(f(_perturbed(j, slot, index, +h)), dtype=float)
    minus = np.asarray(f(_perturbed(j, slot, index, -h)), dtype=float)
    return (plus - minus) / (2.0 * h)


def lagrangian_exactness_residual(
    phi: FundamentalOneForm, j: Jet1Point
) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the claim that the whole form is the differential of L.

    Returns ``(F - dL/dx, Pi - dL/dxdot)`` with the scalar derivatives taken
    by central differences.  For a dissipative force the first residual is the
    non-variational part of the force.
    """
    if phi.lagrangian is None:
        raise ValueError("fundamental form carries no lagrangian evaluator")
    F = np.asarray(phi.force(j), dtype=float)
    P = np.asarray(phi.momentum(j), dtype=float)
    dLdx = np.array([_central(phi.lagrangian, j, "x", mu) for mu in range(j.m)])
    dLdxdot = np.array(
        [
            [_central(phi.lagrangian, j, "xdot", (mu, i)) for i in range(j.p)]
            for mu in range(j.m)
        ]
    )
    return F - dLdx, P - dLdxdot


@dataclass(frozen=True)
class GammaTensor:
    """Momentum gradient in the contact slots at one jet point.

    ``values[i, jj, mu, nu]`` is dPi^i_mu / dxdot^nu_jj.  The symmetry
    residual max |values[i,j,mu,nu] - values[j,i,nu,mu]| measures the
    closedness obstruction of the momentum part; it is reported, not assumed.
    """

    values: np.ndarray
    symmetry_residual: float


def gamma_tensor(
    phi: FundamentalOneForm, j: Jet1Point, step: float
) -> GammaTensor:
    """Central-difference Jacobian of the momentum in the contact slots."""
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    m, p = j.m, j.p
    values = np.empty((p, p, m, m))
    for nu in range(m):
        for jj in range(p):
            try:
                plus = np.asarray(
                    phi.momentum(_perturbed(j, "xdot", (nu, jj), +step)), dtype=float
                )
                minus = np.asarray(
                    phi.momentum(_perturbed(j, "xdot", (nu, jj), -step)), dtype=float
                )
            except Exception as exc:
                raise EvaluationError(
                    f"momentum evaluator failed near xdot[{nu},{jj}]"
                ) from exc
            d = (plus - minus) / (2.0 * step)  # shape (m, p): dPi^i_mu
            values[:, jj, :, nu] = d.T
    residual = maxnorm(values - values.transpose(1, 0, 3, 2))
    return GammaTensor(values=values, symmetry_residual=residual)


@dataclass(frozen=True)
class KineticExactnessReport:
    """Residuals of the claim that the momentum part is exact.

    ``momentum_param_gradient_max`` and ``momentum_config_gradient_max`` must
    both vanish when the momentum is the differential of a kinetic-energy
    function (it can then depend on the contact slots only);
    ``gamma_symmetry_residual`` is the closedness obstruction; and when a
    kinetic evaluator is present ``kinetic_gradient_residual`` is
    max |Pi - dT/dxdot|.  When a section is supplied,
    ``momentum_velocity_exchange_max`` measures, per parameter axis, the
    failure of Pi . d(xdot)/da to equal d(Pi)/da . xdot along the section, and
    for p = 1 ``force_power_residual`` compares Pi . d(xdot)/da with
    F . xdot (which agree on extremals when the exchange holds).
    """

    momentum_param_gradient_max: float
    momentum_config_gradient_max: float
    gamma_symmetry_residual: float
    kinetic_gradient_residual: float | None = None
    momentum_velocity_exchange_max: float | None = None
    force_power_residual: float | None = None


def kinetic_exactness_check(
    phi: FundamentalOneForm,
    j: Jet1Point,
    step: float,
    section: SampledSection | None = None,
) -> KineticExactnessReport:
    """Report every testable consequence of an exact momentum part."""
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    d_param = max(
        (maxnorm(_central(phi.momentum, j, "a", i)) for i in range(j.p)),
        default=0.0,
    )
    d_config = max(
        (maxnorm(_central(phi.momentum, j, "x", mu)) for mu in range(j.m)),
        default=0.0,
    )
    gamma = gamma_tensor(phi, j, step)

    kinetic_residual = None
    if phi.kinetic is not None:
        P = np.asarray(phi.momentum(j), dtype=float)
        dTdxdot = np.array(
            [
                [_central(phi.kinetic, j, "xdot", (mu, i)) for i in range(j.p)]
                for mu in range(j.m)
            ]
        )
        kinetic_residual = maxnorm(P - dTdxdot)

    exchange = None
    force_power = None
    if section is not None:
        F, P = fields_along(phi, section)
        h = section.grid.spacing
        worst = 0.0
        for i in range(section.grid.p):
            dxd = grid_partial(section.xdot_field, i, h[i])
            dP = grid_partial(P, i, h[i])
            lhs = np.einsum("...mj,...mj->...", P, dxd)
            rhs = np.einsum("...mj,...mj->...", dP, section.xdot_field)
            worst = max(worst, maxnorm((lhs - rhs)[section.grid.interior]))
        exchange = worst
        if section.grid.p == 1:
            dxd = grid_partial(section.xdot_field, 0, h[0])
            lhs = np.einsum("...mj,...mj->...", P, dxd)
            rhs = np.einsum("...m,...mj->...", F, section.xdot_field)
            force_power = maxnorm((lhs - rhs)[section.grid.interior])

    return KineticExactnessReport(
        momentum_param_gradient_max=d_param,
        momentum_config_gradient_max=d_config,
        gamma_symmetry_residual=gamma.symmetry_residual,
        kinetic_gradient_residual=kinetic_residual,
        momentum_velocity_exchange_max=exchange,
        force_power_residual=force_power,
    )


def lagrange_bracket(phi: FundamentalOneForm, s: SampledSection) -> np.ndarray:
    """Antisymmetric pairing measuring non-closedness of the pulled-back momentum.

    Nodewise (p, p) matrices; identically zero for p = 1.  Vanishing of the
    bracket is necessary for the momentum part to be exact along the section.
    """
    grid = s.grid
    p = grid.p
    if p == 1:
        return np.zeros(grid.shape + (1, 1))
    _, P = fields_along(phi, s)
    h = grid.spacing
    dP = np.stack([grid_partial(P, i, h[i]) for i in range(p)], axis=-1)
    dX = np.stack(
        [grid_partial(s.xdot_field, i, h[i]) for i in range(p)], axis=-1
    )
    b = np.einsum("...mki,...mkj->...ij", dP, dX)
    return b - np.swapaxes(b, -1, -2)


@dataclass(frozen=True)
class HomogeneityReport:
    """Residuals of the scaling laws satisfied by quadratic kinetic energy.

    ``degree1_residual`` is max over the supplied scale factors of
    |Pi(lam xdot) - lam Pi(xdot)|; ``euler_identity_residual`` is
    |Pi - gamma . xdot| (Euler's theorem for degree-one momentum); the two
    kinetic fields are filled when a kinetic evaluator is present.
    """

    degree1_residual: float
    euler_identity_residual: float
    kinetic_pairing_residual: float | None = None
    degree2_residual: float | None = None


def euler_homogeneity_check(
    phi: FundamentalOneForm, j: Jet1Point, lambdas: Sequence[float]
) -> HomogeneityReport:
    """Check degree-one momentum / degree-two kinetic-energy scaling at a point."""
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas:
        raise ValueError("lambdas must be non-empty")
    if any(lam <= 0.0 for lam in lambdas):
        raise ValueError("scale factors must be positive")

    P = np.asarray(phi.momentum(j), dtype=float)
    deg1 = 0.0
    for lam in lambdas:
        scaled = replace(j, xdot=lam * j.xdot)
        deg1 = max(
            deg1, maxnorm(np.asarray(phi.momentum(scaled), dtype=float) - lam * P)
        )

    step = central_step(maxnorm(j.xdot))
    gamma = gamma_tensor(phi, j, step).values
    reconstructed = np.einsum("klmn,nl->mk", gamma, j.xdot)
    euler_residual = maxnorm(P - reconstructed)

    pairing = None
    deg2 = None
    if phi.kinetic is not None:
        T = float(phi.kinetic(j))
        pairing = abs(T - 0.5 * float(np.einsum("mi,mi->", P, j.xdot)))
        deg2 = 0.0
        for lam in lambdas:
            scaled = replace(j, xdot=lam * j.xdot)
            deg2 = max(deg2, abs(float(phi.kinetic(scaled)) - lam**2 * T))

    return HomogeneityReport(
        degree1_residual=deg1,
        euler_identity_residual=euler_residual,
        kinetic_pairing_residual=pairing,
        degree2_residual=deg2,
    )
