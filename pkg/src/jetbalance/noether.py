"""Generalized currents and the balance identity.

For a dynamical state evaluated along a section, a variation (da, dx) induces
a current J on the parameter grid.  On extremal sections, and for
divergence-free da, the grid divergence of J equals a source built from the
force and the momentum gradients; for an exact state the source collapses and
the current is conserved.  This module builds the current, the canonical
stress-energy-momentum and spin tensors, the Noether map of a linearized
group action, and the numerical balance report comparing divergence against
source.

Two bookkeeping conventions are supported for how much of the kinetic
contraction ``Pi : xdot`` the current subtracts: ``"half"`` (the default; the
trace of the stress tensor is then (1 - p/2) times the kinetic contraction
and reduces to the kinetic energy for p = 1) and ``"traceless"`` (subtract
1/p of the contraction, which makes the trace vanish identically for every p
and coincides with subtracting the full contraction in the one-dimensional
case).  Parameter derivatives of the configuration map are taken from the
stored contact components; for prolonged sections these are exactly the grid
derivatives of the sampled map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import EvaluationError, FundamentalOneForm, dstar, fields_along
from .jet import ParameterGrid, SampledSection, Variation
from .numeric import grid_divergence, grid_partial, maxnorm

#: Safety factor in the divergence-free tolerance for parameter variations.
DIV_FREE_FACTOR = 10.0


def _coefficient(convention: str, p: int) -> float:
    if convention == "half":
        return 0.5
    if convention == "traceless":
        return 1.0 / p
    raise ValueError(f"unknown convention {convention!r}; use 'half' or 'traceless'")


@dataclass(frozen=True)
class GroupActionLinearization:
    """Linearized group action split into parameter and configuration parts.

    ``d_param`` maps generator components to parameter vector fields (shape
    ``(p, dim_g)`` or ``grid.shape + (p, dim_g)``); ``d_config`` maps them to
    the substantial configuration part (shape ``(m, dim_g)`` or
    ``grid.shape + (m, dim_g)``).  Constant arrays broadcast over the grid.
    """

    d_param: np.ndarray
    d_config: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "d_param", np.asarray(self.d_param, dtype=float))
        object.__setattr__(self, "d_config", np.asarray(self.d_config, dtype=float))
        if self.d_param.shape[-1] != self.d_config.shape[-1]:
            raise ValueError("d_param and d_config disagree on generator dimension")

    @property
    def dim_g(self) -> int:
        return self.d_param.shape[-1]


def _over_grid(arr: np.ndarray, grid: ParameterGrid, core: tuple[int, ...]) -> np.ndarray:
    """Broadcast a constant or grid-indexed array to ``grid.shape + core``."""
    target = grid.shape + core
    if arr.shape == core:
        return np.broadcast_to(arr, target)
    if arr.shape == target:
        return arr
    raise ValueError(f"array shape {arr.shape} matches neither {core} nor {target}")


@dataclass(frozen=True)
class BalanceReport:
    """Divergence-versus-source comparison for a current on the grid.

    ``residual_maxnorm`` is the max over interior nodes of
    |divergence - source|; ``residual_l2`` the cell-weighted discrete L2 norm
    over the interior.  ``extremality_maxnorm``, when present, records the
    interior max-norm of the Euler operator along the section: the balance
    identity presumes an extremal, and this field lets callers judge how far
    off shell the section is.
    """

    divergence_field: np.ndarray
    source_field: np.ndarray
    residual_maxnorm: float
    residual_l2: float
    extremality_maxnorm: float | None = None


def _report(
    divergence: np.ndarray,
    source: np.ndarray,
    region: tuple[slice, ...],
    cell: float,
    extremality: float | None = None,
) -> BalanceReport:
    residual = (divergence - source)[region]
    l2 = float(np.sqrt(cell * np.sum(residual**2)))
    return BalanceReport(
        divergence_field=divergence,
        source_field=source,
        residual_maxnorm=maxnorm(residual),
        residual_l2=l2,
        extremality_maxnorm=extremality,
    )


def divergence_tolerance(grid: ParameterGrid, da_field: np.ndarray) -> float:
    """Largest admissible interior grid divergence for a parameter variation.

    Scales with the squared spacing (the scheme order) and the field's
    max-norm, so constant fields pass exactly.
    """
    h = max(grid.spacing)
    return DIV_FREE_FACTOR * h * h * maxnorm(da_field)


def _require_divergence_free(grid: ParameterGrid, da_field: np.ndarray) -> None:
    div = grid_divergence(da_field, grid.spacing)
    region = grid.interior
    tol = divergence_tolerance(grid, da_field)
    worst = maxnorm(div[region])
    if worst > tol:
        inner = np.abs(div[region])
        flat = int(np.argmax(inner))
        node = tuple(
            int(c) + 1 for c in np.unravel_index(flat, inner.shape)
        )
        raise ValueError(
            f"parameter variation is not divergence-free: |div da| = {worst:.3e} "
            f"> {tol:.3e} at node {node}"
        )


def stress_energy_tensor(
    phi: FundamentalOneForm, s: SampledSection, convention: str = "half"
) -> np.ndarray:
    """Canonical stress-energy-momentum tensor field, shape ``grid.shape + (p, p)``.

    ``T[i, j] = Pi^i_mu xdot^mu_j - c (Pi^k_mu xdot^mu_k) delta^i_j`` with the
    convention coefficient c described in the module docstring.
    """
    c = _coefficient(convention, s.grid.p)
    _, P = fields_along(phi, s)
    t = np.einsum("...mi,...mj->...ij", P, s.xdot_field)
    kinetic = np.einsum("...mk,...mk->...", P, s.xdot_field)
    return t - c * kinetic[..., None, None] * np.eye(s.grid.p)


def spin_tensor(
    phi: FundamentalOneForm, s: SampledSection, act: GroupActionLinearization
) -> np.ndarray:
    """Momentum contracted with the configuration part of the action.

    Nodewise ``S[i, A] = Pi^i_mu d_config^mu_A``; only this tensor feels how
    the group acts on the configuration space.
    """
    _, P = fields_along(phi, s)
    dbar = _over_grid(act.d_config, s.grid, (s.m, act.dim_g))
    return np.einsum("...mi,...mA->...iA", P, dbar)


def noether_current(
    phi: FundamentalOneForm,
    s: SampledSection,
    v: Variation,
    convention: str = "half",
) -> np.ndarray:
    """Current on the parameter grid induced by a variation.

    ``J^i = Pi^i_mu dx^mu - c (Pi^k_mu xdot^mu_k) da^i``.
    """
    if v.grid != s.grid or v.m != s.m:
        raise ValueError("variation and section shapes do not match")
    c = _coefficient(convention, s.grid.p)
    _, P = fields_along(phi, s)
    kinetic = np.einsum("...mk,...mk->...", P, s.xdot_field)
    return (
        np.einsum("...mi,...m->...i", P, v.dx_field)
        - c * kinetic[..., None] * v.da_field
    )


def balance_check(
    phi: FundamentalOneForm,
    s: SampledSection,
    v: Variation,
    convention: str = "half",
) -> BalanceReport:
    """Compare the divergence of the induced current with its source term.

    The parameter part of the variation must be divergence-free (checked
    against :func:`divergence_tolerance`).  Extremality of the section is not
    enforced; the interior max-norm of the Euler operator is reported instead
    so callers can interpret the residual, and deliberately off-shell sections
    show the identity failing.
    """
    if v.grid != s.grid or v.m != s.m:
        raise ValueError("variation and section shapes do not match")
    grid = s.grid
    _require_divergence_free(grid, v.da_field)

    c = _coefficient(convention, grid.p)
    F, P = fields_along(phi, s)
    h = grid.spacing

    current = noether_current(phi, s, v, convention=convention)
    divergence = grid_divergence(current, h)

    # Source components: F . xdot_i + (1-c) Pi : d_i(xdot) - c d_i(Pi) : xdot.
    source = np.zeros(grid.shape)
    f_part = np.einsum("...m,...mi->...i", F, s.xdot_field)
    for i in range(grid.p):
        dxd = grid_partial(s.xdot_field, i, h[i])
        dP = grid_partial(P, i, h[i])
        phi_i = (
            f_part[..., i]
            + (1.0 - c) * np.einsum("...mj,...mj->...", P, dxd)
            - c * np.einsum("...mj,...mj->...", dP, s.xdot_field)
        )
        source += phi_i * v.da_field[..., i]

    extremality = maxnorm(dstar(phi, s)[grid.interior])
    return _report(divergence, source, grid.interior, grid.cell_measure, extremality)


def lagrangian_current(
    phi: FundamentalOneForm, s: SampledSection, v: Variation
) -> np.ndarray:
    """Current of the exact case: ``J^i = (dL/dxdot^mu_i) dx^mu - L da^i``.

    Requires a lagrangian evaluator; its contact-slot gradient is taken by
    central differences at every node.  On extremals with a symmetry variation
    this current is conserved.
    """
    if phi.lagrangian is None:
        raise ValueError("fundamental form carries no lagrangian evaluator")
    if v.grid != s.grid or v.m != s.m:
        raise ValueError("variation and section shapes do not match")
    from .dynamics import _central  # local import to keep the helper private

    shape = s.grid.shape
    m, p = s.m, s.grid.p
    current = np.empty(shape + (p,))
    for idx in np.ndindex(*shape):
        j = s.jet_at(idx)
        try:
            lval = float(phi.lagrangian(j))
            dLdxdot = np.array(
                [
                    [_central(phi.lagrangian, j, "xdot", (mu, i)) for i in range(p)]
                    for mu in range(m)
                ]
            )
        except Exception as exc:
            raise EvaluationError(
                f"lagrangian evaluator failed at node {idx}, a={j.a}"
            ) from exc
        current[idx] = dLdxdot.T @ v.dx_field[idx] - lval * v.da_field[idx]
    return current


def lagrangian_stress_energy_tensor(
    phi: FundamentalOneForm, s: SampledSection
) -> np.ndarray:
    """Exact-case stress tensor ``T^i_j = Pi^i_mu xdot^mu_j - L delta^i_j``."""
    if phi.lagrangian is None:
        raise ValueError("fundamental form carries no lagrangian evaluator")
    _, P = fields_along(phi, s)
    t = np.einsum("...mi,...mj->...ij", P, s.xdot_field)
    lval = np.empty(s.grid.shape)
    for idx in np.ndindex(*s.grid.shape):
        lval[idx] = float(phi.lagrangian(s.jet_at(idx)))
    return t - lval[..., None, None] * np.eye(s.grid.p)


def kinetic_current(
    phi: FundamentalOneForm, s: SampledSection, v: Variation
) -> tuple[np.ndarray, BalanceReport]:
    """Current and balance for an exact momentum part.

    ``J^i = Pi^i_mu dx^mu - T da^i`` with T the kinetic evaluator; the source
    contains no momentum contribution, only ``F_mu xdot^mu_i da^i``.
    """
    if phi.kinetic is None:
        raise ValueError("fundamental form carries no kinetic evaluator")
    if v.grid != s.grid or v.m != s.m:
        raise ValueError("variation and section shapes do not match")
    grid = s.grid
    _require_divergence_free(grid, v.da_field)

    F, P = fields_along(phi, s)
    tval = np.empty(grid.shape)
    for idx in np.ndindex(*grid.shape):
        try:
            tval[idx] = float(phi.kinetic(s.jet_at(idx)))
        except Exception as exc:
            raise EvaluationError(f"kinetic evaluator failed at node {idx}") from exc
    current = (
        np.einsum("...mi,...m->...i", P, v.dx_field) - tval[..., None] * v.da_field
    )
    divergence = grid_divergence(current, grid.spacing)
    source = np.einsum(
        "...i,...i->...",
        np.einsum("...m,...mi->...i", F, s.xdot_field),
        v.da_field,
    )
    extremality = maxnorm(dstar(phi, s)[grid.interior])
    report = _report(
        divergence, source, grid.interior, grid.cell_measure, extremality
    )
    return current, report


def fundamental_vector_field(
    action: Callable[[float, np.ndarray, np.ndarray, np.ndarray], tuple],
    generator: np.ndarray,
    point: tuple[np.ndarray, np.ndarray],
    step: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray]:
    """Velocity of the one-parameter flow of a group generator at a point.

    ``action(t, generator, a, x)`` must return the image of ``(a, x)`` under
    the group element obtained by exponentiating ``t * generator``.  The
    derivative at t = 0 is taken by central differences with the given step.
    Returns the parameter-space and configuration-space components.
    """
    a, x = (np.atleast_1d(np.asarray(q, dtype=float)) for q in point)
    generator = np.asarray(generator, dtype=float)
    try:
        a_plus, x_plus = action(step, generator, a, x)
        a_minus, x_minus = action(-step, generator, a, x)
    except Exception as exc:
        raise EvaluationError("group action evaluation failed near t=0") from exc
    da = (np.asarray(a_plus, dtype=float) - np.asarray(a_minus, dtype=float)) / (
        2.0 * step
    )
    dx = (np.asarray(x_plus, dtype=float) - np.asarray(x_minus, dtype=float)) / (
        2.0 * step
    )
    return da, dx


def noether_map_matrix(
    phi: FundamentalOneForm,
    s: SampledSection,
    act: GroupActionLinearization,
    convention: str = "half",
) -> np.ndarray:
    """Matrix of the map from generators to currents, shape ``grid.shape + (p, dim_g)``.

    ``J^i_A = T^i_j d_param^j_A + S^i_A``: the parameter part of the action is
    carried by the stress tensor, the configuration part by the spin tensor.
    Applied to generator components it reproduces :func:`noether_current` for
    the induced variation.
    """
    t = stress_energy_tensor(phi, s, convention=convention)
    sp = spin_tensor(phi, s, act)
    d = _over_grid(act.d_param, s.grid, (s.grid.p, act.dim_g))
    return np.einsum("...ij,...jA->...iA", t, d) + sp


def induced_variation(
    s: SampledSection, act: GroupActionLinearization, generator: np.ndarray
) -> Variation:
    """Variation induced by a generator through the linearized action.

    ``da = d_param . generator`` and ``dx = xdot . da + d_config . generator``
    (lifted part plus substantial part).
    """
    generator = np.asarray(generator, dtype=float)
    d = _over_grid(act.d_param, s.grid, (s.grid.p, act.dim_g))
    dbar = _over_grid(act.d_config, s.grid, (s.m, act.dim_g))
    da = np.einsum("...iA,A->...i", d, generator)
    dx = np.einsum("...mi,...i->...m", s.xdot_field, da) + np.einsum(
        "...mA,A->...m", dbar, generator
    )
    return Variation(grid=s.grid, da_field=da, dx_field=dx)
