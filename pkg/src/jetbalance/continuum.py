"""Finite-strain utilities for deformations sampled on grids.

Only the constant-metric (Euclidean) setting is implemented: the
Cauchy-Green strain of a displacement field, and the comparison of two
sections through the difference of their pulled-back metrics on the common
parameter grid.  The parameter-space strain follows the convention without
the classical factor of one half.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .jet import ParameterGrid, SampledSection
from .numeric import grid_partial


@dataclass(frozen=True)
class DisplacementField:
    """Displacement samples u(x) = y(x) - x on a grid over the body.

    The grid spans the reference positions; ``u_field`` has shape
    ``grid.shape + (m,)`` with m equal to the number of grid axes.
    """

    grid: ParameterGrid
    u_field: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u_field, dtype=float)
        shape = self.grid.shape
        if u.shape != shape + (self.grid.p,):
            raise ValueError(
                f"u_field shape {u.shape} does not match {shape + (self.grid.p,)}"
            )
        object.__setattr__(self, "u_field", u)

    @property
    def m(self) -> int:
        return self.grid.p


def green_strain(u: DisplacementField, metric: np.ndarray) -> np.ndarray:
    """Finite strain of a displacement field against a constant metric.

    ``E = g Du + (g Du)^T + Du^T g Du`` with Du the grid derivative of the
    displacement; the output is symmetrized exactly.  Rigid displacements
    give zero; for linear deformations y = A x with identity metric this
    equals A^T A - I.
    """
    g = np.asarray(metric, dtype=float)
    m = u.m
    if g.shape != (m, m):
        raise ValueError(f"metric shape {g.shape} does not match dimension {m}")
    if not np.allclose(g, g.T, atol=1e-12):
        raise ValueError("metric must be symmetric")
    h = u.grid.spacing
    du = np.stack(
        [grid_partial(u.u_field, i, h[i]) for i in range(m)], axis=-1
    )  # du[..., kappa, nu] = d u^kappa / d x^nu
    g_du = np.einsum("mk,...kn->...mn", g, du)
    quad = np.einsum("...km,kl,...ln->...mn", du, g, du)
    e = g_du + np.swapaxes(g_du, -1, -2) + quad
    return 0.5 * (e + np.swapaxes(e, -1, -2))


def parameter_strain(
    x_sec: SampledSection,
    xbar_sec: SampledSection,
    metric_eval: np.ndarray | Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Difference of the metrics pulled back to the parameter grid.

    Nodewise ``E_ij = xbar^mu_i xbar^nu_j g(xbar)_munu - x^mu_i x^nu_j
    g(x)_munu`` using the stored contact components; vanishes when the two
    sections differ by an isometry.  Note the classical strain convention
    carries an extra factor of one half that is deliberately absent here.
    """
    if x_sec.grid != xbar_sec.grid:
        raise ValueError("sections live on different grids")
    if x_sec.m != xbar_sec.m:
        raise ValueError("sections have different configuration dimensions")
    m = x_sec.m

    if callable(metric_eval):
        def g_at(x: np.ndarray) -> np.ndarray:
            return np.asarray(metric_eval(x), dtype=float).reshape(m, m)
    else:
        g_const = np.asarray(metric_eval, dtype=float).reshape(m, m)

        def g_at(x: np.ndarray) -> np.ndarray:
            return g_const

    shape = x_sec.grid.shape
    p = x_sec.grid.p
    out = np.empty(shape + (p, p))
    for idx in np.ndindex(*shape):
        jd = x_sec.xdot_field[idx]
        jbar = xbar_sec.xdot_field[idx]
        pulled = jbar.T @ g_at(xbar_sec.x_field[idx]) @ jbar
        base = jd.T @ g_at(x_sec.x_field[idx]) @ jd
        e = pulled - base
        out[idx] = 0.5 * (e + e.T)
    return out
