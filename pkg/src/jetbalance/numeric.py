"""Shared numerical kernels.

Everything downstream is built on four primitives: second-order grid
differencing, tensor-product trapezoidal quadrature, the classical
Runge-Kutta step, and the closed-form SO(3) exponential.  All functions here
are pure and stateless.  Differencing is second-order accurate uniformly
(central stencils in the interior, three-point one-sided stencils at the two
boundary nodes), so residuals assembled from these kernels converge as O(h^2)
on smooth data.  Reductions go through numpy's pairwise summation, which makes
results independent of any internal parallel schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

#: Step below which the Rodrigues coefficients switch to their series form.
SMALL_ANGLE = 1e-6

#: Optimal relative step for second-order central differences of evaluators.
CBRT_EPS = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True)
class FdScheme:
    """Differencing scheme descriptor.  Fixed in v1; kept for reporting."""

    order: int = 2
    boundary: str = "one-sided-second-order"


DEFAULT_SCHEME = FdScheme()


class NonFiniteStateError(RuntimeError):
    """An integration step produced NaN or infinity."""


def central_step(scale: float) -> float:
    """Finite-difference step for evaluator derivatives near a coordinate value."""
    return CBRT_EPS * max(1.0, abs(float(scale)))


def grid_partial(field: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Second-order partial derivative of a sampled field along one grid axis.

    ``field`` may carry trailing component axes; ``axis`` must index a grid
    axis with at least 3 nodes.
    """
    field = np.asarray(field, dtype=float)
    if field.shape[axis] < 3:
        raise ValueError(
            f"axis {axis} has {field.shape[axis]} nodes; differencing needs >= 3"
        )
    if spacing <= 0.0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    return np.gradient(field, spacing, axis=axis, edge_order=2)


def grid_divergence(vfield: np.ndarray, spacings: Sequence[float]) -> np.ndarray:
    """Divergence of a vector field sampled on a regular grid.

    ``vfield`` has shape ``grid_shape + (p,)`` with component i living on
    grid axis i; returns the scalar field sum_i dv^i/da^i.
    """
    vfield = np.asarray(vfield, dtype=float)
    p = len(spacings)
    if vfield.ndim != p + 1 or vfield.shape[-1] != p:
        raise ValueError(
            f"vector field shape {vfield.shape} does not match {p} grid axes"
        )
    out = np.zeros(vfield.shape[:-1])
    for i in range(p):
        out += grid_partial(vfield[..., i], i, spacings[i])
    return out


def trapezoid_weights(shape: Sequence[int], spacings: Sequence[float]) -> np.ndarray:
    """Tensor-product trapezoidal weights including the cell measure."""
    if len(shape) != len(spacings):
        raise ValueError("shape and spacings must have equal length")
    w = np.ones(tuple(shape))
    for ax, n in enumerate(shape):
        axis_w = np.ones(n)
        axis_w[0] = axis_w[-1] = 0.5
        reshape = [1] * len(shape)
        reshape[ax] = n
        w = w * axis_w.reshape(reshape)
    return w * float(np.prod(np.asarray(spacings, dtype=float)))


def quadrature(values: np.ndarray, spacings: Sequence[float]) -> float:
    """Trapezoidal integral of a scalar field over the whole grid."""
    values = np.asarray(values, dtype=float)
    if values.ndim != len(spacings):
        raise ValueError(
            f"scalar field with {values.ndim} axes does not match "
            f"{len(spacings)} grid spacings"
        )
    w = trapezoid_weights(values.shape, spacings)
    # np.sum reduces pairwise, so the result does not depend on chunking.
    return float(np.sum(w * values))


def interior(shape: Sequence[int]) -> tuple[slice, ...]:
    """Slices selecting the interior nodes (one layer stripped per axis)."""
    return tuple(slice(1, -1) for _ in shape)


def maxnorm(values: np.ndarray) -> float:
    """Max-norm of an array; 0 for empty input."""
    values = np.asarray(values)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def rk4_step(
    f: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    y: np.ndarray,
    h: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step for y' = f(t, y)."""
    if h <= 0.0:
        raise ValueError(f"step must be positive, got {h}")
    k1 = np.asarray(f(t, y), dtype=float)
    k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(f(t + h, y + h * k3), dtype=float)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError(f"non-finite state after step from t={t}")
    return out


def skew(w: np.ndarray) -> np.ndarray:
    """Antisymmetric matrix of a 3-vector, satisfying skew(w) @ x = w x x."""
    w = np.asarray(w, dtype=float)
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix exp(skew(w)) by the Rodrigues formula.

    Below ``SMALL_ANGLE`` the two trigonometric coefficients are replaced by
    their leading series terms, avoiding 0/0 with truncation error ~|w|^3.
    """
    w = np.asarray(w, dtype=float)
    W = skew(w)
    theta = float(np.linalg.norm(w))
    if theta < SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * (W @ W)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * W + b * (W @ W)
