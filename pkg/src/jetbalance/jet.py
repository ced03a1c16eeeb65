"""Discrete first-order jet data.

A map from a p-dimensional parameter box into an m-dimensional configuration
space is represented by its samples on a regular tensor-product grid together
with the samples of its first partial derivatives (the contact components).
This module provides the grid, the jet-point and sampled-section containers,
prolongation of maps and of variations by grid differencing, and the
integrability and immersion diagnostics.

All containers are frozen and all operations are pure, so everything here is
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import grid_partial, interior

#: Relative singular-value cutoff for numerical rank decisions.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ParameterGrid:
    """Regular tensor-product grid over a box of parameter values.

    ``bounds`` holds one (lower, upper) interval per axis and ``samples`` the
    node count per axis.  Central differencing needs at least 3 nodes per
    axis.
    """

    bounds: tuple[tuple[float, float], ...]
    samples: tuple[int, ...]

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        samples = tuple(int(n) for n in self.samples)
        if len(bounds) != len(samples) or not bounds:
            raise ValueError("bounds and samples must be non-empty and equal length")
        for ax, ((lo, hi), n) in enumerate(zip(bounds, samples)):
            if n < 3:
                raise ValueError(f"axis {ax}: need >= 3 samples, got {n}")
            if not hi > lo:
                raise ValueError(f"axis {ax}: empty interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "samples", samples)

    @property
    def p(self) -> int:
        return len(self.samples)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.samples)
        )

    @property
    def cell_measure(self) -> float:
        """Volume of one grid cell, prod_i h_i (the discrete volume element)."""
        out = 1.0
        for h in self.spacing:
            out *= h
        return out

    @property
    def interior(self) -> tuple[slice, ...]:
        return interior(self.shape)

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        return np.linspace(lo, hi, self.samples[axis])

    def node_coords(self) -> np.ndarray:
        """Coordinates of every node, shape ``grid.shape + (p,)``."""
        axes = [self.axis_coords(i) for i in range(self.p)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass(frozen=True)
class Jet1Point:
    """One point of the jet space: parameters, configuration, contact matrix.

    ``a`` has shape (p,), ``x`` shape (m,), ``xdot`` shape (m, p) with
    ``xdot[mu, i]`` the derivative of configuration component mu along
    parameter axis i.
    """

    a: np.ndarray
    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        xdot = np.asarray(self.xdot, dtype=float)
        if xdot.shape != (x.shape[0], a.shape[0]):
            raise ValueError(
                f"contact matrix shape {xdot.shape} does not match "
                f"(m, p) = ({x.shape[0]}, {a.shape[0]})"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xdot", xdot)

    @property
    def p(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SampledSection:
    """A section of the source projection sampled on a grid.

    ``x_field`` has shape ``grid.shape + (m,)`` and ``xdot_field`` shape
    ``grid.shape + (m, p)``.  The contact components are stored, not implied:
    a section built by :func:`prolong_map` is integrable by construction,
    while arbitrary (x_field, xdot_field) pairs may carry a nonzero
    integrability defect.
    """

    grid: ParameterGrid
    x_field: np.ndarray
    xdot_field: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x_field, dtype=float)
        xd = np.asarray(self.xdot_field, dtype=float)
        shape = self.grid.shape
        if x.ndim != len(shape) + 1 or x.shape[: len(shape)] != shape:
            raise ValueError(f"x_field shape {x.shape} does not match grid {shape}")
        m = x.shape[-1]
        if xd.shape != shape + (m, self.grid.p):
            raise ValueError(
                f"xdot_field shape {xd.shape} does not match {shape + (m, self.grid.p)}"
            )
        object.__setattr__(self, "x_field", x)
        object.__setattr__(self, "xdot_field", xd)

    @property
    def m(self) -> int:
        return self.x_field.shape[-1]

    def jet_at(self, index: tuple[int, ...]) -> Jet1Point:
        """Assemble the jet point at one grid node."""
        a = np.array(
            [self.grid.axis_coords(i)[index[i]] for i in range(self.grid.p)]
        )
        return Jet1Point(a=a, x=self.x_field[index], xdot=self.xdot_field[index])


@dataclass(frozen=True)
class Variation:
    """Vector-field data of a variation over the grid.

    ``da_field`` (shape ``grid.shape + (p,)``) is the parameter-space part,
    ``dx_field`` (shape ``grid.shape + (m,)``) the configuration-space part.
    ``dxdot_field`` is present exactly when the variation has been prolonged.
    """

    grid: ParameterGrid
    da_field: np.ndarray
    dx_field: np.ndarray
    dxdot_field: np.ndarray | None = None

    def __post_init__(self) -> None:
        da = np.asarray(self.da_field, dtype=float)
        dx = np.asarray(self.dx_field, dtype=float)
        shape = self.grid.shape
        if da.shape != shape + (self.grid.p,):
            raise ValueError(
                f"da_field shape {da.shape} does not match {shape + (self.grid.p,)}"
            )
        if dx.ndim != len(shape) + 1 or dx.shape[: len(shape)] != shape:
            raise ValueError(f"dx_field shape {dx.shape} does not match grid {shape}")
        object.__setattr__(self, "da_field", da)
        object.__setattr__(self, "dx_field", dx)
        if self.dxdot_field is not None:
            dxd = np.asarray(self.dxdot_field, dtype=float)
            if dxd.shape != dx.shape + (self.grid.p,):
                raise ValueError(
                    f"dxdot_field shape {dxd.shape} does not match "
                    f"{dx.shape + (self.grid.p,)}"
                )
            object.__setattr__(self, "dxdot_field", dxd)

    @property
    def m(self) -> int:
        return self.dx_field.shape[-1]

    @property
    def prolonged(self) -> bool:
        return self.dxdot_field is not None


def _stacked_partials(field: np.ndarray, grid: ParameterGrid) -> np.ndarray:
    """Partial derivatives along every grid axis, stacked on a new last axis."""
    h = grid.spacing
    return np.stack(
        [grid_partial(field, i, h[i]) for i in range(grid.p)], axis=-1
    )


def prolong_map(x_samples: np.ndarray, grid: ParameterGrid) -> SampledSection:
    """Lift sampled configuration values to a section by differencing.

    The contact components are the second-order grid derivatives of
    ``x_samples``, so the result is integrable by construction: its
    integrability defect vanishes identically under the same differencing
    scheme.
    """
    x = np.asarray(x_samples, dtype=float)
    if x.ndim != grid.p + 1 or x.shape[: grid.p] != grid.shape:
        raise ValueError(
            f"x_samples shape {x.shape} does not match grid {grid.shape} + (m,)"
        )
    return SampledSection(grid=grid, x_field=x, xdot_field=_stacked_partials(x, grid))


def integrability_defect(s: SampledSection) -> np.ndarray:
    """Nodewise difference between differenced x_field and stored contact.

    Returns an array of shape ``grid.shape + (m, p)``; it vanishes (to
    differencing accuracy) exactly when the section is the prolongation of a
    map.
    """
    return _stacked_partials(s.x_field, s.grid) - s.xdot_field


def prolong_variation(v: Variation, grid: ParameterGrid | None = None) -> Variation:
    """Attach the grid derivatives of the configuration part of a variation."""
    if grid is not None and grid != v.grid:
        raise ValueError("variation was sampled on a different grid")
    return Variation(
        grid=v.grid,
        da_field=v.da_field,
        dx_field=v.dx_field,
        dxdot_field=_stacked_partials(v.dx_field, v.grid),
    )


def immersion_rank_check(s: SampledSection, rtol: float = RANK_RTOL) -> np.ndarray:
    """True at a node iff the contact matrix there has full numerical rank p.

    Rank is decided by the smallest singular value exceeding ``rtol`` times
    the largest one.  Immersions require p <= m.
    """
    p, m = s.grid.p, s.m
    if p > m:
        raise ValueError(f"immersion impossible: p={p} exceeds m={m}")
    svals = np.linalg.svd(s.xdot_field, compute_uv=False)
    return svals[..., -1] > rtol * svals[..., 0]
