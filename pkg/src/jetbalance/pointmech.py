"""Point-mass mechanics on a one-dimensional parameter interval (time).

Specializes the jet machinery to trajectories of a single mass point with a
constant flat metric: Runge-Kutta integration of Newton's second law, the
kinetic-energy/power balance law dT/dt = F . v, and bridges that expose a
trajectory to the general grid operations (a trajectory is a p = 1 sampled
section whose contact components are the stored velocities).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import EvaluationError, FundamentalOneForm
from .jet import ParameterGrid, SampledSection, Variation
from .noether import BalanceReport, _report, divergence_tolerance
from .numeric import grid_partial, rk4_step

ForceLaw = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PointMassSystem:
    """A point mass with a force law and a constant spatial metric.

    ``force_law(t, x, v)`` returns the force covector; the metric must be
    symmetric positive-definite (identity when omitted).
    """

    mass: float
    dim: int
    force_law: ForceLaw
    metric: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        g = np.eye(self.dim) if self.metric is None else np.asarray(self.metric, float)
        if g.shape != (self.dim, self.dim):
            raise ValueError(f"metric shape {g.shape} does not match dim {self.dim}")
        if not np.allclose(g, g.T, atol=1e-12):
            raise ValueError("metric must be symmetric")
        if np.any(np.linalg.eigvalsh(g) <= 0.0):
            raise ValueError("metric must be positive-definite")
        object.__setattr__(self, "metric", g)


def kinetic_energy(sys: PointMassSystem, v: np.ndarray) -> float:
    """Kinetic energy (1/2) m g(v, v)."""
    v = np.asarray(v, dtype=float)
    return 0.5 * sys.mass * float(v @ sys.metric @ v)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled motion: times plus position/velocity samples."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("need at least two time samples")
        steps = np.diff(t)
        if np.any(steps <= 0.0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("times must be uniformly spaced")
        if x.shape != v.shape or x.shape[0] != len(t):
            raise ValueError("positions/velocities shapes do not match times")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n(self) -> int:
        return len(self.times)


def integrate_newton(
    sys: PointMassSystem,
    x0: np.ndarray,
    v0: np.ndarray,
    t0: float,
    t1: float,
    step: float,
) -> Trajectory:
    """Integrate m a = F with classical RK4, recording every step.

    The requested step is adjusted to the nearest value that divides the
    window into a whole number of steps, so the final sample lands on t1.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    n_steps = max(1, int(round((t1 - t0) / step)))
    step = (t1 - t0) / n_steps
    g_inv = np.linalg.inv(sys.metric)
    dim = sys.dim
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (dim,)).copy()
    v0 = np.broadcast_to(np.asarray(v0, dtype=float), (dim,)).copy()

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x, v = y[:dim], y[dim:]
        try:
            f = np.asarray(sys.force_law(t, x, v), dtype=float).reshape(dim)
        except Exception as exc:
            raise EvaluationError(f"force law failed at t={t}") from exc
        return np.concatenate([v, g_inv @ f / sys.mass])

    times = t0 + step * np.arange(n_steps + 1)
    ys = np.empty((n_steps + 1, 2 * dim))
    ys[0] = np.concatenate([x0, v0])
    for k in range(n_steps):
        ys[k + 1] = rk4_step(rhs, float(times[k]), ys[k], step)
    return Trajectory(times=times, positions=ys[:, :dim], velocities=ys[:, dim:])


def power_balance_report(sys: PointMassSystem, traj: Trajectory) -> BalanceReport:
    """Compare dT/dt (centered differences) against the delivered power F . v."""
    if traj.n < 3:
        raise ValueError("power balance needs at least 3 samples")
    T = 0.5 * sys.mass * np.einsum(
        "nk,kl,nl->n", traj.velocities, sys.metric, traj.velocities
    )
    power = np.array(
        [
            float(
                np.asarray(
                    sys.force_law(float(t), x, v), dtype=float
                ).reshape(sys.dim)
                @ v
            )
            for t, x, v in zip(traj.times, traj.positions, traj.velocities)
        ]
    )
    divergence = grid_partial(T, 0, traj.step)
    return _report(divergence, power, (slice(1, -1),), traj.step)


def check_constant_time_translation(v: Variation) -> bool:
    """True iff the time part of a p = 1 variation is constant to tolerance.

    Divergence-free parameter variations on an interval are exactly the
    constant time translations; the tolerance is the one used by the balance
    checks, so constants pass exactly.
    """
    if v.grid.p != 1:
        raise ValueError("time-translation check requires p = 1")
    dt_field = v.da_field[..., 0]
    rate = grid_partial(dt_field, 0, v.grid.spacing[0])
    return float(np.max(np.abs(rate))) <= divergence_tolerance(v.grid, v.da_field)


def fundamental_form(sys: PointMassSystem) -> FundamentalOneForm:
    """Dynamical state of the point mass: force law plus exact kinetic momentum.

    The momentum evaluator is m g v (degree one in the velocity) and the
    kinetic evaluator its potential (1/2) m g(v, v); the force part is the
    system's law, which need not be conservative.
    """
    m, g = sys.mass, sys.metric

    def force(j):
        return np.asarray(
            sys.force_law(float(j.a[0]), j.x, j.xdot[:, 0]), dtype=float
        )

    def momentum(j):
        return (m * (g @ j.xdot[:, 0]))[:, None]

    def kinetic(j):
        v = j.xdot[:, 0]
        return 0.5 * m * float(v @ g @ v)

    return FundamentalOneForm(force=force, momentum=momentum, kinetic=kinetic)


def trajectory_section(traj: Trajectory) -> SampledSection:
    """View a trajectory as a p = 1 sampled section.

    The stored velocities become the contact components, so the section is
    integrable to the accuracy of the integrator rather than by construction.
    """
    grid = ParameterGrid(
        bounds=((float(traj.times[0]), float(traj.times[-1])),),
        samples=(traj.n,),
    )
    return SampledSection(
        grid=grid,
        x_field=traj.positions,
        xdot_field=traj.velocities[..., None],
    )


def time_translation_variation(s: SampledSection, scale: float = 1.0) -> Variation:
    """Variation of a p = 1 section under a constant time shift.

    ``dt = scale`` and ``dx = v * dt`` (the lifted part; no substantial part).
    """
    if s.grid.p != 1:
        raise ValueError("time translation requires p = 1")
    shape = s.grid.shape
    return Variation(
        grid=s.grid,
        da_field=np.full(shape + (1,), float(scale)),
        dx_field=s.xdot_field[..., 0] * float(scale),
    )
