"""Coupled particle/fluid time stepping.

One step of size dt is the symmetric composition

    R(dt/2) -> [free streaming of f, drag-free fluid step] (dt) -> R(dt/2)

where R is the exact solution of the local two-phase drag exchange.  Per
position cell R freezes rho and m0 and solves

    d u  / dt = -(rho^m / rho) (m0 u - m1),
    d m1 / dt =  rho^m (m0 u - m1),

which moves both velocities exponentially toward the common velocity
U = (rho u + m1)/(rho + m0).  The particle distribution is remapped along
the corresponding affine characteristics and the fluid receives exactly the
momentum the discrete distribution lost, so total momentum is conserved to
round-off.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import functionals
from .errors import DomainError, StepError
from .fluid import DENSITY_FLOOR, fluid_dt_bounds, fluid_step
from .grid import FluidState, KineticState, PhaseGrid, velocity_from, velocity_moments, write_snapshot
from .kinetic import max_stable_dt, remap_velocity_axis, transport_x
from .params import ModelParams
from .presets import make_preset
from .series import TimeSeries

log = logging.getLogger(__name__)


@dataclass
class Scenario:
    """Everything needed to reproduce one run.

    ``n_steps`` fixes the number of steps; when it is None the step count is
    the smallest multiple of ``output_every`` whose uniform dt satisfies the
    CFL bound of the initial state.
    """

    params: ModelParams
    grid: PhaseGrid
    preset: str = "equilibrium"
    preset_options: dict = field(default_factory=dict)
    t_end: float = 1.0
    cfl_number: float = 0.4
    output_every: int = 10
    n_steps: int | None = None
    threads: int = 1
    density_floor: float = DENSITY_FLOOR
    order: int = 2

    def __post_init__(self):
        if not 0.0 < self.cfl_number < 1.0:
            raise DomainError(f"cfl_number must lie in (0, 1), got {self.cfl_number}")
        if self.output_every < 1:
            raise DomainError(f"output_every must be >= 1, got {self.output_every}")
        if not self.t_end >= 0.0:
            raise DomainError(f"t_end must be >= 0, got {self.t_end}")
        if self.n_steps is not None and (self.n_steps < 1 or self.n_steps % self.output_every):
            raise DomainError(f"n_steps must be a positive multiple of output_every, got {self.n_steps}")
        if self.params.dim != self.grid.dim:
            raise DomainError(f"params.dim={self.params.dim} does not match grid.dim={self.grid.dim}")

    def initial_state(self):
        return make_preset(self.preset, self.grid, self.params, self.preset_options)


def cfl_bounds(fluid: FluidState, kinetic: KineticState, grid: PhaseGrid, params, density_floor=DENSITY_FLOOR) -> dict:
    """The four stability bounds on dt before any CFL factor."""
    if fluid.rho.size == 0 or kinetic.f.size == 0:
        raise DomainError("cannot bound dt for an empty state")
    fluid.validate(grid)
    kinetic.validate(grid)
    moments = velocity_moments(kinetic.f, grid)
    bounds = fluid_dt_bounds(fluid, grid, params, moments, density_floor)
    bounds["transport"] = max_stable_dt(grid)
    return bounds


def cfl_dt(fluid, kinetic, grid, params, cfl_number=0.4, density_floor=DENSITY_FLOOR) -> float:
    bounds = cfl_bounds(fluid, kinetic, grid, params, density_floor)
    limit = min(bounds.values())
    if not math.isfinite(limit):
        raise DomainError("degenerate state: no finite time-step bound")
    return cfl_number * limit


def relax_drag(fluid: FluidState, kinetic: KineticState, grid: PhaseGrid, params, h: float,
               density_floor=DENSITY_FLOOR):
    """Exact two-phase drag exchange over time h (see module docstring).

    Cells without fluid (rho^m = 0) or without particles are left untouched,
    so the returned arrays equal the inputs bit for bit there.
    """
    rho = fluid.rho
    kappa_p = params.drag_coefficient(rho)
    moments = velocity_moments(kinetic.f, grid)
    m0 = moments.m0
    active = (kappa_p > 0.0) & (m0 > 0.0) & (rho >= density_floor)
    if h == 0.0 or not np.any(active):
        return fluid, kinetic
    d = grid.dim
    safe_rho = np.where(active, rho, 1.0)
    kp = np.where(active, kappa_p, 0.0)
    kf = kp * np.where(active, m0, 0.0) / safe_rho
    u0 = velocity_from(rho, fluid.mom, density_floor)
    total = np.where(active, rho + m0, 1.0)
    growth = np.exp(kp * h)
    decay = np.exp(-kp * h)
    small = kf * h < 1e-300
    g = np.where(small, h * decay, decay * -np.expm1(-kf * h) / np.where(small, 1.0, kf))
    f = kinetic.f
    for b in range(d):
        big_u = (fluid.mom[b] + moments.m1[b]) / total
        shift = big_u * (1.0 - growth) - growth * (u0[b] - big_u) * kp * g
        f = remap_velocity_axis(f, grid, b, shift, growth, active)
    new_m1 = velocity_moments(f, grid).m1
    mom = np.where(active, fluid.mom + (moments.m1 - new_m1), fluid.mom)
    return FluidState(rho, mom, fluid.t), KineticState(f, kinetic.t)


def _check_step(fluid, kinetic, grid, params, dt, density_floor):
    bounds = cfl_bounds(fluid, kinetic, grid, params, density_floor)
    for key in ("convective", "viscous", "transport"):
        if dt > bounds[key] * (1.0 + 1e-12):
            raise StepError(f"time step {dt:.6g} exceeds the {key} stability bound {bounds[key]:.6g}",
                            required_dt=bounds[key])


def step(fluid: FluidState, kinetic: KineticState, grid: PhaseGrid, params, dt: float, threads: int = 1,
         density_floor=DENSITY_FLOOR, order=2, check=True):
    """Advance both phases by dt; returns (FluidState, KineticState)."""
    if check:
        _check_step(fluid, kinetic, grid, params, dt, density_floor)
    half = 0.5 * dt
    fluid, kinetic = relax_drag(fluid, kinetic, grid, params, half, density_floor)
    f = transport_x(kinetic.f, grid, dt, threads)
    fluid = fluid_step(fluid, grid, params, dt, None, density_floor, order, check=False)
    fluid, kin = relax_drag(fluid, KineticState(f, kinetic.t), grid, params, half, density_floor)
    if not np.all(np.isfinite(kin.f)):
        raise StepError("coupled step produced a non-finite distribution")
    t_new = kinetic.t + dt
    return FluidState(fluid.rho, fluid.mom, t_new), KineticState(kin.f, t_new)


def plan_steps(scenario: Scenario, fluid, kinetic) -> int:
    if scenario.n_steps is not None:
        return scenario.n_steps
    dt0 = cfl_dt(fluid, kinetic, scenario.grid, scenario.params, scenario.cfl_number, scenario.density_floor)
    n = max(1, math.ceil(scenario.t_end / dt0 - 1e-12))
    every = scenario.output_every
    return every * math.ceil(n / every)


def _save(path, grid, fluid, kinetic):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_snapshot(path, grid, fluid, kinetic)


def run(scenario: Scenario, snapshot_path=None, meta: dict | None = None, final_path=None) -> TimeSeries:
    """Integrate the scenario to t_end, recording functionals every output_every steps.

    On a failed step the last valid state is written to ``snapshot_path`` (if
    given) and the error is re-raised.  ``final_path`` receives the state at
    t_end.
    """
    grid, params = scenario.grid, scenario.params
    fluid, kinetic = scenario.initial_state()
    series = TimeSeries(meta=dict(meta or {}), dim=grid.dim)
    series.append(functionals(fluid, kinetic, grid, params, 0.0, scenario.density_floor))
    if scenario.t_end == 0.0:
        if final_path is not None:
            _save(final_path, grid, fluid, kinetic)
        return series
    n = plan_steps(scenario, fluid, kinetic)
    dt = scenario.t_end / n
    series.meta.update({"n_steps": n, "dt": dt})
    log.info("running %s: %d steps of dt=%.6g", scenario.preset, n, dt)
    for k in range(1, n + 1):
        try:
            fluid, kinetic = step(fluid, kinetic, grid, params, dt, scenario.threads, scenario.density_floor,
                                  scenario.order)
        except (StepError, DomainError):
            if snapshot_path is not None:
                _save(snapshot_path, grid, fluid, kinetic)
                log.error("step %d failed; last valid state written to %s", k, snapshot_path)
            raise
        if k % scenario.output_every == 0:
            t = scenario.t_end * k / n
            series.append(functionals(fluid, kinetic, grid, params, t, scenario.density_floor))
    if final_path is not None:
        _save(final_path, grid, fluid, kinetic)
    return series
