"""Compressible Navier-Stokes with degenerate viscosity on a periodic box.

Conservative variables (rho, rho u).  Face fluxes combine

* a Rusanov (local Lax-Friedrichs) flux for mass and convective momentum,
  with MC-limited reconstruction of (rho, u) when ``order=2``;
* the face average of cell pressures (a central pressure gradient);
* the viscous stress S = 2 mu T(u) + lambda div(u) I with harmonic-mean
  face viscosities, normal derivatives compact and tangential ones averaged
  from the neighbouring cells.

Every contribution is a difference of face fluxes, so total mass and
momentum telescope exactly on the periodic box.  Velocity is reconstructed
as mom/rho where rho >= density_floor and is zero elsewhere.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import StepError
from .grid import FluidState, MomentFields, PhaseGrid, velocity_from
from .kinetic import mc_slopes

DENSITY_FLOOR = 1e-10


def _central(field: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(field, -1, axis=axis) - np.roll(field, 1, axis=axis)) / (2.0 * h)
    return np.gradient(field, h, axis=axis, edge_order=2)


def velocity_gradient(u: np.ndarray, grid: PhaseGrid, periodic: bool = False) -> np.ndarray:
    """G[b, c] = d u_b / d x_c by second-order central differences."""
    d = grid.dim
    out = np.empty((d, d) + grid.nx)
    for b in range(d):
        for c in range(d):
            if grid.nx[c] < 3 and not periodic:
                out[b, c] = 0.0
            else:
                out[b, c] = _central(u[b], c, grid.dx[c], periodic)
    return out


def strain_tensor(u: np.ndarray, grid: PhaseGrid, periodic: bool = False) -> np.ndarray:
    """Symmetric part of the central-difference velocity gradient, shape (dim, dim, *nx)."""
    g = velocity_gradient(u, grid, periodic)
    return 0.5 * (g + np.swapaxes(g, 0, 1))


def viscous_dissipation_density(rho, u, grid, params, method="components", periodic=False):
    """2 mu T:T + lambda (div u)^2 per cell.

    ``method="components"`` sums T_ij T_ij entry by entry; ``"trace"`` uses
    tr(T T^T) computed with a matrix product.  Both must agree to round-off.
    """
    mu, lam = params.viscosities(rho)
    strain = strain_tensor(u, grid, periodic)
    div = np.trace(strain, axis1=0, axis2=1)
    if method == "components":
        tt = np.zeros(grid.nx)
        for i in range(grid.dim):
            for j in range(grid.dim):
                tt = tt + strain[i, j] * strain[i, j]
    elif method == "trace":
        moved = np.moveaxis(strain, (0, 1), (-2, -1))
        tt = np.trace(moved @ np.swapaxes(moved, -1, -2), axis1=-2, axis2=-1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 2.0 * mu * tt + lam * div * div


# face fluxes -----------------------------------------------------------------------------

def _face_mean(q, axis):
    """Harmonic mean of neighbouring cells at i+1/2.

    It never exceeds twice the smaller value, so a face next to a nearly
    empty cell carries a correspondingly small viscosity.
    """
    nb = np.roll(q, -1, axis=axis)
    total = q + nb
    safe = np.where(total == 0.0, 1.0, total)
    return np.where(total == 0.0, 0.0, 2.0 * q * nb / safe)


def _reconstruct(q: np.ndarray, axis: int, order: int):
    """Left/right face states at i+1/2 along ``axis`` (periodic)."""
    if order == 1:
        return q, np.roll(q, -1, axis=axis)
    s = mc_slopes(q, axis, periodic=True)
    left = q + 0.5 * s
    right = np.roll(q - 0.5 * s, -1, axis=axis)
    return left, right


def fluid_rhs(rho, mom, grid: PhaseGrid, params, density_floor=DENSITY_FLOOR, order=2, viscous=True):
    """Time derivatives (drho, dmom) from flux differences, without drag."""
    d = grid.dim
    u = velocity_from(rho, mom, density_floor)
    p = params.pressure(rho)
    drho = np.zeros(grid.nx)
    dmom = np.zeros((d,) + grid.nx)
    if viscous:
        mu, lam = params.viscosities(rho)
        grad = velocity_gradient(u, grid, periodic=True)
    for a in range(d):
        h = grid.dx[a]
        rho_l, rho_r = _reconstruct(rho, a, order)
        u_l = np.empty_like(u)
        u_r = np.empty_like(u)
        for b in range(d):
            u_l[b], u_r[b] = _reconstruct(u[b], a, order)
        c_l = params.sound_speed(rho_l)
        c_r = params.sound_speed(rho_r)
        speed = np.maximum(np.abs(u_l[a]) + c_l, np.abs(u_r[a]) + c_r)
        flux_rho = 0.5 * (rho_l * u_l[a] + rho_r * u_r[a]) - 0.5 * speed * (rho_r - rho_l)
        p_face = 0.5 * (p + np.roll(p, -1, axis=a))
        flux_mom = np.empty((d,) + grid.nx)
        for b in range(d):
            q_l = rho_l * u_l[b]
            q_r = rho_r * u_r[b]
            flux_mom[b] = 0.5 * (q_l * u_l[a] + q_r * u_r[a]) - 0.5 * speed * (q_r - q_l)
        flux_mom[a] += p_face
        if viscous:
            mu_f = _face_mean(mu, a)
            lam_f = _face_mean(lam, a)
            # face gradient G_face[b, c] = d u_b / d x_c at i+1/2 along a
            g_face = np.empty((d, d) + grid.nx)
            for b in range(d):
                for c in range(d):
                    if c == a:
                        g_face[b, c] = (np.roll(u[b], -1, axis=a) - u[b]) / h
                    else:
                        g_face[b, c] = 0.5 * (grad[b, c] + np.roll(grad[b, c], -1, axis=a))
            div_f = sum(g_face[c, c] for c in range(d))
            for b in range(d):
                stress = mu_f * (g_face[a, b] + g_face[b, a])
                if b == a:
                    stress = stress + lam_f * div_f
                flux_mom[b] -= stress
        drho -= (flux_rho - np.roll(flux_rho, 1, axis=a)) / h
        dmom -= (flux_mom - np.roll(flux_mom, 1, axis=a + 1)) / h
    return drho, dmom


def drag_source(rho, mom, moments: MomentFields, params, density_floor=DENSITY_FLOOR):
    """-rho^m (u m0 - m1): momentum given to the fluid by the particles."""
    u = velocity_from(rho, mom, density_floor)
    kappa = params.drag_coefficient(rho)
    return -kappa * (u * moments.m0 - moments.m1)


def _clean(rho, mom, density_floor, where):
    lowest = float(np.min(rho)) if rho.size else 0.0
    if lowest < 0.0:
        scale = max(float(np.max(np.abs(rho))), 1.0)
        if lowest < -1e-12 * scale:
            idx = np.unravel_index(int(np.argmin(rho)), rho.shape)
            raise StepError(f"{where}: negative density {lowest:.3e} at {idx}", location=idx)
        rho = np.maximum(rho, 0.0)
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(mom))):
        bad = np.argwhere(~np.isfinite(rho) | ~np.all(np.isfinite(mom), axis=0))
        raise StepError(f"{where}: non-finite field at {tuple(bad[0])}", location=tuple(bad[0]))
    mom = np.where(rho >= density_floor, mom, 0.0)
    return rho, mom


def fluid_dt_bounds(state: FluidState, grid: PhaseGrid, params, moments=None, density_floor=DENSITY_FLOOR):
    """Stability bounds (no CFL factor applied): convective, viscous, drag."""
    d = grid.dim
    rho = state.rho
    u = velocity_from(rho, state.mom, density_floor)
    c = params.sound_speed(rho)
    rate = sum((np.abs(u[a]) + c) / grid.dx[a] for a in range(d))
    rmax = float(np.max(rate))
    convective = math.inf if rmax == 0.0 else 1.0 / rmax

    mu, lam = params.viscosities(rho)
    coeff = 2.0 * mu + np.abs(lam)
    vrate = 0.0
    for a in range(d):
        nb_rho = np.roll(rho, -1, axis=a)
        rmin = np.minimum(rho, nb_rho)
        wet = rmin >= density_floor
        nu = np.where(wet, _face_mean(coeff, a) / np.where(wet, rmin, 1.0), 0.0)
        vrate += 2.0 * float(np.max(nu)) / grid.dx[a] ** 2
    viscous = math.inf if vrate == 0.0 else 1.0 / vrate

    drag = math.inf
    if moments is not None:
        wet = (rho >= density_floor) & (moments.m0 > 0.0)
        if np.any(wet):
            kappa = params.drag_coefficient(rho)
            k = kappa[wet] * (1.0 + moments.m0[wet] / rho[wet])
            kmax = float(np.max(k))
            drag = math.inf if kmax == 0.0 else 1.0 / kmax
    return {"convective": convective, "viscous": viscous, "drag": drag}


def _check_dt(state, grid, params, dt, density_floor, moments=None, include_drag=False):
    bounds = fluid_dt_bounds(state, grid, params, moments, density_floor)
    keys = ["convective", "viscous"] + (["drag"] if include_drag else [])
    limit = min(bounds[k] for k in keys)
    if dt > limit * (1.0 + 1e-12):
        which = min(keys, key=lambda k: bounds[k])
        raise StepError(f"fluid CFL violated ({which}): dt={dt:.6g} exceeds {limit:.6g}", required_dt=limit)


def continuity_step(state: FluidState, grid, params, dt, density_floor=DENSITY_FLOOR, order=2):
    """Forward-Euler update of rho alone; returns the new density field."""
    _check_dt(state, grid, params, dt, density_floor)
    drho, _ = fluid_rhs(state.rho, state.mom, grid, params, density_floor, order, viscous=False)
    rho, _ = _clean(state.rho + dt * drho, state.mom, density_floor, "continuity_step")
    return rho


def momentum_step(state: FluidState, moments, grid, params, dt, density_floor=DENSITY_FLOOR, order=2):
    """Forward-Euler update of rho u with explicit drag from ``moments``."""
    _check_dt(state, grid, params, dt, density_floor, moments, include_drag=moments is not None)
    _, dmom = fluid_rhs(state.rho, state.mom, grid, params, density_floor, order)
    if moments is not None:
        dmom = dmom + drag_source(state.rho, state.mom, moments, params, density_floor)
    _, mom = _clean(state.rho, state.mom + dt * dmom, density_floor, "momentum_step")
    return mom


def fluid_step(state: FluidState, grid, params, dt, moments=None, density_floor=DENSITY_FLOOR, order=2, check=True):
    """Two-stage SSP Runge-Kutta step of (rho, rho u); drag is explicit if ``moments`` is given."""
    if check:
        _check_dt(state, grid, params, dt, density_floor, moments, include_drag=moments is not None)

    def rhs(rho, mom):
        drho, dmom = fluid_rhs(rho, mom, grid, params, density_floor, order)
        if moments is not None:
            dmom = dmom + drag_source(rho, mom, moments, params, density_floor)
        return drho, dmom

    drho, dmom = rhs(state.rho, state.mom)
    rho1, mom1 = _clean(state.rho + dt * drho, state.mom + dt * dmom, density_floor, "fluid_step")
    drho, dmom = rhs(rho1, mom1)
    rho2 = 0.5 * state.rho + 0.5 * (rho1 + dt * drho)
    mom2 = 0.5 * state.mom + 0.5 * (mom1 + dt * dmom)
    rho2, mom2 = _clean(rho2, mom2, density_floor, "fluid_step")
    return FluidState(rho2, mom2, state.t + dt)
