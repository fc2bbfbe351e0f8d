"""Named initial-data families.

Every preset returns nonnegative fields whose perturbations from the far
field, and the particle support, lie inside the central 90% of the box.
Gaussians are cut off at ``cutoff`` standard deviations.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .grid import FluidState, KineticState, PhaseGrid

MARGIN = 0.9

DEFAULTS = {
    "equilibrium": {},
    "gaussian_cloud": {
        "amplitude": 0.5, "width": 0.6, "particle_ratio": 0.4, "particle_width": 0.6,
        "particle_offset": 0.0, "xi_mean": 0.5, "xi_width": 0.35, "cutoff": 5.0,
    },
    "vacuum_patch": {
        "rho_out": 1.0, "inner_radius": 0.8, "outer_radius": 1.8, "particles": 0.3,
        "particle_width": 0.4, "xi_mean": 0.6, "xi_width": 0.3, "cutoff": 5.0,
    },
    "counterflow": {
        "amplitude": 0.2, "width": 0.7, "speed": 0.6, "particle_ratio": 0.5, "xi_width": 0.3, "cutoff": 5.0,
    },
    "blowup_candidate": {"mass": 0.02, "width": 0.4, "velocity": 0.0, "cutoff": 6.0},
}

PRESET_NAMES = tuple(DEFAULTS)


def preset_options(name: str, options: dict | None = None) -> dict:
    if name not in DEFAULTS:
        raise DomainError(f"unknown preset {name!r}; known presets: {', '.join(PRESET_NAMES)}")
    merged = dict(DEFAULTS[name])
    for key, value in (options or {}).items():
        if key not in merged:
            raise DomainError(f"preset {name!r} has no parameter {key!r}")
        merged[key] = float(value)
    return merged


def _bump(r2: np.ndarray, width: float, cutoff: float) -> np.ndarray:
    """exp(-r^2 / (2 width^2)) set to zero beyond ``cutoff`` widths."""
    g = np.exp(-0.5 * r2 / width**2)
    return np.where(r2 <= (cutoff * width) ** 2, g, 0.0)


def _check_inside(radius: float, extents, what: str):
    limit = MARGIN * min(extents)
    if radius > limit:
        raise DomainError(f"{what} reaches radius {radius:.4g}, beyond {MARGIN:.0%} of the half-box {min(extents):.4g}")


def _particle_cloud(grid: PhaseGrid, center, width, xi_mean, xi_width, cutoff, scale):
    d = grid.dim
    r2x = sum((grid.phase_x(a) - center[a]) ** 2 for a in range(d))
    r2v = sum((grid.phase_xi(a) - xi_mean[a]) ** 2 for a in range(d))
    norm = (2.0 * np.pi * xi_width**2) ** (-0.5 * d)
    f = scale * norm * _bump(r2x, width, cutoff) * _bump(r2v, xi_width, cutoff)
    _check_inside(float(np.max(np.abs(center))) + cutoff * width, grid.x_extent, "particle cloud (x)")
    _check_inside(float(np.max(np.abs(xi_mean))) + cutoff * xi_width, grid.xi_extent, "particle cloud (xi)")
    return np.broadcast_to(f, grid.phase_shape).copy()


def make_preset(name: str, grid: PhaseGrid, params, options: dict | None = None):
    """Build (FluidState, KineticState) at t = 0 for preset ``name``."""
    opt = preset_options(name, options)
    d = grid.dim
    rho_inf = params.rho_inf
    r2 = grid.x_radius2()
    mom = np.zeros((d,) + grid.nx)
    f = np.zeros(grid.phase_shape)
    first_axis = np.eye(d)[0]

    if name == "equilibrium":
        rho = np.full(grid.nx, rho_inf)

    elif name == "gaussian_cloud":
        amp = opt["amplitude"]
        rho = rho_inf + amp * _bump(r2, opt["width"], opt["cutoff"])
        if amp != 0.0:
            _check_inside(opt["cutoff"] * opt["width"], grid.x_extent, "density bump")
            center = opt["particle_offset"] * first_axis
            f = _particle_cloud(grid, center, opt["particle_width"], opt["xi_mean"] * first_axis,
                                opt["xi_width"], opt["cutoff"], amp * opt["particle_ratio"])

    elif name == "vacuum_patch":
        r = np.sqrt(r2)
        r0, r1 = opt["inner_radius"], opt["outer_radius"]
        if not 0.0 < r0 < r1:
            raise DomainError("vacuum_patch needs 0 < inner_radius < outer_radius")
        _check_inside(r1, grid.x_extent, "vacuum patch")
        s = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
        smooth = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        level = rho_inf if rho_inf > 0.0 else opt["rho_out"]
        rho = level * smooth
        if opt["particles"] > 0.0:
            f = _particle_cloud(grid, np.zeros(d), opt["particle_width"], opt["xi_mean"] * first_axis,
                                opt["xi_width"], opt["cutoff"], opt["particles"])

    elif name == "counterflow":
        amp, w, speed = opt["amplitude"], opt["width"], opt["speed"]
        env = _bump(r2, w, opt["cutoff"])
        _check_inside(opt["cutoff"] * w, grid.x_extent, "counterflow core")
        rho = rho_inf + amp * env
        mom = rho * (speed * env) * first_axis.reshape((d,) + (1,) * d)
        f = _particle_cloud(grid, np.zeros(d), w, -speed * first_axis, opt["xi_width"], opt["cutoff"],
                            opt["particle_ratio"])

    elif name == "blowup_candidate":
        mass, w = opt["mass"], opt["width"]
        if rho_inf != 0.0:
            raise DomainError("blowup_candidate needs rho_inf = 0")
        _check_inside(opt["cutoff"] * w, grid.x_extent, "density core")
        rho = mass * (2.0 * np.pi * w * w) ** (-0.5 * d) * _bump(r2, w, opt["cutoff"])
        # radial velocity u = velocity * x; negative values compress the cloud
        mom = np.stack([opt["velocity"] * rho * grid.x_field(a) for a in range(d)])

    fluid = FluidState(np.asarray(rho, dtype=float), np.asarray(mom, dtype=float), 0.0).validate(grid)
    kinetic = KineticState(np.asarray(f, dtype=float), 0.0).validate(grid)
    return fluid, kinetic
