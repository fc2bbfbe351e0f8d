"""Kinetic solver: conservative semi-Lagrangian transport of f.

One kinetic step is the symmetric composition

    drag(dt/2) -> free streaming(dt) -> drag(dt/2)

Free streaming shifts every velocity row by xi*dt along x (periodic).  The
drag sub-step holds x fixed and moves velocities along
dXi/ds = rho^m (u - Xi), whose backward flow is affine in xi.  Both are
applied in flux form: the new cell average is the integral of a limited
piecewise-linear reconstruction over the backward image of the cell, so
mass is conserved to round-off and the compressibility factor
exp(dim * int rho^m ds) comes out as the Jacobian of the foot map.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, StepError
from .grid import KineticState, PhaseGrid
from .params import ModelParams


def mc_slopes(g: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Monotonized-central limited cell differences along ``axis``.

    Non-periodic axes see zero ghost cells.
    """
    if periodic:
        left = g - np.roll(g, 1, axis=axis)
        right = np.roll(g, -1, axis=axis) - g
    else:
        pad = [(0, 0)] * g.ndim
        pad[axis] = (1, 1)
        gp = np.pad(g, pad)
        n = g.shape[axis]
        diff = np.diff(gp, axis=axis)
        left = np.take(diff, np.arange(n), axis=axis)
        right = np.take(diff, np.arange(1, n + 1), axis=axis)
    same = left * right > 0.0
    mag = np.minimum(np.minimum(2.0 * np.abs(left), 2.0 * np.abs(right)), 0.5 * np.abs(left + right))
    return np.where(same, np.sign(left) * mag, 0.0)


def _chunks(n: int, threads: int):
    threads = max(1, min(int(threads), n))
    bounds = np.linspace(0, n, threads + 1).round().astype(int)
    return [slice(int(bounds[i]), int(bounds[i + 1])) for i in range(threads)]


def _run_chunks(func, n: int, threads: int):
    """Apply ``func(slice)`` over disjoint index blocks; results are block-local."""
    blocks = _chunks(n, threads)
    if len(blocks) == 1:
        func(blocks[0])
        return
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        list(pool.map(func, blocks))


# free streaming --------------------------------------------------------------------

def _shift_rows(g: np.ndarray, axis: int, shift: np.ndarray) -> np.ndarray:
    """Periodic flux-form advection of ``g`` along ``axis`` by ``shift`` cells.

    ``shift`` broadcasts against ``g`` and is constant along ``axis``.
    """
    n = g.shape[axis]
    whole = np.floor(shift)
    frac = shift - whole
    idx_shape = [1] * g.ndim
    idx_shape[axis] = n
    idx = (np.arange(n).reshape(idx_shape) - whole.astype(np.int64)) % n
    moved = np.take_along_axis(g, np.broadcast_to(idx, g.shape), axis=axis)
    slope = mc_slopes(moved, axis, periodic=True)
    flux = frac * moved + 0.5 * frac * (1.0 - frac) * slope
    return moved - (flux - np.roll(flux, 1, axis=axis))


def transport_x(f: np.ndarray, grid: PhaseGrid, dt: float, threads: int = 1) -> np.ndarray:
    """Free streaming f(x, xi) -> f(x - xi*dt, xi) on the periodic position box."""
    out = np.array(f, dtype=float, copy=True)
    if dt == 0.0:
        return out
    d = grid.dim
    for a in range(d):
        xi_axis = d + a
        shift = grid.phase_xi(a) * (dt / grid.dx[a])
        src = out.copy()

        def work(block, src=src, shift=shift, xi_axis=xi_axis, a=a):
            sl = [slice(None)] * src.ndim
            sl[xi_axis] = block
            sl = tuple(sl)
            out[sl] = _shift_rows(src[sl], a, shift[sl])

        _run_chunks(work, grid.nxi[a], threads)
    return out


# velocity remap ---------------------------------------------------------------------

def remap_affine(g: np.ndarray, lo: float, h: float, foot_a: np.ndarray, foot_b: np.ndarray) -> np.ndarray:
    """Remap rows of cell averages under the backward map y = foot_a + foot_b * xi.

    ``g`` has the velocity axis last; ``foot_a`` and ``foot_b`` (> 0)
    broadcast against ``g[..., :1]``.  Mass outside the velocity box is zero.
    """
    n = g.shape[-1]
    slope = mc_slopes(g, -1, periodic=False)
    prim = np.concatenate([np.zeros(g.shape[:-1] + (1,)), np.cumsum(g, axis=-1) * h], axis=-1)
    edges = lo + h * np.arange(n + 1)
    y = foot_a + foot_b * edges
    pos = np.clip((y - lo) / h, 0.0, float(n))
    cell = np.minimum(np.floor(pos).astype(np.int64), n - 1)
    theta = pos - cell
    gb = np.broadcast_to(g, y.shape[:-1] + (n,))
    sb = np.broadcast_to(slope, y.shape[:-1] + (n,))
    pb = np.broadcast_to(prim, y.shape[:-1] + (n + 1,))
    gc = np.take_along_axis(gb, cell, axis=-1)
    sc = np.take_along_axis(sb, cell, axis=-1)
    pc = np.take_along_axis(pb, cell, axis=-1)
    big_p = pc + h * (gc * theta + 0.5 * sc * (theta * theta - theta))
    new = np.diff(big_p, axis=-1) / h
    return np.maximum(new, 0.0)


def remap_velocity_axis(f: np.ndarray, grid: PhaseGrid, axis: int, foot_a, foot_b, active) -> np.ndarray:
    """Apply :func:`remap_affine` along velocity axis ``axis`` of f.

    ``foot_a``, ``foot_b`` and the boolean ``active`` are position fields;
    inactive cells are copied unchanged (bit for bit).
    """
    d = grid.dim
    xi_axis = d + axis
    moved = np.moveaxis(f, xi_axis, -1)
    extra = moved.ndim - d - 1
    shape = grid.nx + (1,) * extra + (1,)
    a = np.broadcast_to(foot_a, grid.nx).reshape(shape)
    b = np.broadcast_to(foot_b, grid.nx).reshape(shape)
    new = remap_affine(moved, grid.xi_lo[axis], grid.dxi[axis], a, b)
    mask = np.broadcast_to(active, grid.nx).reshape(shape[:-1] + (1,))
    new = np.where(mask, new, moved)
    return np.ascontiguousarray(np.moveaxis(new, -1, xi_axis))


def drag_frozen(f: np.ndarray, grid: PhaseGrid, kappa: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """Relax velocities toward frozen u at rate kappa = rho^m over time h."""
    active = kappa * h > 0.0
    if not np.any(active):
        return np.array(f, dtype=float, copy=True)
    growth = np.exp(kappa * h)
    out = f
    for b in range(grid.dim):
        out = remap_velocity_axis(out, grid, b, u[b] * (1.0 - growth), growth, active)
    return out


def max_stable_dt(grid: PhaseGrid) -> float:
    """Largest dt keeping the free-streaming shift within one cell per axis."""
    rate = sum(grid.xi_max[a] / grid.dx[a] for a in range(grid.dim))
    return math.inf if rate == 0.0 else 1.0 / rate


def vlasov_step(
    kinetic: KineticState,
    grid: PhaseGrid,
    params: ModelParams,
    rho: np.ndarray,
    u: np.ndarray,
    dt: float,
    threads: int = 1,
) -> KineticState:
    """Advance f by dt with the fluid fields (rho, u) held frozen."""
    limit = max_stable_dt(grid)
    if dt > limit * (1.0 + 1e-12):
        raise StepError(f"kinetic CFL violated: dt={dt:.6g} exceeds {limit:.6g}", required_dt=limit)
    kappa = params.drag_coefficient(rho)
    u = np.asarray(u, dtype=float).reshape((grid.dim,) + grid.nx)
    f = drag_frozen(kinetic.f, grid, kappa, u, 0.5 * dt)
    f = transport_x(f, grid, dt, threads)
    f = drag_frozen(f, grid, kappa, u, 0.5 * dt)
    if not np.all(np.isfinite(f)):
        raise StepError("kinetic step produced non-finite values")
    return KineticState(f, kinetic.t + dt)


def support_radius(f, grid: PhaseGrid, threshold: float = 0.0) -> float:
    """max |xi| over phase cells where f > threshold (0 if there are none)."""
    arr = f.f if isinstance(f, KineticState) else np.asarray(f)
    mask = arr > threshold
    if not np.any(mask):
        return 0.0
    r = np.sqrt(np.broadcast_to(grid.phase_xi_radius2(), arr.shape))
    return float(np.max(r[mask]))


# characteristics --------------------------------------------------------------------

@dataclass
class CharacteristicState:
    X: np.ndarray
    Xi: np.ndarray
    s: float


class FieldSampler:
    """Multilinear sampling of rho^m and u at off-grid points and times.

    Outside the position box the far-field values (rho_inf, 0) are used.
    A second time level (rho1, u1) at t1 enables linear interpolation in time.
    """

    def __init__(self, grid, params, rho, u, t0=0.0, rho1=None, u1=None, t1=None):
        self.grid = grid
        self.params = params
        self.t0 = t0
        self.t1 = t1
        self.levels = [self._pad(rho, u)]
        if rho1 is not None or u1 is not None:
            if t1 is None or t1 == t0:
                raise ValueError("two-level sampling needs t1 != t0")
            self.levels.append(self._pad(rho if rho1 is None else rho1, u if u1 is None else u1))

    def _pad(self, rho, u):
        g, p = self.grid, self.params
        rho = np.broadcast_to(np.asarray(rho, dtype=float), g.nx)
        u = np.broadcast_to(np.asarray(u, dtype=float), (g.dim,) + g.nx)
        rho_p = np.pad(rho, 1, constant_values=p.rho_inf)
        u_p = np.stack([np.pad(u[b], 1, constant_values=0.0) for b in range(g.dim)])
        return rho_p, u_p

    def _spatial(self, level, x):
        g = self.grid
        rho_p, u_p = level
        if any(not (g.x_lo[a] <= x[a] <= g.x_hi[a]) for a in range(g.dim)):
            return self.params.rho_inf, np.zeros(g.dim)
        idx, wts = [], []
        for a in range(g.dim):
            # padded centre j sits at x_lo + (j - 0.5) dx
            pos = (x[a] - g.x_lo[a]) / g.dx[a] + 0.5
            i = min(int(math.floor(pos)), g.nx[a])
            idx.append(i)
            wts.append(pos - i)
        rho_v = 0.0
        u_v = np.zeros(g.dim)
        for corner in range(1 << g.dim):
            w = 1.0
            sel = []
            for a in range(g.dim):
                bit = (corner >> a) & 1
                w *= wts[a] if bit else 1.0 - wts[a]
                sel.append(idx[a] + bit)
            if w == 0.0:
                continue
            sel = tuple(sel)
            rho_v += w * rho_p[sel]
            u_v += w * u_p[(slice(None),) + sel]
        return rho_v, u_v

    def __call__(self, x, s):
        rho0, u0 = self._spatial(self.levels[0], x)
        if len(self.levels) == 1:
            rho_v, u_v = rho0, u0
        else:
            rho1, u1 = self._spatial(self.levels[1], x)
            lam = (s - self.t0) / (self.t1 - self.t0)
            rho_v = (1.0 - lam) * rho0 + lam * rho1
            u_v = (1.0 - lam) * u0 + lam * u1
        return self.params.drag_coefficient(max(rho_v, 0.0)), u_v


def characteristic_trajectory(x0, xi0, sampler: FieldSampler, t0: float, t1: float, dt_ode: float):
    """RK4 integration of dX/ds = Xi, dXi/ds = rho^m(X, s) (u(X, s) - Xi).

    Returns (s, X, Xi) arrays including both end points.
    """
    if not dt_ode > 0.0:
        raise ValueError(f"dt_ode must be positive, got {dt_ode}")
    dim = sampler.grid.dim
    y = np.concatenate([np.atleast_1d(np.asarray(x0, dtype=float)), np.atleast_1d(np.asarray(xi0, dtype=float))])
    if y.size != 2 * dim:
        raise ValueError(f"x0 and xi0 need {dim} components each")
    span = t1 - t0
    nsteps = max(1, int(math.ceil(abs(span) / dt_ode - 1e-12)))
    h = span / nsteps

    def rhs(s, state):
        kappa, u = sampler(state[:dim], s)
        return np.concatenate([state[dim:], kappa * (u - state[dim:])])

    ss = [t0]
    ys = [y.copy()]
    s = t0
    for i in range(nsteps):
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(s + h, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(f"non-finite characteristic state after s={s:.6g}", last_valid_s=s)
        y = y_new
        s = t0 + (i + 1) * h
        ss.append(s)
        ys.append(y.copy())
    arr = np.array(ys)
    return np.array(ss), arr[:, :dim], arr[:, dim:]


def integrate_characteristics(x0, xi0, grid, params, rho, u, t0, t1, dt_ode, rho1=None, u1=None):
    """Forward characteristic from (x0, xi0) at t0 to t1; fields frozen or two-level."""
    sampler = FieldSampler(grid, params, rho, u, t0=t0, rho1=rho1, u1=u1, t1=t1 if rho1 is not None or u1 is not None else None)
    s, X, Xi = characteristic_trajectory(x0, xi0, sampler, t0, t1, dt_ode)
    return CharacteristicState(X[-1].copy(), Xi[-1].copy(), float(s[-1]))
