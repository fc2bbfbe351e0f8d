"""Successive approximation of the reformulated one-dimensional system.

The unknowns are the sound variable n = rho^((delta-1)/2), the velocity u
and the distribution f.  Given iterate k, iterate k+1 solves the linear
problems

    n_t + u^k n_x + n^k u^k_x / theta = 0,
    f_t + xi f_x + ((n^{k+1})^(m theta) (u^k - xi) f)_xi = 0,
    u_t + u^k u_x + gamma/(gamma-1) ((n^{k+1})^(theta(gamma-1)))_x
        = nu (n^{k+1})^2 u_xx + delta/(delta-1) nu ((n^{k+1})^2)_x u^k_x
          - (n^{k+1})^(theta(m-1)) (u^k m0 - m1),

with nu = 2 alpha + beta and (m0, m1) the moments of f^{k+1}, in that
order on a common time grid over [0, T].  Iterate 0 uses the initial data
as frozen coefficients: n is advected by u_0, u solves a heat equation with
diffusivity n_0^2 (the initial sound variable, held fixed in time), and f is
driven by (n_0, u_0).

The reported residual of iterate k+1 is the sup over the time grid of
||n^{k+1}-n^k||_{H^1}^2 + ||u^{k+1}-u^k||_{H^1}^2 + ||f^{k+1}-f^k||_{L^2(nu)}^2,
the velocity weight using exponent p - 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StepError
from .grid import KineticState, PhaseGrid, exact_sum, phase_weight, velocity_moments
from .kinetic import max_stable_dt, vlasov_step

MIN_STEPS = 10
IDENTITY_NOTE = "iterate 0 diffuses u with the initial sound variable n_0 frozen in time"


@dataclass
class PicardReport:
    """Residuals of successive iterates.

    ``residuals[i]`` belongs to iterate i+1 (its distance to iterate i) and
    ``components[i]`` splits it into the n, u and f parts.  ``ratios[i]`` is
    residuals[i+1] / residuals[i] (nan when the denominator vanishes).
    """

    t_short: float
    dt: float
    n_steps: int
    residuals: list = field(default_factory=list)
    components: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    diverged: bool = False
    notes: list = field(default_factory=lambda: [IDENTITY_NOTE])

    def contraction(self, start: int = 2, stop: int | None = None) -> bool:
        """True when ratio residual[k+1]/residual[k] < 1 for k = start..stop (1-based)."""
        stop = len(self.residuals) - 1 if stop is None else stop
        sel = [self.ratios[k - 1] for k in range(start, stop + 1)]
        return bool(sel) and all(r < 1.0 for r in sel)

    def format_table(self) -> str:
        lines = [f"T_short={self.t_short!r} dt={self.dt!r} steps={self.n_steps}",
                 f"{'k':>3} {'h^k':>14} {'n part':>12} {'u part':>12} {'f part':>12} {'ratio':>10}"]
        for i, (h, comp) in enumerate(zip(self.residuals, self.components)):
            ratio = "" if i == 0 else f"{self.ratios[i - 1]:10.4f}"
            lines.append(f"{i + 1:>3} {h:14.6e} {comp[0]:12.4e} {comp[1]:12.4e} {comp[2]:12.4e} {ratio}")
        if self.diverged:
            lines.append("iteration diverged")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines)


def _ddx(q, h):
    return (np.roll(q, -1) - np.roll(q, 1)) / (2.0 * h)


def _d2dx(q, h):
    return (np.roll(q, -1) - 2.0 * q + np.roll(q, 1)) / (h * h)


def _advect(c, q, h):
    """c q_x with first-order upwind bias (central part plus |c| dissipation)."""
    return c * _ddx(q, h) - 0.5 * np.abs(c) * _d2dx(q, h) * h


def _h1_sq(q, h):
    return (exact_sum(q * q) + exact_sum(_ddx(q, h) ** 2)) * h


class _Problem:
    def __init__(self, grid: PhaseGrid, params, n0, u0, f0, weight_p, weight_a):
        if grid.dim != 1:
            raise DomainError("the successive-approximation experiment is one-dimensional")
        self.grid = grid
        self.params = params
        self.h = grid.dx[0]
        self.n0 = n0
        self.u0 = u0
        self.f0 = f0
        self.nu = 2.0 * params.alpha + params.beta
        self.weight = phase_weight(grid, max(weight_p - 2.0, 0.0), weight_a)

    def rho(self, n):
        return self.params.from_sound_variable(np.maximum(n, 0.0))

    def n_rhs(self, n, u_k, n_k):
        theta = self.params.theta
        return -_advect(u_k, n, self.h) - n_k * _ddx(u_k, self.h) / theta

    def u_rhs(self, u, u_k, n_new, m0, m1):
        p, h = self.params, self.h
        n_new = np.maximum(n_new, 0.0)
        n2 = n_new * n_new
        pressure = p.gamma / (p.gamma - 1.0) * _ddx(n_new ** (p.theta * (p.gamma - 1.0)), h)
        visc = self.nu * n2 * _d2dx(u, h) + p.delta / (p.delta - 1.0) * self.nu * _ddx(n2, h) * _ddx(u_k, h)
        drag = n_new ** (p.theta * (p.m_drag - 1.0)) * (u_k * m0 - m1)
        return -_advect(u_k, u, h) - pressure + visc - drag

    def heat_rhs(self, u):
        return self.nu * self.n0 * self.n0 * _d2dx(u, self.h)

    def dt_bound(self, n_traj, u_traj):
        h = self.h
        p = self.params
        umax = max(float(np.max(np.abs(u))) for u in u_traj)
        nmax = max(float(np.max(np.abs(n))) for n in n_traj)
        c = math.sqrt(p.gamma * nmax ** (p.theta * (p.gamma - 1.0)))
        conv = h / (umax + c) if umax + c > 0.0 else math.inf
        visc = h * h / (2.0 * self.nu * nmax * nmax) if nmax > 0.0 else math.inf
        return min(conv, visc, max_stable_dt(self.grid))


def _heun(q, rhs0, rhs1_fn, dt):
    q1 = q + dt * rhs0
    return 0.5 * q + 0.5 * (q1 + dt * rhs1_fn(q1))


def _iterate_zero(prob: _Problem, dt, n_steps, threads):
    grid, params = prob.grid, prob.params
    n_traj, u_traj, f_traj = [prob.n0.copy()], [prob.u0.copy()], [prob.f0.copy()]
    n, u = prob.n0.copy(), prob.u0.copy()
    kin = KineticState(prob.f0.copy())
    rho0 = prob.rho(prob.n0)
    u_field = prob.u0.reshape(1, -1)
    for _ in range(n_steps):
        n = _heun(n, -_advect(prob.u0, n, prob.h), lambda q: -_advect(prob.u0, q, prob.h), dt)
        u = _heun(u, prob.heat_rhs(u), prob.heat_rhs, dt)
        kin = vlasov_step(kin, grid, params, rho0, u_field, dt, threads)
        n_traj.append(n)
        u_traj.append(u)
        f_traj.append(kin.f)
    return n_traj, u_traj, f_traj


def _iterate_next(prob: _Problem, prev, dt, n_steps, threads):
    grid, params = prob.grid, prob.params
    n_prev, u_prev, _ = prev
    n_traj, u_traj, f_traj = [prob.n0.copy()], [prob.u0.copy()], [prob.f0.copy()]
    n, u = prob.n0.copy(), prob.u0.copy()
    kin = KineticState(prob.f0.copy())
    for j in range(n_steps):
        uk0, uk1 = u_prev[j], u_prev[j + 1]
        nk0, nk1 = n_prev[j], n_prev[j + 1]
        n_new = _heun(n, prob.n_rhs(n, uk0, nk0), lambda q: prob.n_rhs(q, uk1, nk1), dt)
        n_mid = 0.5 * (n + n_new)
        u_mid = 0.5 * (uk0 + uk1)
        f_old = kin.f
        kin = vlasov_step(kin, grid, params, prob.rho(n_mid), u_mid.reshape(1, -1), dt, threads)
        mom_a = velocity_moments(f_old, grid)
        mom_b = velocity_moments(kin.f, grid)
        r0 = prob.u_rhs(u, uk0, n, mom_a.m0, mom_a.m1[0])
        u = _heun(u, r0, lambda q: prob.u_rhs(q, uk1, n_new, mom_b.m0, mom_b.m1[0]), dt)
        n = n_new
        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(u))):
            raise StepError("non-finite iterate")
        n_traj.append(n)
        u_traj.append(u)
        f_traj.append(kin.f)
    return n_traj, u_traj, f_traj


def _residual(prob: _Problem, a, b):
    h = prob.h
    dphase = prob.grid.cell_volume_x * prob.grid.cell_volume_xi
    best = 0.0
    parts = [0.0, 0.0, 0.0]
    for na, ua, fa, nb, ub, fb in zip(*a, *b):
        terms = (_h1_sq(na - nb, h), _h1_sq(ua - ub, h), exact_sum(prob.weight * (fa - fb) ** 2) * dphase)
        best = max(best, math.fsum(terms))
        parts = [max(x, y) for x, y in zip(parts, terms)]
    return best, tuple(parts)


def auto_t_short(grid: PhaseGrid, params, n0, u0, f0) -> float:
    """A short horizon on which the iteration map contracts.

    The contraction factor of the scheme scales with T times the largest
    coupling rate of the data: drag relaxation, velocity gradients, and the
    sound crossing rate of the density variations.
    """
    h = grid.dx[0]
    rho = params.from_sound_variable(n0)
    m0 = velocity_moments(f0, grid).m0
    rates = [1.0,
             float(np.max(params.drag_coefficient(rho) * (1.0 + m0 / np.maximum(rho, 1e-12)))),
             float(np.max(np.abs(_ddx(u0, h)))),
             float(np.max(np.sqrt(params.gamma * rho ** (params.gamma - 1.0))))]
    return 0.1 / max(rates)


def picard_iterate(grid: PhaseGrid, params, n0, u0, f0, iterations: int = 6, t_short: float | None = None,
                   cfl_number: float = 0.4, threads: int = 1, weight_p: float = 2.0, weight_a: float = 1.0):
    """Run ``iterations`` successive approximations over [0, t_short]."""
    if iterations < 2:
        raise DomainError(f"need at least 2 iterations, got {iterations}")
    n0 = np.asarray(n0, dtype=float)
    u0 = np.asarray(u0, dtype=float).reshape(grid.nx)
    f0 = np.asarray(f0, dtype=float)
    prob = _Problem(grid, params, n0, u0, f0, weight_p, weight_a)
    if t_short is None:
        t_short = auto_t_short(grid, params, n0, u0, f0)
    if not t_short > 0.0:
        raise DomainError(f"t_short must be positive, got {t_short}")
    dt_max = cfl_number * prob.dt_bound([n0], [u0])
    n_steps = max(MIN_STEPS, math.ceil(t_short / dt_max))
    dt = t_short / n_steps
    report = PicardReport(t_short, dt, n_steps)
    prev = _iterate_zero(prob, dt, n_steps, threads)
    for _ in range(iterations):
        try:
            cur = _iterate_next(prob, prev, dt, n_steps, threads)
        except (StepError, FloatingPointError) as exc:
            report.diverged = True
            report.notes.append(f"iteration {len(report.residuals) + 1} failed: {exc}")
            break
        res, comp = _residual(prob, cur, prev)
        if report.residuals:
            last = report.residuals[-1]
            report.ratios.append(res / last if last > 0.0 else math.nan)
            if last > 0.0 and res > 10.0 * last:
                report.diverged = True
        report.residuals.append(res)
        report.components.append(comp)
        prev = cur
        if report.diverged:
            report.notes.append(f"residual grew more than tenfold at iteration {len(report.residuals)}")
            break
    return report
