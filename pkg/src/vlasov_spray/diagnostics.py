"""Integral functionals of the coupled state and checks of their balance laws.

All sums go through :func:`exact_sum` (correctly rounded), so every
functional is independent of array layout and thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DomainError, SeriesFormatError
from .fluid import DENSITY_FLOOR, viscous_dissipation_density
from .grid import FluidState, KineticState, PhaseGrid, exact_sum, velocity_from


@dataclass
class FunctionalRecord:
    """One evaluation of the integral functionals at time ``t``.

    ``M_rho`` and ``M_f`` are vectors with one entry per spatial axis; all
    other entries are scalars.
    """

    t: float
    m_rho: float
    m_f: float
    M_rho: np.ndarray
    M_f: np.ndarray
    W_rho: float
    W_f: float
    I_rho: float
    I_f: float
    E_k: float
    E_i: float
    E_f: float
    dissipation: float
    J: float

    @property
    def M(self) -> np.ndarray:
        return np.asarray(self.M_rho) + np.asarray(self.M_f)

    @property
    def W(self) -> float:
        return self.W_rho + self.W_f

    @property
    def I(self) -> float:  # noqa: E743
        return self.I_rho + self.I_f

    @property
    def E(self) -> float:
        return self.E_k + self.E_i + self.E_f

    @property
    def dim(self) -> int:
        return int(np.asarray(self.M_rho).size)

    def as_row(self) -> list:
        row = [self.t, self.m_rho, self.m_f]
        row += [float(v) for v in np.atleast_1d(self.M_rho)]
        row += [float(v) for v in np.atleast_1d(self.M_f)]
        row += [self.W_rho, self.W_f, self.I_rho, self.I_f, self.E_k, self.E_i, self.E_f, self.dissipation, self.J]
        return [float(v) for v in row]

    @classmethod
    def from_row(cls, row, dim: int) -> "FunctionalRecord":
        vals = [float(v) for v in row]
        if len(vals) != 12 + 2 * dim:
            raise SeriesFormatError(f"expected {12 + 2 * dim} values, got {len(vals)}")
        t, m_rho, m_f = vals[:3]
        m_rho_vec = np.array(vals[3:3 + dim])
        m_f_vec = np.array(vals[3 + dim:3 + 2 * dim])
        rest = vals[3 + 2 * dim:]
        return cls(t, m_rho, m_f, m_rho_vec, m_f_vec, *rest)

    def __eq__(self, other):
        if not isinstance(other, FunctionalRecord):
            return NotImplemented
        return self.as_row() == other.as_row()


def record_columns(dim: int) -> list[str]:
    cols = ["t", "m_rho", "m_f"]
    cols += [f"M_rho_{a + 1}" for a in range(dim)]
    cols += [f"M_f_{a + 1}" for a in range(dim)]
    cols += ["W_rho", "W_f", "I_rho", "I_f", "E_k", "E_i", "E_f", "dissipation", "J"]
    return cols


def dissipation(fluid: FluidState, kinetic: KineticState, grid: PhaseGrid, params, density_floor=DENSITY_FLOOR) -> float:
    """Viscous plus drag dissipation rate of the total energy."""
    rho = fluid.rho
    u = velocity_from(rho, fluid.mom, density_floor)
    dv = grid.cell_volume_x
    visc = exact_sum(viscous_dissipation_density(rho, u, grid, params)) * dv
    kappa = params.drag_coefficient(rho)
    f = kinetic.f
    tail = (1,) * grid.dim
    rel2 = np.zeros(f.shape)
    for b in range(grid.dim):
        diff = u[b].reshape(grid.nx + tail) - grid.phase_xi(b)
        rel2 = rel2 + diff * diff
    drag = exact_sum(kappa.reshape(grid.nx + tail) * rel2 * f) * dv * grid.cell_volume_xi
    return visc + drag


def functionals(fluid: FluidState, kinetic: KineticState, grid: PhaseGrid, params, t=None,
                density_floor=DENSITY_FLOOR, with_dissipation=True) -> FunctionalRecord:
    """Evaluate every functional on a grid centred at the origin."""
    if t is None:
        t = fluid.t
    d = grid.dim
    dv = grid.cell_volume_x
    dphase = dv * grid.cell_volume_xi
    rho = fluid.rho
    mom = np.where(rho >= density_floor, fluid.mom, 0.0)
    u = velocity_from(rho, mom, density_floor)
    f = kinetic.f

    m_rho = exact_sum(rho) * dv
    m_f = exact_sum(f) * dphase
    m_vec_rho = np.array([exact_sum(mom[a]) * dv for a in range(d)])
    m_vec_f = np.array([exact_sum(f * grid.phase_xi(a)) * dphase for a in range(d)])
    w_rho = exact_sum(np.stack([mom[a] * grid.x_field(a) for a in range(d)])) * dv
    w_f = exact_sum(np.stack([f * grid.phase_x(a) * grid.phase_xi(a) for a in range(d)])) * dphase
    i_rho = 0.5 * exact_sum(rho * grid.x_radius2()) * dv
    i_f = 0.5 * exact_sum(f * grid.phase_x_radius2()) * dphase
    e_k = 0.5 * exact_sum(np.stack([mom[a] * u[a] for a in range(d)])) * dv
    e_i = exact_sum(params.pressure(rho)) * dv / (params.gamma - 1.0)
    e_f = 0.5 * exact_sum(f * grid.phase_xi_radius2()) * dphase
    diss = dissipation(fluid, kinetic, grid, params, density_floor) if with_dissipation else 0.0
    s = t + 1.0
    big_j = math.fsum([i_rho, i_f, -s * w_rho, -s * w_f, s * s * e_k, s * s * e_i, s * s * e_f])
    return FunctionalRecord(float(t), m_rho, m_f, m_vec_rho, m_vec_f, w_rho, w_f, i_rho, i_f,
                            e_k, e_i, e_f, diss, big_j)


# identity checks ------------------------------------------------------------------------

@dataclass
class IdentityCheck:
    name: str
    description: str
    residual: float = 0.0
    tolerance: float = 0.0
    applicable: bool = True
    passed: bool = True
    note: str = ""


@dataclass
class IdentityReport:
    checks: list = field(default_factory=list)

    @property
    def applicable(self):
        return [c for c in self.checks if c.applicable]

    @property
    def n_passed(self) -> int:
        return sum(1 for c in self.applicable if c.passed)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.applicable)

    def __getitem__(self, name) -> IdentityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.applicable if not c.passed]

    def summary_line(self) -> str:
        return f"PASS {self.n_passed}/{len(self.applicable)}"

    def table(self) -> str:
        lines = [f"{'check':<6} {'status':<6} {'residual':>12} {'tol':>10}  description"]
        for c in self.checks:
            if not c.applicable:
                lines.append(f"{c.name:<6} {'n/a':<6} {'':>12} {'':>10}  {c.description} ({c.note})")
                continue
            status = "ok" if c.passed else "FAIL"
            lines.append(f"{c.name:<6} {status:<6} {c.residual:12.4e} {c.tolerance:10.2e}  {c.description}")
        return "\n".join(lines)


def _relative_drift(values):
    values = np.asarray(values, dtype=float)
    ref = np.abs(values[0])
    scale = float(np.max(ref)) if np.ndim(ref) else float(ref)
    diff = float(np.max(np.abs(values - values[0])))
    return diff / scale if scale > 0.0 else diff


def _rate_residual(derivative, target):
    derivative = np.asarray(derivative, dtype=float)
    target = np.asarray(target, dtype=float)
    scale = float(np.max(np.abs(target)))
    err = float(np.max(np.abs(derivative - target)))
    return err / scale if scale > 0.0 else err


def series_arrays(records) -> dict:
    """Column arrays of a record list, keyed by field name."""
    out = {}
    for fld in fields(FunctionalRecord):
        out[fld.name] = np.array([np.asarray(getattr(r, fld.name), dtype=float) for r in records])
    return out


def check_identities(records, tol_conservation=1e-10, tol_rate=5e-2, params=None, dim=None, slack=1e-12):
    """Check conservation, energy and virial balances along a record series.

    Checks (a) mass/momentum drift, (b) dE/dt = -dissipation, (c) dI/dt = W,
    (d) |M|^2 <= 4 max(m_rho, m_f)(E_k + E_f), (e) the internal-energy lower
    bound, (f) the quadratic growth bound on I, (g) the decay bound on J, and
    (j) J >= (t+1)^2 E_i.  (e)-(g) need ``params`` and an initially vacuum far
    field; (e) and (g) are three-dimensional statements.
    """
    from . import blowup

    records = list(records)
    if len(records) < 3:
        raise SeriesFormatError(f"need at least 3 records, got {len(records)}")
    col = series_arrays(records)
    t = col["t"]
    steps = np.diff(t)
    if np.any(steps <= 0.0):
        raise SeriesFormatError("record times must be strictly increasing")
    h = float(np.mean(steps))
    if float(np.max(np.abs(steps - h))) > 1e-9 * max(h, abs(float(t[-1]))):
        raise SeriesFormatError("records are not uniformly spaced in time")
    if dim is None:
        dim = records[0].dim

    report = IdentityReport()
    m_tot = col["M_rho"] + col["M_f"]
    mom_scale = max(float(np.max(np.abs(m_tot[0]))), float(np.max(np.abs(col["M_rho"][0]))),
                    float(np.max(np.abs(col["M_f"][0]))), col["m_rho"][0] + col["m_f"][0])
    mom_drift = float(np.max(np.abs(m_tot - m_tot[0])))
    drift = max(_relative_drift(col["m_rho"]), _relative_drift(col["m_f"]),
                mom_drift / mom_scale if mom_scale > 0 else mom_drift)
    report.checks.append(IdentityCheck("a", "mass and total momentum conserved", drift, tol_conservation,
                                       passed=drift <= tol_conservation))

    energy = col["E_k"] + col["E_i"] + col["E_f"]
    de = np.gradient(energy, h, edge_order=2)
    res_b = _rate_residual(de, -col["dissipation"])
    report.checks.append(IdentityCheck("b", "dE/dt = -dissipation", res_b, tol_rate, passed=res_b <= tol_rate))

    inertia = col["I_rho"] + col["I_f"]
    di = np.gradient(inertia, h, edge_order=2)
    res_c = _rate_residual(di, col["W_rho"] + col["W_f"])
    report.checks.append(IdentityCheck("c", "dI/dt = W", res_c, tol_rate, passed=res_c <= tol_rate))

    m2 = np.sum(m_tot * m_tot, axis=1)
    bound = 4.0 * np.maximum(col["m_rho"], col["m_f"]) * (col["E_k"] + col["E_f"])
    excess = float(np.max(m2 - bound))
    report.checks.append(IdentityCheck("d", "|M|^2 <= 4 max(m_rho, m_f)(E_k+E_f)", max(excess, 0.0), slack,
                                       passed=excess <= slack))

    s = t + 1.0
    j_gap = col["J"] - s * s * col["E_i"]
    j_tol = slack * np.abs(col["J"])
    worst = float(np.max(-(j_gap + j_tol)))
    report.checks.append(IdentityCheck("j", "J >= (t+1)^2 E_i", max(-float(np.min(j_gap)), 0.0), slack,
                                       passed=worst <= 0.0))

    first = records[0]
    gamma = None if params is None else params.gamma
    vacuum_far = params is not None and params.rho_inf == 0.0
    why = "needs params" if params is None else "needs rho_inf = 0"

    if vacuum_far and dim == 3 and first.m_rho > 0.0:
        c0 = blowup.constant_C0(first.m_rho, gamma)
        lower = c0 / col["I_rho"] ** (1.5 * (gamma - 1.0))
        gap = float(np.max(lower - col["E_i"]))
        tol = slack * max(float(np.max(col["E_i"])), 1.0)
        report.checks.append(IdentityCheck("e", "E_i >= C0 / I_rho^(3(gamma-1)/2)", max(gap, 0.0), tol, passed=gap <= tol))
    else:
        report.checks.append(IdentityCheck("e", "E_i >= C0 / I_rho^(3(gamma-1)/2)", applicable=False,
                                           note=why if not vacuum_far else "three-dimensional only"))

    if vacuum_far and first.m_rho > 0.0 and 1.0 < params.delta < gamma:
        c1, c2 = blowup.constants_C1_C2(first.W, first.E, first.m_rho, params, dim=dim)
        upper = inertia[0] + c1 * (t - t[0]) + c2 * (t - t[0]) ** 2
        gap = float(np.max(inertia - upper))
        tol = slack * max(float(np.max(np.abs(upper))), 1.0)
        report.checks.append(IdentityCheck("f", "I <= I(0) + C1 t + C2 t^2", max(gap, 0.0), tol, passed=gap <= tol))
    else:
        report.checks.append(IdentityCheck("f", "I <= I(0) + C1 t + C2 t^2", applicable=False,
                                           note=why if not vacuum_far else "needs 1 < delta < gamma"))

    if vacuum_far and dim == 3 and params.blowup_window() and first.m_rho > 0.0:
        try:
            c3 = blowup.constant_C3(max(first.J, 0.0), first.m_rho, params)
        except DomainError as exc:
            report.checks.append(IdentityCheck("g", "J <= C3 (t+1)^(2-3(gamma-1))", applicable=False, note=str(exc)))
        else:
            upper = c3 * (t - t[0] + 1.0) ** (2.0 - 3.0 * (gamma - 1.0))
            gap = float(np.max(col["J"] - upper))
            tol = slack * max(float(np.max(np.abs(upper))), 1.0)
            report.checks.append(IdentityCheck("g", "J <= C3 (t+1)^(2-3(gamma-1))", max(gap, 0.0), tol, passed=gap <= tol))
    else:
        note = why if not vacuum_far else "needs dim = 3 and the blow-up window"
        report.checks.append(IdentityCheck("g", "J <= C3 (t+1)^(2-3(gamma-1))", applicable=False, note=note))
    return report
