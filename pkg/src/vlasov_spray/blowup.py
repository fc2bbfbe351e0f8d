"""Constants, comparison curves and the finite-lifetime test for initial data.

The certificate compares a lower bound on the internal energy,
``C0 / (I0 + C1 t + C2 t^2)^(3(gamma-1)/2)``, with an upper bound,
``C3 / (t+1)^(3(gamma-1))``.  Once the lower curve overtakes the upper one a
global smooth solution cannot exist.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import DomainError

GAMMA_FIVE_HALVES = 0.75 * math.sqrt(math.pi)
HORIZON_T_MAX = 1e8
HORIZON_TOL = 1e-10
HORIZON_MAX_ITER = 200


def constant_C0(m_rho0: float, gamma: float) -> float:
    """(pi^(3/2)/Gamma(5/2))^(1-gamma) m^((5gamma-3)/2) / (2^((5gamma-3)/2) (gamma-1))."""
    if not gamma > 1.0 + 1e-9:
        raise DomainError(f"constant_C0 needs gamma > 1 + 1e-9, got {gamma}")
    if not m_rho0 > 0.0:
        raise DomainError(f"constant_C0 needs m_rho0 > 0, got {m_rho0}")
    ball = math.pi**1.5 / GAMMA_FIVE_HALVES
    k = 0.5 * (5.0 * gamma - 3.0)
    return ball ** (1.0 - gamma) * (m_rho0 / 2.0) ** k / (gamma - 1.0)


def constant_c_mu(m_rho0: float, E0: float, gamma: float, delta: float) -> float:
    """Bound on the integral of rho^delta from mass and energy (1 < delta < gamma)."""
    if not 1.0 < delta < gamma:
        raise DomainError(f"constant_c_mu needs 1 < delta < gamma, got delta={delta}, gamma={gamma}")
    if not m_rho0 > 0.0:
        raise DomainError(f"constant_c_mu needs m_rho0 > 0, got {m_rho0}")
    if not E0 >= 0.0:
        raise DomainError(f"constant_c_mu needs E0 >= 0, got {E0}")
    q = (delta - 1.0) / (gamma - 1.0)
    energy = 0.0 if E0 == 0.0 else E0**q
    return m_rho0 ** ((gamma - delta) / (gamma - 1.0)) * (gamma - 1.0) ** q * energy


def constants_C1_C2(W0: float, E0: float, m_rho0: float, params, dim: int = 3):
    """Linear and quadratic coefficients of the growth bound on I(t).

    The default ``dim=3`` gives the three-dimensional constants; other
    dimensions replace the 3 in ``2 alpha + 3 beta`` and ``3 (gamma - 1)``.
    """
    c_mu = constant_c_mu(m_rho0, E0, params.gamma, params.delta)
    visc = 2.0 * params.alpha + dim * params.beta
    c1 = W0 + visc / (params.delta - 1.0) * c_mu if visc != 0.0 else float(W0)
    c2 = 0.5 * max(2.0, dim * (params.gamma - 1.0)) * E0
    return c1, c2


def constant_C3(J0: float, m_rho0: float, params) -> float:
    """Coefficient of the (t+1)^(2-3(gamma-1)) decay bound on J."""
    g, d = params.gamma, params.delta
    if not params.blowup_window():
        raise DomainError(f"constant_C3 needs 1 < gamma < 5/3 and gamma-1/3 < delta < gamma, got gamma={g}, delta={d}")
    if not J0 >= 0.0:
        raise DomainError(f"constant_C3 needs J0 >= 0, got {J0}")
    if not m_rho0 > 0.0:
        raise DomainError(f"constant_C3 needs m_rho0 > 0, got {m_rho0}")
    q = (g - d) / (g - 1.0)
    coeff = 2.0 * params.alpha + 9.0 * params.beta
    head = 0.0 if J0 == 0.0 else J0**q
    if coeff == 0.0:
        inner = head
    else:
        inner = head + coeff * m_rho0**q * (g - 1.0) ** (-q) * (g - d) / (4.0 * (1.0 - 3.0 * (g - d)))
    if inner < 0.0:
        raise DomainError(f"C3 undefined for these coefficients (inner sum {inner:.6g} < 0)")
    if coeff == 0.0:
        return float(J0)
    return inner ** (1.0 / q)


# Gronwall-type bound ---------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallInput:
    """Data of f' <= a f/(t+1) + b f^c/(t+1)^(2c) with f(0) = f0."""

    a: float
    b: float
    c: float
    f0: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0 and self.c > 0.0):
            raise DomainError(f"a, b, c must be positive, got a={self.a}, b={self.b}, c={self.c}")
        if self.c > 1.0:
            raise DomainError(f"c must be <= 1, got {self.c}")
        if not self.f0 >= 0.0:
            raise DomainError(f"f0 must be >= 0, got {self.f0}")

    def case(self, tol: float = 1e-12) -> int:
        if self.c == 1.0:
            return 1
        if abs(2.0 * self.c + self.a * (1.0 - self.c) - 1.0) <= tol:
            return 2
        return 3


def gronwall_bound(inp: GronwallInput, t: float, sharp: bool = True) -> float:
    """Upper bound on f(t) for the three regimes of c.

    With ``sharp=True`` (default) the bound is the exact solution of the
    saturated inequality: ``f0 exp(b t/(t+1)) (t+1)^a`` for c = 1 and
    ``(t+1)^(1-2c) (f0^(1-c) + b (1-c) ln(t+1))`` on the critical line.
    ``sharp=False`` returns the looser closed forms ``f0 e^b (t+1)^a`` and
    ``(t+1)^(1-2c) (f0^(1-c) + (1-2c) ln(t+1))``; the latter is not a valid
    bound when 1-2c < b(1-c).  The generic case is identical in both modes.
    """
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    a, b, c, f0 = inp.a, inp.b, inp.c, inp.f0
    s = t + 1.0
    case = inp.case()
    if case == 1:
        growth = b if not sharp else b * t / s
        return f0 * math.exp(growth) * s**a
    e = 1.0 - c
    g0 = f0**e
    if case == 2:
        coef = b * e if sharp else 1.0 - 2.0 * c
        g = s ** (1.0 - 2.0 * c) * (g0 + coef * math.log(s))
    else:
        k = a * e
        # b e ((t+1)^(1-2c) - (t+1)^k) / (1 - 2c - k), written with expm1 for
        # accuracy when the exponents nearly coincide
        lam = 1.0 - 2.0 * c - k
        ln_s = math.log(s)
        ratio = ln_s if lam == 0.0 else math.expm1(lam * ln_s) / lam
        g = s**k * (g0 + b * e * ratio)
    g = max(g, 0.0)
    return g ** (1.0 / e)


# certificate --------------------------------------------------------------------------------

@dataclass
class BlowupReport:
    """Constants and verdicts of the finite-lifetime test.

    ``predicate_paper`` is C0 > C2 C3; ``predicate_asymptotic`` is
    C0 > C3 C2^(3(gamma-1)/2), which is what a comparison of the two curves
    for large t requires.  The two coincide when C2 = 1.
    """

    gamma: float
    delta: float
    window_ok: bool
    m_rho0: float
    I0: float
    W0: float
    E0: float
    J0: float
    C0: float | None = None
    c_mu: float | None = None
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    j0_consistent: bool = True
    predicate_paper: bool | None = None
    predicate_asymptotic: bool | None = None
    horizon: float | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def format_block(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            if key == "notes":
                continue
            if value is None:
                text = "none"
            elif isinstance(value, bool):
                text = str(value).lower()
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        for note in self.notes:
            lines.append(f"note={note}")
        return "\n".join(lines)


def _exponent(gamma):
    return 3.0 * (gamma - 1.0)


def horizon_gap(t: float, C0, C1, C2, C3, I0, gamma) -> float:
    """C0 (t+1)^(3(gamma-1)) - C3 (I0 + C1 t + C2 t^2)^(3(gamma-1)/2)."""
    p = _exponent(gamma)
    quad = max(I0 + C1 * t + C2 * t * t, 0.0)
    return C0 * (t + 1.0) ** p - C3 * quad ** (0.5 * p)


def find_horizon(C0, C1, C2, C3, I0, gamma, t_max=HORIZON_T_MAX, tol=HORIZON_TOL, max_iter=HORIZON_MAX_ITER):
    """First t in [0, t_max] where the lower curve exceeds the upper, or None."""

    def g(t):
        return horizon_gap(t, C0, C1, C2, C3, I0, gamma)

    if g(0.0) > 0.0:
        return 0.0
    lo = 0.0
    hi = None
    t = 1e-6
    while t <= t_max:
        if g(t) > 0.0:
            hi = t
            break
        lo = t
        t *= 2.0
    if hi is None:
        if g(t_max) > 0.0:
            hi = t_max
        else:
            return None
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def blowup_certify(record, params, dim: int = 3) -> BlowupReport:
    """Assemble the constants and verdicts from the initial functionals."""
    m0 = float(record.m_rho)
    I0 = float(record.I_rho + record.I_f)
    W0 = float(record.W_rho + record.W_f)
    E0 = float(record.E_k + record.E_i + record.E_f)
    J0 = math.fsum([I0, -W0, E0])
    if not (math.isfinite(m0) and m0 > 0.0):
        raise DomainError(f"initial fluid mass must be finite and positive, got {m0}")
    report = BlowupReport(params.gamma, params.delta, params.blowup_window(), m0, I0, W0, E0, J0)
    if dim != 3:
        report.notes.append(f"constants assume three space dimensions, functionals have dim={dim}")
    report.C0 = constant_C0(m0, params.gamma)
    if not report.window_ok:
        report.notes.append("gamma or delta outside the window 1 < gamma < 5/3, gamma - 1/3 < delta < gamma")
        return report
    report.c_mu = constant_c_mu(m0, E0, params.gamma, params.delta)
    report.C1, report.C2 = constants_C1_C2(W0, E0, m0, params)
    if J0 < 0.0:
        report.j0_consistent = False
        report.notes.append(f"J(0) = {J0:.6g} < 0: initial functionals are inconsistent")
        return report
    try:
        report.C3 = constant_C3(J0, m0, params)
    except DomainError as exc:
        report.notes.append(str(exc))
        return report
    report.predicate_paper = bool(report.C0 > report.C2 * report.C3)
    report.predicate_asymptotic = bool(report.C0 > report.C3 * report.C2 ** (0.5 * _exponent(params.gamma)))
    report.horizon = find_horizon(report.C0, report.C1, report.C2, report.C3, I0, params.gamma)
    if report.predicate_paper and report.horizon is None:
        report.notes.append("C0 > C2*C3 holds but the bounding curves do not cross on [0, "
                            f"{HORIZON_T_MAX:g}]; a crossing needs C0 > C3*C2^(3(gamma-1)/2)")
    return report


def bounding_curves(report: BlowupReport, gamma: float, t: float):
    """(lower, upper) bounds on E_i(t) implied by the report's constants."""
    if not report.window_ok or report.C3 is None:
        raise DomainError("bounding curves need a report inside the window with C3 defined")
    p = _exponent(gamma)
    quad = report.I0 + report.C1 * t + report.C2 * t * t
    lower = math.inf if quad <= 0.0 else report.C0 / quad ** (0.5 * p)
    upper = report.C3 / (t + 1.0) ** p
    return lower, upper
