"""Model coefficients and constitutive laws.

Pressure p = rho**gamma, viscosities mu = alpha*rho**delta and
lambda = beta*rho**delta, drag factor rho**m, and the sound variable
n = rho**((delta - 1)/2) used by the reformulated (n, u, f) system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def _nonnegative_power(rho, exponent: float, name: str):
    """rho**exponent with 0**exponent = 0 by explicit branch (exponent > 0)."""
    arr = np.asarray(rho, dtype=float)
    if arr.ndim == 0:
        value = float(arr)
        if not value >= 0.0:
            raise DomainError(f"{name}: negative density {value!r}")
        return 0.0 if value == 0.0 else value**exponent
    bad = np.flatnonzero(~(arr >= 0.0))
    if bad.size:
        idx = np.unravel_index(bad[0], arr.shape)
        raise DomainError(f"{name}: negative density {arr[idx]!r} at index {tuple(int(i) for i in idx)}")
    out = np.zeros_like(arr)
    pos = arr > 0.0
    out[pos] = arr[pos] ** exponent
    return out


def bd_beta(alpha: float, delta: float) -> float:
    """Second viscosity coefficient from the Bresch-Desjardins relation.

    lambda(rho) = 2 rho mu'(rho) - 2 mu(rho) with mu = alpha rho**delta gives
    beta = 2 alpha (delta - 1).
    """
    if not alpha > 0.0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    if not delta > 1.0:
        raise DomainError(f"delta must be > 1, got {delta}")
    return 2.0 * alpha * (delta - 1.0)


def delta_upper_bound(gamma: float, m_drag: float) -> float:
    """Largest delta admitted by the local well-posedness theory."""
    return min((gamma + 1.0) / 2.0, 3.0, (2.0 * m_drag + 1.0) / 3.0)


@dataclass(frozen=True)
class ModelParams:
    """Exponents and coefficients of the coupled system.

    ``strict_admissibility`` enforces 1 < delta <= min{(gamma+1)/2, 3, (2m+1)/3};
    the blow-up window (gamma - 1/3 < delta < gamma) is checked separately by
    the certifier, so exploratory runs may switch the strict check off.
    """

    gamma: float
    delta: float
    m_drag: float
    alpha: float
    beta: float
    rho_inf: float = 0.0
    dim: int = 1
    strict_admissibility: bool = True

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise DomainError(f"dim must be 1 or 3, got {self.dim}")
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must be > 1, got {self.gamma}")
        if not self.m_drag > 1.0:
            raise DomainError(f"m_drag must be > 1, got {self.m_drag}")
        if not self.alpha > 0.0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not 2.0 * self.alpha + 3.0 * self.beta >= 0.0:
            raise DomainError(f"2*alpha + 3*beta must be >= 0, got {2.0 * self.alpha + 3.0 * self.beta}")
        if not self.delta > 1.0:
            raise DomainError(f"delta must be > 1, got {self.delta}")
        if not self.rho_inf >= 0.0:
            raise DomainError(f"rho_inf must be >= 0, got {self.rho_inf}")
        if self.strict_admissibility:
            bound = delta_upper_bound(self.gamma, self.m_drag)
            if self.delta > bound:
                raise DomainError(
                    f"delta={self.delta} violates 1 < delta <= min{{(gamma+1)/2, 3, (2m+1)/3}} = {bound}; "
                    "set strict_admissibility=False to override"
                )
        theta = self.theta
        if not (math.isfinite(theta) and theta > 0.0):
            raise DomainError(f"theta = 2/(delta-1) must be finite and positive, got {theta}")

    @property
    def theta(self) -> float:
        return 2.0 / (self.delta - 1.0)

    @property
    def n_inf(self) -> float:
        return _nonnegative_power(self.rho_inf, 0.5 * (self.delta - 1.0), "n_inf")

    def pressure(self, rho):
        return _nonnegative_power(rho, self.gamma, "pressure")

    def sound_speed(self, rho):
        """sqrt(gamma * rho**(gamma - 1)), zero at vacuum."""
        return np.sqrt(self.gamma * _nonnegative_power(rho, self.gamma - 1.0, "sound_speed"))

    def viscosities(self, rho):
        r_delta = _nonnegative_power(rho, self.delta, "viscosities")
        return self.alpha * r_delta, self.beta * r_delta

    def drag_coefficient(self, rho):
        return _nonnegative_power(rho, self.m_drag, "drag_coefficient")

    def to_sound_variable(self, rho):
        return _nonnegative_power(rho, 0.5 * (self.delta - 1.0), "to_sound_variable")

    def from_sound_variable(self, n):
        return _nonnegative_power(n, self.theta, "from_sound_variable")

    def blowup_window(self) -> bool:
        """1 < gamma < 5/3 and gamma - 1/3 < delta < gamma."""
        return 1.0 < self.gamma < 5.0 / 3.0 and self.gamma - 1.0 / 3.0 < self.delta < self.gamma

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "m_drag": self.m_drag,
            "alpha": self.alpha,
            "beta": self.beta,
            "rho_inf": self.rho_inf,
            "dim": self.dim,
            "strict_admissibility": self.strict_admissibility,
        }
