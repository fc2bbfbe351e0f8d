"""Phase-space grids, state containers, velocity moments and weighted norms.

Arrays follow one layout throughout the package:

* fluid fields ``rho`` have shape ``nx`` (one axis per spatial dimension),
  ``mom`` has shape ``(dim, *nx)``;
* the distribution ``f`` has shape ``(*nx, *nxi)`` -- position axes first,
  then velocity axes.

Grids are cell centred with uniform spacing; the position box is centred at
the origin and the velocity box is symmetric about zero.  Quadrature is the
midpoint rule.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, WeightOverflowError

# exp(a|xi|^2) must stay below ~1e304
WEIGHT_EXPONENT_LIMIT = 700.0

SNAPSHOT_MAGIC = b"VNSSNAP1".ljust(16, b"\0")


def exact_sum(a) -> float:
    """Correctly rounded sum of all entries (order independent, deterministic)."""
    a = np.asarray(a, dtype=float)
    if a.size <= 1 << 20:
        return math.fsum(a.ravel().tolist())
    # rows are summed pairwise by numpy, the row totals exactly
    return math.fsum(np.sum(a.reshape(-1, a.shape[-1]), axis=-1).tolist())


def _per_axis(value, dim, name, cast):
    if np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(dim))
    out = tuple(cast(v) for v in value)
    if len(out) != dim:
        raise DomainError(f"{name} needs {dim} entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid on [-x_extent, x_extent]^dim x [-xi_extent, xi_extent]^dim."""

    dim: int
    nx: tuple
    nxi: tuple
    x_extent: tuple
    xi_extent: tuple

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise DomainError(f"dim must be 1 or 3, got {self.dim}")
        object.__setattr__(self, "nx", _per_axis(self.nx, self.dim, "nx", int))
        object.__setattr__(self, "nxi", _per_axis(self.nxi, self.dim, "nxi", int))
        object.__setattr__(self, "x_extent", _per_axis(self.x_extent, self.dim, "x_extent", float))
        object.__setattr__(self, "xi_extent", _per_axis(self.xi_extent, self.dim, "xi_extent", float))
        for name in ("nx", "nxi"):
            if any(n < 1 for n in getattr(self, name)):
                raise DomainError(f"{name} entries must be positive, got {getattr(self, name)}")
        for name in ("x_extent", "xi_extent"):
            if any(not (e > 0.0 and math.isfinite(e)) for e in getattr(self, name)):
                raise DomainError(f"{name} entries must be positive and finite, got {getattr(self, name)}")

    # bounds and spacings -------------------------------------------------
    @property
    def x_lo(self):
        return tuple(-e for e in self.x_extent)

    @property
    def x_hi(self):
        return self.x_extent

    @property
    def xi_lo(self):
        return tuple(-e for e in self.xi_extent)

    @property
    def xi_hi(self):
        return self.xi_extent

    @property
    def dx(self):
        return tuple((hi - lo) / n for lo, hi, n in zip(self.x_lo, self.x_hi, self.nx))

    @property
    def dxi(self):
        return tuple((hi - lo) / n for lo, hi, n in zip(self.xi_lo, self.xi_hi, self.nxi))

    @property
    def cell_volume_x(self) -> float:
        return float(np.prod(self.dx))

    @property
    def cell_volume_xi(self) -> float:
        return float(np.prod(self.dxi))

    @property
    def phase_shape(self):
        return self.nx + self.nxi

    @property
    def xi_max(self):
        """Largest |xi_b| among velocity cell centres, per axis."""
        return tuple(e - 0.5 * d for e, d in zip(self.xi_extent, self.dxi))

    # coordinates ------------------------------------------------------------
    def x_centers(self, axis: int) -> np.ndarray:
        return self.x_lo[axis] + (np.arange(self.nx[axis]) + 0.5) * self.dx[axis]

    def xi_centers(self, axis: int) -> np.ndarray:
        return self.xi_lo[axis] + (np.arange(self.nxi[axis]) + 0.5) * self.dxi[axis]

    def xi_edges(self, axis: int) -> np.ndarray:
        return self.xi_lo[axis] + np.arange(self.nxi[axis] + 1) * self.dxi[axis]

    def x_field(self, axis: int) -> np.ndarray:
        """Coordinate x_axis shaped to broadcast against a position field."""
        shape = [1] * self.dim
        shape[axis] = self.nx[axis]
        return self.x_centers(axis).reshape(shape)

    def phase_x(self, axis: int) -> np.ndarray:
        """Coordinate x_axis shaped to broadcast against f."""
        shape = [1] * (2 * self.dim)
        shape[axis] = self.nx[axis]
        return self.x_centers(axis).reshape(shape)

    def phase_xi(self, axis: int) -> np.ndarray:
        """Coordinate xi_axis shaped to broadcast against f."""
        shape = [1] * (2 * self.dim)
        shape[self.dim + axis] = self.nxi[axis]
        return self.xi_centers(axis).reshape(shape)

    def x_radius2(self) -> np.ndarray:
        return sum(self.x_field(a) ** 2 for a in range(self.dim)) * np.ones(self.nx)

    def phase_x_radius2(self) -> np.ndarray:
        return sum(self.phase_x(a) ** 2 for a in range(self.dim))

    def phase_xi_radius2(self) -> np.ndarray:
        return sum(self.phase_xi(b) ** 2 for b in range(self.dim))

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(
            self.dim,
            tuple(n * factor for n in self.nx),
            tuple(n * factor for n in self.nxi),
            self.x_extent,
            self.xi_extent,
        )

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "nx": list(self.nx),
            "nxi": list(self.nxi),
            "x_extent": list(self.x_extent),
            "xi_extent": list(self.xi_extent),
        }


@dataclass
class KineticState:
    f: np.ndarray
    t: float = 0.0

    def validate(self, grid: PhaseGrid | None = None):
        if grid is not None and self.f.shape != grid.phase_shape:
            raise DomainError(f"f has shape {self.f.shape}, grid expects {grid.phase_shape}")
        if not np.all(np.isfinite(self.f)):
            raise DomainError("f contains non-finite values")
        if np.any(self.f < 0.0):
            raise DomainError("f must be nonnegative")
        return self


@dataclass
class FluidState:
    rho: np.ndarray
    mom: np.ndarray
    t: float = 0.0

    def validate(self, grid: PhaseGrid | None = None):
        if grid is not None:
            if self.rho.shape != grid.nx:
                raise DomainError(f"rho has shape {self.rho.shape}, grid expects {grid.nx}")
            if self.mom.shape != (grid.dim,) + grid.nx:
                raise DomainError(f"mom has shape {self.mom.shape}, grid expects {(grid.dim,) + grid.nx}")
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.mom))):
            raise DomainError("fluid state contains non-finite values")
        if np.any(self.rho < 0.0):
            raise DomainError("rho must be nonnegative")
        return self

    def velocity(self, density_floor: float = 1e-10) -> np.ndarray:
        """u = mom/rho where rho >= density_floor, zero elsewhere."""
        return velocity_from(self.rho, self.mom, density_floor)


def velocity_from(rho, mom, density_floor=1e-10):
    wet = rho >= density_floor
    safe = np.where(wet, rho, 1.0)
    return np.where(wet, mom / safe, 0.0)


@dataclass
class MomentFields:
    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray = field(default=None)


def _as_f(f):
    return f.f if isinstance(f, KineticState) else np.asarray(f, dtype=float)


def velocity_moments(f, grid: PhaseGrid) -> MomentFields:
    """m0 = int f dxi, m1 = int xi f dxi, m2 = int |xi|^2 f dxi per position cell."""
    arr = _as_f(f)
    flat = arr.reshape(grid.nx + (-1,))
    w = grid.cell_volume_xi
    m0 = np.sum(flat, axis=-1) * w
    m1 = np.empty((grid.dim,) + grid.nx)
    for b in range(grid.dim):
        m1[b] = np.sum((arr * grid.phase_xi(b)).reshape(grid.nx + (-1,)), axis=-1) * w
    m2 = np.sum((arr * grid.phase_xi_radius2()).reshape(grid.nx + (-1,)), axis=-1) * w
    return MomentFields(m0, m1, m2)


# weights and norms --------------------------------------------------------------

def weight_nu(x, xi, p: float, a: float = 1.0):
    """(1 + |x|^2 + |xi|^2)^(p/2) * exp(a |xi|^2).

    ``x`` and ``xi`` are points (scalars or sequences of components).
    """
    if not p >= 2.0:
        raise DomainError(f"weight exponent p must be >= 2, got {p}")
    if not a > 0.0:
        raise DomainError(f"Gaussian rate a must be > 0, got {a}")
    x2 = float(np.sum(np.square(np.asarray(x, dtype=float))))
    xi2 = float(np.sum(np.square(np.asarray(xi, dtype=float))))
    if a * xi2 > WEIGHT_EXPONENT_LIMIT:
        raise WeightOverflowError(
            f"weight exp(a|xi|^2) overflows at x={x!r}, xi={xi!r} (a|xi|^2={a * xi2:.1f}); "
            "use a smaller velocity extent or a smaller a"
        )
    return (1.0 + x2 + xi2) ** (0.5 * p) * math.exp(a * xi2)


def phase_weight(grid: PhaseGrid, p: float, a: float = 1.0) -> np.ndarray:
    """nu_p evaluated at every phase cell centre (broadcastable to f)."""
    if not p >= 0.0:
        raise DomainError(f"weight exponent p must be >= 0, got {p}")
    if not a > 0.0:
        raise DomainError(f"Gaussian rate a must be > 0, got {a}")
    xi2 = grid.phase_xi_radius2()
    worst = a * float(np.max(xi2))
    if worst > WEIGHT_EXPONENT_LIMIT:
        raise WeightOverflowError(
            f"weight exp(a|xi|^2) overflows at x=0, |xi|^2={float(np.max(xi2)):.3g} "
            f"(a|xi|^2={worst:.1f}); use a smaller velocity extent or a smaller a"
        )
    return (1.0 + grid.phase_x_radius2() + xi2) ** (0.5 * p) * np.exp(a * xi2)


def weighted_l2_norm(f, grid: PhaseGrid, p: float = 2.0, a: float = 1.0) -> float:
    arr = _as_f(f)
    nu = phase_weight(grid, p, a)
    return math.sqrt(exact_sum(nu * arr * arr) * grid.cell_volume_x * grid.cell_volume_xi)


def _spacings(grid: PhaseGrid):
    return grid.dx + grid.dxi


def weighted_h_norm(f, grid: PhaseGrid, k: int = 1, p: float = 2.0, a: float = 1.0) -> float:
    """Weighted H^k norm summing all mixed (x, xi) derivatives of order <= k.

    Derivatives are second-order central differences with second-order
    one-sided stencils on the boundary ring.
    """
    if k not in (1, 2):
        raise DomainError(f"k must be 1 or 2, got {k}")
    arr = _as_f(f)
    if min(arr.shape) < 3:
        raise DomainError("every axis needs at least 3 cells for the H^k stencils")
    nu = phase_weight(grid, p, a)
    h = _spacings(grid)
    naxes = arr.ndim
    first = [np.gradient(arr, h[i], axis=i, edge_order=2) for i in range(naxes)]
    terms = [arr] + first
    if k == 2:
        for i, j in itertools.combinations_with_replacement(range(naxes), 2):
            terms.append(np.gradient(first[i], h[j], axis=j, edge_order=2))
    total = math.fsum(exact_sum(nu * t * t) for t in terms)
    return math.sqrt(total * grid.cell_volume_x * grid.cell_volume_xi)


# snapshots -------------------------------------------------------------------------

def write_snapshot(path, grid: PhaseGrid, fluid: FluidState, kinetic: KineticState):
    """Binary snapshot: magic, little-endian int64/float64 header, rho, mom, f."""
    d = grid.dim
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack(f"<{1 + 2 * d}q", d, *grid.nx, *grid.nxi))
        fh.write(struct.pack(f"<{4 * d}d", *grid.x_lo, *grid.x_hi, *grid.xi_lo, *grid.xi_hi))
        for arr in (fluid.rho, fluid.mom, kinetic.f):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns (grid, fluid, kinetic)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:16] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot (bad magic)")
    pos = 16
    (d,) = struct.unpack_from("<q", data, pos)
    pos += 8
    sizes = struct.unpack_from(f"<{2 * d}q", data, pos)
    pos += 16 * d
    bounds = struct.unpack_from(f"<{4 * d}d", data, pos)
    pos += 32 * d
    nx, nxi = tuple(sizes[:d]), tuple(sizes[d:])
    x_hi = bounds[d : 2 * d]
    xi_hi = bounds[3 * d : 4 * d]
    grid = PhaseGrid(d, nx, nxi, x_hi, xi_hi)

    def take(shape):
        nonlocal pos
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        return arr.astype(float)

    rho = take(nx)
    mom = take((d,) + nx)
    f = take(nx + nxi)
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return grid, FluidState(rho, mom), KineticState(f)
