"""Kinetic-fluid spray model: a Vlasov equation for particles coupled by drag
to a compressible Navier-Stokes system with density-dependent viscosity."""

from .blowup import (BlowupReport, GronwallInput, blowup_certify, bounding_curves, constant_C0, constant_C3,
                     constant_c_mu, constants_C1_C2, find_horizon, gronwall_bound)
from .config import RunConfig, parse_config, parse_config_text
from .coupled import Scenario, cfl_bounds, cfl_dt, relax_drag, run, step
from .diagnostics import FunctionalRecord, IdentityReport, check_identities, dissipation, functionals
from .errors import ConfigError, DomainError, IntegrationError, SeriesFormatError, StepError, WeightOverflowError
from .fluid import fluid_step, viscous_dissipation_density
from .grid import (FluidState, KineticState, MomentFields, PhaseGrid, read_snapshot, velocity_moments,
                   weight_nu, weighted_h_norm, weighted_l2_norm, write_snapshot)
from .kinetic import integrate_characteristics, transport_x, vlasov_step
from .params import ModelParams, bd_beta
from .picard import PicardReport, picard_iterate
from .presets import PRESET_NAMES, make_preset
from .series import TimeSeries, read_series, write_series

__version__ = "0.1.0"
