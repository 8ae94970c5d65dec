"""deglab: a desk-scale laboratory for degenerate dispersive equations.

Verifies, numerically and at small size, the objects that drive norm
inflation for quasilinear Schrödinger/KdV equations degenerating at a
point: bicharacteristic frequency growth, commutator (drift) conditions,
degenerating wave packets with their residuals, weighted energies, and
the duality argument that converts packet decay into solution growth.
"""

__version__ = "0.1.0"

from .models import (SchrodingerSpec, KdvSpec, WeightSpec,
                     schrodinger_exponents, kdv_exponents)
from .grids import Grid1D, GridField, simpson_weights
from .norms import (weighted_norm, sobolev_scaled_norm, y_capital_norm,
                    weighted_pairing, lp_norm)
from .bichar import (DegenerateSymbol, bichar_rhs, integrate_bichar,
                     xi_closed_form, doubling_time)
from .fitting import fit_exponential_rate, fit_log_slope, RateFit
from .tm import (CoefficientField1D, TmPacketParams, TmWavePacket1D,
                 TmAdjointWavePacketND, RayConditionSample, TmVerdict,
                 tm_supremum_1d, tm_verdict_degenerate, tm_degenerate_sweep,
                 tm_ray_supremum_nd, tm_weight_and_growth, tm_packet_grid,
                 tm_residual)
from .backgrounds import (DsLinearBackground, KdvCubicBackground,
                          SampledBackground, y_transform, y_inverse, dt_y,
                          check_x1_condition, gds_residual, gkdv_residual,
                          kdv_beta, taylor_ode_schrodinger)
from .profiles import BumpProfile, RadialBump
from .wavepackets import (PacketProfile, MappedProfile, DegeneratingPacket,
                          ModelPacket, SchrodingerPacket, KdvPacket,
                          model_packet_schrodinger, packet_schrodinger,
                          packet_kdv, residual_schrodinger, residual_kdv,
                          degeneration_report, bilinear_pairing,
                          packet_y_grid, ResidualReport, DegenerationReport,
                          predicted_degeneration_rate, scaled_profile_norm,
                          model_profile_from_envelope, regularity_norm,
                          snapshot_csv)
from . import errors

__all__ = [
    "SchrodingerSpec", "KdvSpec", "WeightSpec",
    "schrodinger_exponents", "kdv_exponents",
    "Grid1D", "GridField", "simpson_weights",
    "weighted_norm", "sobolev_scaled_norm", "y_capital_norm",
    "weighted_pairing", "lp_norm",
    "DegenerateSymbol", "bichar_rhs", "integrate_bichar",
    "xi_closed_form", "doubling_time",
    "fit_exponential_rate", "fit_log_slope", "RateFit",
    "CoefficientField1D", "TmPacketParams", "TmWavePacket1D",
    "TmAdjointWavePacketND", "RayConditionSample", "TmVerdict",
    "tm_supremum_1d", "tm_verdict_degenerate", "tm_degenerate_sweep",
    "tm_ray_supremum_nd", "tm_weight_and_growth", "tm_packet_grid",
    "tm_residual",
    "DsLinearBackground", "KdvCubicBackground", "SampledBackground",
    "y_transform", "y_inverse", "dt_y", "check_x1_condition",
    "gds_residual", "gkdv_residual", "kdv_beta", "taylor_ode_schrodinger",
    "BumpProfile", "RadialBump",
    "PacketProfile", "MappedProfile", "DegeneratingPacket",
    "ModelPacket", "SchrodingerPacket", "KdvPacket",
    "model_packet_schrodinger", "packet_schrodinger", "packet_kdv",
    "residual_schrodinger", "residual_kdv", "degeneration_report",
    "bilinear_pairing", "packet_y_grid", "ResidualReport",
    "DegenerationReport", "predicted_degeneration_rate",
    "scaled_profile_norm", "model_profile_from_envelope",
    "regularity_norm", "snapshot_csv",
    "errors",
]
