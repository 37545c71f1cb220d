"""Time-domain dispersive Maxwell engine on a staggered grid."""

from .materials import (
    LorentzPole,
    EMMaterials,
    PassivityReport,
    chi_freq,
    chi_time,
    lambda_time,
    passivity_check,
    passivity_matrix_check,
    convolution_positivity_test,
)
from .fdtd import (
    GridSpec,
    EMState,
    fdtd_init,
    fdtd_step,
    energy,
    certificate_energy,
    PointSource,
    bump_ball,
    plane_wave_state,
)
from .cones import LightCone, CertificateRefusal, light_cone_certificate

__all__ = [
    "LorentzPole",
    "EMMaterials",
    "PassivityReport",
    "chi_freq",
    "chi_time",
    "lambda_time",
    "passivity_check",
    "passivity_matrix_check",
    "convolution_positivity_test",
    "GridSpec",
    "EMState",
    "fdtd_init",
    "fdtd_step",
    "energy",
    "certificate_energy",
    "PointSource",
    "bump_ball",
    "plane_wave_state",
    "LightCone",
    "CertificateRefusal",
    "light_cone_certificate",
]
