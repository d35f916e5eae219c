"""Radiative transfer in vertically stratified media coupled to temperature.

Grey lake problems (1D and 2D), a frequency-dependent solver with isotropic
and Rayleigh scattering, and an Earth-atmosphere column with a
window-blocking comparison.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError
from .specfun import (SCALES, contraction_bound, contraction_gap, expint, expint_orders, expint_segment, planck,
                      planck_dT, stefan_sum)
from .kernels import (BoundarySourceSpec, Grid1D, KernelOperator, apply_kernel, boundary_attenuation,
                      brute_force_kernel, build_kernel, kernel_matrices)
from .common import IterationReport, TemperatureProfile
from .grey import (GreyConfig, Terrain2D, equilibrium_temperature, grey_iterate, grey_solve_2d,
                   lake_1d_config, solve_reaction_diffusion_1d)
from .spectral import (KernelCache, RadiationState, SolverControls, Spectrum, convergence_rate_check,
                       flux_profile, max_principle_check, recover_intensity, run_spectral)
from .atmosphere import (AltitudeMap, Scenario, TransmittanceTable, build_spectrum, greenhouse_compare,
                         load_bundled_transmittance, load_transmittance, run_scenario)
