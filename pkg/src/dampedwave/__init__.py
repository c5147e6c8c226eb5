"""Numerical laboratory for the wave equation with scale-invariant damping and mass.

The damped equation is converted by the Liouville transform into a
Klein-Gordon equation with time-dependent mass mu/(1+t)^2, whose Fourier
modes are solved exactly by half-integer-shifted Bessel functions.  The
package evaluates those mode propagators, evolves full fields
pseudospectrally on a periodic box, extracts scattering profiles, and fits
the asymptotic decay orders of the scattering error for both the linear
equation and the energy-critical quintic equation in three dimensions.
"""

from .params import (
    CoefficientSet,
    RatePrediction,
    derive_coefficients,
    coefficients_for_mu,
    predict_rates,
    check_admissible_pair,
)
from .bessel import BesselOrder, BesselEval, BesselRangeError, bessel_eval, wronskian_defect
from .errors import ConfigError, DivergenceError, HorizonError, QuadratureError
from .kernels import (
    KernelFactory,
    ModeKernel,
    ModeState,
    fundamental_pair,
    kernel_bound_report,
    mode_kernel,
    ode_oracle,
)
from .fields import (
    FieldState,
    GridSpec,
    NormReport,
    check_horizon,
    duhamel_tail,
    free_wave_evolve,
    linear_evolve,
    liouville,
    load_field,
    norms,
    save_field,
    spacetime_norm,
)
from .presets import make_preset
from .scattering import (
    DecayCurve,
    DecayFit,
    ScatterProfile,
    decay_curve,
    dw_retransform_check,
    exact_linear_profile,
    extract_profile,
    fit_decay,
    growth_experiment,
    linear_scatter_experiment,
)
from .nlkg import (
    NonlinearRun,
    PicardResult,
    l2_growth_check,
    nlkg_evolve,
    nlkg_evolve_wave_split,
    nonlinear_scatter,
    nonlinearity,
    picard_iterate,
)

__version__ = "0.1.0"
