"""Mellin convolution operators on R^N_+ and multidimensional phi-variation.

Numerical reproduction toolkit: Haar-measure quadrature, kernel families
with approximate-identity checks, Tonelli-type phi-variation estimators and
convergence / rate harnesses.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, IncompleteTable, InsufficientData, MellinBVError,
                     NonFiniteIntegrand, PreconditionNotCertified, SuspectedDivergence,
                     TooManyPoints, UnknownDimension)
from .phi import LambdaGrid, PhiFunction, ScalingConstant, make_phi, parse_phi, validate_phi
from .haar_quad import LogDomainQuadrature, integrate_haar, integrate_haar_region
from .kernels import (KernelFamily, absolute_moment, check_alpha_singularity, check_axioms,
                      check_near_moment_condition, get_kernel, register_custom_kernel)
from .functions import (TestFunction, builtin_registry, get_function, increment, translate)
from .mellin_op import OperatorEvaluation, apply, apply_many, apply_on_grid, operator_image
from .variation import (Box, BoxPartition, Partition1D, VariationEstimate, box_functional,
                        brute_force_var1d, modulus, section_functional, var1d, var1d_sup,
                        var_box, var_global)
from .rates import RateReport, fit_loglog

__all__ = [name for name in dir() if not name.startswith("_")]
