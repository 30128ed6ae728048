"""Volterra-series input-output analysis of weakly nonlinear quantum optical networks."""

from .algebra import OperatorPoly, commutator, create, destroy, heisenberg_generator, normal_order_product
from .kernels import (
    ExpSumKernel,
    KernelSignature,
    eval_kernel,
    expm_action,
    kernel_series,
    symbolic_kernel,
)
from .model import (
    BilinearSystem,
    LinearModel,
    ModelSpec,
    amplifier,
    as_bilinear,
    beam_splitter,
    build_bilinear,
    cavity,
    kerr_cavity,
    linear_component,
    optomech,
    rotation_splitter,
)
from .network import Concat, Leaf, Series, concatenate, evaluate_network, series, series_linear_first, series_linear_second
from .oracle import FockDensity, lindblad_integrate, non_gaussianity, semiclassical_response
from .response import DriveSignal, ResponseResult, brute_force_response, output_spectrum, volterra_response
from .spectra import RationalSusceptibility, SusceptibilitySet, fourier_kernel, linear_transfer, susceptibility_set

__version__ = "0.1.0"
