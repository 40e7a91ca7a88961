"""Anisotropic parameter-dependent pseudodifferential operators on torus grids.

Modules
-------
aniso
    Anisotropic weights, sectors and grids.
rbound
    Rademacher sums and R-bound estimation.
symbols
    Matrix symbols, exact derivatives, composition and parametrices.
psido
    Grid realization of ``op(a)(lam)``, Sobolev norms, multiplier checks.
elliptic
    Ellipticity, resolvents and maximal regularity experiments.
"""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .aniso import (AnisotropyVector, GridSpec, SectorSpec, aniso_abs, aniso_bracket, aniso_length,
                    peetre_check, weight_equivalence_check)
from .rbound import (BanachSpaceSpec, Budget, RBoundEstimate, contraction_check, kahane_equivalence_check,
                     property_alpha_check, rademacher_functional, rbound_estimate)
from .symbols import (ClassicalSymbol, Excision, MatrixSymbol, asymptotic_sum, chi_theta, compose,
                      homogeneous_extend, measured_order, neumann_parametrix, principal_inverse, seminorm,
                      symbol_from_spec)
from .psido import (GridFunction, GridOperator, equivalent_norm_multiplier, hilbert_transform_check,
                    multiplier_rbound_harness, op_apply, op_iteration_rbound, sobolev_norm)
from .elliptic import (DifferentialOperatorSpec, build_full_symbol, ellipticity_check, maxreg_experiment,
                       resolvent_rbound, resolvent_via_parametrix)

__all__ = [
    "BACKEND", "AnisotropyVector", "GridSpec", "SectorSpec", "aniso_abs", "aniso_bracket", "aniso_length",
    "peetre_check", "weight_equivalence_check", "BanachSpaceSpec", "Budget", "RBoundEstimate",
    "contraction_check", "kahane_equivalence_check", "property_alpha_check", "rademacher_functional",
    "rbound_estimate", "ClassicalSymbol", "Excision", "MatrixSymbol", "asymptotic_sum", "chi_theta", "compose",
    "homogeneous_extend", "measured_order", "neumann_parametrix", "principal_inverse", "seminorm",
    "symbol_from_spec", "GridFunction", "GridOperator", "equivalent_norm_multiplier", "hilbert_transform_check",
    "multiplier_rbound_harness", "op_apply", "op_iteration_rbound", "sobolev_norm", "DifferentialOperatorSpec",
    "build_full_symbol", "ellipticity_check", "maxreg_experiment", "resolvent_rbound", "resolvent_via_parametrix",
]
