"""Fock-space kernels for homogeneous weights, with a perturbative correction route."""

from ftkl.fock.weights import ELLIPTIC_EXAMPLE, HomogeneousWeight, Perturbation, smooth_cutoff
from ftkl.fock.kernel import (
    FockBasis,
    Gram,
    KernelValue,
    bergman_eval,
    fock_basis,
    gram_matrix,
    model_constant_c0,
    model_constant_closed_form,
    orthonormalize,
    polar_grid,
    radial_norms,
    reproducing_defect,
    scaling_deviation,
    select_nmax,
)
from ftkl.fock.neumann import NeumannResult, cubic_perturbation, neumann_corrected_kernel, probe_grid

__all__ = [
    "ELLIPTIC_EXAMPLE", "HomogeneousWeight", "Perturbation", "smooth_cutoff",
    "FockBasis", "Gram", "KernelValue", "bergman_eval", "fock_basis", "gram_matrix",
    "model_constant_c0", "model_constant_closed_form", "orthonormalize", "polar_grid", "radial_norms", "reproducing_defect",
    "scaling_deviation", "select_nmax",
    "NeumannResult", "cubic_perturbation", "neumann_corrected_kernel", "probe_grid",
]
