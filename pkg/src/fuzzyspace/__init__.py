"""Finite spectral triples on the (deformed) fuzzy sphere.

Dirac spectra, heat-kernel observables, localized states, Connes distances
between them and low-dimensional embeddings of the resulting metric.
"""
from .triple import (
    CONVENTION_TAG,
    DeformationParams,
    FiniteSpectralTriple,
    build_deformed_dirac,
    build_general_dirac,
    build_two_spinor_dirac,
    clifford_generators,
    su2_generators,
    validate_triple,
)
from .spectrum import EigenvalueTable, analytic_spectrum, compare_spectra, numeric_spectrum
from .observables import dimension_estimate, max_states, observable_report, spectral_dimension, volume
from .algebra import make_basis, matrix_unit_basis, pbw_basis, traceless_reduction
from .states import StateEnsemble, dispersion_proxy, generate_states
from .distance import DistanceProblem, connes_distance, distance_matrix, lipschitz_seminorm
from .embed import expected_axes, fit_ellipsoid, sample_ellipsoid, smacof_embed

__version__ = "0.1.0"
