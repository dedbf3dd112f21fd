"""Numerical and exact tools for transversality to stratified sets."""

from .errors import StratLabError
from .geometry import AffineMap, BumpFunction, Box, Chart, DifferentiableMap, PolynomialMap, c1_distance
from .gallery import FIXTURES, run_gallery, run_oracle
from .neighborhoods import (
    DirectedFamily,
    ProbeReport,
    WeakNeighborhoodSpec,
    nbhd_contains,
    probe_openness,
    sample_perturbations,
)
from .regularity import Schedule, TangentSequence, check_condition_a, estimate_tau_limit, scan_pairs, sequence_from_curve
from .strata import Stratification, Stratum, validate
from .subspace import Field, Subspace, containment_residual, intersect, numeric_rank, subspace_distance, subspace_sum
from .transversality import (
    Reason,
    TransversalityVerdict,
    is_transverse_at,
    is_transverse_to_stratification,
    margin_eta,
    transverse_on_compact,
)
from .witness import FaultInstance, WitnessFamily, build_family, complex_witness

__version__ = "0.1.0"

__all__ = [
    "AffineMap", "BumpFunction", "Box", "Chart", "DifferentiableMap", "DirectedFamily", "FIXTURES",
    "FaultInstance", "Field", "PolynomialMap", "ProbeReport", "Reason", "Schedule", "StratLabError",
    "Stratification", "Stratum", "Subspace", "TangentSequence", "TransversalityVerdict",
    "WeakNeighborhoodSpec", "WitnessFamily", "build_family", "c1_distance", "check_condition_a",
    "complex_witness", "containment_residual", "estimate_tau_limit", "intersect", "is_transverse_at",
    "is_transverse_to_stratification", "margin_eta", "nbhd_contains", "numeric_rank", "probe_openness",
    "run_gallery", "run_oracle", "sample_perturbations", "scan_pairs", "sequence_from_curve",
    "subspace_distance", "subspace_sum", "transverse_on_compact", "validate",
]
