"""Closed geodesics on model surfaces: finding, stability data, and counting
arithmetic over the broken-geodesic approximation of the loop space."""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    DomainError,
    GeodLabError,
    InputError,
    NumericError,
    NumericWarning,
    ResolutionError,
)
from .manifold import (
    GeodesicSegment,
    ManifoldHandle,
    PointRep,
    connect,
    distance,
    geodesic_flow,
    make_manifold,
    parallel_transport,
)
from .loopspace import (
    ClosedGeodesic,
    PointCurve,
    Polygon,
    birkhoff_shorten,
    closed_geodesic,
    grad_length,
    grad_norm,
    length,
    polygon,
    polygon_from_samples,
    reverse,
    rotate,
    subdivide,
)
from .finder import (
    Collapsed,
    FinderOptions,
    class_seed_polygon,
    minimize_in_class,
    refine_newton,
    resolution_for_bound,
    section_polygon,
    sweepout_minimax,
)
from .spectral import (
    BottSample,
    SpectralData,
    bott_functions,
    hessian,
    index_nullity,
    iterated_index,
    orientation_preserving,
    poincare_map,
    primality_hint,
    spectral_data,
)
from .morse import (
    MorseCheckInput,
    MorseVerdict,
    ParityVerdict,
    RATIONAL,
    SeriesExpansion,
    TypeNumberQuery,
    TypeNumberTable,
    iterate_parity_check,
    morse_check,
    poincare_series,
    type_numbers,
)
