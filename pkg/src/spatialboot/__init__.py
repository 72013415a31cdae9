"""spatialboot: neighbor-based bootstrap ranking of spatial autocorrelation.

Quantifies how much better a region's value is predicted by its contiguity
neighbors than by randomly chosen regions, ranks codes by that statistic
(plus global Moran's I for reference), and characterizes the spatial scale
of each code with exponential semivariogram fits.
"""

from .errors import (
    EmptyVariogramError,
    GenerationError,
    GeometryError,
    IngestionError,
    InsufficientDataError,
    SpatialBootError,
    UndefinedStatisticError,
)
from .fields import RateField
from .graph import NeighborGraph, Region, RegionSet, observed_subgraph, queen_contiguity
from .moran import MoranResult, morans_i
from .nb2 import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_repetition,
    nb2,
    paired_t_statistic,
)
from .variogram import (
    EmpiricalVariogram,
    VariogramModel,
    empirical_variogram,
    fit_exponential,
    haversine_km,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "EmpiricalVariogram",
    "EmptyVariogramError",
    "GenerationError",
    "GeometryError",
    "IngestionError",
    "InsufficientDataError",
    "MoranResult",
    "NeighborGraph",
    "RateField",
    "Region",
    "RegionSet",
    "SpatialBootError",
    "UndefinedStatisticError",
    "VariogramModel",
    "bootstrap_repetition",
    "empirical_variogram",
    "fit_exponential",
    "haversine_km",
    "morans_i",
    "nb2",
    "observed_subgraph",
    "paired_t_statistic",
    "queen_contiguity",
]
