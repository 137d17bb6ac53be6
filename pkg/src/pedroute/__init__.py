"""Route alternatives with intermediate destinations for pedestrian
simulation, and an iterated travel-time assignment over them."""

__version__ = "0.1.0"

from .scenario import Scenario, load_scenario, parse_scenario, validate  # noqa: E402
from .field import DistanceField, band, compute_field, gradient_at  # noqa: E402
from .regions import RegionClass, classify, extract_regions  # noqa: E402
from .routes import RouteConfig, RouteSet, build_routes, filter_routes_for_origin  # noqa: E402
from .sim import SimParams, run_simulation  # noqa: E402
from .assign import AssignParams, run_assignment  # noqa: E402

__all__ = [
    "Scenario", "load_scenario", "parse_scenario", "validate",
    "DistanceField", "band", "compute_field", "gradient_at",
    "RegionClass", "classify", "extract_regions",
    "RouteConfig", "RouteSet", "build_routes", "filter_routes_for_origin",
    "SimParams", "run_simulation", "AssignParams", "run_assignment",
]
