"""Vehicular named-data networking: protocol library plus a deterministic
discrete-event simulator for broadcast wireless forwarding experiments."""

from .engine import RadioModel, SimResult, Simulator, deliver_broadcast, run_scenario
from .geo import GeoPoint, Intersection, RoadGraph, Segment, load_road_graph
from .lal import LalConfig, LinkAdaptationLayer
from .names import Name, parse_name
from .packets import Data, Interest, chunk_content, make_data, reassemble, verify_data
from .scenario import Scenario, load_scenario, save_scenario, scenario_from_dict
from .stats import Stats, aggregate
from .tables import ContentStore, Pit
from .templates import gen_scenario

__version__ = "0.1.0"

__all__ = [
    "ContentStore",
    "Data",
    "GeoPoint",
    "Interest",
    "Intersection",
    "LalConfig",
    "LinkAdaptationLayer",
    "Name",
    "Pit",
    "RadioModel",
    "RoadGraph",
    "Scenario",
    "Segment",
    "SimResult",
    "Simulator",
    "Stats",
    "aggregate",
    "chunk_content",
    "deliver_broadcast",
    "gen_scenario",
    "load_road_graph",
    "load_scenario",
    "make_data",
    "parse_name",
    "reassemble",
    "run_scenario",
    "save_scenario",
    "scenario_from_dict",
    "verify_data",
    "__version__",
]
