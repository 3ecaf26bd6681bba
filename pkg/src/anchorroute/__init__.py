"""Geographic routing over raw anchor-distance coordinates."""

from .coords import (
    AnchorSet,
    CoordinateSystem,
    anchors_distance,
    build_coords,
    filter_anchors,
    is_general_setting,
    select_anchors,
)
from .routing import DistanceView, RoamState, GricMsgState, Message, RouteOutcome, route
from .sim import Scenario, RunReport, run, sweep
from .topology import CrescentObstacle, Network, bfs_hops, deploy, segment_blocked, shortest_path_len

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "CoordinateSystem",
    "CrescentObstacle",
    "DistanceView",
    "GricMsgState",
    "Message",
    "Network",
    "RoamState",
    "RouteOutcome",
    "RunReport",
    "Scenario",
    "anchors_distance",
    "bfs_hops",
    "build_coords",
    "deploy",
    "filter_anchors",
    "is_general_setting",
    "route",
    "run",
    "segment_blocked",
    "select_anchors",
    "shortest_path_len",
    "sweep",
]
