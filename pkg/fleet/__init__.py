"""
Discrete-event fleet simulation: mobility, CO field, dock zones, lossy links, energy.
"""

from .energy import EnergyProfile, EnergyReport, energy_account
from .events import EventLoop
from .field import (
    EARTH_RADIUS_M,
    PollutionField,
    PollutionSource,
    TimeProfile,
    distance_m,
    field_sample,
    offset_position,
)
from .mobility import MobilityTrace, random_point_in_zone, random_waypoint_trace
from .network import LossyLink, ScheduledFrame, is_droppable, network_deliver
from .scenario import (
    RideSpec,
    ScenarioError,
    SimConfig,
    default_scenario,
    load_scenario,
    scenario_from_dict,
)
from .simulator import FleetSimulator, SimReport, audit_headers, run_sim
from .zones import WifiZone, visible_ssids

__all__ = [
    'EnergyProfile', 'EnergyReport', 'energy_account',
    'EventLoop',
    'EARTH_RADIUS_M', 'PollutionField', 'PollutionSource', 'TimeProfile', 'distance_m',
    'field_sample', 'offset_position',
    'MobilityTrace', 'random_point_in_zone', 'random_waypoint_trace',
    'LossyLink', 'ScheduledFrame', 'is_droppable', 'network_deliver',
    'RideSpec', 'ScenarioError', 'SimConfig', 'default_scenario', 'load_scenario',
    'scenario_from_dict',
    'FleetSimulator', 'SimReport', 'audit_headers', 'run_sim',
    'WifiZone', 'visible_ssids',
]
