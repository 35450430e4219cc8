from .state import (
    CERES_G,
    EARTH_G,
    ContactPoint,
    CounterweightParams,
    GimbalParams,
    SimState,
    SimulationDiverged,
    WorldMode,
)
from .world import World

__all__ = [
    "CERES_G",
    "EARTH_G",
    "ContactPoint",
    "CounterweightParams",
    "GimbalParams",
    "SimState",
    "SimulationDiverged",
    "World",
    "WorldMode",
]
