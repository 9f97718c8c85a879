"""Energy-audited splitting solver for a fluid / porous-layer / plate system."""

__version__ = "0.1.0"

from .config import RunConfig, build_problem, parse_config  # noqa: F401
from .driver import DriverSettings, MonitorBounds, run_splitting  # noqa: F401
from .mesh import build_grids  # noqa: F401
from .params import PhysicsParams  # noqa: F401
