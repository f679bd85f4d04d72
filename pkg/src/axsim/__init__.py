"""axsim: system-level performance simulator for a PCIe-attached systolic
GEMM accelerator with configurable memory hierarchies."""

__version__ = "0.1.0"

from .engine import Engine, Event, Port, SchedulingError  # noqa: F401
from .errors import ConfigError, SimFault  # noqa: F401
from .system import RunConfig, SimReport, System, run_config  # noqa: F401
