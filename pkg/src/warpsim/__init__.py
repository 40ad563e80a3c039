"""warpsim: cycle-level simulator of a SIMT GPGPU core with hardware-loop
and memory-stream extensions, plus a benchmark harness around it."""

__version__ = "0.1.0"

from .config import CoreConfig, VARIANTS, EXT_HWLOOP, EXT_MASKSTACK, EXT_STREAMS
from .errors import (WarpsimError, ConfigError, AsmError, GoldenMismatch,
                     SimulationError)

__all__ = [
    "CoreConfig", "VARIANTS", "EXT_HWLOOP", "EXT_MASKSTACK", "EXT_STREAMS",
    "WarpsimError", "ConfigError", "AsmError", "GoldenMismatch",
    "SimulationError", "__version__",
]
