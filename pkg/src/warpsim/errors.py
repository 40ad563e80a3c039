"""Exception hierarchy shared across the simulator, harness, service and CLI.

The CLI maps these onto exit codes: configuration and kernel-build problems
exit 2, golden-output mismatches exit 3, simulation invariant violations
exit 4. Everything else is a plain crash.
"""


class WarpsimError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(WarpsimError):
    """Invalid hardware configuration or CLI/request parameters."""

    exit_code = 2


class AsmError(ConfigError):
    """Kernel assembly failed (syntax, range, unknown symbol)."""


class UnsupportedVariant(ConfigError):
    """Benchmark does not provide the requested variant."""


class LintError(ConfigError):
    """Kernel plan failed a static check (loop nesting, stream overlap)."""


class GoldenMismatch(WarpsimError):
    """Simulated output buffer differs from the golden model."""

    exit_code = 3

    def __init__(self, benchmark, buffer, index, expected, actual):
        self.benchmark = benchmark
        self.buffer = buffer
        self.index = index
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{benchmark}: buffer {buffer!r} first differs at element "
            f"{index}: expected {expected!r}, got {actual!r}"
        )


class SimulationError(WarpsimError):
    """A hardware-model invariant was violated while simulating."""

    exit_code = 4


class IllegalInstruction(SimulationError):
    pass


class MemoryFault(SimulationError):
    """Out-of-range or unaligned access."""


class DivergenceError(SimulationError):
    """Split/join stack misuse (overflow, underflow, escape from a loop)."""


class LoopConfigError(SimulationError):
    """Hardware-loop misconfiguration caught at runtime."""


class StreamConfigError(SimulationError):
    """Stream lane misconfiguration (reconfigure-while-active and friends)."""


class DeadlockError(SimulationError):
    """No instruction retired for an implausibly long window."""
