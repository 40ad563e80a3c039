"""Hardware configuration record and the named extension bundles."""

from dataclasses import dataclass, replace, fields, asdict

from .errors import ConfigError

# extension feature flags
EXT_HWLOOP = "hwloop"        # zero-overhead hardware loops
EXT_MASKSTACK = "maskstack"  # loop predication stack driving thread masks
EXT_STREAMS = "streams"      # memory stream lanes with register redirect

# CLI/benchmark variant names -> enabled extensions
VARIANTS = {
    "base": frozenset(),
    "cfm": frozenset([EXT_HWLOOP]),
    "cfm+lps": frozenset([EXT_HWLOOP, EXT_MASKSTACK]),
    "full": frozenset([EXT_HWLOOP, EXT_MASKSTACK, EXT_STREAMS]),
}


@dataclass(frozen=True)
class CoreConfig:
    """One core's dimensions and latencies. Immutable; derive with `with_()`."""

    warps: int = 8
    threads: int = 16
    loop_levels: int = 4          # hardware loop nesting depth
    stream_units: int = 3         # memory stream lanes
    stream_credits: int = 8       # per-thread FIFO slots per lane
    cache_ports: int = 3          # L1 requests accepted per cycle
    cache_size: int = 16384
    line_size: int = 64
    cache_ways: int = 2
    cache_banks: int = 4
    hit_latency: int = 2
    miss_latency: int = 16
    mshr_per_bank: int = 8
    mem_size: int = 4 << 20       # flat backing memory
    shared_base: int = 0x700000   # scratchpad window, outside flat memory
    shared_size: int = 16384
    shared_latency: int = 2
    alu_latency: int = 1
    fpu_latency: int = 4
    csr_latency: int = 1
    ibuffer_depth: int = 2
    stack_limit: int = 32         # divergence and predication stack caps
    cores: int = 1                # harness-level: partitions work, max-cycles

    def __post_init__(self):
        c = self._check
        c(1 <= self.warps <= 64, "warps must be in [1, 64]")
        c(1 <= self.threads <= 32, "threads must be in [1, 32]")
        c(self.threads & (self.threads - 1) == 0,
          "threads must be a power of two")
        c(1 <= self.loop_levels <= 8, "loop_levels must be in [1, 8]")
        c(0 <= self.stream_units <= 8, "stream_units must be in [0, 8]")
        c(1 <= self.stream_credits <= 64, "stream_credits must be in [1, 64]")
        c(1 <= self.cache_ports <= 8, "cache_ports must be in [1, 8]")
        c(self.line_size >= 4 and self.line_size & (self.line_size - 1) == 0,
          "line_size must be a power of two >= 4")
        c(self.cache_banks >= 1
          and self.cache_banks & (self.cache_banks - 1) == 0,
          "cache_banks must be a power of two")
        c(self.cache_ways >= 1, "cache_ways must be >= 1")
        line_bytes = self.line_size * self.cache_ways * self.cache_banks
        c(self.cache_size % line_bytes == 0 and self.cache_size >= line_bytes,
          "cache_size must be a multiple of line*ways*banks")
        c(self.mshr_per_bank >= 1, "mshr_per_bank must be >= 1")
        c(self.hit_latency >= 1 and self.miss_latency >= self.hit_latency,
          "latencies must satisfy 1 <= hit <= miss")
        c(self.mem_size % 4 == 0 and self.mem_size >= 4096,
          "mem_size must be a multiple of 4, at least 4 KiB")
        c(self.shared_base >= self.mem_size,
          "shared window must not overlap flat memory")
        c(self.shared_size % 4 == 0, "shared_size must be a multiple of 4")
        c(self.alu_latency >= 1 and self.fpu_latency >= 1
          and self.csr_latency >= 1, "unit latencies must be >= 1")
        c(self.ibuffer_depth >= 1, "ibuffer_depth must be >= 1")
        c(self.stack_limit >= 1, "stack_limit must be >= 1")
        c(1 <= self.cores <= 64, "cores must be in [1, 64]")

    @staticmethod
    def _check(ok, msg):
        if not ok:
            raise ConfigError(msg)

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            coerced = {k: int(v) for k, v in d.items()}
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config values must be integers: {e}") from None
        return cls(**coerced)

    # derived geometry
    @property
    def full_mask(self):
        return (1 << self.threads) - 1

    @property
    def sets_per_bank(self):
        return self.cache_size // (self.line_size * self.cache_ways
                                   * self.cache_banks)


def variant_extensions(name):
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigError(
            f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}"
        ) from None
