"""CSR address layout for the extension units, plus config-word packing.

Extension units live in a 256-entry window starting at 0x800. The low 8 bits
select the unit and register:

    [7:6] unit type: 00 = loop unit, 01 = stream unit
    [5:3] unit index
    [2:0] register within the unit

Loop unit registers (shared per core; the state register is per warp):

    0 start PC      first instruction of the loop body
    1 end PC        the back-edge instruction
    2 tail mask     thread mask applied on the final iteration
    3 bound         bit 31 = enable, bits [30:0] = iteration count
    4 state         bit 31 = running, bits [30:0] = iteration counter

Stream unit registers (per warp; base/stride/length are per lane):

    0 base address
    1 config word (see pack_stream_cfg)
    2 element count per lane (0 disables the run-length bound)
    3 status, read-only: buffered + in-flight elements
    5 address stride in bytes (signed)
"""

from dataclasses import dataclass

from .errors import SimulationError
from .isa import CSR_EXT_FIRST, CSR_EXT_LAST

UNIT_LOOP = 0
UNIT_STREAM = 1

LOOP_START, LOOP_END, LOOP_TAIL, LOOP_BOUND, LOOP_STATE = range(5)
STREAM_BASE, STREAM_CFG, STREAM_LEN, STREAM_STATUS = range(4)
STREAM_STRIDE = 5

# stream config word fields
SPACE_INT = 0b01
SPACE_FP = 0b10
MODE_READ = 0b01
MODE_WRITE = 0b10
MODE_RW = 0b11


def ext_addr(unit_type, unit_id, reg):
    assert 0 <= unit_id <= 7 and 0 <= reg <= 7
    return CSR_EXT_FIRST | unit_type << 6 | unit_id << 3 | reg


def loop_csr(level, reg):
    return ext_addr(UNIT_LOOP, level, reg)


def stream_csr(unit, reg):
    return ext_addr(UNIT_STREAM, unit, reg)


def decode_ext(addr):
    """Split an extension CSR address into (unit_type, unit_id, reg), or
    return None when the address is outside the extension window."""
    if not CSR_EXT_FIRST <= addr <= CSR_EXT_LAST:
        return None
    sub = addr & 0xFF
    return sub >> 6, (sub >> 3) & 0x7, sub & 0x7


def pack_stream_cfg(mapped_reg, space, elem_log2=2, prefetch=True,
                    redirect=True, mode=MODE_READ):
    """Build a stream unit config word.

    mapped_reg  architectural register the stream replaces
    space       SPACE_INT or SPACE_FP
    elem_log2   log2 of the element size in bytes (2 = 32-bit)
    prefetch    run ahead of consumption (reads only)
    redirect    map the register into the stream (skip RF and scoreboard)
    mode        MODE_READ, MODE_WRITE or MODE_RW
    """
    assert 0 <= mapped_reg <= 31
    assert space in (SPACE_INT, SPACE_FP)
    assert 0 <= elem_log2 <= 2
    assert mode in (MODE_READ, MODE_WRITE, MODE_RW)
    return (mapped_reg | space << 5 | elem_log2 << 7
            | (1 << 10 if prefetch else 0) | (1 << 11 if redirect else 0)
            | mode << 12)


@dataclass(frozen=True)
class StreamCfg:
    mapped_reg: int
    space: int
    elem_log2: int
    prefetch: bool
    redirect: bool
    mode: int

    @property
    def elem_size(self):
        return 1 << self.elem_log2

    @property
    def is_fp(self):
        return self.space == SPACE_FP

    @property
    def reads(self):
        return bool(self.mode & MODE_READ)

    @property
    def writes(self):
        return bool(self.mode & MODE_WRITE)


def parse_stream_cfg(word):
    space = (word >> 5) & 0x3
    mode = (word >> 12) & 0x3
    if space not in (SPACE_INT, SPACE_FP):
        raise SimulationError(f"stream config {word:#x}: bad register space")
    if mode == 0:
        raise SimulationError(f"stream config {word:#x}: mode not set")
    cfg = StreamCfg(mapped_reg=word & 0x1F, space=space,
                    elem_log2=(word >> 7) & 0x7,
                    prefetch=bool(word >> 10 & 1),
                    redirect=bool(word >> 11 & 1), mode=mode)
    if cfg.elem_log2 > 2:
        raise SimulationError(f"stream config {word:#x}: element too wide")
    if cfg.elem_log2 < 2 and cfg.is_fp:
        raise SimulationError("sub-word stream elements must be integer")
    return cfg


def pack_loop_state(counter, running):
    return (counter & 0x7FFFFFFF) | (0x80000000 if running else 0)


def unpack_loop_state(value):
    return value & 0x7FFFFFFF, bool(value >> 31)
