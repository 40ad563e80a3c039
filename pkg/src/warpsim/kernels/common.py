"""Shared machinery for the benchmark kernel builders.

Every kernel uses the same two-phase launch: warp 0 writes the shared loop
configuration, spawns the remaining warps, and all warps execute a main loop
over full rounds of W*T elements.  Element i = (k*W + w)*T + t, so one warp
iteration touches T consecutive words and unit-stride streams stay dense.
After a barrier, warp 0 alone sweeps any ragged leftover with a second loop
whose final iteration covers a partial set of lanes.

Builders emit assembly text through Prog and return a KernelImage bundling
the assembled program, input buffers and expected outputs.  The four variant
names map onto extension sets: the baseline uses software loop closes and a
per-element bounds guard, "cfm" moves the loops into hardware, "cfm+lps"
drops the guard in favour of tail masks, and "full" replaces bulk memory
instructions with stream units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import csr
from ..asm import Program, assemble
from ..config import CoreConfig, EXT_HWLOOP, EXT_MASKSTACK, EXT_STREAMS
from ..errors import ConfigError, UnsupportedVariant

__all__ = ["BuildError", "UnsupportedVariant"]


class BuildError(ConfigError):
    """Kernel cannot be built for the requested configuration."""


# Flat-memory layout used by every kernel.  Text starts at 0, small constant
# tables live at the assembler's data base, bulk arrays are bump-allocated
# from ARRAY_BASE upward.  Everything must stay below the 4 MiB main memory.
ARRAY_BASE = 0x10000


@dataclass
class Buffer:
    name: str
    addr: int
    words: int


class Allocator:
    """Word-aligned bump allocator for bulk arrays."""

    def __init__(self, cfg: CoreConfig, base: int = ARRAY_BASE):
        self.cfg = cfg
        self.next = base
        self.buffers: list[Buffer] = []

    def alloc(self, name: str, words: int, slack: int = 0) -> Buffer:
        # slack pads the allocation so padded grids may read past the live
        # region without touching the next buffer
        total = words + slack
        buf = Buffer(name, self.next, words)
        self.next += 4 * total
        self.next = (self.next + self.cfg.line_size - 1) & ~(self.cfg.line_size - 1)
        if self.next > self.cfg.mem_size:
            raise BuildError(f"arrays exceed main memory ({self.next:#x})")
        self.buffers.append(buf)
        return buf


@dataclass(frozen=True)
class Grid:
    """Element-to-lane geometry for a 1-D workload of n elements."""

    n: int
    block: int      # elements per round, W*T
    spawn: int      # warps participating in the main phase
    threads: int
    k_main: int     # full rounds per warp
    main: int       # elements covered by the main phase
    rem: int        # ragged leftover swept by warp 0
    rem_bound: int  # remainder loop iterations
    rem_tail: int   # live lanes in the final remainder iteration

    @property
    def rem_mask(self) -> int:
        return (1 << self.rem_tail) - 1


def plan_grid(n: int, cfg: CoreConfig) -> Grid:
    if n <= 0:
        raise BuildError("workload must have at least one element")
    block = cfg.warps * cfg.threads
    k_main = n // block
    main = k_main * block
    rem = n - main
    rem_bound = -(-rem // cfg.threads) if rem else 0
    rem_tail = rem - (rem_bound - 1) * cfg.threads if rem else 0
    return Grid(
        n=n,
        block=block,
        spawn=cfg.warps if k_main else 1,
        threads=cfg.threads,
        k_main=k_main,
        main=main,
        rem=rem,
        rem_bound=rem_bound,
        rem_tail=rem_tail,
    )


@dataclass
class LoopDecl:
    level: int
    start: str
    end: str


class Prog:
    """Assembly text accumulator with label allocation and loop lints."""

    def __init__(self, cfg: CoreConfig, extensions: frozenset):
        self.cfg = cfg
        self.ext = extensions
        self.lines: list[str] = []
        self._serial = 0
        self._loops: list[list[LoopDecl]] = [[]]
        if cfg.threads & (cfg.threads - 1) or cfg.warps & (cfg.warps - 1):
            raise BuildError("kernel builders assume power-of-two warps and threads")

    @property
    def hw_loops(self) -> bool:
        return EXT_HWLOOP in self.ext

    @property
    def lps(self) -> bool:
        return EXT_MASKSTACK in self.ext

    @property
    def streams(self) -> bool:
        return EXT_STREAMS in self.ext

    def fresh(self, stem: str) -> str:
        self._serial += 1
        return f"{stem}_{self._serial}"

    def label(self, name: str):
        self.lines.append(f"{name}:")

    def label_last(self, name: str):
        """Attach a label to the most recently emitted instruction."""
        for i in range(len(self.lines) - 1, -1, -1):
            if self.lines[i].startswith("    "):
                self.lines.insert(i, f"{name}:")
                return
        raise BuildError("no instruction to label")

    def op(self, text: str, cat: str | None = None):
        self.lines.append(f"    {text}" + (f"  #cat:{cat}" if cat else ""))

    def raw(self, text: str):
        self.lines.append(text)

    # -- constant and register helpers ----------------------------------

    def li(self, reg: str, value: int, cat: str | None = None):
        self.op(f"li {reg}, {value}", cat)

    def mul_const(self, dst: str, src: str, k: int, tmp: str = "t6"):
        """dst = src * k via shift-adds; k must be a small positive constant."""
        if k <= 0:
            raise BuildError("mul_const needs a positive factor")
        bits = [i for i in range(k.bit_length()) if k >> i & 1]
        if len(bits) > 4:
            raise BuildError(f"factor {k} too dense for shift-add expansion")
        first = bits.pop()
        if first:
            self.op(f"slli {dst}, {src}, {first}")
        else:
            self.op(f"mv {dst}, {src}")
        for b in bits:
            if b:
                self.op(f"slli {tmp}, {src}, {b}")
                self.op(f"add {dst}, {dst}, {tmp}")
            else:
                self.op(f"add {dst}, {dst}, {src}")

    # -- launch scaffolding ---------------------------------------------

    def prolog(self):
        """Per-warp id registers: s0=wid, s1=tid, s2=4*(tid + T*wid)."""
        tshift = self.cfg.threads.bit_length() - 1
        self.op("csrrs s0, wid, zero")
        self.op("csrrs s1, tid, zero")
        self.op(f"slli t0, s0, {tshift + 2}")
        self.op("slli s2, s1, 2")
        self.op("add s2, s2, t0")

    def spawn(self, grid: Grid, entry: str):
        if grid.spawn > 1:
            self.li("t0", grid.spawn)
            self.op(f"la t1, {entry}")
            self.op("wspawn t0, t1")
        self.label(entry)

    def barrier(self, bar_id: int, count: int):
        if count > 1:
            self.li("a6", bar_id)
            self.li("a7", count)
            self.op("bar a6, a7")

    def workers_done(self, done: str):
        """Send every warp except 0 to the done label (uniform branch)."""
        self.op(f"bne s0, zero, {done}")

    # -- loop emission ---------------------------------------------------

    def loop_group(self):
        """Start a fresh nest scope for the end-PC lint (one per phase)."""
        self._loops.append([])

    def configure_loop(self, level: int, start: str, end: str, bound: int,
                       tail_mask: int | None = None, tmp: str = "t0"):
        """Write one hardware loop level's CSRs (shared, warp 0, pre-spawn
        for the main phase; warp 0 post-barrier for the remainder)."""
        if not self.hw_loops:
            raise BuildError("loop CSRs written without the hardware loop extension")
        if bound < 1:
            raise BuildError("loop bound must be at least 1")
        self._loops[-1].append(LoopDecl(level, start, end))
        full = self.cfg.full_mask
        self.op(f"la {tmp}, {start}")
        self.op(f"csrrw zero, {csr.loop_csr(level, csr.LOOP_START):#x}, {tmp}")
        self.op(f"la {tmp}, {end}")
        self.op(f"csrrw zero, {csr.loop_csr(level, csr.LOOP_END):#x}, {tmp}")
        mask = full if tail_mask is None else tail_mask
        if not self.lps:
            mask = full
        self.li(tmp, mask)
        self.op(f"csrrw zero, {csr.loop_csr(level, csr.LOOP_TAIL):#x}, {tmp}")
        self.li(tmp, (1 << 31) | bound)
        self.op(f"csrrw zero, {csr.loop_csr(level, csr.LOOP_BOUND):#x}, {tmp}")

    def sw_loop_open(self, counter: str = "a0"):
        self.li(counter, 0, cat="loop")

    def sw_loop_close(self, head: str, bound_reg: str, counter: str = "a0",
                      tmp: str = "t5"):
        self.op(f"addi {counter}, {counter}, 1", cat="loop")
        self.op(f"slt {tmp}, {counter}, {bound_reg}", cat="loop")
        self.op(f"bne {tmp}, zero, {head}")

    def sw_close_imm(self, head: str, counter: str, bound: int,
                     tmp: str = "t5"):
        if not 0 < bound < 2048:
            raise BuildError(f"immediate loop bound {bound} out of range")
        self.op(f"addi {counter}, {counter}, 1", cat="loop")
        self.op(f"slti {tmp}, {counter}, {bound}", cat="loop")
        self.op(f"bne {tmp}, zero, {head}")

    def step_ptr(self, reg: str, delta: int, cat: str = "mem"):
        if not -2048 <= delta < 2048:
            raise BuildError(f"pointer step {delta} exceeds the immediate "
                             "range; shrink the grid")
        self.op(f"addi {reg}, {reg}, {delta}", cat)

    # -- per-element bounds guard ---------------------------------------

    def guard_open(self, idx: str, limit: str, else_reg: str, tmp: str = "t4"):
        self.op(f"slt {tmp}, {idx}, {limit}", cat="pred")
        self.op(f"split {tmp}, {else_reg}")

    def guard_close(self, else_label: str):
        self.op("join")
        self.label(else_label)
        self.op("join")

    # -- stream CSR sequences -------------------------------------------

    def stream_shape(self, unit: int, mapped_reg: int, space: int, mode: int,
                     length: int, stride: int, prefetch: bool = True,
                     tmp: str = "t0"):
        """Configure everything but the base: cfg word, length, stride."""
        if not self.streams:
            raise BuildError("stream CSRs written without the stream extension")
        word = csr.pack_stream_cfg(mapped_reg, space, elem_log2=2,
                                   prefetch=prefetch, redirect=True, mode=mode)
        self.li(tmp, word)
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_CFG):#x}, {tmp}")
        self.li(tmp, length)
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_LEN):#x}, {tmp}")
        self.li(tmp, stride)
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_STRIDE):#x}, {tmp}")

    def stream_len(self, unit: int, reg: str):
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_LEN):#x}, {reg}")

    def stream_base(self, unit: int, reg: str):
        """Arm the unit; reg may hold per-lane addresses."""
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_BASE):#x}, {reg}")

    def stream_off(self, unit: int, tmp: str = "t0"):
        word = csr.pack_stream_cfg(0, csr.SPACE_FP, mode=csr.MODE_READ,
                                   redirect=False)
        self.li(tmp, word)
        self.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_CFG):#x}, {tmp}")

    # -- assembly + lint -------------------------------------------------

    def source(self) -> str:
        return "\n".join(self.lines) + "\n"

    def assemble(self) -> Program:
        prog = assemble(self.source())
        self._lint_loops(prog)
        return prog

    def _lint_loops(self, prog: Program):
        """Overlapping loop spans must nest strictly (outer level below
        inner, distinct end PCs); disjoint spans may sit on any levels."""
        for group in self._loops:
            spans = []
            for decl in group:
                start = prog.symbols[decl.start]
                end = prog.symbols[decl.end]
                if end < start:
                    raise BuildError(
                        f"loop level {decl.level} ends before it starts")
                spans.append((decl.level, start, end))
            for i, (la, sa, ea) in enumerate(spans):
                for lb, sb, eb in spans[i + 1:]:
                    if ea < sb or eb < sa:
                        continue
                    outer, inner = ((la, sa, ea), (lb, sb, eb))
                    if sb <= sa and ea <= eb:
                        outer, inner = inner, outer
                    lo, so, eo = outer
                    li_, si, ei = inner
                    if not (so <= si and ei < eo and lo < li_):
                        raise BuildError(
                            f"loop levels {la} and {lb} overlap without "
                            "proper nesting")


@dataclass
class Check:
    """One output buffer comparison; exact bit equality is required.

    When rows is set the stored buffer is row-padded: each of the rows
    occupies row_stride words in memory but only expect.shape[-1] of them
    are live, and expect is compared against the live prefix of each row.
    """

    name: str
    addr: int
    expect: np.ndarray
    rows: int | None = None
    row_stride: int | None = None

    def extract(self, words: np.ndarray) -> np.ndarray:
        """Pick the live words out of a raw readback of the region."""
        if self.rows is None:
            return words[:self.expect.size]
        live = self.expect.size // self.rows
        rect = words[:self.rows * self.row_stride]
        rect = rect.reshape(self.rows, self.row_stride)
        return rect[:, :live].reshape(-1)

    @property
    def span_words(self) -> int:
        if self.rows is None:
            return self.expect.size
        return self.rows * self.row_stride


@dataclass
class KernelImage:
    name: str
    variant: str
    point: int
    source: str
    program: Program
    inputs: list[tuple[int, np.ndarray]] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    def input_bytes(self):
        for addr, arr in self.inputs:
            yield addr, np.ascontiguousarray(arr).tobytes()


def lane_lengths_op(p: Prog, dst: str, grid: Grid, tmp: str = "t3"):
    """Per-lane remainder stream length: rem_bound for lanes below the tail,
    rem_bound-1 for the rest.  Uses s1 (tid)."""
    p.li(tmp, grid.rem_tail)
    p.op(f"slt {dst}, s1, {tmp}")
    p.li(tmp, grid.rem_bound - 1)
    p.op(f"add {dst}, {dst}, {tmp}")


def lane_ptr(p: Prog, reg: str, addr: int, extra: int = 0):
    """reg = addr + extra + per-lane offset s2."""
    p.li(reg, addr + extra)
    p.op(f"add {reg}, {reg}, s2")


def variant_name(ext) -> str:
    from ..config import VARIANTS
    for vname, vext in VARIANTS.items():
        if vext == ext:
            return vname
    return "+".join(sorted(ext)) or "base"
