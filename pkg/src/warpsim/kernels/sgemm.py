"""Dense matrix multiply over a three-level loop nest.

Warp w owns rows w, w+W, ... of the output.  The middle loop walks column
chunks of T lanes; the inner loop is the dot product, one fused
multiply-add per step with the A element broadcast to all lanes and the B
element walking a column per lane.  The accumulator moves to the output
through a max with itself, which is the identity and keeps the write
stream's mapped register out of the dot loop.

Columns are padded up to a whole number of chunks so every lane computes
every chunk; the pad columns hold garbage and the result comparison reads
only the live part of each padded output row.  B gets tail slack so pad
lanes stay inside the buffer.
"""

from __future__ import annotations

import numpy as np

from .. import csr
from ..config import CoreConfig
from . import golden
from .common import Allocator, BuildError, KernelImage, Prog, Check, \
    variant_name
from .workloads import floats, rng_for


def build_sgemm(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    n = point
    W, T = cfg.warps, cfg.threads
    if n % W:
        raise BuildError(f"sgemm needs the warp count to divide n "
                         f"({W} does not divide {n})")
    rows_pw = n // W
    chunks = -(-n // T)
    cs = chunks * T                 # padded row length of C
    rng = rng_for(seed, "sgemm", point)
    a = floats(rng, n * n).reshape(n, n)
    b = floats(rng, n * n).reshape(n, n)

    p = Prog(cfg, ext)
    alloc = Allocator(cfg)
    ba = alloc.alloc("a", n * n)
    bb = alloc.alloc("b", n * n, slack=cs - n + 16)
    bc = alloc.alloc("c", n * cs, slack=16)
    expect = golden.sgemm(a, b)

    row_h, row_e = "row_h", "row_e"
    chk_h, chk_e = "chk_h", "chk_e"
    dot = "dot"
    if p.hw_loops:
        p.configure_loop(0, row_h, row_e, rows_pw)
        p.configure_loop(1, chk_h, chk_e, chunks)
        p.configure_loop(2, dot, dot if p.streams else "dot_e", n)
    grid_spawn = W
    if grid_spawn > 1:
        p.li("t0", grid_spawn)
        p.op("la t1, entry")
        p.op("wspawn t0, t1")
    p.label("entry")
    p.prolog()

    # a5 = per-lane B column base, s10 = per-lane C row base, both lane t;
    # s4 walks A row bases (uniform per warp), pre-stepped one row back
    p.op("slli t2, s1, 2")
    p.li("a5", bb.addr)
    p.op("add a5, a5, t2")
    p.li("s10", bc.addr)
    p.op("add s10, s10, t2")
    p.mul_const("t0", "s0", 4 * cs)
    p.op("add s10, s10, t0")
    p.li("s7", 4 * n * W)
    p.li("s4", ba.addr - 4 * n * W)
    p.mul_const("t0", "s0", 4 * n)
    p.op("add s4, s4, t0")
    p.li("s11", 4 * cs * W)

    if p.streams:
        p.stream_shape(0, 0, csr.SPACE_FP, csr.MODE_READ, n, 4)
        p.stream_shape(1, 1, csr.SPACE_FP, csr.MODE_READ, n, 4 * n)
        p.stream_shape(2, 4, csr.SPACE_FP, csr.MODE_WRITE, chunks, 4 * T)

        p.label(row_h)
        p.op("add s4, s4, s7", cat="mem")
        p.stream_base(2, "s10")
        p.op("mv s6, a5", cat="mem")
        p.label(chk_h)
        p.stream_base(0, "s4")
        p.stream_base(1, "s6")
        p.step_ptr("s6", 4 * T)
        p.op("fsub.s f2, f2, f2")
        p.label(dot)
        p.op("fmadd.s f2, f0, f1, f2")
        p.label(chk_e)
        p.op("fmax.s f4, f2, f2")
        p.label(row_e)
        p.op("add s10, s10, s11", cat="mem")
    else:
        p.li("s8", 4 * n)
        if not p.hw_loops:
            p.li("a3", 0, cat="loop")
        p.label(row_h)
        p.op("add s4, s4, s7", cat="mem")
        p.op("mv s6, a5", cat="mem")
        p.li("a4", 0, cat="comp")
        if not p.hw_loops:
            p.li("a2", 0, cat="loop")
        p.label(chk_h)
        p.op("mv s3, s4", cat="mem")
        p.op("mv s5, s6", cat="mem")
        p.step_ptr("s6", 4 * T)
        p.op("fsub.s f2, f2, f2")
        if not p.hw_loops:
            p.li("a0", 0, cat="loop")
        p.label(dot)
        p.op("flw f0, 0(s3)")
        p.step_ptr("s3", 4)
        p.op("flw f1, 0(s5)")
        p.op("add s5, s5, s8", cat="mem")
        p.label("dot_e")
        p.op("fmadd.s f2, f0, f1, f2")
        if not p.hw_loops:
            p.sw_close_imm(dot, "a0", n)
        p.op("fmax.s f4, f2, f2")
        p.op("add s9, s10, a4", cat="mem")
        p.op("fsw f4, 0(s9)")
        p.label(chk_e)
        p.step_ptr("a4", 4 * T, cat="mem")
        if not p.hw_loops:
            p.sw_close_imm(chk_h, "a2", chunks)
        p.label(row_e)
        p.op("add s10, s10, s11", cat="mem")
        if not p.hw_loops:
            p.sw_close_imm(row_h, "a3", rows_pw)
    p.op("halt")

    prog = p.assemble()
    img = KernelImage("sgemm", variant_name(ext), point, p.source(), prog,
                      [(ba.addr, a.reshape(-1)), (bb.addr, b.reshape(-1))],
                      [Check("c", bc.addr, expect, rows=n, row_stride=cs)])
    return img
