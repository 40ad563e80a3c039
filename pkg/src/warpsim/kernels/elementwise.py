"""Elementwise vector benchmarks: vecadd and saxpy.

These are the simplest members of the family and the reference for the
kernel structure used everywhere else.  The baseline hot loop spends most
of its instructions on bookkeeping: a bounds guard (compare, split, two
joins, index step), three pointer bumps, and a three-instruction software
loop close around a single arithmetic operation and its loads and store.
The hardware-loop variant deletes the close, the predication stack deletes
the guard, and the stream variant deletes the loads, store and pointer
bumps, leaving one arithmetic instruction per element round.
"""

from __future__ import annotations

import numpy as np

from .. import csr
from ..config import CoreConfig
from . import golden
from .common import Allocator, Grid, KernelImage, Prog, Check, plan_grid, \
    lane_lengths_op, lane_ptr, variant_name
from .workloads import floats, rng_for


def _phase_setup(p: Prog, grid: Grid, bufs, phase: str, n: int):
    """Pointers, strides and guard registers for one phase.

    Main phase: lane element i = k*block + wid*T + tid, stride block.
    Remainder: warp 0 only, i = main + k*T + tid, stride T."""
    if phase == "main":
        off, step = 0, grid.block
    else:
        off, step = 4 * grid.main, grid.threads
    for reg, buf in zip(("s3", "s4", "s5"), bufs):
        lane_ptr(p, reg, buf.addr, off)
    p.li("s7", 4 * step)
    if p.lps:
        return
    # guard state: a2 = element index, s8 = index step, s9 = limit
    p.li("s8", step)
    p.li("s9", n)
    if phase == "main":
        p.op("srli a2, s2, 2")
    else:
        p.li("a2", grid.main)
        p.op("add a2, a2, s1")


def _sw_body(p: Prog, head: str, end: str, bound: int, arith, nbufs: int):
    """Guarded load/compute/store loop for the non-stream variants."""
    guarded = not p.lps
    if guarded:
        melse = p.fresh("skip")
        p.op(f"la s6, {melse}")
    if not p.hw_loops:
        p.li("a1", bound)
        p.sw_loop_open()
    p.label(head)
    if guarded:
        p.guard_open("a2", "s9", "s6")
    p.op("flw f0, 0(s3)")
    if nbufs == 3:
        p.op("flw f1, 0(s4)")
    arith(p)
    p.op(f"fsw f2, 0(s{2 + nbufs})")
    if guarded:
        p.guard_close(melse)
    p.op("add s3, s3, s7", cat="mem")
    if nbufs == 3:
        p.op("add s4, s4, s7", cat="mem")
    if guarded:
        p.op(f"add s{2 + nbufs}, s{2 + nbufs}, s7", cat="mem")
        p.label(end)
        p.op("add a2, a2, s8", cat="pred")
    else:
        p.label(end)
        p.op(f"add s{2 + nbufs}, s{2 + nbufs}, s7", cat="mem")
    if not p.hw_loops:
        p.sw_loop_close(head, "a1")


def _stream_main(p: Prog, grid: Grid, bufs, modes, body, lbl: str):
    stride = 4 * grid.block
    for unit, (buf, mode) in enumerate(zip(bufs, modes)):
        p.stream_shape(unit, unit, csr.SPACE_FP, mode, grid.k_main, stride)
        lane_ptr(p, "t1", buf.addr)
        p.stream_base(unit, "t1")
    p.label(lbl)
    body(p)


def _stream_rem(p: Prog, grid: Grid, bufs, modes, body):
    stride = 4 * grid.threads
    for unit, (buf, mode) in enumerate(zip(bufs, modes)):
        word = csr.pack_stream_cfg(unit, csr.SPACE_FP, mode=mode)
        p.li("t0", word)
        p.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_CFG):#x}, t0")
        lane_lengths_op(p, "t2", grid)
        p.stream_len(unit, "t2")
        p.li("t0", stride)
        p.op(f"csrrw zero, {csr.stream_csr(unit, csr.STREAM_STRIDE):#x}, t0")
        lane_ptr(p, "t1", buf.addr, 4 * grid.main)
        p.stream_base(unit, "t1")
    lbl = p.fresh("rloop")
    p.configure_loop(0, lbl, lbl, grid.rem_bound, tail_mask=grid.rem_mask)
    p.label(lbl)
    body(p)


def _elementwise(name: str, cfg: CoreConfig, ext, point: int, seed: int,
                 preamble, stream_body, sw_arith, nbufs: int,
                 make_data) -> KernelImage:
    grid = plan_grid(point, cfg)
    p = Prog(cfg, ext)
    alloc = Allocator(cfg)
    inputs, checks, data_lines = make_data(alloc, grid)
    bufs = alloc.buffers
    modes = [csr.MODE_READ] * (nbufs - 1) + [csr.MODE_WRITE]

    mloop = f"{name}_mloop"
    mend = mloop if p.streams else f"{name}_mend"
    if p.hw_loops and grid.k_main:
        p.configure_loop(0, mloop, mend, grid.k_main)
    p.spawn(grid, "entry")
    p.prolog()
    preamble(p)

    if grid.k_main:
        if p.streams:
            _stream_main(p, grid, bufs, modes, stream_body, mloop)
        else:
            _phase_setup(p, grid, bufs, "main", grid.n)
            _sw_body(p, mloop, mend, grid.k_main, sw_arith, nbufs)
    p.barrier(1, grid.spawn)

    if grid.rem:
        done = p.fresh("done")
        if grid.spawn > 1:
            p.workers_done(done)
        p.loop_group()
        if p.streams:
            _stream_rem(p, grid, bufs, modes, stream_body)
        else:
            if p.hw_loops:
                rl = p.fresh("rloop")
                re = p.fresh("rend")
                p.configure_loop(0, rl, re, grid.rem_bound,
                                 tail_mask=grid.rem_mask)
            else:
                rl, re = p.fresh("rloop"), p.fresh("rend")
            _phase_setup(p, grid, bufs, "rem", grid.n)
            _sw_body(p, rl, re, grid.rem_bound, sw_arith, nbufs)
        if grid.spawn > 1:
            p.label(done)
    p.op("halt")
    for line in data_lines:
        p.raw(line)

    prog = p.assemble()
    return KernelImage(name, variant_name(ext), point, p.source(), prog,
                       inputs, checks)


def build_vecadd(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    rng = rng_for(seed, "vecadd", point)
    a = floats(rng, point)
    b = floats(rng, point)

    def make_data(alloc, grid):
        ba = alloc.alloc("a", point)
        bb = alloc.alloc("b", point)
        bc = alloc.alloc("c", point)
        expect = golden.vecadd(a, b)
        return ([(ba.addr, a), (bb.addr, b)],
                [Check("c", bc.addr, expect)], [])

    def stream_body(p):
        p.op("fadd.s f2, f0, f1")

    def sw_arith(p):
        p.op("fadd.s f2, f0, f1")

    return _elementwise("vecadd", cfg, ext, point, seed,
                        lambda p: None, stream_body, sw_arith, 3, make_data)


def build_saxpy(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    rng = rng_for(seed, "saxpy", point)
    scale = np.float32(rng.uniform(0.5, 2.0))
    x = floats(rng, point)
    y = floats(rng, point)

    def make_data(alloc, grid):
        bx = alloc.alloc("x", point)
        by = alloc.alloc("y", point)
        bz = alloc.alloc("z", point)
        expect = golden.saxpy(scale, x, y)
        data = [".data",
                f"scale_w: .word {int(scale.view(np.uint32)):#x}"]
        return ([(bx.addr, x), (by.addr, y)],
                [Check("z", bz.addr, expect)], data)

    def preamble(p):
        # the scalar lives in f3 for the whole kernel
        p.op("la t0, scale_w")
        p.op("flw f3, 0(t0)")

    def stream_body(p):
        p.op("fmadd.s f2, f0, f3, f1")

    def sw_arith(p):
        p.op("fmadd.s f2, f0, f3, f1")

    return _elementwise("saxpy", cfg, ext, point, seed,
                        preamble, stream_body, sw_arith, 3, make_data)
