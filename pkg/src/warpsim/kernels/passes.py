"""Kernels built from repeated passes over an element grid.

A pass kernel sweeps the element grid once per pass, with a scalar operand
(matrix column scale, filter tap, convolution weight) loaded fresh each
pass and the input window shifted by a per-pass delta.  The output array
accumulates in memory across passes, which the stream variant expresses as
a read-write stream re-armed at each pass head.

Four benchmarks share the emitter:

  sgemv   column passes over a column-major matrix, y += A[:, k] * x[k]
  sfilter five taps of a circular 1-D stencil
  conv2d  72 passes (9 taps x 8 input channels) of a flat-circular 3x3
          convolution over channels-first planes, output padded to whole
          rounds so there is no remainder phase
  knn     distance phase: one pass per coordinate accumulating
          (ref - q) * (q - ref), then a separate max-reduce phase
"""

from __future__ import annotations

import numpy as np

from .. import csr
from ..config import CoreConfig
from . import golden
from .common import Allocator, BuildError, Grid, KernelImage, Prog, Check, \
    lane_lengths_op, lane_ptr, plan_grid, variant_name
from .workloads import KNN_DIMS, floats, rng_for

F32 = np.float32


class PassPlan:
    """Geometry and operand layout for one pass kernel."""

    def __init__(self, grid: Grid, passes: int, in_base: int, out_base: int,
                 scalar_base: int, delta, n_live: int):
        self.grid = grid
        self.passes = passes
        self.in_base = in_base
        self.out_base = out_base
        self.scalar_base = scalar_base
        self.delta = delta          # ("const", step) or ("table", label)
        self.n_live = n_live        # guard limit for the software variants


def _phase_regs(p: Prog, plan: PassPlan, phase: str):
    """Initialise the per-phase register file before the pass loop."""
    grid = plan.grid
    off = 0 if phase == "main" else 4 * grid.main
    bound = grid.k_main if phase == "main" else grid.rem_bound
    estep = grid.block if phase == "main" else grid.threads

    kind, step = plan.delta[0], plan.delta[1]
    init_off = -step if kind == "const" else 0
    lane_ptr(p, "s4", plan.in_base, off + init_off)
    if kind == "table":
        p.op(f"la s8, {step}")
    elif not -2048 <= step < 2048:
        p.li("a7", step)
    p.li("s9", plan.scalar_base)

    if p.streams:
        mode_in, mode_out = csr.MODE_READ, csr.MODE_RW
        if phase == "main":
            p.stream_shape(0, 0, csr.SPACE_FP, mode_in, bound, 4 * estep)
            p.stream_shape(1, 1, csr.SPACE_FP, mode_out, bound, 4 * estep)
        else:
            for unit, mode in ((0, mode_in), (1, mode_out)):
                word = csr.pack_stream_cfg(unit, csr.SPACE_FP, mode=mode)
                p.li("t0", word)
                p.op(f"csrrw zero, "
                     f"{csr.stream_csr(unit, csr.STREAM_CFG):#x}, t0")
                lane_lengths_op(p, "t2", grid)
                p.stream_len(unit, "t2")
                p.li("t0", 4 * estep)
                p.op(f"csrrw zero, "
                     f"{csr.stream_csr(unit, csr.STREAM_STRIDE):#x}, t0")
        lane_ptr(p, "s5", plan.out_base, off)
        return

    lane_ptr(p, "s10", plan.out_base, off)
    if not p.lps:
        p.li("a5", plan.n_live)
        if phase == "main":
            p.op("srli s11, s2, 2")
        else:
            p.li("s11", grid.main)
            p.op("add s11, s11, s1")
    if not p.hw_loops:
        p.li("a1", bound)


def _emit_pass_kernel(p: Prog, plan: PassPlan, phase: str, body,
                      labels: tuple[str, str, str, str]):
    """One phase: the pass loop around the element loop."""
    grid = plan.grid
    bound = grid.k_main if phase == "main" else grid.rem_bound
    estep = grid.block if phase == "main" else grid.threads
    ph, pe, eh, ee = labels
    kind, step = plan.delta[0], plan.delta[1]
    guarded = not p.lps
    sw = not p.streams

    if sw and guarded:
        melse = p.fresh("skip")
        p.op(f"la s6, {melse}")
    if not p.hw_loops:
        p.li("a3", 0, cat="loop")

    p.label(ph)
    if kind == "table":
        p.op("lw t0, 0(s8)")
        p.step_ptr("s8", 4)
        p.op("add s4, s4, t0", cat="mem")
    elif -2048 <= step < 2048:
        p.step_ptr("s4", step)
    else:
        p.op("add s4, s4, a7", cat="mem")
    if p.streams:
        p.stream_base(0, "s4")
        p.stream_base(1, "s5")
    else:
        p.op("mv s3, s4", cat="mem")
        p.op("mv s5, s10", cat="mem")
        if guarded:
            p.op("mv a2, s11", cat="pred")
        if not p.hw_loops:
            p.sw_loop_open()
    p.op("flw f3, 0(s9)")

    p.label(eh)
    if sw:
        if guarded:
            p.guard_open("a2", "a5", "s6")
        p.op("flw f0, 0(s3)")
        p.op("flw f1, 0(s5)")
        body(p)
        p.op("fsw f1, 0(s5)")
        if guarded:
            p.guard_close(melse)
        p.step_ptr("s3", 4 * estep)
        if guarded:
            p.step_ptr("s5", 4 * estep)
            p.label(ee)
            p.op(f"addi a2, a2, {estep}", cat="pred")
        else:
            p.label(ee)
            p.step_ptr("s5", 4 * estep)
        if not p.hw_loops:
            p.sw_loop_close(eh, "a1")
    else:
        body(p)
        p.label_last(ee)

    p.label(pe)
    p.step_ptr("s9", 4)
    if not p.hw_loops:
        p.sw_close_imm(ph, "a3", plan.passes)


def _pass_labels(p: Prog, stem: str):
    return tuple(p.fresh(f"{stem}_{k}") for k in ("pass", "pend", "elem",
                                                  "eend"))


def _configure_pass_loops(p: Prog, plan: PassPlan, phase: str, labels):
    ph, pe, eh, ee = labels
    grid = plan.grid
    if phase == "main":
        p.configure_loop(0, ph, pe, plan.passes)
        p.configure_loop(1, eh, ee, grid.k_main)
    else:
        p.configure_loop(0, ph, pe, plan.passes)
        p.configure_loop(1, eh, ee, grid.rem_bound,
                         tail_mask=grid.rem_mask)


def build_pass_kernel(name: str, cfg: CoreConfig, ext, point: int, seed: int,
                      plan_fn, body) -> KernelImage:
    """plan_fn(alloc, grid) -> (plan, inputs, checks, data_lines)."""
    grid = plan_grid_for(name, point, cfg)
    p = Prog(cfg, ext)
    alloc = Allocator(cfg)
    plan, inputs, checks, data_lines = plan_fn(alloc, grid)

    main_lbls = _pass_labels(p, "m")
    if p.hw_loops and grid.k_main:
        _configure_pass_loops(p, plan, "main", main_lbls)
    p.spawn(grid, "entry")
    p.prolog()

    if grid.k_main:
        _phase_regs(p, plan, "main")
        _emit_pass_kernel(p, plan, "main", body, main_lbls)
    p.barrier(1, grid.spawn)

    if grid.rem:
        done = p.fresh("done")
        if grid.spawn > 1:
            p.workers_done(done)
        p.loop_group()
        rem_lbls = _pass_labels(p, "r")
        if p.hw_loops:
            _configure_pass_loops(p, plan, "rem", rem_lbls)
        _phase_regs(p, plan, "rem")
        _emit_pass_kernel(p, plan, "rem", body, rem_lbls)
        if grid.spawn > 1:
            p.label(done)
    p.op("halt")
    for line in data_lines:
        p.raw(line)
    prog = p.assemble()
    return KernelImage(name, variant_name(ext), point, p.source(), prog,
                       inputs, checks)


def plan_grid_for(name: str, point: int, cfg: CoreConfig) -> Grid:
    if name == "conv2d":
        block = cfg.warps * cfg.threads
        padded = -(-point * point // block) * block
        return plan_grid(padded, cfg)
    return plan_grid(point, cfg)


SGEMV_COLS = 32


def build_sgemv(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    rows = point
    rng = rng_for(seed, "sgemv", point)
    a_cols = floats(rng, rows * SGEMV_COLS).reshape(rows, SGEMV_COLS,
                                                   order="F")
    x = floats(rng, SGEMV_COLS)

    def plan_fn(alloc, grid):
        ba = alloc.alloc("a", rows * SGEMV_COLS)
        bx = alloc.alloc("x", SGEMV_COLS)
        by = alloc.alloc("y", rows)
        plan = PassPlan(grid, SGEMV_COLS, ba.addr, by.addr, bx.addr,
                        ("const", 4 * rows), rows)
        expect = golden.sgemv_col(a_cols, x)
        inputs = [(ba.addr, a_cols.reshape(-1, order="F")), (bx.addr, x)]
        return plan, inputs, [Check("y", by.addr, expect)], []

    def body(p):
        p.op("fmadd.s f1, f0, f3, f1")

    return build_pass_kernel("sgemv", cfg, ext, point, seed, plan_fn, body)


SFILTER_TAPS = 5


def build_sfilter(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    n = point
    rng = rng_for(seed, "sfilter", point)
    x = floats(rng, n)
    w = floats(rng, SFILTER_TAPS)
    # extended input: x_ext[j] = x[(j - 2) mod n], so pass p reads at
    # offset p and covers tap offset p - 2
    x_ext = np.concatenate([x[-2:], x, x[:2]])

    def plan_fn(alloc, grid):
        bxe = alloc.alloc("x_ext", n + 4)
        bw = alloc.alloc("w", SFILTER_TAPS)
        bo = alloc.alloc("out", n)
        plan = PassPlan(grid, SFILTER_TAPS, bxe.addr, bo.addr, bw.addr,
                        ("const", 4), n)
        expect = golden.sfilter(x, w)
        inputs = [(bxe.addr, x_ext), (bw.addr, w)]
        return plan, inputs, [Check("out", bo.addr, expect)], []

    def body(p):
        p.op("fmadd.s f1, f0, f3, f1")

    return build_pass_kernel("sfilter", cfg, ext, point, seed, plan_fn, body)


CONV_CI = 8


def build_conv2d(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    n = point
    live = n * n
    rng = rng_for(seed, "conv2d", point)
    planes = floats(rng, CONV_CI * live).reshape(CONV_CI, live)
    w = floats(rng, 9 * CONV_CI).reshape(9, CONV_CI)

    block = cfg.warps * cfg.threads
    padded = -(-live // block) * block
    halo = n + 1
    # per-plane extent: circular halo on both ends plus the padded tail
    plane_store = padded + 2 * halo + 16

    def plan_fn(alloc, grid):
        bin_ = alloc.alloc("planes", CONV_CI * plane_store)
        bw = alloc.alloc("w", 9 * CONV_CI)
        bo = alloc.alloc("out", live, slack=padded - live + 16)

        ext_planes = np.empty((CONV_CI, plane_store), F32)
        for ci in range(CONV_CI):
            idx = (np.arange(plane_store) - halo) % live
            ext_planes[ci] = planes[ci, idx]

        deltas = []
        prev = 0
        tap = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                for ci in range(CONV_CI):
                    base = 4 * (ci * plane_store + halo + dy * n + dx)
                    deltas.append(base - prev)
                    prev = base
                    tap += 1
        lines = [".data", "conv_deltas:"]
        lines += [f"    .word {d & 0xFFFFFFFF:#x}" for d in deltas]

        plan = PassPlan(grid, 9 * CONV_CI, bin_.addr, bo.addr, bw.addr,
                        ("table", "conv_deltas"), live)
        expect = golden.conv2d(planes, w, n)
        inputs = [(bin_.addr, ext_planes), (bw.addr, w.reshape(-1))]
        return plan, inputs, [Check("out", bo.addr, expect)], lines

    def body(p):
        p.op("fmadd.s f1, f0, f3, f1")

    return build_pass_kernel("conv2d", cfg, ext, point, seed, plan_fn, body)
