"""Irregular-access kernels: nearest-neighbour scoring and graph aggregation.

knn runs two phases per region.  The distance phase is a pass kernel: one
pass per coordinate, accumulating (q - ref) * -(q - ref) into the negated
squared distance array.  The reduce phase then folds each lane's strip of
that array into a running max, seeded well below any reachable score, and
every participating lane stores its partial with the full mask, so a lane
with an empty strip stores the seed.  The reduce loop sits at hardware
loop level 2, leaving the distance phase's levels 0 and 1 untouched within
the same configuration scope.

gcn_aggr sums neighbour features over a fixed-degree adjacency list with a
vertex / feature / neighbour loop nest.  The gather address depends on a
loaded neighbour id, which no linear stream can express, so the benchmark
has no stream build and exists to show what loop hardware alone buys on
irregular access.
"""

from __future__ import annotations

import numpy as np

from .. import csr
from ..config import CoreConfig, EXT_STREAMS
from . import golden
from .common import Allocator, KernelImage, Prog, Check, UnsupportedVariant, \
    lane_lengths_op, lane_ptr, plan_grid, variant_name
from .passes import PassPlan, _emit_pass_kernel, _pass_labels, _phase_regs
from .workloads import GCN_DEGREE, GCN_FEATURES, KNN_DIMS, floats, \
    gcn_adjacency, rng_for


def _reduce_setup(p: Prog, nd_addr: int, grid, phase: str):
    """Point phase state at this region's strip of the score array."""
    off = 0 if phase == "main" else 4 * grid.main
    bound = grid.k_main if phase == "main" else grid.rem_bound
    estep = grid.block if phase == "main" else grid.threads

    p.op("la t0, knn_seed")
    p.op("flw f2, 0(t0)")
    if p.streams:
        if phase == "main":
            p.stream_shape(0, 0, csr.SPACE_FP, csr.MODE_READ, bound,
                           4 * estep)
        else:
            word = csr.pack_stream_cfg(0, csr.SPACE_FP, mode=csr.MODE_READ)
            p.li("t0", word)
            p.op(f"csrrw zero, {csr.stream_csr(0, csr.STREAM_CFG):#x}, t0")
            lane_lengths_op(p, "t2", grid)
            p.stream_len(0, "t2")
            p.li("t0", 4 * estep)
            p.op(f"csrrw zero, "
                 f"{csr.stream_csr(0, csr.STREAM_STRIDE):#x}, t0")
        lane_ptr(p, "s3", nd_addr, off)
        p.stream_base(0, "s3")
        return
    lane_ptr(p, "s3", nd_addr, off)
    if not p.lps:
        p.li("a5", grid.n)
        if phase == "main":
            p.op("srli a2, s2, 2", cat="pred")
        else:
            p.li("a2", grid.main, cat="pred")
            p.op("add a2, a2, s1", cat="pred")
    if not p.hw_loops:
        p.li("a1", bound)


def _emit_reduce(p: Prog, part_addr: int, part_off: int, grid, phase: str,
                 head: str, end: str):
    estep = grid.block if phase == "main" else grid.threads
    guarded = not p.streams and not p.lps
    if guarded:
        melse = p.fresh("rskip")
        p.op(f"la s6, {melse}")
    if not p.hw_loops:
        p.sw_loop_open()
    p.label(head)
    if p.streams:
        p.op("fmax.s f2, f2, f0")
    else:
        if guarded:
            p.guard_open("a2", "a5", "s6")
        p.op("flw f0, 0(s3)")
        p.op("fmax.s f2, f2, f0")
        if guarded:
            p.guard_close(melse)
            p.step_ptr("s3", 4 * estep)
            p.label(end)
            p.op(f"addi a2, a2, {estep}", cat="pred")
        else:
            p.label(end)
            p.step_ptr("s3", 4 * estep)
        if not p.hw_loops:
            p.sw_loop_close(head, "a1")
    p.li("t1", part_addr + part_off)
    p.op("add t1, t1, s2")
    p.op("fsw f2, 0(t1)")


def build_knn(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    n = point
    grid = plan_grid(n, cfg)
    rng = rng_for(seed, "knn", point)
    ref = floats(rng, KNN_DIMS * n).reshape(KNN_DIMS, n)
    q = floats(rng, KNN_DIMS)

    p = Prog(cfg, ext)
    alloc = Allocator(cfg)
    bref = alloc.alloc("ref", KNN_DIMS * n)
    bq = alloc.alloc("q", KNN_DIMS)
    bnd = alloc.alloc("neg", n)
    slots = ((grid.spawn * grid.threads if grid.k_main else 0)
             + (grid.threads if grid.rem else 0))
    bpart = alloc.alloc("part", slots)

    neg = golden.knn_negdist(ref, q)
    parts = golden.knn_partials(neg, grid, slots)
    plan = PassPlan(grid, KNN_DIMS, bref.addr, bnd.addr, bq.addr,
                    ("const", 4 * n), n)

    def body(p):
        p.op("fsub.s f4, f3, f0")
        p.op("fsub.s f5, f6, f4")
        p.op("fmadd.s f1, f4, f5, f1")

    main_lbls = _pass_labels(p, "m")
    red_m = (p.fresh("mred"), p.fresh("mrede"))
    if p.hw_loops and grid.k_main:
        p.configure_loop(0, main_lbls[0], main_lbls[1], plan.passes)
        p.configure_loop(1, main_lbls[2], main_lbls[3], grid.k_main)
        p.configure_loop(2, red_m[0],
                         red_m[0] if p.streams else red_m[1], grid.k_main)
    p.spawn(grid, "entry")
    p.prolog()
    p.op("fsub.s f6, f6, f6")

    if grid.k_main:
        _phase_regs(p, plan, "main")
        _emit_pass_kernel(p, plan, "main", body, main_lbls)
        _reduce_setup(p, bnd.addr, grid, "main")
        _emit_reduce(p, bpart.addr, 0, grid, "main", *red_m)
    p.barrier(1, grid.spawn)

    if grid.rem:
        done = p.fresh("done")
        if grid.spawn > 1:
            p.workers_done(done)
        p.loop_group()
        rem_lbls = _pass_labels(p, "r")
        red_r = (p.fresh("rred"), p.fresh("rrede"))
        if p.hw_loops:
            p.configure_loop(0, rem_lbls[0], rem_lbls[1], plan.passes)
            p.configure_loop(1, rem_lbls[2], rem_lbls[3], grid.rem_bound,
                             tail_mask=grid.rem_mask)
            p.configure_loop(2, red_r[0],
                             red_r[0] if p.streams else red_r[1],
                             grid.rem_bound, tail_mask=grid.rem_mask)
        _phase_regs(p, plan, "rem")
        _emit_pass_kernel(p, plan, "rem", body, rem_lbls)
        _reduce_setup(p, bnd.addr, grid, "rem")
        part_off = 4 * grid.spawn * grid.threads if grid.k_main else 0
        _emit_reduce(p, bpart.addr, part_off, grid, "rem", *red_r)
        if grid.spawn > 1:
            p.label(done)
    p.op("halt")
    seed_bits = np.float32(golden.KNN_ACC_INIT).view(np.uint32)
    p.raw(".data")
    p.raw("knn_seed:")
    p.raw(f"    .word {int(seed_bits):#010x}")

    prog = p.assemble()
    return KernelImage("knn", variant_name(ext), point, p.source(), prog,
                       [(bref.addr, ref.reshape(-1)), (bq.addr, q)],
                       [Check("neg", bnd.addr, neg),
                        Check("part", bpart.addr, parts)])


def _gcn_labels(p: Prog, stem: str):
    return tuple(p.fresh(f"{stem}{k}") for k in ("v", "ve", "f", "fe",
                                                 "nb", "nbe"))


def _gcn_configure(p: Prog, labels, grid, phase: str):
    hv, ev, hf, ef, hn, en = labels
    bound = grid.k_main if phase == "main" else grid.rem_bound
    tail = grid.rem_mask if phase == "rem" else None
    p.configure_loop(0, hv, ev, bound, tail_mask=tail)
    p.configure_loop(1, hf, ef, GCN_FEATURES)
    p.configure_loop(2, hn, en, GCN_DEGREE)


def _gcn_phase(p: Prog, phase: str, grid, labels, xf: int, adj: int,
               out: int):
    """One region of the vertex / feature / neighbour nest."""
    bound = grid.k_main if phase == "main" else grid.rem_bound
    vstep = grid.block if phase == "main" else grid.threads
    guarded = not p.lps
    hv, ev, hf, ef, hn, en = labels

    # s4 walks per-lane bases into the neighbour-major adjacency planes,
    # one pre-step back; s10 walks per-lane output vertex bases; s11 holds
    # the feature-plane origin; s8 is the shared plane stride (adjacency,
    # features, and output all advance 4n bytes per plane)
    off = 0 if phase == "main" else 4 * grid.main
    lane_ptr(p, "s4", adj, off - 4 * vstep)
    lane_ptr(p, "s10", out, off)
    p.li("s8", 4 * grid.n)
    p.li("s11", xf)
    if guarded:
        p.li("a5", grid.n)
        if phase == "main":
            p.op("srli a2, s2, 2", cat="pred")
        else:
            p.li("a2", grid.main, cat="pred")
            p.op("add a2, a2, s1", cat="pred")
        melse = p.fresh("skip")
        p.op(f"la s6, {melse}")
    if not p.hw_loops:
        p.sw_loop_open()

    # pointer walks run unguarded so live lanes stay on stride; the guard
    # only has to fence the gather and the store
    p.label(hv)
    p.step_ptr("s4", 4 * vstep)
    p.op("mv s5, s11", cat="mem")
    p.op("mv s9, s10", cat="mem")
    if guarded:
        p.guard_open("a2", "a5", "s6")
    if not p.hw_loops:
        p.li("a3", 0, cat="loop")
    p.label(hf)
    p.op("mv s3, s4", cat="mem")
    p.op("fsub.s f2, f2, f2")
    if not p.hw_loops:
        p.li("t3", 0, cat="loop")
    p.label(hn)
    p.op("lw t0, 0(s3)")
    p.op("add s3, s3, s8", cat="mem")
    p.op("slli t1, t0, 2", cat="comp")
    p.op("add t1, t1, s5", cat="comp")
    p.op("flw f0, 0(t1)")
    p.label(en)
    p.op("fadd.s f2, f2, f0")
    if not p.hw_loops:
        p.sw_close_imm(hn, "t3", GCN_DEGREE)
    p.op("fsw f2, 0(s9)")
    p.op("add s5, s5, s8", cat="mem")
    p.label(ef)
    p.op("add s9, s9, s8", cat="mem")
    if not p.hw_loops:
        p.sw_close_imm(hf, "a3", GCN_FEATURES)
    if guarded:
        p.guard_close(melse)
        p.op("add s10, s10, a1", cat="mem")
        p.label(ev)
        p.op(f"addi a2, a2, {vstep}", cat="pred")
    else:
        p.label(ev)
        p.op("add s10, s10, a1", cat="mem")
    if not p.hw_loops:
        p.sw_close_imm(hv, "a0", bound)


def build_gcn(cfg: CoreConfig, ext, point: int, seed: int) -> KernelImage:
    if EXT_STREAMS in ext:
        raise UnsupportedVariant(
            "gcn_aggr gathers through loaded neighbour ids, which the "
            "linear stream lanes cannot address")
    n = point
    grid = plan_grid(n, cfg)
    rng = rng_for(seed, "gcn_aggr", point)
    x = floats(rng, GCN_FEATURES * n).reshape(GCN_FEATURES, n)
    adj = gcn_adjacency(rng, n)

    p = Prog(cfg, ext)
    alloc = Allocator(cfg)
    bx = alloc.alloc("x", GCN_FEATURES * n)
    badj = alloc.alloc("adj", n * GCN_DEGREE)
    bout = alloc.alloc("out", GCN_FEATURES * n)
    expect = golden.gcn_aggregate(x, adj)

    main_lbls = _gcn_labels(p, "m")
    if p.hw_loops and grid.k_main:
        _gcn_configure(p, main_lbls, grid, "main")
    p.spawn(grid, "entry")
    p.prolog()
    if grid.k_main:
        p.li("a1", 4 * grid.block)
        _gcn_phase(p, "main", grid, main_lbls, bx.addr, badj.addr, bout.addr)
    p.barrier(1, grid.spawn)
    if grid.rem:
        done = p.fresh("done")
        if grid.spawn > 1:
            p.workers_done(done)
        p.loop_group()
        rem_lbls = _gcn_labels(p, "r")
        if p.hw_loops:
            _gcn_configure(p, rem_lbls, grid, "rem")
        p.li("a1", 4 * grid.threads)
        _gcn_phase(p, "rem", grid, rem_lbls, bx.addr, badj.addr, bout.addr)
        if grid.spawn > 1:
            p.label(done)
    p.op("halt")

    prog = p.assemble()
    # adjacency is stored neighbour-major: plane j holds neighbour j of
    # every vertex, so the id load coalesces to one line per warp
    return KernelImage("gcn_aggr", variant_name(ext), point, p.source(), prog,
                       [(bx.addr, x.reshape(-1)),
                        (badj.addr, adj.reshape(-1, order="F"))],
                       [Check("out", bout.addr, expect)])
