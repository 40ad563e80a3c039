"""Core pipeline: SIMT execution, divergence, warps, timing basics."""

import pytest

from warpsim import fp32
from warpsim.errors import DeadlockError, SimulationError
from helpers import run_program, small_cfg, xreg, freg


def test_basic_arithmetic():
    core = run_program("""
        li t0, 5
        addi t1, t0, 7
        slli t2, t1, 2
        sub t3, t2, t0
        halt
    """)
    assert xreg(core, 0, "t1") == [12] * 4
    assert xreg(core, 0, "t2") == [48] * 4
    assert xreg(core, 0, "t3") == [43] * 4


def test_tid_is_per_lane():
    core = run_program("""
        csrrs t0, tid, zero
        csrrs t1, ntid, zero
        csrrs t2, wid, zero
        halt
    """)
    assert xreg(core, 0, "t0") == [0, 1, 2, 3]
    assert xreg(core, 0, "t1") == [4] * 4
    assert xreg(core, 0, "t2") == [0] * 4


def test_store_load_per_lane():
    core = run_program("""
        csrrs t0, tid, zero
        slli t1, t0, 2
        li t2, 0x1000
        add t1, t1, t2
        addi t3, t0, 100
        sw t3, 0(t1)
        lw t4, 0(t1)
        halt
    """)
    assert xreg(core, 0, "t4") == [100, 101, 102, 103]
    mem = core.msys.memory
    assert [mem.load(0x1000 + 4 * t) for t in range(4)] == [
        100, 101, 102, 103]


def test_tmc_partial_mask_and_restore():
    core = run_program("""
        csrrs t0, tid, zero
        slti t1, t0, 2          # lanes 0,1
        li s0, 1
        tmc t1
        addi s1, zero, 7        # only lanes 0,1
        tmc s0                  # all lanes back on
        addi s2, zero, 9
        halt
    """)
    assert xreg(core, 0, "s1") == [7, 7, 0, 0]
    assert xreg(core, 0, "s2") == [9] * 4


def test_tmc_zero_retires_warp():
    core = run_program("""
        addi s0, zero, 3
        tmc zero
        addi s0, zero, 99       # must never execute
    """)
    assert xreg(core, 0, "s0") == [3] * 4
    assert core.warps[0].halted


def test_split_join_divergent():
    core = run_program("""
        csrrs t0, tid, zero
        slti t1, t0, 2
        la t2, else_side
        split t1, t2
        addi s0, zero, 1        # taken lanes (0,1)
        join
    else_side:
        addi s0, zero, 2        # remaining lanes (2,3)
        join
        addi s1, zero, 5        # all lanes reconverged
        halt
    """)
    assert xreg(core, 0, "s0") == [1, 1, 2, 2]
    assert xreg(core, 0, "s1") == [5] * 4
    assert core.warps[0].div_stack == []


def test_split_uniform_taken_skips_else_effects():
    core = run_program("""
        li t1, 1
        la t2, else_side
        split t1, t2
        addi s0, zero, 1
        join
    else_side:
        addi s1, zero, 2        # runs with an empty mask: no effect
        join
        halt
    """)
    assert xreg(core, 0, "s0") == [1] * 4
    assert xreg(core, 0, "s1") == [0] * 4


def test_nested_split():
    core = run_program("""
        csrrs t0, tid, zero
        slti t1, t0, 3          # lanes 0,1,2
        slti t2, t0, 1          # lane 0
        la t3, outer_else
        la t4, inner_else
        split t1, t3
        split t2, t4
        addi s0, zero, 10       # lane 0
        join
    inner_else:
        addi s0, zero, 20       # lanes 1,2
        join
        join
    outer_else:
        addi s0, zero, 30       # lane 3
        join
        halt
    """)
    assert xreg(core, 0, "s0") == [10, 20, 20, 30]


def test_divergent_branch_rejected():
    with pytest.raises(SimulationError):
        run_program("""
            csrrs t0, tid, zero
            beq t0, zero, skip
            addi s0, zero, 1
        skip:
            halt
        """)


def test_countdown_loop():
    core = run_program("""
        li t0, 10
        li s0, 0
    loop:
        add s0, s0, t0
        addi t0, t0, -1
        bne t0, zero, loop
        halt
    """)
    assert xreg(core, 0, "s0") == [55] * 4


def test_wspawn_and_barrier():
    core = run_program("""
        csrrs t2, wid, zero
        bne t2, zero, work      # spawned warps skip the spawn
        li t0, 2
        la t1, work
        wspawn t0, t1
    work:
        csrrs t2, wid, zero
        slli t3, t2, 2
        li t4, 0x1800
        add t3, t3, t4
        addi t5, t2, 40
        sw t5, 0(t3)
        li a0, 1
        li a1, 2
        bar a0, a1
        halt
    """)
    mem = core.msys.memory
    assert mem.load(0x1800) == 40
    assert mem.load(0x1804) == 41
    assert all(w.halted for w in core.warps if w.active)


def test_barrier_mismatch_deadlocks():
    with pytest.raises(DeadlockError):
        run_program("""
            li a0, 1
            li a1, 2
            bar a0, a1          # nobody else ever arrives
            halt
        """, max_cycles=1_000_000)


def test_fp_roundtrip_and_arith():
    core = run_program("""
        la t0, vals
        flw ft0, 0(t0)
        flw ft1, 4(t0)
        fadd.s ft2, ft0, ft1
        fmul.s ft3, ft0, ft1
        fmadd.s ft4, ft0, ft1, ft2
        flt.s s0, ft1, ft0
        fmax.s ft5, ft0, ft1
        la t1, out
        fsw ft2, 0(t1)
        halt
        .data
    vals: .word 0x40490fdb, 0x402df854   # pi, e
    out:  .word 0
    """)
    pi = fp32.from_bits(0x40490FDB)
    e = fp32.from_bits(0x402DF854)
    s = fp32.fadd(pi, e)
    assert freg(core, 0, "ft2") == [s] * 4
    assert freg(core, 0, "ft3") == [fp32.fmul(pi, e)] * 4
    assert freg(core, 0, "ft4") == [fp32.fmadd(pi, e, s)] * 4
    assert xreg(core, 0, "s0") == [1] * 4
    assert freg(core, 0, "ft5") == [pi] * 4
    assert core.msys.memory.load_f32(core.program.symbols["out"]) == s


def test_fpu_latency_visible():
    dep = run_program("""
        fadd.s ft0, ft1, ft2
        fadd.s ft0, ft0, ft2
        fadd.s ft0, ft0, ft2
        fadd.s ft0, ft0, ft2
        halt
    """)
    indep = run_program("""
        fadd.s ft0, ft1, ft2
        fadd.s ft3, ft1, ft2
        fadd.s ft4, ft1, ft2
        fadd.s ft5, ft1, ft2
        halt
    """)
    assert dep.stats.cycles > indep.stats.cycles
    assert dep.stats.stall_depend > 0


def test_load_pays_cache_latency():
    core = run_program("""
        li t0, 0x1000
        lw t1, 0(t0)
        add t2, t1, t1          # depends on the load
        halt
    """)
    # one cold miss must cost at least the miss latency
    assert core.stats.cycles >= small_cfg().miss_latency
    assert core.stats.cache_misses >= 1


def test_stat_categories():
    core = run_program("""
        addi t0, zero, 1        #cat:loop
        addi t1, zero, 2        #cat:pred
        addi t2, zero, 3        #cat:mem
        addi t3, zero, 4
        halt
    """)
    st = core.stats
    assert st.instr_loop == 1
    assert st.instr_pred == 1
    assert st.instr_mem == 1
    assert st.instr_comp == 1
    assert st.instr_other == 1  # halt
    assert st.instrs == 5
