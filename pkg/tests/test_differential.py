"""SIMT core vs per-thread scalar execution on divergent kernels.

Each program is run once through the full core (one warp, all threads) and
once per thread through the scalar executor. Architectural state must agree
thread by thread, whatever the divergence stack did along the way.
"""

import pytest

from warpsim.asm import assemble
from warpsim.config import CoreConfig, VARIANTS
from warpsim.core import Core
from scalar_ref import run_scalar

T = 8
CFG = CoreConfig(warps=1, threads=T)


def run_both(src):
    prog = assemble(src)
    core = Core(CFG, prog, VARIANTS["base"])
    core.run(max_cycles=500_000)
    threads, mem = run_scalar(prog, T)
    return core, threads, mem


def assert_regs_match(core, threads, skip=()):
    w = core.warps[0]
    for t, th in enumerate(threads):
        for r in range(1, 32):
            if r in skip:
                continue
            assert w.regs[r][t] == th.x[r], \
                f"thread {t} x{r}: core {w.regs[r][t]:#x} scalar {th.x[r]:#x}"
        for r in range(32):
            assert w.fregs[r][t] == pytest.approx(th.f[r]), \
                f"thread {t} f{r}"


def assert_mem_match(core, mem, lo, hi):
    got = core.msys.memory.data[lo:hi]
    assert bytes(got) == bytes(mem[lo:hi])


EVEN_ODD = """
    csrrs t0, 0xCC0, zero        # tid
    andi t1, t0, 1
    la t2, odd
    split t1, t2                 # odd threads take the else arm
    slli t3, t0, 2
    addi t3, t3, 100             # even: 4*tid + 100
    j tail
odd:
    slli t3, t0, 1
    addi t3, t3, 7               # odd: 2*tid + 7
tail:
    join
    slli t4, t0, 2
    li t5, 0x3000
    add t4, t4, t5
    sw t3, 0(t4)
    halt
"""


NESTED = """
    csrrs a0, 0xCC0, zero
    andi a1, a0, 1
    la t0, outer_else
    split a1, t0
    # odd-bit clear side: nest on bit 1
    andi a2, a0, 2
    la t1, inner_else
    split a2, t1
    addi s0, s0, 11
    j inner_tail
inner_else:
    addi s0, s0, 22
inner_tail:
    join
    addi s0, s0, 1
    j outer_tail
outer_else:
    slli s0, a0, 3
    addi s0, s0, 33
outer_tail:
    join
    add s1, s0, a0
    halt
"""


RETIRE_LOWER = """
    csrrs t0, 0xCC0, zero
    slli s2, t0, 1               # everybody computes something first
    slti t1, t0, 4               # keep only threads 0..3
    tmc t1
    addi s2, s2, 100             # survivors only
    halt
"""


UNIFORM_LOOP_DIVERGENT_BODY = """
    csrrs a0, 0xCC0, zero
    li s0, 0
    li t0, 6                     # uniform trip count
loop:
    and t1, s0, a0
    andi t1, t1, 1
    la t2, skip
    split t1, t2
    add s1, s1, a0               # taken when (iter & tid) is odd... inverted
    j merge
skip:
    addi s1, s1, 1
merge:
    join
    addi s0, s0, 1
    bne s0, t0, loop
    halt
"""


ABS_DIFF = """
    csrrs a0, 0xCC0, zero
    li t0, 4
    sub a1, a0, t0               # tid - 4, negative for low threads
    slt t1, a1, zero
    la t2, keep
    split t1, t2
    sub a1, zero, a1             # negate the negative ones
keep:
    join
    slli t3, a0, 2
    li t4, 0x3400
    add t3, t3, t4
    sw a1, 0(t3)
    halt
"""


@pytest.mark.parametrize("src,mem_range", [
    (EVEN_ODD, (0x3000, 0x3000 + 4 * T)),
    (NESTED, None),
    (RETIRE_LOWER, None),
    (UNIFORM_LOOP_DIVERGENT_BODY, None),
    (ABS_DIFF, (0x3400, 0x3400 + 4 * T)),
], ids=["even_odd", "nested", "retire", "loop_divergent", "abs_diff"])
def test_core_matches_scalar(src, mem_range):
    core, threads, mem = run_both(src)
    assert_regs_match(core, threads)
    if mem_range:
        assert_mem_match(core, mem, *mem_range)
