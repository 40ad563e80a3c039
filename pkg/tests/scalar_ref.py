"""Per-thread scalar executor used to cross-check the SIMT core.

Runs one thread at a time on top of the independent rv32ref decoder, with
the warp-level operations read in their single-thread meaning: split is a
conditional jump to the else arm, join is a no-op, tmc with a zero
predicate retires the thread. That makes it a second opinion on divergence
handling: whatever the mask machinery does, each thread must see the same
architectural effects as running the program alone.

Only single-warp programs without barriers or spawns make sense here.
"""

import struct

from rv32ref import ref_decode

_F = struct.Struct("<f")


def _f32(x):
    return _F.unpack(_F.pack(x))[0]


def _u32(x):
    return x & 0xFFFFFFFF


def _s32(x):
    x &= 0xFFFFFFFF
    return x - (1 << 32) if x & 0x80000000 else x


class ScalarThread:
    def __init__(self, tid, nthreads, memory, text_base, words):
        self.tid = tid
        self.nthreads = nthreads
        self.mem = memory          # shared bytearray-backed dict of words
        self.base = text_base
        self.words = words
        self.x = [0] * 32
        self.f = [0.0] * 32
        self.pc = text_base
        self.halted = False

    def _load(self, addr):
        return int.from_bytes(self.mem[addr:addr + 4], "little")

    def _store(self, addr, value):
        self.mem[addr:addr + 4] = _u32(value).to_bytes(4, "little")

    def run(self, max_steps=100_000):
        for _ in range(max_steps):
            if self.halted:
                return
            idx = (self.pc - self.base) // 4
            if not 0 <= idx < len(self.words):
                raise AssertionError(f"scalar pc {self.pc:#x} out of text")
            name, f = ref_decode(self.words[idx])
            self.step(name, f)
        raise AssertionError("scalar thread ran away")

    def step(self, name, f):
        x, pc = self.x, self.pc
        nxt = pc + 4
        g = f.get
        if name == "addi":
            x[g("rd")] = _u32(x[g("rs1")] + g("imm"))
        elif name == "add":
            x[g("rd")] = _u32(x[g("rs1")] + x[g("rs2")])
        elif name == "sub":
            x[g("rd")] = _u32(x[g("rs1")] - x[g("rs2")])
        elif name == "and":
            x[g("rd")] = x[g("rs1")] & x[g("rs2")]
        elif name == "or":
            x[g("rd")] = x[g("rs1")] | x[g("rs2")]
        elif name == "xor":
            x[g("rd")] = x[g("rs1")] ^ x[g("rs2")]
        elif name == "andi":
            x[g("rd")] = x[g("rs1")] & _u32(g("imm"))
        elif name == "ori":
            x[g("rd")] = x[g("rs1")] | _u32(g("imm"))
        elif name == "xori":
            x[g("rd")] = x[g("rs1")] ^ _u32(g("imm"))
        elif name == "slti":
            x[g("rd")] = int(_s32(x[g("rs1")]) < g("imm"))
        elif name == "sltiu":
            x[g("rd")] = int(x[g("rs1")] < _u32(g("imm")))
        elif name == "slt":
            x[g("rd")] = int(_s32(x[g("rs1")]) < _s32(x[g("rs2")]))
        elif name == "sltu":
            x[g("rd")] = int(x[g("rs1")] < x[g("rs2")])
        elif name == "slli":
            x[g("rd")] = _u32(x[g("rs1")] << g("shamt"))
        elif name == "srli":
            x[g("rd")] = x[g("rs1")] >> g("shamt")
        elif name == "srai":
            x[g("rd")] = _u32(_s32(x[g("rs1")]) >> g("shamt"))
        elif name == "sll":
            x[g("rd")] = _u32(x[g("rs1")] << (x[g("rs2")] & 31))
        elif name == "srl":
            x[g("rd")] = x[g("rs1")] >> (x[g("rs2")] & 31)
        elif name == "sra":
            x[g("rd")] = _u32(_s32(x[g("rs1")]) >> (x[g("rs2")] & 31))
        elif name == "lui":
            x[g("rd")] = g("imm")
        elif name == "lw":
            x[g("rd")] = self._load(_u32(x[g("rs1")] + g("imm")))
        elif name == "sw":
            self._store(_u32(x[g("rs1")] + g("imm")), x[g("rs2")])
        elif name == "flw":
            self.f[g("rd")] = _F.unpack(
                _u32(self._load(_u32(x[g("rs1")] + g("imm"))))
                .to_bytes(4, "little"))[0]
        elif name == "fsw":
            self._store(_u32(x[g("rs1")] + g("imm")),
                        int.from_bytes(_F.pack(self.f[g("rs2")]), "little"))
        elif name == "fadd.s":
            self.f[g("rd")] = _f32(self.f[g("rs1")] + self.f[g("rs2")])
        elif name == "fsub.s":
            self.f[g("rd")] = _f32(self.f[g("rs1")] - self.f[g("rs2")])
        elif name == "fmul.s":
            self.f[g("rd")] = _f32(self.f[g("rs1")] * self.f[g("rs2")])
        elif name == "fmadd.s":
            self.f[g("rd")] = _f32(self.f[g("rs1")] * self.f[g("rs2")]
                                   + self.f[g("rs3")])
        elif name == "fmax.s":
            a, b = self.f[g("rs1")], self.f[g("rs2")]
            self.f[g("rd")] = b if b > a else a
        elif name == "flt.s":
            x[g("rd")] = int(self.f[g("rs1")] < self.f[g("rs2")])
        elif name == "beq":
            if x[g("rs1")] == x[g("rs2")]:
                nxt = pc + g("imm")
        elif name == "bne":
            if x[g("rs1")] != x[g("rs2")]:
                nxt = pc + g("imm")
        elif name == "blt":
            if _s32(x[g("rs1")]) < _s32(x[g("rs2")]):
                nxt = pc + g("imm")
        elif name == "bge":
            if _s32(x[g("rs1")]) >= _s32(x[g("rs2")]):
                nxt = pc + g("imm")
        elif name == "bltu":
            if x[g("rs1")] < x[g("rs2")]:
                nxt = pc + g("imm")
        elif name == "bgeu":
            if x[g("rs1")] >= x[g("rs2")]:
                nxt = pc + g("imm")
        elif name == "jal":
            x[g("rd")] = _u32(pc + 4)
            nxt = pc + g("imm")
        elif name == "jalr":
            x[g("rd")] = _u32(pc + 4)
            nxt = _u32(x[g("rs1")] + g("imm")) & ~1
        elif name in ("csrrs", "csrrw", "csrrc"):
            csr = g("csr")
            if csr == 0xCC0:
                val = self.tid
            elif csr == 0xCC1:
                val = 0
            elif csr == 0xCC2:
                val = self.nthreads
            elif csr == 0xCC3:
                val = 1
            else:
                raise AssertionError(f"scalar model has no csr {csr:#x}")
            x[g("rd")] = val
        elif name == "split":
            if x[g("rs1")] == 0:
                nxt = x[g("rs2")]    # this thread takes the else arm
        elif name == "join":
            pass
        elif name == "tmc":
            if x[g("rs1")] == 0:
                self.halted = True
        elif name == "halt":
            self.halted = True
        else:
            raise AssertionError(f"scalar model cannot run {name}")
        x[0] = 0
        self.pc = nxt


def run_scalar(program, nthreads, mem_size=4 << 20):
    """Execute every thread to completion; returns (threads, memory)."""
    mem = bytearray(mem_size)
    for addr, blob in program.data:
        mem[addr:addr + len(blob)] = blob
    threads = []
    for t in range(nthreads):
        th = ScalarThread(t, nthreads, mem, program.text_base, program.words)
        th.run()
        threads.append(th)
    return threads, mem
