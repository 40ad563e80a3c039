"""Instruction set tables: encode, decode, disassemble, classify.

The machine is a 32-bit RISC-V SIMT core. Supported instructions:

  * an RV32I working subset: lui, jal, jalr, branches, lw/sw, the usual
    ALU reg/imm and reg/reg ops,
  * an RV32F working subset: flw, fsw, fadd.s, fsub.s, fmul.s, fmadd.s,
    flt.s, fmax.s,
  * Zicsr: csrrw/csrrs/csrrc and the immediate forms,
  * SIMT control ops on the custom-0 opcode (0x0B), funct3-selected:
    tmc, wspawn, split, join, bar, halt.

Every decoded instruction carries a default accounting category; kernels may
override it per line with a `#cat:` annotation (see asm.py). Categories feed
the instruction-mix counters used by the benchmark reports.
"""

from .errors import IllegalInstruction

# ---------------------------------------------------------------------------
# registers

XREG_NAMES = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2",
    "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7",
    "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
]

FREG_NAMES = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7",
    "fs0", "fs1", "fa0", "fa1", "fa2", "fa3", "fa4", "fa5",
    "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7",
    "fs8", "fs9", "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
]

XREGS = {name: i for i, name in enumerate(XREG_NAMES)}
XREGS.update({f"x{i}": i for i in range(32)})
XREGS["fp"] = 8

FREGS = {name: i for i, name in enumerate(FREG_NAMES)}
FREGS.update({f"f{i}": i for i in range(32)})

# ---------------------------------------------------------------------------
# categories and functional units

CAT_LOOP, CAT_PRED, CAT_MEM, CAT_COMP, CAT_OTHER = range(5)
CATEGORY_NAMES = ("loop", "pred", "mem", "comp", "other")
CATEGORIES = {name: i for i, name in enumerate(CATEGORY_NAMES)}

UNIT_ALU, UNIT_FPU, UNIT_LSU, UNIT_CSR = range(4)

# ---------------------------------------------------------------------------
# CSR address map (ISA-level facts; unit-level layout lives in csr.py)

CSR_EXT_FIRST = 0x800   # extension units: 8-bit sub-address above this
CSR_EXT_LAST = 0x8FF
CSR_TID = 0xCC0         # per-lane thread index
CSR_WID = 0xCC1         # warp index
CSR_NTID = 0xCC2        # threads per warp
CSR_NWID = 0xCC3        # warps per core

CSR_NAMES = {"tid": CSR_TID, "wid": CSR_WID, "ntid": CSR_NTID, "nwid": CSR_NWID}

# ---------------------------------------------------------------------------
# encoding table
#
# fmt  one of R, R4, I, SH (shift-imm), S, B, U, J, C (csr), CI (csr-imm)
# columns: fmt, opcode, funct3, funct7, unit, default category

_T = {
    # mnemonic      fmt opc   f3   f7    unit      cat
    "lui":         ("U", 0x37, None, None, UNIT_ALU, CAT_COMP),
    "jal":         ("J", 0x6F, None, None, UNIT_ALU, CAT_LOOP),
    "jalr":        ("I", 0x67, 0b000, None, UNIT_ALU, CAT_LOOP),

    "beq":         ("B", 0x63, 0b000, None, UNIT_ALU, CAT_LOOP),
    "bne":         ("B", 0x63, 0b001, None, UNIT_ALU, CAT_LOOP),
    "blt":         ("B", 0x63, 0b100, None, UNIT_ALU, CAT_LOOP),
    "bge":         ("B", 0x63, 0b101, None, UNIT_ALU, CAT_LOOP),
    "bltu":        ("B", 0x63, 0b110, None, UNIT_ALU, CAT_LOOP),
    "bgeu":        ("B", 0x63, 0b111, None, UNIT_ALU, CAT_LOOP),

    "lw":          ("I", 0x03, 0b010, None, UNIT_LSU, CAT_MEM),
    "sw":          ("S", 0x23, 0b010, None, UNIT_LSU, CAT_MEM),
    "flw":         ("I", 0x07, 0b010, None, UNIT_LSU, CAT_MEM),
    "fsw":         ("S", 0x27, 0b010, None, UNIT_LSU, CAT_MEM),

    "addi":        ("I", 0x13, 0b000, None, UNIT_ALU, CAT_COMP),
    "slti":        ("I", 0x13, 0b010, None, UNIT_ALU, CAT_COMP),
    "sltiu":       ("I", 0x13, 0b011, None, UNIT_ALU, CAT_COMP),
    "xori":        ("I", 0x13, 0b100, None, UNIT_ALU, CAT_COMP),
    "ori":         ("I", 0x13, 0b110, None, UNIT_ALU, CAT_COMP),
    "andi":        ("I", 0x13, 0b111, None, UNIT_ALU, CAT_COMP),
    "slli":        ("SH", 0x13, 0b001, 0x00, UNIT_ALU, CAT_COMP),
    "srli":        ("SH", 0x13, 0b101, 0x00, UNIT_ALU, CAT_COMP),
    "srai":        ("SH", 0x13, 0b101, 0x20, UNIT_ALU, CAT_COMP),

    "add":         ("R", 0x33, 0b000, 0x00, UNIT_ALU, CAT_COMP),
    "sub":         ("R", 0x33, 0b000, 0x20, UNIT_ALU, CAT_COMP),
    "sll":         ("R", 0x33, 0b001, 0x00, UNIT_ALU, CAT_COMP),
    "slt":         ("R", 0x33, 0b010, 0x00, UNIT_ALU, CAT_COMP),
    "sltu":        ("R", 0x33, 0b011, 0x00, UNIT_ALU, CAT_COMP),
    "xor":         ("R", 0x33, 0b100, 0x00, UNIT_ALU, CAT_COMP),
    "srl":         ("R", 0x33, 0b101, 0x00, UNIT_ALU, CAT_COMP),
    "sra":         ("R", 0x33, 0b101, 0x20, UNIT_ALU, CAT_COMP),
    "or":          ("R", 0x33, 0b110, 0x00, UNIT_ALU, CAT_COMP),
    "and":         ("R", 0x33, 0b111, 0x00, UNIT_ALU, CAT_COMP),

    "fadd.s":      ("R", 0x53, None, 0x00, UNIT_FPU, CAT_COMP),
    "fsub.s":      ("R", 0x53, None, 0x04, UNIT_FPU, CAT_COMP),
    "fmul.s":      ("R", 0x53, None, 0x08, UNIT_FPU, CAT_COMP),
    "fmax.s":      ("R", 0x53, 0b001, 0x14, UNIT_FPU, CAT_COMP),
    "flt.s":       ("R", 0x53, 0b001, 0x50, UNIT_FPU, CAT_COMP),
    "fmadd.s":     ("R4", 0x43, None, None, UNIT_FPU, CAT_COMP),

    "csrrw":       ("C", 0x73, 0b001, None, UNIT_CSR, CAT_OTHER),
    "csrrs":       ("C", 0x73, 0b010, None, UNIT_CSR, CAT_OTHER),
    "csrrc":       ("C", 0x73, 0b011, None, UNIT_CSR, CAT_OTHER),
    "csrrwi":      ("CI", 0x73, 0b101, None, UNIT_CSR, CAT_OTHER),
    "csrrsi":      ("CI", 0x73, 0b110, None, UNIT_CSR, CAT_OTHER),
    "csrrci":      ("CI", 0x73, 0b111, None, UNIT_CSR, CAT_OTHER),

    "tmc":         ("R", 0x0B, 0b000, 0x00, UNIT_ALU, CAT_PRED),
    "wspawn":      ("R", 0x0B, 0b001, 0x00, UNIT_ALU, CAT_OTHER),
    "split":       ("R", 0x0B, 0b010, 0x00, UNIT_ALU, CAT_PRED),
    "join":        ("R", 0x0B, 0b011, 0x00, UNIT_ALU, CAT_PRED),
    "bar":         ("R", 0x0B, 0b100, 0x00, UNIT_ALU, CAT_OTHER),
    "halt":        ("R", 0x0B, 0b101, 0x00, UNIT_ALU, CAT_OTHER),
}

# fetch must not run ahead of these: the resolved target or mode change
# decides what comes next for the issuing warp
_CONTROL = frozenset([
    "jal", "jalr", "beq", "bne", "blt", "bge", "bltu", "bgeu",
    "tmc", "wspawn", "split", "join", "bar", "halt",
])

_FP_RESULT = frozenset(["fadd.s", "fsub.s", "fmul.s", "fmadd.s", "fmax.s", "flw"])
_FLOP = frozenset(["fadd.s", "fsub.s", "fmul.s", "fmadd.s"])

# operand roles per mnemonic: which fields are read/written, and in which
# register space (0 = integer, 1 = fp). Drives the scoreboard and the
# stream-lane register redirect.
_X, _F = 0, 1


def _roles(op):
    """Return (srcs, dst): srcs is a tuple of (space, regfield) pairs where
    regfield is 'rs1'/'rs2'/'rs3', dst is (space, 'rd') or None."""
    if op in ("lui", "jal"):
        return (), (_X, "rd")
    if op == "jalr":
        return ((_X, "rs1"),), (_X, "rd")
    if op in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
        return ((_X, "rs1"), (_X, "rs2")), None
    if op == "lw":
        return ((_X, "rs1"),), (_X, "rd")
    if op == "flw":
        return ((_X, "rs1"),), (_F, "rd")
    if op == "sw":
        return ((_X, "rs1"), (_X, "rs2")), None
    if op == "fsw":
        return ((_X, "rs1"), (_F, "rs2")), None
    if op in ("addi", "slti", "sltiu", "xori", "ori", "andi",
              "slli", "srli", "srai"):
        return ((_X, "rs1"),), (_X, "rd")
    if op in ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra",
              "or", "and"):
        return ((_X, "rs1"), (_X, "rs2")), (_X, "rd")
    if op in ("fadd.s", "fsub.s", "fmul.s", "fmax.s"):
        return ((_F, "rs1"), (_F, "rs2")), (_F, "rd")
    if op == "flt.s":
        return ((_F, "rs1"), (_F, "rs2")), (_X, "rd")
    if op == "fmadd.s":
        return ((_F, "rs1"), (_F, "rs2"), (_F, "rs3")), (_F, "rd")
    if op in ("csrrw", "csrrs", "csrrc"):
        return ((_X, "rs1"),), (_X, "rd")
    if op in ("csrrwi", "csrrsi", "csrrci"):
        return (), (_X, "rd")
    if op == "tmc":
        return ((_X, "rs1"),), None
    if op in ("wspawn", "split", "bar"):
        return ((_X, "rs1"), (_X, "rs2")), None
    if op in ("join", "halt"):
        return (), None
    raise KeyError(op)


class Instr:
    """One decoded instruction plus issue metadata, immutable after decode."""

    __slots__ = ("word", "op", "rd", "rs1", "rs2", "rs3", "imm", "csr",
                 "unit", "cat", "is_control", "is_load", "is_store",
                 "flops", "fp_rd", "srcs", "dst", "writes_csr")

    def __init__(self, word, op, rd=0, rs1=0, rs2=0, rs3=0, imm=0):
        self.word = word
        self.op = op
        self.rd = rd
        self.rs1 = rs1
        self.rs2 = rs2
        self.rs3 = rs3
        self.imm = imm
        fmt, _, _, _, unit, cat = _T[op]
        self.unit = unit
        self.cat = cat
        self.is_load = op in ("lw", "flw")
        self.is_store = op in ("sw", "fsw")
        self.flops = 1 if op in _FLOP else 0
        self.fp_rd = op in _FP_RESULT
        self.csr = imm if fmt in ("C", "CI") else None
        # csrrs/c x0 (and zero-imm forms) are pure reads
        if fmt == "C":
            self.writes_csr = op == "csrrw" or rs1 != 0
        elif fmt == "CI":
            self.writes_csr = op == "csrrwi" or rs1 != 0
        else:
            self.writes_csr = False
        # extension-unit CSR writes reconfigure fetch behaviour, so the
        # issuing warp must not fetch past them
        self.is_control = op in _CONTROL or (
            self.writes_csr and CSR_EXT_FIRST <= imm <= CSR_EXT_LAST)
        srcs, dst = _roles(op)
        self.srcs = tuple(
            (space, getattr(self, field)) for space, field in srcs
            if not (space == _X and getattr(self, field) == 0))
        if dst is None:
            self.dst = None
        else:
            space, field = dst
            reg = getattr(self, field)
            self.dst = None if (space == _X and reg == 0) else (space, reg)

    def key(self):
        return (self.op, self.rd, self.rs1, self.rs2, self.rs3, self.imm)

    def __eq__(self, other):
        return isinstance(other, Instr) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"<Instr {disasm(self)}>"


# ---------------------------------------------------------------------------
# encode


def _chk(cond, msg):
    if not cond:
        raise ValueError(msg)


def encode(op, rd=0, rs1=0, rs2=0, rs3=0, imm=0):
    """Encode one instruction, returning the 32-bit word."""
    try:
        fmt, opc, f3, f7 = _T[op][:4]
    except KeyError:
        raise ValueError(f"unknown mnemonic {op!r}") from None
    for r in (rd, rs1, rs2, rs3):
        _chk(0 <= r <= 31, f"{op}: register index {r} out of range")
    if fmt == "R":
        return (f7 << 25 | rs2 << 20 | rs1 << 15 | (f3 or 0) << 12
                | rd << 7 | opc)
    if fmt == "R4":
        return (rs3 << 27 | rs2 << 20 | rs1 << 15 | rd << 7 | opc)
    if fmt == "I":
        _chk(-2048 <= imm <= 2047, f"{op}: immediate {imm} out of range")
        return ((imm & 0xFFF) << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opc)
    if fmt == "SH":
        _chk(0 <= imm <= 31, f"{op}: shift amount {imm} out of range")
        return (f7 << 25 | imm << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opc)
    if fmt == "S":
        _chk(-2048 <= imm <= 2047, f"{op}: immediate {imm} out of range")
        return (((imm >> 5) & 0x7F) << 25 | rs2 << 20 | rs1 << 15
                | f3 << 12 | (imm & 0x1F) << 7 | opc)
    if fmt == "B":
        _chk(-4096 <= imm <= 4094 and imm % 2 == 0,
             f"{op}: branch offset {imm} out of range")
        return (((imm >> 12) & 1) << 31 | ((imm >> 5) & 0x3F) << 25
                | rs2 << 20 | rs1 << 15 | f3 << 12
                | ((imm >> 1) & 0xF) << 8 | ((imm >> 11) & 1) << 7 | opc)
    if fmt == "U":
        _chk(0 <= imm <= 0xFFFFF, f"{op}: immediate {imm} out of range")
        return (imm << 12 | rd << 7 | opc)
    if fmt == "J":
        _chk(-(1 << 20) <= imm <= (1 << 20) - 2 and imm % 2 == 0,
             f"{op}: jump offset {imm} out of range")
        return (((imm >> 20) & 1) << 31 | ((imm >> 1) & 0x3FF) << 21
                | ((imm >> 11) & 1) << 20 | ((imm >> 12) & 0xFF) << 12
                | rd << 7 | opc)
    if fmt in ("C", "CI"):
        _chk(0 <= imm <= 0xFFF, f"{op}: csr address {imm:#x} out of range")
        _chk(fmt == "C" or 0 <= rs1 <= 31, f"{op}: zimm out of range")
        return (imm << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opc)
    raise AssertionError(fmt)


# ---------------------------------------------------------------------------
# decode


def _sext(v, bits):
    return v - (1 << bits) if v & (1 << (bits - 1)) else v


def _bad(word, why):
    raise IllegalInstruction(f"cannot decode {word:#010x}: {why}")


def decode(word):
    """Decode a 32-bit word into an Instr. Raises IllegalInstruction."""
    opc = word & 0x7F
    rd = (word >> 7) & 0x1F
    f3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    f7 = (word >> 25) & 0x7F

    if opc == 0x37:
        return Instr(word, "lui", rd=rd, imm=word >> 12)
    if opc == 0x6F:
        imm = (((word >> 31) & 1) << 20 | ((word >> 12) & 0xFF) << 12
               | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1)
        return Instr(word, "jal", rd=rd, imm=_sext(imm, 21))
    if opc == 0x67:
        if f3 != 0:
            _bad(word, "jalr funct3")
        return Instr(word, "jalr", rd=rd, rs1=rs1,
                     imm=_sext(word >> 20, 12))
    if opc == 0x63:
        names = {0b000: "beq", 0b001: "bne", 0b100: "blt",
                 0b101: "bge", 0b110: "bltu", 0b111: "bgeu"}
        if f3 not in names:
            _bad(word, "branch funct3")
        imm = (((word >> 31) & 1) << 12 | ((word >> 7) & 1) << 11
               | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1)
        return Instr(word, names[f3], rs1=rs1, rs2=rs2, imm=_sext(imm, 13))
    if opc in (0x03, 0x07):
        if f3 != 0b010:
            _bad(word, "load width")
        return Instr(word, "lw" if opc == 0x03 else "flw", rd=rd, rs1=rs1,
                     imm=_sext(word >> 20, 12))
    if opc in (0x23, 0x27):
        if f3 != 0b010:
            _bad(word, "store width")
        imm = ((word >> 25) & 0x7F) << 5 | ((word >> 7) & 0x1F)
        return Instr(word, "sw" if opc == 0x23 else "fsw", rs1=rs1, rs2=rs2,
                     imm=_sext(imm, 12))
    if opc == 0x13:
        if f3 == 0b001:
            if f7 != 0:
                _bad(word, "slli funct7")
            return Instr(word, "slli", rd=rd, rs1=rs1, imm=rs2)
        if f3 == 0b101:
            if f7 == 0x00:
                return Instr(word, "srli", rd=rd, rs1=rs1, imm=rs2)
            if f7 == 0x20:
                return Instr(word, "srai", rd=rd, rs1=rs1, imm=rs2)
            _bad(word, "shift funct7")
        names = {0b000: "addi", 0b010: "slti", 0b011: "sltiu",
                 0b100: "xori", 0b110: "ori", 0b111: "andi"}
        return Instr(word, names[f3], rd=rd, rs1=rs1,
                     imm=_sext(word >> 20, 12))
    if opc == 0x33:
        names = {(0x00, 0b000): "add", (0x20, 0b000): "sub",
                 (0x00, 0b001): "sll", (0x00, 0b010): "slt",
                 (0x00, 0b011): "sltu", (0x00, 0b100): "xor",
                 (0x00, 0b101): "srl", (0x20, 0b101): "sra",
                 (0x00, 0b110): "or", (0x00, 0b111): "and"}
        op = names.get((f7, f3))
        if op is None:
            _bad(word, "op funct")
        return Instr(word, op, rd=rd, rs1=rs1, rs2=rs2)
    if opc == 0x53:
        if f7 == 0x00:
            op = "fadd.s"
        elif f7 == 0x04:
            op = "fsub.s"
        elif f7 == 0x08:
            op = "fmul.s"
        elif f7 == 0x14 and f3 == 0b001:
            op = "fmax.s"
        elif f7 == 0x50 and f3 == 0b001:
            op = "flt.s"
        else:
            _bad(word, "fp funct")
        return Instr(word, op, rd=rd, rs1=rs1, rs2=rs2)
    if opc == 0x43:
        if (word >> 25) & 0x3 != 0:
            _bad(word, "fmadd fmt")
        return Instr(word, "fmadd.s", rd=rd, rs1=rs1, rs2=rs2,
                     rs3=(word >> 27) & 0x1F)
    if opc == 0x73:
        names = {0b001: "csrrw", 0b010: "csrrs", 0b011: "csrrc",
                 0b101: "csrrwi", 0b110: "csrrsi", 0b111: "csrrci"}
        if f3 not in names:
            _bad(word, "system funct3")
        return Instr(word, names[f3], rd=rd, rs1=rs1, imm=word >> 20)
    if opc == 0x0B:
        names = {0b000: "tmc", 0b001: "wspawn", 0b010: "split",
                 0b011: "join", 0b100: "bar", 0b101: "halt"}
        if f3 not in names or f7 != 0:
            _bad(word, "simt funct")
        return Instr(word, names[f3], rd=rd, rs1=rs1, rs2=rs2)
    _bad(word, "opcode")


# ---------------------------------------------------------------------------
# disassembly (debug traces and docs, not performance sensitive)


def _csr_str(addr):
    for name, a in CSR_NAMES.items():
        if a == addr:
            return name
    return f"{addr:#x}"


def disasm(ins):
    op = ins.op
    x, f = XREG_NAMES.__getitem__, FREG_NAMES.__getitem__
    fmt = _T[op][0]
    if op == "lui":
        return f"lui {x(ins.rd)}, {ins.imm:#x}"
    if op == "jal":
        return f"jal {x(ins.rd)}, {ins.imm}"
    if op == "jalr":
        return f"jalr {x(ins.rd)}, {ins.imm}({x(ins.rs1)})"
    if fmt == "B":
        return f"{op} {x(ins.rs1)}, {x(ins.rs2)}, {ins.imm}"
    if op in ("lw", "flw"):
        d = x(ins.rd) if op == "lw" else f(ins.rd)
        return f"{op} {d}, {ins.imm}({x(ins.rs1)})"
    if op in ("sw", "fsw"):
        s = x(ins.rs2) if op == "sw" else f(ins.rs2)
        return f"{op} {s}, {ins.imm}({x(ins.rs1)})"
    if fmt in ("I", "SH"):
        return f"{op} {x(ins.rd)}, {x(ins.rs1)}, {ins.imm}"
    if op == "fmadd.s":
        return (f"fmadd.s {f(ins.rd)}, {f(ins.rs1)}, {f(ins.rs2)}, "
                f"{f(ins.rs3)}")
    if op == "flt.s":
        return f"flt.s {x(ins.rd)}, {f(ins.rs1)}, {f(ins.rs2)}"
    if op in ("fadd.s", "fsub.s", "fmul.s", "fmax.s"):
        return f"{op} {f(ins.rd)}, {f(ins.rs1)}, {f(ins.rs2)}"
    if fmt == "C":
        return f"{op} {x(ins.rd)}, {_csr_str(ins.imm)}, {x(ins.rs1)}"
    if fmt == "CI":
        return f"{op} {x(ins.rd)}, {_csr_str(ins.imm)}, {ins.rs1}"
    if op == "tmc":
        return f"tmc {x(ins.rs1)}"
    if op in ("wspawn", "split", "bar"):
        return f"{op} {x(ins.rs1)}, {x(ins.rs2)}"
    if op in ("join", "halt"):
        return op
    if fmt == "R":
        return f"{op} {x(ins.rd)}, {x(ins.rs1)}, {x(ins.rs2)}"
    raise AssertionError(op)


MNEMONICS = tuple(_T)
