"""Independent RV32IF decoder used as a test oracle.

Transcribed by hand from the standard mask/match encoding tables, written in
a different style from the package decoder on purpose (mask/match entries
plus standalone field extractors). Keep this file free of warpsim imports so
a bug there cannot leak in here.
"""


def _sx(v, bits):
    return v - (1 << bits) if v >> (bits - 1) & 1 else v


def _rd(w):
    return (w >> 7) & 31


def _rs1(w):
    return (w >> 15) & 31


def _rs2(w):
    return (w >> 20) & 31


def _rs3(w):
    return (w >> 27) & 31


def _imm_i(w):
    return _sx((w >> 20) & 0xFFF, 12)


def _imm_s(w):
    return _sx(((w >> 25) << 5 | (w >> 7) & 31) & 0xFFF, 12)


def _imm_b(w):
    v = ((w >> 31 & 1) << 12 | (w >> 7 & 1) << 11
         | (w >> 25 & 0x3F) << 5 | (w >> 8 & 0xF) << 1)
    return _sx(v, 13)


def _imm_u(w):
    return w & 0xFFFFF000


def _imm_j(w):
    v = ((w >> 31 & 1) << 20 | (w >> 12 & 0xFF) << 12
         | (w >> 20 & 1) << 11 | (w >> 21 & 0x3FF) << 1)
    return _sx(v, 21)


def _shamt(w):
    return (w >> 20) & 31


def _csr(w):
    return (w >> 20) & 0xFFF


# (mask, match, name, format); first match wins
_TABLE = [
    (0x0000007F, 0x00000037, "lui", "U"),
    (0x0000007F, 0x0000006F, "jal", "J"),
    (0x0000707F, 0x00000067, "jalr", "I"),
    (0x0000707F, 0x00000063, "beq", "B"),
    (0x0000707F, 0x00001063, "bne", "B"),
    (0x0000707F, 0x00004063, "blt", "B"),
    (0x0000707F, 0x00005063, "bge", "B"),
    (0x0000707F, 0x00006063, "bltu", "B"),
    (0x0000707F, 0x00007063, "bgeu", "B"),
    (0x0000707F, 0x00002003, "lw", "I"),
    (0x0000707F, 0x00002023, "sw", "S"),
    (0x0000707F, 0x00002007, "flw", "I"),
    (0x0000707F, 0x00002027, "fsw", "S"),
    (0x0000707F, 0x00000013, "addi", "I"),
    (0x0000707F, 0x00002013, "slti", "I"),
    (0x0000707F, 0x00003013, "sltiu", "I"),
    (0x0000707F, 0x00004013, "xori", "I"),
    (0x0000707F, 0x00006013, "ori", "I"),
    (0x0000707F, 0x00007013, "andi", "I"),
    (0xFE00707F, 0x00001013, "slli", "SH"),
    (0xFE00707F, 0x00005013, "srli", "SH"),
    (0xFE00707F, 0x40005013, "srai", "SH"),
    (0xFE00707F, 0x00000033, "add", "R"),
    (0xFE00707F, 0x40000033, "sub", "R"),
    (0xFE00707F, 0x00001033, "sll", "R"),
    (0xFE00707F, 0x00002033, "slt", "R"),
    (0xFE00707F, 0x00003033, "sltu", "R"),
    (0xFE00707F, 0x00004033, "xor", "R"),
    (0xFE00707F, 0x00005033, "srl", "R"),
    (0xFE00707F, 0x40005033, "sra", "R"),
    (0xFE00707F, 0x00006033, "or", "R"),
    (0xFE00707F, 0x00007033, "and", "R"),
    (0xFE00007F, 0x00000053, "fadd.s", "R"),
    (0xFE00007F, 0x08000053, "fsub.s", "R"),
    (0xFE00007F, 0x10000053, "fmul.s", "R"),
    (0xFE00707F, 0x28001053, "fmax.s", "R"),
    (0xFE00707F, 0xA0001053, "flt.s", "R"),
    (0x0600007F, 0x00000043, "fmadd.s", "R4"),
    (0x0000707F, 0x00001073, "csrrw", "CSR"),
    (0x0000707F, 0x00002073, "csrrs", "CSR"),
    (0x0000707F, 0x00003073, "csrrc", "CSR"),
    (0x0000707F, 0x00005073, "csrrwi", "CSR"),
    (0x0000707F, 0x00006073, "csrrsi", "CSR"),
    (0x0000707F, 0x00007073, "csrrci", "CSR"),
    (0xFE00707F, 0x0000000B, "tmc", "R"),
    (0xFE00707F, 0x0000100B, "wspawn", "R"),
    (0xFE00707F, 0x0000200B, "split", "R"),
    (0xFE00707F, 0x0000300B, "join", "R"),
    (0xFE00707F, 0x0000400B, "bar", "R"),
    (0xFE00707F, 0x0000500B, "halt", "R"),
]


def ref_decode(word):
    """Decode to (name, fields dict) or None if no table entry matches."""
    word &= 0xFFFFFFFF
    for mask, match, name, fmt in _TABLE:
        if word & mask != match:
            continue
        if fmt == "R":
            return name, {"rd": _rd(word), "rs1": _rs1(word),
                          "rs2": _rs2(word)}
        if fmt == "R4":
            return name, {"rd": _rd(word), "rs1": _rs1(word),
                          "rs2": _rs2(word), "rs3": _rs3(word)}
        if fmt == "I":
            return name, {"rd": _rd(word), "rs1": _rs1(word),
                          "imm": _imm_i(word)}
        if fmt == "SH":
            return name, {"rd": _rd(word), "rs1": _rs1(word),
                          "shamt": _shamt(word)}
        if fmt == "S":
            return name, {"rs1": _rs1(word), "rs2": _rs2(word),
                          "imm": _imm_s(word)}
        if fmt == "B":
            return name, {"rs1": _rs1(word), "rs2": _rs2(word),
                          "imm": _imm_b(word)}
        if fmt == "U":
            return name, {"rd": _rd(word), "imm": _imm_u(word)}
        if fmt == "J":
            return name, {"rd": _rd(word), "imm": _imm_j(word)}
        if fmt == "CSR":
            return name, {"rd": _rd(word), "rs1": _rs1(word),
                          "csr": _csr(word)}
        raise AssertionError(fmt)
    return None
