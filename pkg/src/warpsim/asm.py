"""Small two-pass assembler for kernel images.

Syntax, one item per line:

    label:  mnemonic op1, op2, ...   # comment
            .data [addr]             # switch to a data segment
            .word v, v, label, ...   # 32-bit values, symbols allowed
            .space n                 # n zero bytes
            .align k                 # pad to a 2^k boundary
            .text                    # back to instructions

Pseudo instructions: nop, mv, j, li (addi or lui+addi), la (lui+addi).
Loads and stores use the usual `off(reg)` operand. CSR operands accept hex,
decimal or the builtin names from isa.CSR_NAMES.

A trailing `#cat:loop|pred|mem|comp|other` overrides the instruction's
default accounting category, e.g. an address bump that exists only to feed
a load is tagged `#cat:mem`.
"""

from . import isa
from .errors import AsmError

DEFAULT_DATA_BASE = 0x2000


class Program:
    """Assembled kernel: decoded text image plus initialized data segments."""

    def __init__(self, text_base, words, instrs, cats, lines, data, symbols):
        self.text_base = text_base
        self.words = words          # raw encodings
        self.instrs = instrs        # decoded, index = (pc - text_base) // 4
        self.cats = cats            # accounting category per instruction
        self.lines = lines          # source line per instruction
        self.data = data            # [(addr, bytes)]
        self.symbols = symbols

    def __len__(self):
        return len(self.instrs)

    @property
    def end_pc(self):
        return self.text_base + 4 * len(self.instrs)

    def pc_of(self, label):
        try:
            return self.symbols[label]
        except KeyError:
            raise AsmError(f"unknown label {label!r}") from None

    def disasm(self):
        out = []
        for i, ins in enumerate(self.instrs):
            pc = self.text_base + 4 * i
            out.append(f"{pc:#06x}: {isa.disasm(ins)}"
                       f"  #cat:{isa.CATEGORY_NAMES[self.cats[i]]}")
        return "\n".join(out)


class _Ins:
    __slots__ = ("line", "op", "rd", "rs1", "rs2", "rs3", "imm", "cat")

    def __init__(self, line, op, rd=0, rs1=0, rs2=0, rs3=0, imm=0, cat=None):
        self.line = line
        self.op = op
        self.rd = rd
        self.rs1 = rs1
        self.rs2 = rs2
        self.rs3 = rs3
        self.imm = imm
        self.cat = cat


def _err(line_no, msg):
    raise AsmError(f"line {line_no}: {msg}")


def _xreg(tok, ln):
    r = isa.XREGS.get(tok)
    if r is None:
        _err(ln, f"bad integer register {tok!r}")
    return r


def _freg(tok, ln):
    r = isa.FREGS.get(tok)
    if r is None:
        _err(ln, f"bad fp register {tok!r}")
    return r


def _int(tok, ln, what="immediate"):
    try:
        return int(tok, 0)
    except ValueError:
        _err(ln, f"bad {what} {tok!r}")


def _memop(tok, ln):
    """Parse `off(reg)` into (offset, reg index)."""
    if not tok.endswith(")") or "(" not in tok:
        _err(ln, f"expected off(reg), got {tok!r}")
    off_s, reg_s = tok[:-1].split("(", 1)
    off = _int(off_s, ln, "offset") if off_s.strip() else 0
    return off, _xreg(reg_s.strip(), ln)


def _csr_addr(tok, ln):
    if tok in isa.CSR_NAMES:
        return isa.CSR_NAMES[tok]
    addr = _int(tok, ln, "csr address")
    if not 0 <= addr <= 0xFFF:
        _err(ln, f"csr address {addr:#x} out of range")
    return addr


def _split_ops(rest):
    return [t.strip() for t in rest.split(",")] if rest.strip() else []


_BRANCHES = ("beq", "bne", "blt", "bge", "bltu", "bgeu")
_I_ARITH = ("addi", "slti", "sltiu", "xori", "ori", "andi",
            "slli", "srli", "srai")
_R_ARITH = ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra",
            "or", "and")
_FP3 = ("fadd.s", "fsub.s", "fmul.s", "fmax.s")


def _li_parts(ln, rd, value, cat):
    v = value & 0xFFFFFFFF
    signed = v - (1 << 32) if v & 0x80000000 else v
    if -2048 <= signed <= 2047:
        return [_Ins(ln, "addi", rd=rd, rs1=0, imm=signed, cat=cat)]
    lo = v & 0xFFF
    if lo >= 0x800:
        lo -= 0x1000
    hi = ((v - lo) >> 12) & 0xFFFFF
    return [_Ins(ln, "lui", rd=rd, imm=hi, cat=cat),
            _Ins(ln, "addi", rd=rd, rs1=rd, imm=lo, cat=cat)]


def _parse_instr(ln, op, ops_s, cat):
    """Return a list of _Ins (pseudo ops expand to several)."""
    ops = _split_ops(ops_s)

    def arity(n):
        if len(ops) != n:
            _err(ln, f"{op} takes {n} operand(s), got {len(ops)}")

    # pseudo ops first
    if op == "nop":
        arity(0)
        return [_Ins(ln, "addi", cat=cat)]
    if op == "mv":
        arity(2)
        return [_Ins(ln, "addi", rd=_xreg(ops[0], ln),
                     rs1=_xreg(ops[1], ln), cat=cat)]
    if op == "j":
        arity(1)
        return [_Ins(ln, "jal", rd=0, imm=("rel", ops[0]), cat=cat)]
    if op == "li":
        arity(2)
        return _li_parts(ln, _xreg(ops[0], ln), _int(ops[1], ln), cat)
    if op == "la":
        arity(2)
        rd = _xreg(ops[0], ln)
        return [_Ins(ln, "lui", rd=rd, imm=("hi", ops[1]), cat=cat),
                _Ins(ln, "addi", rd=rd, rs1=rd, imm=("lo", ops[1]), cat=cat)]

    if op == "lui":
        arity(2)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln),
                     imm=_int(ops[1], ln), cat=cat)]
    if op == "jal":
        if len(ops) == 1:
            ops = ["ra"] + ops
        arity(2)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln),
                     imm=("rel", ops[1]), cat=cat)]
    if op == "jalr":
        arity(2)
        off, rs1 = _memop(ops[1], ln)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln), rs1=rs1, imm=off,
                     cat=cat)]
    if op in _BRANCHES:
        arity(3)
        return [_Ins(ln, op, rs1=_xreg(ops[0], ln), rs2=_xreg(ops[1], ln),
                     imm=("rel", ops[2]), cat=cat)]
    if op in ("lw", "flw"):
        arity(2)
        off, rs1 = _memop(ops[1], ln)
        rd = _xreg(ops[0], ln) if op == "lw" else _freg(ops[0], ln)
        return [_Ins(ln, op, rd=rd, rs1=rs1, imm=off, cat=cat)]
    if op in ("sw", "fsw"):
        arity(2)
        off, rs1 = _memop(ops[1], ln)
        rs2 = _xreg(ops[0], ln) if op == "sw" else _freg(ops[0], ln)
        return [_Ins(ln, op, rs1=rs1, rs2=rs2, imm=off, cat=cat)]
    if op in _I_ARITH:
        arity(3)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln), rs1=_xreg(ops[1], ln),
                     imm=_int(ops[2], ln), cat=cat)]
    if op in _R_ARITH:
        arity(3)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln), rs1=_xreg(ops[1], ln),
                     rs2=_xreg(ops[2], ln), cat=cat)]
    if op in _FP3:
        arity(3)
        return [_Ins(ln, op, rd=_freg(ops[0], ln), rs1=_freg(ops[1], ln),
                     rs2=_freg(ops[2], ln), cat=cat)]
    if op == "flt.s":
        arity(3)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln), rs1=_freg(ops[1], ln),
                     rs2=_freg(ops[2], ln), cat=cat)]
    if op == "fmadd.s":
        arity(4)
        return [_Ins(ln, op, rd=_freg(ops[0], ln), rs1=_freg(ops[1], ln),
                     rs2=_freg(ops[2], ln), rs3=_freg(ops[3], ln), cat=cat)]
    if op in ("csrrw", "csrrs", "csrrc"):
        arity(3)
        return [_Ins(ln, op, rd=_xreg(ops[0], ln),
                     imm=_csr_addr(ops[1], ln), rs1=_xreg(ops[2], ln),
                     cat=cat)]
    if op in ("csrrwi", "csrrsi", "csrrci"):
        arity(3)
        zimm = _int(ops[2], ln, "zimm")
        if not 0 <= zimm <= 31:
            _err(ln, f"zimm {zimm} out of range")
        return [_Ins(ln, op, rd=_xreg(ops[0], ln),
                     imm=_csr_addr(ops[1], ln), rs1=zimm, cat=cat)]
    if op == "tmc":
        arity(1)
        return [_Ins(ln, op, rs1=_xreg(ops[0], ln), cat=cat)]
    if op in ("wspawn", "split", "bar"):
        arity(2)
        return [_Ins(ln, op, rs1=_xreg(ops[0], ln), rs2=_xreg(ops[1], ln),
                     cat=cat)]
    if op in ("join", "halt"):
        arity(0)
        return [_Ins(ln, op, cat=cat)]
    _err(ln, f"unknown mnemonic {op!r}")


def _parse_cat(tail, ln):
    name = tail[4:].strip()
    if name not in isa.CATEGORIES:
        _err(ln, f"unknown category {name!r}")
    return isa.CATEGORIES[name]


def assemble(source, text_base=0, data_base=DEFAULT_DATA_BASE):
    """Assemble source text into a Program."""
    if text_base % 4:
        raise AsmError("text base must be 4-byte aligned")
    items = []              # _Ins in text order
    symbols = {}
    segments = []           # [addr, bytearray]
    fixups = []             # (line, seg_idx, offset, symbol) for .word labels
    in_text = True
    seg = None

    def cur_data_seg():
        nonlocal seg
        if seg is None:
            seg = [data_base, bytearray()]
            segments.append(seg)
        return seg

    for ln, raw in enumerate(source.splitlines(), start=1):
        line = raw
        cat = None
        if "#" in line:
            line, tail = line.split("#", 1)
            if tail.lstrip().startswith("cat:"):
                cat = _parse_cat(tail.lstrip(), ln)
        line = line.strip()
        while line:
            head = line.split(None, 1)[0]
            if not head.endswith(":"):
                break
            name = head[:-1]
            if not name.isidentifier():
                _err(ln, f"bad label {name!r}")
            if name in symbols:
                _err(ln, f"duplicate label {name!r}")
            if in_text:
                symbols[name] = text_base + 4 * len(items)
            else:
                s = cur_data_seg()
                symbols[name] = s[0] + len(s[1])
            line = line[len(head):].strip()
        if not line:
            continue

        parts = line.split(None, 1)
        op = parts[0].lower()
        rest = parts[1] if len(parts) > 1 else ""

        if op.startswith("."):
            if op == ".text":
                if rest.strip():
                    _err(ln, ".text takes no address (text is contiguous)")
                in_text = True
            elif op == ".data":
                in_text = False
                if rest.strip():
                    seg = [_int(rest.strip(), ln, "address"), bytearray()]
                    segments.append(seg)
            elif op == ".word":
                if in_text:
                    _err(ln, ".word only allowed in data segments")
                s = cur_data_seg()
                for tok in _split_ops(rest):
                    try:
                        v = int(tok, 0)
                    except ValueError:
                        fixups.append((ln, len(segments) - 1, len(s[1]), tok))
                        v = 0
                    s[1] += (v & 0xFFFFFFFF).to_bytes(4, "little")
            elif op == ".space":
                if in_text:
                    _err(ln, ".space only allowed in data segments")
                n = _int(rest.strip(), ln, "size")
                cur_data_seg()[1] += bytes(n)
            elif op == ".align":
                if in_text:
                    _err(ln, ".align only allowed in data segments")
                k = _int(rest.strip(), ln, "alignment")
                if not 0 <= k <= 20:
                    _err(ln, "alignment power out of range")
                s = cur_data_seg()
                boundary = 1 << k
                pos = s[0] + len(s[1])
                s[1] += bytes(-pos % boundary)
            else:
                _err(ln, f"unknown directive {op!r}")
            continue

        if not in_text:
            _err(ln, "instructions only allowed in .text")
        items.extend(_parse_instr(ln, op, rest, cat))

    # second pass: resolve symbols, encode
    def resolve(sym, ln):
        if sym in symbols:
            return symbols[sym]
        _err(ln, f"unknown symbol {sym!r}")

    words, instrs, cats, lines = [], [], [], []
    for i, it in enumerate(items):
        pc = text_base + 4 * i
        imm = it.imm
        if isinstance(imm, tuple):
            kind, sym = imm
            addr = resolve(sym, it.line)
            if kind == "rel":
                imm = addr - pc
            elif kind == "hi":
                lo = addr & 0xFFF
                if lo >= 0x800:
                    lo -= 0x1000
                imm = ((addr - lo) >> 12) & 0xFFFFF
            elif kind == "lo":
                lo = addr & 0xFFF
                imm = lo - 0x1000 if lo >= 0x800 else lo
            else:
                raise AssertionError(kind)
        try:
            word = isa.encode(it.op, rd=it.rd, rs1=it.rs1, rs2=it.rs2,
                              rs3=it.rs3, imm=imm)
        except ValueError as e:
            _err(it.line, str(e))
        ins = isa.decode(word)
        words.append(word)
        instrs.append(ins)
        cats.append(it.cat if it.cat is not None else ins.cat)
        lines.append(it.line)

    for ln, seg_idx, off, sym in fixups:
        v = resolve(sym, ln) & 0xFFFFFFFF
        segments[seg_idx][1][off:off + 4] = v.to_bytes(4, "little")

    data = [(addr, bytes(buf)) for addr, buf in segments if buf]
    return Program(text_base, words, instrs, cats, lines, data, symbols)
