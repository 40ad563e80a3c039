"""Single-precision float helpers.

Register and memory state for the F extension is kept as Python floats whose
values are always exactly representable in IEEE-754 binary32. Each arithmetic
op computes in double (exact for products of binary32 inputs) and rounds once
through a 32-bit container, so the simulator matches a real single-precision
FPU bit for bit. The numpy golden models round the same way, which is what
lets output comparison be exact instead of tolerance based.
"""

import struct

_F = struct.Struct("<f")
_I = struct.Struct("<I")


def f32(x):
    """Nearest binary32 value of a Python float (round to nearest even)."""
    return _F.unpack(_F.pack(x))[0]


def from_bits(u):
    """Reinterpret a 32-bit pattern as a binary32 value."""
    return _F.unpack(_I.pack(u & 0xFFFFFFFF))[0]


def to_bits(x):
    """IEEE-754 bit pattern of a binary32 value as an unsigned int."""
    return _I.unpack(_F.pack(x))[0]


def fadd(a, b):
    return _F.unpack(_F.pack(a + b))[0]


def fsub(a, b):
    return _F.unpack(_F.pack(a - b))[0]


def fmul(a, b):
    return _F.unpack(_F.pack(a * b))[0]


def fmadd(a, b, c):
    # a*b is exact in double for binary32 inputs, so this rounds the double
    # value of a*b+c once. Golden models must use the same formulation.
    return _F.unpack(_F.pack(a * b + c))[0]


def fmax(a, b):
    # No NaN handling: operands in this simulator are always ordered.
    # Ties (including +0/-0) keep the first operand.
    return b if b > a else a


def flt(a, b):
    return 1 if a < b else 0
