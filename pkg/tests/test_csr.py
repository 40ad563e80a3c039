"""Extension CSR address map and config-word packing."""

import pytest

from warpsim.config import CoreConfig, VARIANTS, variant_extensions
from warpsim.csr import (LOOP_BOUND, LOOP_START, MODE_RW, MODE_WRITE,
                         SPACE_FP, SPACE_INT, STREAM_BASE, UNIT_LOOP,
                         UNIT_STREAM, decode_ext, ext_addr, loop_csr,
                         pack_loop_state, pack_stream_cfg, parse_stream_cfg,
                         stream_csr, unpack_loop_state)
from warpsim.errors import ConfigError, SimulationError


def test_address_split_examples():
    assert decode_ext(0x840) == (UNIT_STREAM, 0, STREAM_BASE)
    assert decode_ext(0x80B) == (UNIT_LOOP, 1, LOOP_BOUND)
    assert decode_ext(0x7FF) is None
    assert decode_ext(0x900) is None


def test_address_builders_invert_decode():
    for ut, uid, reg in [(UNIT_LOOP, 0, 4), (UNIT_STREAM, 2, 5),
                         (UNIT_LOOP, 3, 0)]:
        assert decode_ext(ext_addr(ut, uid, reg)) == (ut, uid, reg)
    assert loop_csr(2, LOOP_START) == 0x810
    assert stream_csr(1, STREAM_BASE) == 0x848


def test_stream_cfg_roundtrip():
    word = pack_stream_cfg(14, SPACE_FP, elem_log2=2, prefetch=False,
                           redirect=True, mode=MODE_RW)
    cfg = parse_stream_cfg(word)
    assert cfg.mapped_reg == 14
    assert cfg.is_fp and cfg.reads and cfg.writes
    assert not cfg.prefetch and cfg.redirect
    assert cfg.elem_size == 4


def test_stream_cfg_rejects_bad_fields():
    with pytest.raises(SimulationError):
        parse_stream_cfg(0)                      # no space, no mode
    with pytest.raises(SimulationError):
        parse_stream_cfg(pack_stream_cfg(1, SPACE_INT) & ~(0x3 << 12))
    word = pack_stream_cfg(1, SPACE_FP, mode=MODE_WRITE) & ~(0x7 << 7)
    with pytest.raises(SimulationError):
        parse_stream_cfg(word)                   # sub-word fp element


def test_loop_state_packing():
    assert unpack_loop_state(pack_loop_state(5, True)) == (5, True)
    assert unpack_loop_state(pack_loop_state(0, False)) == (0, False)
    assert pack_loop_state(5, True) >> 31 == 1


# ----------------------------------------------------------------------
# core configuration while we are near it

def test_variant_table():
    assert set(VARIANTS) == {"base", "cfm", "cfm+lps", "full"}
    assert variant_extensions("base") == frozenset()
    assert "streams" in variant_extensions("full")
    with pytest.raises(ConfigError):
        variant_extensions("turbo")


def test_config_validation():
    with pytest.raises(ConfigError):
        CoreConfig(threads=0)
    with pytest.raises(ConfigError):
        CoreConfig(cache_size=1000)          # not line-divisible
    with pytest.raises(ConfigError):
        CoreConfig(cache_banks=3)            # must divide the line count
    with pytest.raises(ConfigError):
        CoreConfig(cache_ports=0)
    with pytest.raises(ConfigError):
        CoreConfig(threads=40)               # mask must fit a word


def test_config_dict_roundtrip():
    cfg = CoreConfig(warps=4, stream_credits=6)
    again = CoreConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ConfigError):
        CoreConfig.from_dict({"warp_count": 4})
    coerced = CoreConfig.from_dict({"warps": "4"})
    assert coerced.warps == 4
