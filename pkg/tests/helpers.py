"""Shared helpers for driving small programs through the core."""

from warpsim.asm import assemble
from warpsim.config import CoreConfig, VARIANTS
from warpsim.core import Core


def small_cfg(**kw):
    base = dict(warps=2, threads=4)
    base.update(kw)
    return CoreConfig(**base)


def run_program(src, cfg=None, variant="base", max_cycles=200_000, **kw):
    if cfg is None:
        cfg = small_cfg()
    core = Core(cfg, assemble(src), VARIANTS[variant], **kw)
    core.run(max_cycles=max_cycles)
    return core


def xreg(core, warp, name_or_idx):
    from warpsim.isa import XREGS
    idx = (name_or_idx if isinstance(name_or_idx, int)
           else XREGS[name_or_idx])
    return core.warps[warp].regs[idx]


def freg(core, warp, name_or_idx):
    from warpsim.isa import FREGS
    idx = (name_or_idx if isinstance(name_or_idx, int)
           else FREGS[name_or_idx])
    return core.warps[warp].fregs[idx]
