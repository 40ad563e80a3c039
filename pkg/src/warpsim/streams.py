"""Memory stream lanes: strided prefetch FIFOs mapped onto registers.

Each stream unit holds one lane group per warp: a per-thread FIFO of
`stream_credits` slots plus per-thread base, stride and element count. With
register redirect on, reads of the mapped register pop the FIFO head and
writes push a store, skipping the register file and the scoreboard.

Lane life cycle: write the config word (reg 1, disarms and resets), then
length (reg 2) and stride (reg 5), then the base address (reg 0), which
arms the lane and starts prefetching. Re-writing the base re-arms the same
shape for a new pass. Arming requires the read side fully consumed; any
not-yet-drained writes from the previous pass are carried over as residual
stores, and new prefetches hold off until those reach memory, so a pass
never observes its predecessor half-written.

Requests to the L1 are line-sized: each cycle a unit nominates the most
starved lane group (reads rank by free slots, writes by buffered
occupancy) and packs every pending element falling in the anchor line into
one request. Values snapshot at grant time for reads and commit to backing
memory at push time for writes, so functional state never depends on the
timing model. Prefetch never runs past the configured element count, and a
kernel must consume exactly what it streams: leftovers fail the end-of-run
check.
"""

from .csr import (STREAM_BASE, STREAM_CFG, STREAM_LEN, STREAM_STATUS,
                  STREAM_STRIDE, parse_stream_cfg)
from .errors import StreamConfigError
from .fp32 import from_bits, to_bits
from .memsys import MemReq


def _s32(v):
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


class _Lane:
    """Stream state of one (unit, warp) pair."""

    __slots__ = ("cfg", "armed", "base", "stride", "length",
                 "req", "cons", "data", "filled",
                 "wpush", "wdrain", "inflight",
                 "residual", "legacy",
                 "read_need", "write_need", "has_read_work")

    def __init__(self, T):
        self.cfg = None
        self.armed = False
        self.base = [0] * T
        self.stride = [0] * T
        self.length = [0] * T
        self.req = [0] * T
        self.cons = [0] * T
        self.data = [[None] * 0 for _ in range(T)]
        self.filled = [0] * T
        self.wpush = [0] * T
        self.wdrain = [0] * T
        self.inflight = 0     # granted, not yet completed stores (this pass)
        self.residual = []    # [(line, elems)] left over from prior passes
        self.legacy = 0       # in-flight stores from prior passes
        self.read_need = 0
        self.write_need = 0
        self.has_read_work = False


class StreamStats:
    __slots__ = ("read_lines", "write_lines", "fills", "drains")

    def __init__(self):
        self.read_lines = 0
        self.write_lines = 0
        self.fills = 0
        self.drains = 0


class StreamEngine:
    def __init__(self, cfg, memsys):
        self.cfgc = cfg
        self.msys = memsys
        self.R = cfg.stream_units
        self.W = cfg.warps
        self.T = cfg.threads
        self.C = cfg.stream_credits
        self.lanes = [[_Lane(self.T) for _ in range(self.W)]
                      for _ in range(self.R)]
        self.active = [set() for _ in range(self.R)]  # warps worth scanning
        # per warp: (space, reg) -> unit, for the register redirect
        self.redirect = [{} for _ in range(self.W)]
        self.stats = StreamStats()

    # ------------------------------------------------------------------
    # configuration

    def _lane(self, unit, warp):
        if not 0 <= unit < self.R:
            raise StreamConfigError(f"stream unit {unit} not implemented")
        return self.lanes[unit][warp]

    def _read_side_clean(self, lane):
        return (all(r == c for r, c in zip(lane.req, lane.cons))
                and not any(lane.filled))

    def _retire_pass(self, unit, warp, lane):
        """Fold any undrained writes into residual line groups."""
        if not self._read_side_clean(lane):
            raise StreamConfigError(
                "stream lane reconfigured with unconsumed read data")
        groups = {}
        for t in range(self.T):
            for k in range(lane.wdrain[t], lane.wpush[t]):
                line = (lane.base[t] + k * lane.stride[t]) \
                    // self.msys.line_size
                groups[line] = groups.get(line, 0) + 1
        for line in sorted(groups):
            lane.residual.append((line, groups[line]))
        lane.legacy += lane.inflight
        lane.inflight = 0
        T = self.T
        lane.req = [0] * T
        lane.cons = [0] * T
        lane.filled = [0] * T
        lane.wpush = [0] * T
        lane.wdrain = [0] * T
        lane.armed = False

    def _arm(self, unit, warp, lane):
        cfg = lane.cfg
        if cfg is None:
            raise StreamConfigError("stream base written before config word")
        if cfg.writes and cfg.reads:
            for t in range(self.T):
                if lane.length[t] and lane.stride[t] == 0:
                    raise StreamConfigError(
                        "read-write stream lanes need a nonzero stride")
        size = cfg.elem_size
        for t in range(self.T):
            if lane.length[t] and (lane.base[t] % size
                                   or lane.stride[t] % size):
                raise StreamConfigError(
                    f"stream lane thread {t}: base/stride not aligned to "
                    f"{size}-byte elements")
        C = self.C
        lane.data = [[None] * C for _ in range(self.T)]
        lane.armed = True
        self.active[unit].add(warp)
        self._recalc(lane)

    def csr_write(self, unit, reg, warp, values, mask):
        """values is a per-thread list; uniform registers take the lowest
        active lane's value."""
        lane = self._lane(unit, warp)
        lanes = [t for t in range(self.T) if mask >> t & 1]
        if not lanes:
            return
        if reg == STREAM_CFG:
            if lane.armed or lane.residual or lane.legacy or lane.inflight:
                self._retire_pass(unit, warp, lane)
            old = lane.cfg
            lane.cfg = parse_stream_cfg(values[lanes[0]])
            rmap = self.redirect[warp]
            if old is not None and old.redirect:
                rmap.pop((old.space, old.mapped_reg), None)
            if lane.cfg.redirect:
                key = (lane.cfg.space, lane.cfg.mapped_reg)
                other = rmap.get(key)
                if other is not None and other != unit:
                    raise StreamConfigError(
                        f"register already mapped to stream unit {other}")
                rmap[key] = unit
            self.active[unit].add(warp)
        elif reg == STREAM_BASE:
            if lane.armed:
                self._retire_pass(unit, warp, lane)
            for t in lanes:
                lane.base[t] = values[t] & 0xFFFFFFFF
            self._arm(unit, warp, lane)
        elif reg == STREAM_LEN:
            if lane.armed:
                raise StreamConfigError(
                    "set stream length before the base address")
            for t in lanes:
                lane.length[t] = values[t] & 0x7FFFFFFF
        elif reg == STREAM_STRIDE:
            if lane.armed:
                raise StreamConfigError(
                    "set stream stride before the base address")
            for t in lanes:
                lane.stride[t] = _s32(values[t])
        else:
            raise StreamConfigError(f"stream unit has no register {reg}")

    def csr_read(self, unit, reg, warp):
        """Returns a per-thread list for per-lane registers, else an int."""
        lane = self._lane(unit, warp)
        if reg == STREAM_BASE:
            return list(lane.base)
        if reg == STREAM_LEN:
            return list(lane.length)
        if reg == STREAM_STRIDE:
            return [s & 0xFFFFFFFF for s in lane.stride]
        if reg == STREAM_CFG:
            cfg = lane.cfg
            if cfg is None:
                return 0
            return (cfg.mapped_reg | cfg.space << 5 | cfg.elem_log2 << 7
                    | cfg.prefetch << 10 | cfg.redirect << 11
                    | cfg.mode << 12)
        if reg == STREAM_STATUS:
            return (sum(r - c for r, c in zip(lane.req, lane.cons))
                    + sum(p - d for p, d in zip(lane.wpush, lane.wdrain)))
        raise StreamConfigError(f"stream unit has no register {reg}")

    # ------------------------------------------------------------------
    # issue-side interface (register redirect)

    def source_unit(self, warp, space, reg):
        unit = self.redirect[warp].get((space, reg))
        if unit is None:
            return None
        cfg = self.lanes[unit][warp].cfg
        return unit if cfg is not None and cfg.reads else None

    def dest_unit(self, warp, space, reg):
        unit = self.redirect[warp].get((space, reg))
        if unit is None:
            return None
        cfg = self.lanes[unit][warp].cfg
        return unit if cfg is not None and cfg.writes else None

    def read_ready(self, unit, warp, mask):
        lane = self.lanes[unit][warp]
        if not lane.armed:
            return False
        C = self.C
        filled = lane.filled
        cons = lane.cons
        t = 0
        while mask:
            if mask & 1 and not filled[t] >> (cons[t] % C) & 1:
                return False
            mask >>= 1
            t += 1
        return True

    def write_space(self, unit, warp, mask):
        lane = self.lanes[unit][warp]
        if not lane.armed:
            return False
        C = self.C
        t = 0
        while mask:
            if mask & 1 and lane.wpush[t] - lane.wdrain[t] >= C:
                return False
            mask >>= 1
            t += 1
        return True

    def pop(self, unit, warp, mask):
        lane = self.lanes[unit][warp]
        C = self.C
        out = [None] * self.T
        for t in range(self.T):
            if mask >> t & 1:
                slot = lane.cons[t] % C
                out[t] = lane.data[t][slot]
                lane.filled[t] &= ~(1 << slot)
                lane.cons[t] += 1
        self._recalc(lane)
        return out

    def push(self, unit, warp, mask, values):
        lane = self.lanes[unit][warp]
        cfg = lane.cfg
        size = cfg.elem_size
        mem = self.msys.memory
        for t in range(self.T):
            if mask >> t & 1:
                k = lane.wpush[t]
                addr = lane.base[t] + k * lane.stride[t]
                v = values[t]
                mem.store(addr, to_bits(v) if cfg.is_fp else v, size)
                lane.wpush[t] = k + 1
        self._recalc(lane)

    # ------------------------------------------------------------------
    # memory side

    def _recalc(self, lane):
        cfg = lane.cfg
        if cfg is None or not lane.armed:
            lane.read_need = 0
            lane.has_read_work = False
        else:
            window = self.C if cfg.prefetch else 1
            need = 0
            work = False
            if cfg.reads:
                for t in range(self.T):
                    if lane.length[t] > lane.req[t]:
                        free = window - (lane.req[t] - lane.cons[t])
                        need += free
                        if free > 0:
                            work = True
            lane.read_need = need
            lane.has_read_work = work and not lane.residual \
                and not lane.legacy
        lane.write_need = (sum(lane.wpush[t] - lane.wdrain[t]
                               for t in range(self.T))
                           + sum(n for _, n in lane.residual))

    def make_request(self, unit, now):
        """Nominate this unit's request for the current cycle, or None."""
        best = None
        best_key = None
        done = []
        for w in self.active[unit]:
            lane = self.lanes[unit][w]
            wn = lane.write_need
            rn = lane.read_need if lane.has_read_work else 0
            if wn == 0 and rn == 0:
                if not lane.armed and not lane.legacy and not lane.inflight:
                    done.append(w)
                elif lane.armed and not lane.inflight and not lane.legacy \
                        and self._exhausted(lane):
                    done.append(w)
                continue
            if wn >= rn:
                key = (wn, 1, -w)
                side = "w"
            else:
                key = (rn, 0, -w)
                side = "r"
            if best_key is None or key > best_key:
                best_key = key
                best = (w, side, lane)
        for w in done:
            self.active[unit].discard(w)
        if best is None:
            return None
        w, side, lane = best
        if side == "w":
            return self._write_request(unit, w, lane)
        return self._read_request(unit, w, lane)

    def _exhausted(self, lane):
        return (all(lane.req[t] >= lane.length[t] for t in range(self.T))
                and not any(p - d for p, d in zip(lane.wpush, lane.wdrain))
                and not (lane.cfg.reads and not self._read_side_clean(lane)))

    def _read_request(self, unit, w, lane):
        window = self.C if lane.cfg.prefetch else 1
        anchor = None
        for t in range(self.T):
            if (lane.length[t] > lane.req[t]
                    and lane.req[t] - lane.cons[t] < window):
                if anchor is None or lane.req[t] < lane.req[anchor]:
                    anchor = t
        if anchor is None:
            return None
        lsz = self.msys.line_size
        line = (lane.base[anchor] + lane.req[anchor] * lane.stride[anchor]) \
            // lsz
        items = []
        for t in range(self.T):
            k = lane.req[t]
            while (lane.length[t] > k and k - lane.cons[t] < window):
                addr = lane.base[t] + k * lane.stride[t]
                if addr // lsz != line:
                    break
                items.append((t, k, addr))
                k += 1
        return MemReq(unit, line, False, lane.read_need,
                      ("r", unit, w, items))

    def _write_request(self, unit, w, lane):
        if lane.residual:
            line, _ = lane.residual[0]
            return MemReq(unit, line, True, lane.write_need,
                          ("dl", unit, w))
        anchor = None
        for t in range(self.T):
            if lane.wpush[t] > lane.wdrain[t]:
                if anchor is None or lane.wdrain[t] < lane.wdrain[anchor]:
                    anchor = t
        if anchor is None:
            return None
        lsz = self.msys.line_size
        line = (lane.base[anchor] + lane.wdrain[anchor]
                * lane.stride[anchor]) // lsz
        items = []
        for t in range(self.T):
            k = lane.wdrain[t]
            while lane.wpush[t] > k:
                addr = lane.base[t] + k * lane.stride[t]
                if addr // lsz != line:
                    break
                items.append((t, k))
                k += 1
        return MemReq(unit, line, True, lane.write_need,
                      ("d", unit, w, items))

    def apply_grant(self, tag, completion, schedule):
        kind = tag[0]
        if kind == "r":
            _, unit, w, items = tag
            lane = self.lanes[unit][w]
            cfg = lane.cfg
            size = cfg.elem_size
            mem = self.msys.memory
            payload = []
            for t, k, addr in items:
                raw = mem.load(addr, size)
                payload.append((t, k, from_bits(raw) if cfg.is_fp else raw))
                if k >= lane.req[t]:
                    lane.req[t] = k + 1
            self.stats.read_lines += 1
            self._recalc(lane)
            schedule(completion, "stream_fill", (unit, w, payload))
        elif kind == "d":
            _, unit, w, items = tag
            lane = self.lanes[unit][w]
            for t, k in items:
                if k >= lane.wdrain[t]:
                    lane.wdrain[t] = k + 1
            lane.inflight += 1
            self.stats.write_lines += 1
            self.stats.drains += len(items)
            self._recalc(lane)
            schedule(completion, "stream_store", (unit, w, False))
        elif kind == "dl":
            _, unit, w = tag
            lane = self.lanes[unit][w]
            lane.residual.pop(0)
            lane.legacy += 1
            self.stats.write_lines += 1
            self._recalc(lane)
            schedule(completion, "stream_store", (unit, w, True))
        else:
            raise AssertionError(kind)

    def apply_fill(self, payload):
        unit, w, items = payload
        lane = self.lanes[unit][w]
        C = self.C
        for t, k, value in items:
            slot = k % C
            lane.data[t][slot] = value
            lane.filled[t] |= 1 << slot
        self.stats.fills += len(items)

    def store_done(self, payload):
        unit, w, legacy = payload
        lane = self.lanes[unit][w]
        # a pass retire folds in-flight stores into the legacy count, so a
        # completion tagged with the old pass may arrive after its store was
        # promoted; settle it against legacy in that case
        if legacy or lane.inflight == 0:
            lane.legacy -= 1
        else:
            lane.inflight -= 1
        self._recalc(lane)
        if lane.armed:
            self.active[unit].add(w)

    # ------------------------------------------------------------------
    # end-of-run checks

    def busy(self):
        """True while any write remains buffered or in flight."""
        for ug in self.lanes:
            for lane in ug:
                if (lane.write_need or lane.inflight or lane.legacy
                        or lane.residual):
                    return True
        return False

    def final_check(self):
        """A finished run must have consumed every prefetched element."""
        for u, ug in enumerate(self.lanes):
            for w, lane in enumerate(ug):
                if lane.cfg is None:
                    continue
                leftover = sum(r - c for r, c in zip(lane.req, lane.cons))
                if leftover:
                    raise StreamConfigError(
                        f"stream unit {u} warp {w}: {leftover} prefetched "
                        "elements never consumed")
