"""Cycle-level SIMT core.

Per cycle: completion events apply first, then one instruction may issue
(round-robin over warps, oldest ibuffer entry first), then memory requests
are arbitrated, then one warp fetches. Functional state changes at issue
time; events only release scoreboard entries, resolve control flow and
deliver stream/load completions, so values never depend on event order.

Control instructions (branches, jumps, SIMT ops, extension CSR writes)
stall their own warp's fetch until they resolve. The hardware loop
controller sits on the fetch path and can redirect the next PC and shape
the effective thread mask before an instruction enters the buffer; the
mask an instruction fetched with is the mask it executes with.

When nothing can issue, fetch or be granted in a cycle, time jumps to the
next pending event with the gap booked to the blocking reason, which keeps
long memory waits cheap to simulate without changing any timing.
"""

import heapq
from collections import deque
from dataclasses import dataclass, field, fields

from . import fp32
from .config import EXT_HWLOOP, EXT_MASKSTACK, EXT_STREAMS
from .csr import SPACE_FP, SPACE_INT, UNIT_LOOP, UNIT_STREAM, decode_ext
from .errors import (DeadlockError, DivergenceError, IllegalInstruction,
                     SimulationError)
from .hwloops import LoopController
from .isa import (CAT_COMP, CAT_LOOP, CAT_MEM, CAT_OTHER, CAT_PRED,
                  CSR_NTID, CSR_NWID, CSR_TID, CSR_WID, CATEGORY_NAMES)
from .memsys import MemReq, MemSystem
from .streams import StreamEngine

M32 = 0xFFFFFFFF

_LANES_CACHE = {}


def lanes_of(mask):
    lanes = _LANES_CACHE.get(mask)
    if lanes is None:
        lanes = tuple(t for t in range(mask.bit_length()) if mask >> t & 1)
        _LANES_CACHE[mask] = lanes
    return lanes


def _sx(v):
    return v - 0x100000000 if v & 0x80000000 else v


@dataclass
class RunStats:
    cycles: int = 0
    instrs: int = 0
    instr_loop: int = 0
    instr_pred: int = 0
    instr_mem: int = 0
    instr_comp: int = 0
    instr_other: int = 0
    flops: int = 0
    stall_stream: int = 0
    stall_depend: int = 0
    stall_fetch: int = 0
    idle: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    cache_merges: int = 0
    evictions: int = 0
    writebacks: int = 0
    bank_conflicts: int = 0
    mshr_stalls: int = 0
    lsu_grants: int = 0
    stream_grants: int = 0
    shared_accesses: int = 0
    stream_read_lines: int = 0
    stream_write_lines: int = 0
    stream_fills: int = 0
    stream_drains: int = 0
    issue_hist: list = field(default_factory=list)

    def merge(self, other):
        for f in fields(self):
            if f.name == "issue_hist":
                continue
            setattr(self, f.name,
                    getattr(self, f.name) + getattr(other, f.name))
        mine, theirs = self.issue_hist, other.issue_hist
        if len(theirs) > len(mine):
            mine.extend(0 for _ in range(len(theirs) - len(mine)))
        for i, v in enumerate(theirs):
            mine[i] += v
        return self

    def utilization(self, threads):
        return self.flops / (self.cycles * threads) if self.cycles else 0.0

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


class _Warp:
    __slots__ = ("idx", "active", "halted", "pc", "mask", "ibuf",
                 "fetch_wait", "barrier", "regs", "fregs", "div_stack",
                 "sb_int", "sb_fp")

    def __init__(self, idx, threads):
        self.idx = idx
        self.active = False
        self.halted = False
        self.pc = 0
        self.mask = 0
        self.ibuf = deque()
        self.fetch_wait = False
        self.barrier = None
        self.regs = [[0] * threads for _ in range(32)]
        self.fregs = [[0.0] * threads for _ in range(32)]
        self.div_stack = []
        self.sb_int = set()
        self.sb_fp = set()


class _DivFrame:
    __slots__ = ("saved_mask", "else_mask", "else_pc", "pending")

    def __init__(self, saved_mask, else_mask, else_pc):
        self.saved_mask = saved_mask
        self.else_mask = else_mask
        self.else_pc = else_pc
        self.pending = True  # else side not taken up yet


class _LsuEntry:
    __slots__ = ("groups", "warp", "dst", "gi", "outstanding", "is_store")

    def __init__(self, groups, warp, dst, is_store):
        self.groups = groups      # [(shared?, line, nlanes)]
        self.warp = warp
        self.dst = dst            # (space, reg) to release, or None
        self.gi = 0
        self.outstanding = 0
        self.is_store = is_store


class Core:
    def __init__(self, cfg, program, extensions=frozenset(), memsys=None,
                 trace=None, fetch_log=None, watchdog=250_000):
        self.cfg = cfg
        self.ext = frozenset(extensions)
        self.msys = memsys if memsys is not None else MemSystem(cfg)
        self.program = program
        if program.text_base % 4:
            raise SimulationError("text base must be word aligned")
        self.text_base = program.text_base
        self.image = program.instrs
        self.cats = program.cats
        for addr, blob in program.data:
            self.msys.memory.write_block(addr, blob)
        self.loops = (LoopController(cfg, EXT_MASKSTACK in self.ext)
                      if EXT_HWLOOP in self.ext else None)
        self.streams = (StreamEngine(cfg, self.msys)
                        if EXT_STREAMS in self.ext and cfg.stream_units
                        else None)
        self.warps = [_Warp(i, cfg.threads) for i in range(cfg.warps)]
        w0 = self.warps[0]
        w0.active = True
        w0.pc = self.text_base
        w0.mask = cfg.full_mask
        self.now = 0
        self.events = []
        self._seq = 0
        self.lsu_queue = deque()
        self.barriers = {}
        self.last_issue = cfg.warps - 1
        self.last_fetch = cfg.warps - 1
        self.stats = RunStats(issue_hist=[0] * cfg.warps)
        self.trace = trace
        self.fetch_log = fetch_log
        self.watchdog = watchdog
        self._last_progress = 0
        self._popped = {}
        self._handlers = _HANDLERS

    # ------------------------------------------------------------------
    # event plumbing

    def schedule(self, time, kind, payload):
        self._seq += 1
        heapq.heappush(self.events, (time, self._seq, kind, payload))

    def _process_events(self):
        evs = self.events
        now = self.now
        progressed = False
        while evs and evs[0][0] <= now:
            _, _, kind, payload = heapq.heappop(evs)
            progressed = True
            if kind == "rel":
                w, space, reg = payload
                sb = self.warps[w].sb_fp if space else self.warps[w].sb_int
                sb.discard(reg)
            elif kind == "ctrl":
                self._resolve_ctrl(payload)
            elif kind == "lsu_done":
                entry = payload
                entry.outstanding -= 1
                if (entry.outstanding == 0 and entry.gi >= len(entry.groups)
                        and entry.dst is not None):
                    w = self.warps[entry.warp]
                    sb = w.sb_fp if entry.dst[0] else w.sb_int
                    sb.discard(entry.dst[1])
            elif kind == "stream_fill":
                self.streams.apply_fill(payload)
            elif kind == "stream_store":
                self.streams.store_done(payload)
            else:
                raise AssertionError(kind)
        if progressed:
            self._last_progress = now

    def _resolve_ctrl(self, payload):
        w, new_pc, new_mask, special = payload
        warp = self.warps[w]
        warp.fetch_wait = False
        if new_pc is not None:
            warp.pc = new_pc
        if new_mask is not None:
            warp.mask = new_mask
        if special is None:
            return
        op = special[0]
        if op == "tmc":
            if new_mask == 0:
                warp.halted = True  # all lanes off retires the warp
        elif op == "halt":
            warp.halted = True
        elif op == "bar":
            bar_id, count = special[1], special[2]
            waiting = self.barriers.setdefault(bar_id, [])
            waiting.append(w)
            if len(waiting) >= count:
                for idx in waiting:
                    self.warps[idx].barrier = None
                del self.barriers[bar_id]
            else:
                warp.barrier = bar_id
        elif op == "wspawn":
            count, target = special[1], special[2]
            for idx in range(1, min(count, self.cfg.warps)):
                nw = self.warps[idx]
                if nw.active and not nw.halted:
                    continue
                nw.active = True
                nw.halted = False
                nw.pc = target
                nw.mask = self.cfg.full_mask
                nw.ibuf.clear()
                nw.fetch_wait = False
                nw.div_stack.clear()
                if self.loops is not None:
                    self.loops.reset_warp(idx)
        else:
            raise AssertionError(op)

    # ------------------------------------------------------------------
    # issue

    # instruction encodings carry a one-bit register space (0 int, 1 fp);
    # the stream engine keys its redirect map by the CSR space field
    def _src_unit(self, w, space, reg):
        if self.streams is None:
            return None
        return self.streams.source_unit(w, SPACE_FP if space else SPACE_INT,
                                        reg)

    def _dst_unit(self, w, space, reg):
        if self.streams is None:
            return None
        return self.streams.dest_unit(w, SPACE_FP if space else SPACE_INT,
                                      reg)

    def _issue_block_reason(self, warp, ins, mask):
        """None if the head instruction can issue now, else a stall tag."""
        w = warp.idx
        for space, reg in ins.srcs:
            unit = self._src_unit(w, space, reg)
            if unit is None:
                sb = warp.sb_fp if space else warp.sb_int
                if reg in sb:
                    return "depend"
            elif not self.streams.read_ready(unit, w, mask):
                return "stream"
        if ins.dst is not None:
            space, reg = ins.dst
            unit = self._dst_unit(w, space, reg)
            if unit is None:
                sb = warp.sb_fp if space else warp.sb_int
                if reg in sb:
                    return "depend"
            elif not self.streams.write_space(unit, w, mask):
                return "stream"
        return None

    def _issue(self):
        W = self.cfg.warps
        first_block = None
        for i in range(W):
            warp = self.warps[(self.last_issue + 1 + i) % W]
            if not warp.ibuf:
                continue
            ins, mask, pc, nxt, cat = warp.ibuf[0]
            reason = self._issue_block_reason(warp, ins, mask)
            if reason is not None:
                if first_block is None:
                    first_block = reason
                continue
            warp.ibuf.popleft()
            self.last_issue = warp.idx
            self._execute(warp, ins, mask, pc, nxt, cat)
            return True, None
        return False, first_block

    def _execute(self, warp, ins, mask, pc, nxt, cat):
        st = self.stats
        st.instrs += 1
        st.issue_hist[warp.idx] += 1
        if cat == CAT_COMP:
            st.instr_comp += 1
        elif cat == CAT_MEM:
            st.instr_mem += 1
        elif cat == CAT_LOOP:
            st.instr_loop += 1
        elif cat == CAT_PRED:
            st.instr_pred += 1
        else:
            st.instr_other += 1
        if ins.flops:
            st.flops += mask.bit_count()
        if self.trace is not None:
            self.trace.write(
                f"{self.now} w{warp.idx} {pc:#06x} {ins.op} "
                f"{mask:#06x} {CATEGORY_NAMES[cat]}\n")

        popped = self._popped
        popped.clear()
        if self.streams is not None and ins.srcs:
            for space, reg in ins.srcs:
                unit = self._src_unit(warp.idx, space, reg)
                if unit is not None and unit not in popped:
                    popped[unit] = self.streams.pop(unit, warp.idx, mask)

        res = self._handlers[ins.op](self, warp, ins, mask, pc, nxt)

        if ins.dst is not None and res is not None:
            space, reg = ins.dst
            unit = self._dst_unit(warp.idx, space, reg)
            if unit is not None:
                self.streams.push(unit, warp.idx, mask, res)
            else:
                rf = warp.fregs[reg] if space else warp.regs[reg]
                for t in lanes_of(mask):
                    rf[t] = res[t]
                sb = warp.sb_fp if space else warp.sb_int
                sb.add(reg)
                lat = (self.cfg.fpu_latency if ins.unit == 1
                       else self.cfg.csr_latency if ins.unit == 3
                       else self.cfg.alu_latency)
                self.schedule(self.now + lat, "rel",
                              (warp.idx, space, reg))
        self._last_progress = self.now

    # instruction source helpers; stream-mapped registers read from the
    # values popped for this instruction
    def _xs(self, warp, reg):
        if self.streams is not None:
            unit = self._src_unit(warp.idx, 0, reg)
            if unit is not None:
                return self._popped[unit]
        return warp.regs[reg]

    def _fs(self, warp, reg):
        if self.streams is not None:
            unit = self._src_unit(warp.idx, 1, reg)
            if unit is not None:
                return self._popped[unit]
        return warp.fregs[reg]

    def _uniform(self, vals, mask, what):
        lanes = lanes_of(mask)
        if not lanes:
            raise SimulationError(f"{what} read under an empty thread mask")
        v0 = vals[lanes[0]]
        for t in lanes:
            if vals[t] != v0:
                raise SimulationError(
                    f"{what} must be warp-uniform (lane {t} disagrees)")
        return v0

    def _ctrl(self, warp, new_pc, new_mask, special=None):
        self.schedule(self.now + self.cfg.alu_latency, "ctrl",
                      (warp.idx, new_pc, new_mask, special))

    # ------------------------------------------------------------------
    # memory stage

    def _memory_stage(self):
        lsu_req = None
        head = self.lsu_queue[0] if self.lsu_queue else None
        if head is not None:
            shared, line, _ = head.groups[head.gi]
            if shared:
                done = self.msys.shared_access(self.now)
                self._advance_lsu(head, done)
                head = self.lsu_queue[0] if self.lsu_queue else None
                lsu_req = None
            else:
                lsu_req = MemReq(-1, line, head.is_store, 0, head)
        stream_reqs = None
        if self.streams is not None:
            stream_reqs = []
            for u in range(self.cfg.stream_units):
                req = self.streams.make_request(u, self.now)
                if req is not None:
                    stream_reqs.append(req)
        if lsu_req is None and not stream_reqs:
            return False
        grants = self.msys.arbitrate(self.now, lsu_req, stream_reqs)
        for req, done, _kind in grants:
            if req.origin == -1:
                self._advance_lsu(req.tag, done)
            else:
                self.streams.apply_grant(req.tag, done, self.schedule)
        if grants:
            self._last_progress = self.now
        return bool(grants)

    def _advance_lsu(self, entry, done):
        entry.gi += 1
        entry.outstanding += 1
        self.schedule(done, "lsu_done", entry)
        if entry.gi >= len(entry.groups):
            self.lsu_queue.popleft()

    # ------------------------------------------------------------------
    # fetch

    def _fetch(self):
        W = self.cfg.warps
        for i in range(W):
            warp = self.warps[(self.last_fetch + 1 + i) % W]
            if (not warp.active or warp.halted or warp.fetch_wait
                    or warp.barrier is not None
                    or len(warp.ibuf) >= self.cfg.ibuffer_depth):
                continue
            self.last_fetch = warp.idx
            pc = warp.pc
            idx = (pc - self.text_base) >> 2
            if pc % 4 or not 0 <= idx < len(self.image):
                raise IllegalInstruction(
                    f"warp {warp.idx} fetches {pc:#x}: outside program")
            if self.loops is not None:
                nxt, mask = self.loops.step(warp.idx, pc, warp.mask,
                                            len(warp.div_stack))
                nxt = pc + 4 if nxt is None else nxt
            else:
                nxt, mask = pc + 4, warp.mask
            ins = self.image[idx]
            warp.ibuf.append((ins, mask, pc, nxt, self.cats[idx]))
            if self.fetch_log is not None:
                self.fetch_log.append((warp.idx, pc, mask))
            if ins.is_control:
                warp.fetch_wait = True
            else:
                warp.pc = nxt
            self._last_progress = self.now
            return True
        return False

    # ------------------------------------------------------------------
    # main loop

    def _finished(self):
        for warp in self.warps:
            if warp.active and not warp.halted:
                return False
            if warp.ibuf:
                return False
        if self.events or self.lsu_queue:
            return False
        if self.streams is not None and self.streams.busy():
            return False
        return True

    def run(self, max_cycles=None):
        st = self.stats
        while not self._finished():
            self.now += 1
            if max_cycles is not None and self.now > max_cycles:
                raise SimulationError(
                    f"cycle budget of {max_cycles} exhausted")
            if self.now - self._last_progress > self.watchdog:
                raise DeadlockError(
                    f"no progress for {self.watchdog} cycles at cycle "
                    f"{self.now} (waiting on streams or barriers?)")
            self._process_events()
            issued, block = self._issue()
            granted = self._memory_stage()
            fetched = self._fetch()
            if issued:
                continue
            span = 1
            if not fetched and not granted:
                if not self.events:
                    if self._finished():
                        break
                    raise DeadlockError(
                        f"cycle {self.now}: no runnable work and no "
                        "pending completions (barrier mismatch?)")
                # nothing can change until the next completion; jump there
                nxt_t = self.events[0][0]
                if nxt_t > self.now + 1:
                    span = nxt_t - self.now
                    self.now = nxt_t - 1
            if block == "stream":
                st.stall_stream += span
            elif block == "depend":
                st.stall_depend += span
            elif any(w.active and not w.halted for w in self.warps):
                st.stall_fetch += span
            else:
                st.idle += span
        st.cycles = self.now
        ms = self.msys.stats
        st.cache_hits += ms.hits
        st.cache_misses += ms.misses
        st.cache_merges += ms.merges
        st.evictions += ms.evictions
        st.writebacks += ms.writebacks
        st.bank_conflicts += ms.bank_conflicts
        st.mshr_stalls += ms.mshr_stalls
        st.lsu_grants += ms.lsu_grants
        st.stream_grants += ms.stream_grants
        st.shared_accesses += ms.shared_accesses
        if self.streams is not None:
            ss = self.streams.stats
            st.stream_read_lines += ss.read_lines
            st.stream_write_lines += ss.write_lines
            st.stream_fills += ss.fills
            st.stream_drains += ss.drains
            self.streams.final_check()
        return st


# ---------------------------------------------------------------------------
# instruction handlers: functional execution at issue time


def _h_int_rr(fn):
    def h(core, warp, ins, mask, pc, nxt):
        a = core._xs(warp, ins.rs1)
        b = core._xs(warp, ins.rs2)
        res = [0] * core.cfg.threads
        for t in lanes_of(mask):
            res[t] = fn(a[t], b[t])
        return res
    return h


def _h_int_ri(fn):
    def h(core, warp, ins, mask, pc, nxt):
        a = core._xs(warp, ins.rs1)
        imm = ins.imm
        res = [0] * core.cfg.threads
        for t in lanes_of(mask):
            res[t] = fn(a[t], imm)
        return res
    return h


def _h_lui(core, warp, ins, mask, pc, nxt):
    v = (ins.imm << 12) & M32
    return [v] * core.cfg.threads


def _h_jal(core, warp, ins, mask, pc, nxt):
    core._ctrl(warp, (pc + ins.imm) & M32, None)
    link = (pc + 4) & M32
    return [link] * core.cfg.threads


def _h_jalr(core, warp, ins, mask, pc, nxt):
    base = core._uniform(core._xs(warp, ins.rs1), mask, "jalr target")
    core._ctrl(warp, (base + ins.imm) & M32 & ~1, None)
    link = (pc + 4) & M32
    return [link] * core.cfg.threads


def _h_branch(cmp):
    def h(core, warp, ins, mask, pc, nxt):
        lanes = lanes_of(mask)
        if not lanes:
            core._ctrl(warp, nxt, None)  # fully predicated off: fall through
            return None
        a = core._xs(warp, ins.rs1)
        b = core._xs(warp, ins.rs2)
        t0 = lanes[0]
        taken = cmp(a[t0], b[t0])
        for t in lanes:
            if cmp(a[t], b[t]) != taken:
                raise SimulationError(
                    "divergent branch: use split/join for thread-dependent "
                    f"control flow (pc {pc:#x})")
        core._ctrl(warp, (pc + ins.imm) & M32 if taken else nxt, None)
        return None
    return h


def _h_fp_rr(fn):
    def h(core, warp, ins, mask, pc, nxt):
        a = core._fs(warp, ins.rs1)
        b = core._fs(warp, ins.rs2)
        res = [0.0] * core.cfg.threads
        for t in lanes_of(mask):
            res[t] = fn(a[t], b[t])
        return res
    return h


def _h_fmadd(core, warp, ins, mask, pc, nxt):
    a = core._fs(warp, ins.rs1)
    b = core._fs(warp, ins.rs2)
    c = core._fs(warp, ins.rs3)
    fmadd = fp32.fmadd
    res = [0.0] * core.cfg.threads
    for t in lanes_of(mask):
        res[t] = fmadd(a[t], b[t], c[t])
    return res


def _h_flt(core, warp, ins, mask, pc, nxt):
    a = core._fs(warp, ins.rs1)
    b = core._fs(warp, ins.rs2)
    res = [0] * core.cfg.threads
    for t in lanes_of(mask):
        res[t] = 1 if a[t] < b[t] else 0
    return res


def _h_load(core, warp, ins, mask, pc, nxt):
    base = core._xs(warp, ins.rs1)
    imm = ins.imm
    mem = core.msys.memory
    fp = ins.op == "flw"
    res = [0.0] * core.cfg.threads if fp else [0] * core.cfg.threads
    groups = {}
    lsz = core.msys.line_size
    for t in lanes_of(mask):
        addr = (base[t] + imm) & M32
        raw = mem.load(addr)
        res[t] = fp32.from_bits(raw) if fp else raw
        shared = mem.is_shared(addr)
        key = (shared, addr // lsz if not shared else addr)
        groups[key] = groups.get(key, 0) + 1
    space = 1 if fp else 0
    dst = ins.dst
    mapped = dst is not None and core._dst_unit(warp.idx, *dst) is not None
    if groups:
        entry = _LsuEntry(
            [(s, l, n) for (s, l), n in sorted(groups.items())],
            warp.idx, None if mapped else dst, False)
        core.lsu_queue.append(entry)
    if dst is not None and not mapped and groups:
        # held in the scoreboard until the last line arrives
        sb = warp.sb_fp if space else warp.sb_int
        sb.add(dst[1])
        rf = warp.fregs[dst[1]] if space else warp.regs[dst[1]]
        for t in lanes_of(mask):
            rf[t] = res[t]
        return None
    return res if mapped else None


def _h_store(core, warp, ins, mask, pc, nxt):
    base = core._xs(warp, ins.rs1)
    imm = ins.imm
    mem = core.msys.memory
    fp = ins.op == "fsw"
    vals = core._fs(warp, ins.rs2) if fp else core._xs(warp, ins.rs2)
    groups = {}
    lsz = core.msys.line_size
    for t in lanes_of(mask):
        addr = (base[t] + imm) & M32
        mem.store(addr, fp32.to_bits(vals[t]) if fp else vals[t])
        shared = mem.is_shared(addr)
        key = (shared, addr // lsz if not shared else addr)
        groups[key] = groups.get(key, 0) + 1
    if groups:
        entry = _LsuEntry(
            [(s, l, n) for (s, l), n in sorted(groups.items())],
            warp.idx, None, True)
        core.lsu_queue.append(entry)
    return None


def _h_tmc(core, warp, ins, mask, pc, nxt):
    vals = core._xs(warp, ins.rs1)
    new_mask = 0
    for t in range(core.cfg.threads):
        if vals[t]:
            new_mask |= 1 << t
    core._ctrl(warp, nxt, new_mask, ("tmc",))
    return None


def _h_wspawn(core, warp, ins, mask, pc, nxt):
    count = core._uniform(core._xs(warp, ins.rs1), mask, "wspawn count")
    target = core._uniform(core._xs(warp, ins.rs2), mask, "wspawn target")
    core._ctrl(warp, nxt, None, ("wspawn", count, target))
    return None


def _h_split(core, warp, ins, mask, pc, nxt):
    # Layout contract: the taken body follows the split and ends with a
    # join, the else body starts at the address in rs2 and also ends with
    # a join. Either side may run with an empty mask when the predicate is
    # warp-uniform; that keeps join arrivals statically balanced.
    if len(warp.div_stack) >= core.cfg.stack_limit:
        raise DivergenceError("divergence stack overflow")
    pred = core._xs(warp, ins.rs1)
    addr_vals = core._xs(warp, ins.rs2)
    lanes = lanes_of(mask)
    else_pc = (core._uniform(addr_vals, mask, "split else address")
               if lanes else addr_vals[0])
    taken = 0
    for t in lanes:
        if pred[t]:
            taken |= 1 << t
    # Frames are stored in divergence-mask space, not the loop-shaped
    # execution mask: a tail mask folded into the frame here would stay
    # welded onto the warp after the loop exits.
    base = warp.mask
    warp.div_stack.append(_DivFrame(base, base & ~taken, else_pc))
    core._ctrl(warp, nxt, taken)
    return None


def _h_join(core, warp, ins, mask, pc, nxt):
    if not warp.div_stack:
        raise DivergenceError("join without a matching split")
    frame = warp.div_stack[-1]
    if frame.pending:
        frame.pending = False
        core._ctrl(warp, frame.else_pc, frame.else_mask)
    else:
        warp.div_stack.pop()
        core._ctrl(warp, nxt, frame.saved_mask)
    return None


def _h_bar(core, warp, ins, mask, pc, nxt):
    bar_id = core._uniform(core._xs(warp, ins.rs1), mask, "barrier id")
    count = core._uniform(core._xs(warp, ins.rs2), mask, "barrier count")
    core._ctrl(warp, nxt, None, ("bar", bar_id, count))
    return None


def _h_halt(core, warp, ins, mask, pc, nxt):
    core._ctrl(warp, nxt, None, ("halt",))
    return None


def _csr_read_vec(core, warp, addr, mask):
    """Returns a per-thread value list for any readable CSR."""
    T = core.cfg.threads
    if addr == CSR_TID:
        return list(range(T))
    if addr == CSR_WID:
        return [warp.idx] * T
    if addr == CSR_NTID:
        return [T] * T
    if addr == CSR_NWID:
        return [core.cfg.warps] * T
    ext = decode_ext(addr)
    if ext is None:
        raise IllegalInstruction(f"csr {addr:#x} not implemented")
    unit_type, unit_id, reg = ext
    if unit_type == UNIT_LOOP:
        if core.loops is None:
            raise SimulationError(
                "loop unit CSR access without the hwloop extension")
        return [core.loops.csr_read(unit_id, reg, warp.idx)] * T
    if core.streams is None:
        raise SimulationError(
            "stream unit CSR access without the streams extension")
    v = core.streams.csr_read(unit_id, reg, warp.idx)
    return list(v) if isinstance(v, list) else [v] * T


def _csr_write_vec(core, warp, addr, values, mask):
    ext = decode_ext(addr)
    if ext is None:
        raise IllegalInstruction(f"csr {addr:#x} is read-only")
    unit_type, unit_id, reg = ext
    if unit_type == UNIT_LOOP:
        if core.loops is None:
            raise SimulationError(
                "loop unit CSR access without the hwloop extension")
        v0 = values[lanes_of(mask)[0]]
        core.loops.csr_write(unit_id, reg, v0, warp.idx)
    else:
        if core.streams is None:
            raise SimulationError(
                "stream unit CSR access without the streams extension")
        core.streams.csr_write(unit_id, reg, warp.idx, values, mask)


def _h_csr(core, warp, ins, mask, pc, nxt):
    if mask == 0:
        if ins.is_control:
            core._ctrl(warp, nxt, None)
        return None
    old = _csr_read_vec(core, warp, ins.imm, mask)
    op = ins.op
    T = core.cfg.threads
    if op in ("csrrw", "csrrs", "csrrc"):
        rs = core._xs(warp, ins.rs1) if ins.rs1 else [0] * T
        write = op == "csrrw" or ins.rs1 != 0
    else:
        rs = [ins.rs1] * T
        write = op == "csrrwi" or ins.rs1 != 0
    if write:
        if op in ("csrrw", "csrrwi"):
            new = rs if isinstance(rs, list) else list(rs)
        elif op in ("csrrs", "csrrsi"):
            new = [old[t] | rs[t] for t in range(T)]
        else:
            new = [old[t] & ~rs[t] & M32 for t in range(T)]
        _csr_write_vec(core, warp, ins.imm, new, mask)
    if ins.is_control:
        core._ctrl(warp, nxt, None)
    return old if ins.rd else None


def _sra32(a, sh):
    return (_sx(a) >> (sh & 31)) & M32


_HANDLERS = {
    "lui": _h_lui,
    "jal": _h_jal,
    "jalr": _h_jalr,
    "beq": _h_branch(lambda a, b: a == b),
    "bne": _h_branch(lambda a, b: a != b),
    "blt": _h_branch(lambda a, b: _sx(a) < _sx(b)),
    "bge": _h_branch(lambda a, b: _sx(a) >= _sx(b)),
    "bltu": _h_branch(lambda a, b: a < b),
    "bgeu": _h_branch(lambda a, b: a >= b),
    "lw": _h_load,
    "flw": _h_load,
    "sw": _h_store,
    "fsw": _h_store,
    "addi": _h_int_ri(lambda a, i: (a + i) & M32),
    "slti": _h_int_ri(lambda a, i: 1 if _sx(a) < i else 0),
    "sltiu": _h_int_ri(lambda a, i: 1 if a < (i & M32) else 0),
    "xori": _h_int_ri(lambda a, i: (a ^ i) & M32),
    "ori": _h_int_ri(lambda a, i: (a | i) & M32),
    "andi": _h_int_ri(lambda a, i: a & i & M32),
    "slli": _h_int_ri(lambda a, i: (a << i) & M32),
    "srli": _h_int_ri(lambda a, i: a >> i),
    "srai": _h_int_ri(_sra32),
    "add": _h_int_rr(lambda a, b: (a + b) & M32),
    "sub": _h_int_rr(lambda a, b: (a - b) & M32),
    "sll": _h_int_rr(lambda a, b: (a << (b & 31)) & M32),
    "slt": _h_int_rr(lambda a, b: 1 if _sx(a) < _sx(b) else 0),
    "sltu": _h_int_rr(lambda a, b: 1 if a < b else 0),
    "xor": _h_int_rr(lambda a, b: a ^ b),
    "srl": _h_int_rr(lambda a, b: a >> (b & 31)),
    "sra": _h_int_rr(_sra32),
    "or": _h_int_rr(lambda a, b: a | b),
    "and": _h_int_rr(lambda a, b: a & b),
    "fadd.s": _h_fp_rr(fp32.fadd),
    "fsub.s": _h_fp_rr(fp32.fsub),
    "fmul.s": _h_fp_rr(fp32.fmul),
    "fmax.s": _h_fp_rr(fp32.fmax),
    "flt.s": _h_flt,
    "fmadd.s": _h_fmadd,
    "csrrw": _h_csr,
    "csrrs": _h_csr,
    "csrrc": _h_csr,
    "csrrwi": _h_csr,
    "csrrsi": _h_csr,
    "csrrci": _h_csr,
    "tmc": _h_tmc,
    "wspawn": _h_wspawn,
    "split": _h_split,
    "join": _h_join,
    "bar": _h_bar,
    "halt": _h_halt,
}
