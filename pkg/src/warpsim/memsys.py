"""Memory system: flat backing store, banked L1, request arbitration.

The functional and timing sides are split on purpose. Functional reads and
writes hit the flat byte array immediately (values are snapshotted when a
request is formed), while the L1 model only answers "when would this request
complete". The core owns the event queue; this module just prices requests.

L1 geometry: `cache_banks` banks, each `sets_per_bank` sets of `cache_ways`
lines. A line maps to bank `line % banks`, so buffers laid out with a line
stride that is coprime to the bank count spread across all banks. Misses
allocate an MSHR (at most `mshr_per_bank` outstanding per bank); a request
for a line already in flight merges with the pending fill instead of taking
a new MSHR. Write policy is write-back, write-allocate.

Arbitration: the L1 accepts `cache_ports` requests per cycle, at most one
per bank. Port 0 belongs to the load-store unit; stream units share the rest
and may borrow port 0 on cycles the LSU leaves it idle. Stream requests are
served most-starved first: reads rank by free credit slots, writes by
buffered occupancy, ties go to the lower unit index.
"""

from dataclasses import dataclass, fields

from .errors import MemoryFault
from .fp32 import from_bits, to_bits


class Memory:
    """Flat little-endian backing store plus a scratchpad window."""

    def __init__(self, cfg):
        self.size = cfg.mem_size
        self.data = bytearray(cfg.mem_size)
        self.shared_base = cfg.shared_base
        self.shared_size = cfg.shared_size
        self.shared = bytearray(cfg.shared_size)

    def _buf(self, addr, n):
        if 0 <= addr and addr + n <= self.size:
            return self.data, addr
        off = addr - self.shared_base
        if 0 <= off and off + n <= self.shared_size:
            return self.shared, off
        raise MemoryFault(f"access to {addr:#x} ({n} bytes) out of range")

    def is_shared(self, addr):
        return self.shared_base <= addr < self.shared_base + self.shared_size

    def load(self, addr, size=4):
        if addr % size:
            raise MemoryFault(f"unaligned {size}-byte load at {addr:#x}")
        buf, off = self._buf(addr, size)
        return int.from_bytes(buf[off:off + size], "little")

    def store(self, addr, value, size=4):
        if addr % size:
            raise MemoryFault(f"unaligned {size}-byte store at {addr:#x}")
        buf, off = self._buf(addr, size)
        buf[off:off + size] = (value & ((1 << (8 * size)) - 1)).to_bytes(
            size, "little")

    def load_f32(self, addr):
        return from_bits(self.load(addr))

    def store_f32(self, addr, value):
        self.store(addr, to_bits(value))

    def write_block(self, addr, blob):
        buf, off = self._buf(addr, len(blob))
        buf[off:off + len(blob)] = blob

    def read_block(self, addr, n):
        buf, off = self._buf(addr, n)
        return bytes(buf[off:off + n])


@dataclass
class MemStats:
    hits: int = 0
    misses: int = 0
    merges: int = 0
    evictions: int = 0
    writebacks: int = 0
    bank_conflicts: int = 0
    mshr_stalls: int = 0
    lsu_grants: int = 0
    stream_grants: int = 0
    shared_accesses: int = 0

    def merge(self, other):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name)
                    + getattr(other, f.name))


class MemReq:
    """One line-sized request candidate for this cycle's arbitration."""

    __slots__ = ("origin", "line", "is_write", "need", "tag")

    def __init__(self, origin, line, is_write, need, tag=None):
        self.origin = origin      # -1 for the LSU, else stream unit index
        self.line = line          # line index (byte address // line_size)
        self.is_write = is_write
        self.need = need
        self.tag = tag            # opaque payload handed back on grant


class _Bank:
    __slots__ = ("sets", "mshr")

    def __init__(self, n_sets):
        self.sets = [[] for _ in range(n_sets)]  # each: [tag, dirty], MRU first
        self.mshr = {}                           # line -> fill time


class MemSystem:
    def __init__(self, cfg):
        self.cfg = cfg
        self.memory = Memory(cfg)
        self.line_size = cfg.line_size
        self.n_banks = cfg.cache_banks
        self.sets_per_bank = cfg.sets_per_bank
        self.banks = [_Bank(self.sets_per_bank) for _ in range(self.n_banks)]
        self.stats = MemStats()
        self.grant_log = None     # set to a list to record every grant
        self._shared_free = 0

    def line_of(self, addr):
        return addr // self.line_size

    def bank_of(self, line):
        return line % self.n_banks

    def _prune(self, bank, now):
        if bank.mshr:
            dead = [l for l, t in bank.mshr.items() if t <= now]
            for l in dead:
                del bank.mshr[l]

    def _access(self, line, is_write, now):
        """Price one granted request. Returns (completion, kind) or None
        when the bank is out of MSHRs for a miss."""
        bank = self.banks[self.bank_of(line)]
        self._prune(bank, now)
        fill = bank.mshr.get(line)
        if fill is not None:
            self.stats.merges += 1
            if is_write:
                self._set_dirty(bank, line)
            return fill, "merge"
        s = bank.sets[(line // self.n_banks) % self.sets_per_bank]
        for i, entry in enumerate(s):
            if entry[0] == line:
                if i:
                    s.insert(0, s.pop(i))
                if is_write:
                    entry[1] = True
                self.stats.hits += 1
                return now + self.cfg.hit_latency, "hit"
        if len(bank.mshr) >= self.cfg.mshr_per_bank:
            return None
        if len(s) >= self.cfg.cache_ways:
            victim = s.pop()
            self.stats.evictions += 1
            if victim[1]:
                self.stats.writebacks += 1
        s.insert(0, [line, is_write])
        fill = now + self.cfg.miss_latency
        bank.mshr[line] = fill
        self.stats.misses += 1
        return fill, "miss"

    def _set_dirty(self, bank, line):
        s = bank.sets[(line // self.n_banks) % self.sets_per_bank]
        for entry in s:
            if entry[0] == line:
                entry[1] = True
                return

    def shared_access(self, now):
        """Scratchpad window: fixed latency, one access per cycle."""
        start = max(now, self._shared_free)
        self._shared_free = start + 1
        self.stats.shared_accesses += 1
        return start + self.cfg.shared_latency

    def arbitrate(self, now, lsu_req, stream_reqs):
        """Grant up to cache_ports requests, one per bank. Returns a list of
        (req, completion_time, kind)."""
        grants = []
        busy = set()
        ports = self.cfg.cache_ports
        if lsu_req is not None:
            priced = self._access(lsu_req.line, lsu_req.is_write, now)
            if priced is None:
                self.stats.mshr_stalls += 1
            else:
                grants.append((lsu_req, priced[0], priced[1]))
                busy.add(self.bank_of(lsu_req.line))
                ports -= 1
                self.stats.lsu_grants += 1
        if stream_reqs:
            for req in sorted(stream_reqs,
                              key=lambda r: (-r.need, r.origin)):
                if ports == 0:
                    break
                b = self.bank_of(req.line)
                if b in busy:
                    self.stats.bank_conflicts += 1
                    continue
                priced = self._access(req.line, req.is_write, now)
                if priced is None:
                    self.stats.mshr_stalls += 1
                    continue
                grants.append((req, priced[0], priced[1]))
                busy.add(b)
                ports -= 1
                self.stats.stream_grants += 1
        if self.grant_log is not None and grants:
            for req, t, kind in grants:
                self.grant_log.append(
                    (now, req.origin, req.line, req.is_write, req.need,
                     t, kind))
        return grants
