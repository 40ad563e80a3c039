"""Zero-overhead hardware loops and the loop predication stack.

Loop configuration (start PC, end PC, trip bound, tail mask) is shared by
all warps on the core; iteration state is per warp. The controller sits on
the fetch path: when a warp fetches the end PC of its innermost running
loop, the next PC is redirected to the loop start and the per-warp counter
advances, with no branch or counter instructions in the instruction stream.

With the predication stack enabled, fetching a loop's start PC for the
first time pushes the enclosing thread mask. While a loop runs, the fetched
instruction's effective mask is

    stack top  AND  tail mask (final iteration only)  AND  divergence mask

so partial tail iterations need no software masking either. The final
back-edge pops the stack and execution falls through with the enclosing
mask restored.

Entry order defines nesting: a loop must finish strictly inside the loop
it was entered under, and split/join divergence opened inside a loop body
must be rejoined before the loop's last back-edge.
"""

from .csr import (LOOP_START, LOOP_END, LOOP_TAIL, LOOP_BOUND, LOOP_STATE,
                  pack_loop_state, unpack_loop_state)
from .errors import DivergenceError, LoopConfigError


class LoopController:
    def __init__(self, cfg, lps_enabled):
        self.levels = cfg.loop_levels
        self.lps_on = lps_enabled
        self.stack_limit = cfg.stack_limit
        L = self.levels
        self.start_pcs = [0] * L
        self.end_pcs = [0] * L
        self.tails = [0] * L
        self.bounds = [0] * L
        self.enables = [False] * L
        self.start_set = set()
        self.end_set = set()
        W = cfg.warps
        self.counters = [[0] * L for _ in range(W)]
        self.order = [[] for _ in range(W)]    # running levels, outer first
        self.stack = [[] for _ in range(W)]    # predication masks
        self.marks = [[(0, 0)] * L for _ in range(W)]

    def reset_warp(self, w):
        self.counters[w] = [0] * self.levels
        self.order[w] = []
        self.stack[w] = []

    def _rebuild_sets(self):
        self.start_set = {self.start_pcs[l] for l in range(self.levels)
                          if self.enables[l]}
        self.end_set = {self.end_pcs[l] for l in range(self.levels)
                        if self.enables[l]}

    def _running_anywhere(self, lvl):
        return any(lvl in order for order in self.order)

    # ------------------------------------------------------------------
    # CSR side

    def csr_write(self, lvl, reg, value, warp):
        if lvl >= self.levels:
            raise LoopConfigError(f"loop level {lvl} not implemented")
        if reg == LOOP_STATE:
            counter, running = unpack_loop_state(value)
            if running != (lvl in self.order[warp]):
                raise LoopConfigError(
                    "loop state writes may adjust the counter but not "
                    "toggle the running flag")
            self.counters[warp][lvl] = counter
            return
        if self._running_anywhere(lvl):
            raise LoopConfigError(
                f"loop level {lvl} reconfigured while running")
        if reg == LOOP_START:
            self.start_pcs[lvl] = value
        elif reg == LOOP_END:
            self.end_pcs[lvl] = value
        elif reg == LOOP_TAIL:
            self.tails[lvl] = value
        elif reg == LOOP_BOUND:
            enable = bool(value >> 31)
            bound = value & 0x7FFFFFFF
            if enable and bound == 0:
                raise LoopConfigError("loop bound must be at least 1")
            self.bounds[lvl] = bound
            self.enables[lvl] = enable
        else:
            raise LoopConfigError(f"loop unit has no register {reg}")
        self._rebuild_sets()

    def csr_read(self, lvl, reg, warp):
        if lvl >= self.levels:
            raise LoopConfigError(f"loop level {lvl} not implemented")
        if reg == LOOP_START:
            return self.start_pcs[lvl]
        if reg == LOOP_END:
            return self.end_pcs[lvl]
        if reg == LOOP_TAIL:
            return self.tails[lvl]
        if reg == LOOP_BOUND:
            return self.bounds[lvl] | (0x80000000 if self.enables[lvl]
                                       else 0)
        if reg == LOOP_STATE:
            return pack_loop_state(self.counters[warp][lvl],
                                   lvl in self.order[warp])
        raise LoopConfigError(f"loop unit has no register {reg}")

    # ------------------------------------------------------------------
    # fetch side

    def step(self, w, pc, fetch_mask, div_depth):
        """Advance loop state for one fetch. Returns (next_pc, mask):
        next_pc is the back-edge redirect or None for sequential flow,
        mask is the effective thread mask for the fetched instruction."""
        order = self.order[w]
        counters = self.counters[w]
        stack = self.stack[w]

        if pc in self.start_set:
            for lvl in range(self.levels):
                if (self.enables[lvl] and self.start_pcs[lvl] == pc
                        and lvl not in order):
                    if self.lps_on:
                        base = stack[-1] if stack else fetch_mask
                        if order:
                            inner = order[-1]
                            if counters[inner] == self.bounds[inner] - 1:
                                base &= self.tails[inner]
                        if len(stack) >= self.stack_limit:
                            raise DivergenceError(
                                "predication stack overflow")
                        stack.append(base)
                    order.append(lvl)
                    counters[lvl] = 0
                    self.marks[w][lvl] = (len(stack), div_depth)

        if not order:
            return None, fetch_mask

        if self.lps_on:
            eff = stack[-1] if stack else fetch_mask
            inner = order[-1]
            if counters[inner] == self.bounds[inner] - 1:
                eff &= self.tails[inner]
            eff &= fetch_mask
        else:
            eff = fetch_mask

        nxt = None
        if pc in self.end_set:
            for lvl in reversed(order):
                if self.end_pcs[lvl] == pc:
                    if counters[lvl] + 1 < self.bounds[lvl]:
                        counters[lvl] += 1
                        nxt = self.start_pcs[lvl]
                    else:
                        if lvl != order[-1]:
                            raise LoopConfigError(
                                "loop finished outside its nesting order")
                        depth, ddepth = self.marks[w][lvl]
                        if self.lps_on:
                            if len(stack) != depth:
                                raise DivergenceError(
                                    "predication stack unbalanced at "
                                    "loop exit")
                            stack.pop()
                        if ddepth != div_depth:
                            raise DivergenceError(
                                "divergence not rejoined before loop exit")
                        order.pop()
                        counters[lvl] = 0
                    break
        return nxt, eff

    def busy(self, w):
        return bool(self.order[w])
