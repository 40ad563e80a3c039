"""Benchmark harness: build, run, verify, reduce to metric rows.

Every run is checked bit-for-bit against the benchmark's golden model
before any metric is reported; a mismatch aborts the row with the first
differing element. Speedup and instruction reduction are always relative
to the base variant at the same workload point, so base rows carry 1.0
in both columns by construction.

Matrix and sweep entry points accept a worker count and farm runs out to
a process pool, merging results in a fixed key order so the emitted CSV
is byte-identical for a given config and seed regardless of scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import CoreConfig, VARIANTS
from .core import Core, RunStats
from .errors import GoldenMismatch
from .kernels import ALL_VARIANTS, BENCHMARKS, build
from .kernels.common import BuildError

CSV_FIELDS = (
    "benchmark", "variant", "W", "T", "P", "R", "C", "point", "cycles",
    "instr_total", "instr_loop", "instr_pred", "instr_mem", "instr_comp",
    "flops", "utilization", "speedup", "instr_reduction",
)
CSV_HEADER = ",".join(CSV_FIELDS)

# Benchmarks whose workload cannot be split into independent 1-D shares.
_UNPARTITIONABLE = frozenset({"sgemm", "conv2d"})


@dataclass
class MetricRow:
    benchmark: str
    variant: str
    W: int
    T: int
    P: int
    R: int
    C: int
    point: int
    cycles: int
    instr_total: int
    instr_loop: int
    instr_pred: int
    instr_mem: int
    instr_comp: int
    flops: int
    utilization: float
    speedup: float = 1.0
    instr_reduction: float = 1.0

    def key(self):
        return (self.benchmark, self.variant, self.point)

    def to_csv(self) -> str:
        return (
            f"{self.benchmark},{self.variant},{self.W},{self.T},{self.P},"
            f"{self.R},{self.C},{self.point},{self.cycles},"
            f"{self.instr_total},{self.instr_loop},{self.instr_pred},"
            f"{self.instr_mem},{self.instr_comp},{self.flops},"
            f"{self.utilization:.6f},{self.speedup:.6f},"
            f"{self.instr_reduction:.6f}"
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in CSV_FIELDS}


def _load_inputs(core: Core, image) -> None:
    for addr, blob in image.input_bytes():
        core.msys.memory.write_block(addr, blob)


def _verify(core: Core, image) -> None:
    for chk in image.checks:
        raw = core.msys.memory.read_block(chk.addr, 4 * chk.span_words)
        kind = "<f4" if chk.expect.dtype.kind == "f" else "<i4"
        got = chk.extract(np.frombuffer(raw, kind))
        exp = np.ascontiguousarray(chk.expect).reshape(-1)
        gu, eu = got.view("<u4"), exp.view("<u4")
        if not np.array_equal(gu, eu):
            i = int(np.nonzero(gu != eu)[0][0])
            raise GoldenMismatch(image.name, chk.name, i,
                                 exp[i].item(), got[i].item())


def run_one(cfg: CoreConfig, bench: str, variant: str, point: int,
            seed: int, *, trace=None,
            max_cycles: int | None = None) -> tuple[MetricRow, RunStats]:
    """Run one benchmark variant at one workload point and verify it.

    With cfg.cores > 1 the workload is split into near-equal element
    shares, one independent core (private cache and memory) per share;
    reported cycles are the slowest core's and counters are summed.
    """
    shares = _partition(bench, point, cfg.cores)
    total = RunStats(issue_hist=[])
    cycles = 0
    for idx, share in enumerate(shares):
        image = build(bench, cfg, variant, share, seed + idx)
        core = Core(cfg, image.program,
                    extensions=VARIANTS[variant], trace=trace)
        _load_inputs(core, image)
        core.run(max_cycles=max_cycles)
        _verify(core, image)
        cycles = max(cycles, core.stats.cycles)
        total.merge(core.stats)
    total.cycles = cycles
    row = MetricRow(
        benchmark=bench, variant=variant, W=cfg.warps, T=cfg.threads,
        P=cfg.cache_ports, R=cfg.stream_units, C=cfg.stream_credits,
        point=point, cycles=total.cycles, instr_total=total.instrs,
        instr_loop=total.instr_loop, instr_pred=total.instr_pred,
        instr_mem=total.instr_mem, instr_comp=total.instr_comp,
        flops=total.flops,
        utilization=total.utilization(cfg.threads * len(shares)),
    )
    return row, total


def run_single(cfg: CoreConfig, bench: str, variant: str, point: int,
               seed: int, *, trace=None) -> tuple[list[MetricRow], RunStats]:
    """One verified run plus its base reference for the ratio columns.

    Returns the metric rows (base first when the variant is not base)
    and the RunStats of the requested variant.
    """
    row, stats = run_one(cfg, bench, variant, point, seed, trace=trace)
    rows = [row]
    if variant != "base":
        base, _ = run_one(cfg, bench, "base", point, seed)
        row.speedup = base.cycles / row.cycles
        row.instr_reduction = base.instr_total / row.instr_total
        rows = [base, row]
    return rows, stats


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv() for r in rows]) + "\n"


def _partition(bench: str, point: int, cores: int) -> list[int]:
    if cores <= 1:
        return [point]
    if bench in _UNPARTITIONABLE:
        raise BuildError(
            f"{bench} works on a square grid and does not split into "
            f"independent per-core shares; run it with cores=1")
    base, extra = divmod(point, cores)
    shares = [base + (1 if i < extra else 0) for i in range(cores)]
    if shares[-1] <= 0:
        raise BuildError(f"workload {point} is smaller than {cores} cores")
    return shares


def _matrix_task(args):
    cfg, bench, variant, point, seed = args
    row, stats = run_one(cfg, bench, variant, point, seed)
    return row, stats.bank_conflicts


@dataclass
class MatrixResult:
    rows: list[MetricRow]
    aggregates: dict[str, dict]
    config: dict
    seed: int
    bank_conflicts: dict[tuple, int] = field(default_factory=dict)

    def row(self, bench: str, variant: str, point: int) -> MetricRow:
        for r in self.rows:
            if r.key() == (bench, variant, point):
                return r
        raise KeyError((bench, variant, point))

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.to_csv() for r in self.rows]) + "\n"

    def to_json_obj(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "rows": [r.to_dict() for r in self.rows],
            "aggregates": self.aggregates,
        }


def _geomean(vals) -> float:
    return math.exp(sum(math.log(v) for v in vals) / len(vals))


def run_matrix(cfg: CoreConfig, seed: int, *, benches=None, variants=None,
               points=None, workers: int | None = None) -> MatrixResult:
    """Run a benchmark x variant x point grid and attach ratio columns.

    variants=None means every variant a benchmark supports. When an
    explicit variant list omits "base" it is still run as the speedup
    reference, and reported. Explicit points apply to every benchmark;
    by default each sweeps its registry points.
    """
    explicit = benches is not None
    names = list(benches) if explicit else list(BENCHMARKS)
    if variants is not None:
        for var in variants:
            if var not in VARIANTS:
                raise BuildError(f"unknown variant {var!r}; "
                                 f"choose from {list(VARIANTS)}")
    tasks = []
    plan = []
    for name in names:
        if name not in BENCHMARKS:
            raise BuildError(f"unknown benchmark {name!r}; "
                             f"choose from {sorted(BENCHMARKS)}")
        spec = BENCHMARKS[name]
        if variants is None:
            vlist = list(spec.variants)
        else:
            vlist = list(variants)
            if "base" not in vlist:
                vlist = ["base"] + vlist
            if not explicit:
                # a variant filter over the default benchmark set skips
                # benchmarks that lack the variant instead of failing
                vlist = [v for v in vlist if v in spec.variants]
        vlist.sort(key=ALL_VARIANTS.index)
        plist = list(points) if points else list(spec.points)
        plan.append((name, vlist, plist))
        for pt in plist:
            for var in vlist:
                tasks.append((cfg, name, var, pt, seed))

    results = _run_tasks(tasks, workers)

    rows: list[MetricRow] = []
    conflicts: dict[tuple, int] = {}
    for (cfg_, name, var, pt, _), (row, bc) in zip(tasks, results):
        conflicts[(name, var, pt)] = bc
    by_key = {row.key(): row for row, _ in results}
    for name, vlist, plist in plan:
        for var in vlist:
            for pt in plist:
                row = by_key[(name, var, pt)]
                base = by_key[(name, "base", pt)]
                if var != "base":
                    row.speedup = base.cycles / row.cycles
                    row.instr_reduction = base.instr_total / row.instr_total
                rows.append(row)

    aggregates = {}
    for name, vlist, plist in plan:
        for var in vlist:
            sel = [by_key[(name, var, pt)] for pt in plist]
            aggregates[f"{name}/{var}"] = {
                "mean_speedup": sum(r.speedup for r in sel) / len(sel),
                "geomean_speedup": _geomean([r.speedup for r in sel]),
                "mean_instr_reduction":
                    sum(r.instr_reduction for r in sel) / len(sel),
                "geomean_instr_reduction":
                    _geomean([r.instr_reduction for r in sel]),
                "mean_utilization":
                    sum(r.utilization for r in sel) / len(sel),
            }
    return MatrixResult(rows=rows, aggregates=aggregates,
                        config=cfg.to_dict(), seed=seed,
                        bank_conflicts=conflicts)


def _run_tasks(tasks, workers):
    if workers is None:
        workers = min(os.cpu_count() or 1, 8)
    if workers <= 1 or len(tasks) <= 1:
        return [_matrix_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_matrix_task, tasks, chunksize=4))


@dataclass
class SweepEntry:
    axis: str
    W: int
    T: int
    speedups: dict[str, float]
    avg_speedup: float
    sgemm_conflicts: int

    def to_dict(self) -> dict:
        return {"axis": self.axis, "W": self.W, "T": self.T,
                "speedups": self.speedups, "avg_speedup": self.avg_speedup,
                "sgemm_conflicts": self.sgemm_conflicts}


def scalability_sweep(cfg: CoreConfig, seed: int, *,
                      threads_axis=(4, 8, 16, 32), warps_axis=(2, 4, 8),
                      workers: int | None = None) -> list[SweepEntry]:
    """Full-vs-base speedup across machine widths.

    The thread axis sweeps T at W=8 and the warp axis sweeps W at T=16.
    Workload points are normalized to W*T so per-thread work stays
    comparable across machine sizes. gcn_aggr has no full variant and
    sits out.
    """
    shapes = [("T", 8, t) for t in threads_axis]
    shapes += [("W", w, 16) for w in warps_axis]
    specs = [s for s in BENCHMARKS.values() if s.scalability]

    cache: dict[tuple[int, int], tuple[dict, int]] = {}
    pending = []
    for _, w, t in shapes:
        if (w, t) in cache or (w, t) in {p[:2] for p in pending}:
            continue
        pending.append((w, t))
    tasks = []
    for w, t in pending:
        shaped = cfg.with_(warps=w, threads=t)
        for spec in specs:
            pt = spec.scaled_point(w, t)
            for var in ("base", "full"):
                tasks.append((shaped, spec.name, var, pt, seed))
    raw = _run_tasks(tasks, workers)
    results = {}
    for (shaped, name, var, pt, _), res in zip(tasks, raw):
        results[(name, var, pt, shaped.warps, shaped.threads)] = res

    entries = []
    for axis, w, t in shapes:
        if (w, t) not in cache:
            speedups = {}
            conflicts = 0
            for spec in specs:
                pt = spec.scaled_point(w, t)
                base, _ = results[(spec.name, "base", pt, w, t)]
                full, bc = results[(spec.name, "full", pt, w, t)]
                speedups[spec.name] = base.cycles / full.cycles
                if spec.name == "sgemm":
                    conflicts = bc
            cache[(w, t)] = (speedups, conflicts)
        speedups, conflicts = cache[(w, t)]
        entries.append(SweepEntry(
            axis=axis, W=w, T=t, speedups=dict(speedups),
            avg_speedup=sum(speedups.values()) / len(speedups),
            sgemm_conflicts=conflicts))
    return entries


def port_sweep(cfg: CoreConfig, seed: int, *, bench: str = "saxpy",
               variant: str = "full", ports=(1, 2, 3),
               point: int | None = None) -> list[dict]:
    """Cycles for one benchmark as the cache port count varies."""
    if point is None:
        point = BENCHMARKS[bench].scale_point
    out = []
    for p in ports:
        row, stats = run_one(cfg.with_(cache_ports=p), bench, variant,
                             point, seed)
        out.append({"P": p, "cycles": row.cycles,
                    "bank_conflicts": stats.bank_conflicts,
                    "mshr_stalls": stats.mshr_stalls})
    for entry in out:
        entry["speedup_vs_p1"] = out[0]["cycles"] / entry["cycles"]
    return out
