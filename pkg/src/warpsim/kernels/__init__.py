"""Benchmark registry: builders, sweep points, and variant coverage.

Each benchmark sweeps five workload points.  The middle point is the
scale point used for headline speedup comparisons; the largest point is
where instruction-reduction ratios are quoted, since preamble costs
amortize with size.  Point values are benchmark-specific units: element
counts for the 1-D kernels, rows for sgemv, the square dimension for
sgemm and conv2d, vertex count for gcn_aggr.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..config import CoreConfig, VARIANTS
from .common import BuildError, KernelImage, UnsupportedVariant
from .elementwise import build_saxpy, build_vecadd
from .graph import build_gcn, build_knn
from .passes import build_conv2d, build_sfilter, build_sgemv
from .sgemm import build_sgemm

ALL_VARIANTS = ("base", "cfm", "cfm+lps", "full")


@dataclass(frozen=True)
class BenchSpec:
    name: str
    builder: Callable
    points: tuple[int, ...]
    variants: tuple[str, ...] = ALL_VARIANTS
    scalability: bool = True

    @property
    def scale_point(self) -> int:
        return self.points[len(self.points) // 2]

    @property
    def headline_point(self) -> int:
        return self.points[-1]

    def scaled_point(self, warps: int, threads: int) -> int:
        """Workload point normalized to the machine's thread count.

        Sweeps over warp or thread counts hold per-thread work roughly
        constant, so a wider machine gets a bigger problem. sgemm tracks
        threads alone (two column chunks at any width) and conv2d scales
        its edge with the square root so the live area tracks threads.
        """
        wt = warps * threads
        if self.name == "sgemm":
            n = max(2 * threads, 8)
            return ((n + warps - 1) // warps) * warps
        if self.name == "conv2d":
            return max(8, round(self.scale_point * (wt / 128) ** 0.5 / 8) * 8)
        return max(64, round(self.scale_point * wt / 128))


BENCHMARKS: dict[str, BenchSpec] = {
    s.name: s for s in (
        BenchSpec("vecadd", build_vecadd, (5120, 10240, 15360, 20480, 25600)),
        BenchSpec("saxpy", build_saxpy, (5120, 10240, 15360, 20480, 25600)),
        BenchSpec("sgemv", build_sgemv, (640, 1280, 1920, 2560, 3840)),
        BenchSpec("sgemm", build_sgemm, (8, 16, 24, 32, 48)),
        BenchSpec("knn", build_knn, (616, 1128, 1640, 2152, 2664)),
        BenchSpec("sfilter", build_sfilter, (616, 1128, 1640, 2152, 2664)),
        BenchSpec("conv2d", build_conv2d, (16, 24, 32, 40, 48)),
        BenchSpec("gcn_aggr", build_gcn, (256, 512, 768, 1024, 1280),
                  variants=("base", "cfm", "cfm+lps"), scalability=False),
    )
}

SPEEDUP_SET = ("saxpy", "sgemv", "sgemm", "conv2d", "knn", "sfilter")


def build(name: str, cfg: CoreConfig, variant: str, point: int,
          seed: int) -> KernelImage:
    """Build one kernel image, validating benchmark and variant names."""
    if name not in BENCHMARKS:
        raise BuildError(f"unknown benchmark {name!r}; "
                         f"choose from {sorted(BENCHMARKS)}")
    spec = BENCHMARKS[name]
    if variant not in VARIANTS:
        raise BuildError(f"unknown variant {variant!r}; "
                         f"choose from {list(VARIANTS)}")
    if variant not in spec.variants:
        raise UnsupportedVariant(
            f"{name} has no {variant} build (supported: "
            f"{', '.join(spec.variants)})")
    return spec.builder(cfg, VARIANTS[variant], point, seed)


__all__ = ["ALL_VARIANTS", "BENCHMARKS", "BenchSpec", "BuildError",
           "KernelImage", "SPEEDUP_SET", "UnsupportedVariant", "build"]
