"""HTTP face of the simulator.

Thin wrapper over the harness: every endpoint resolves a hardware config
from the request, delegates to the same functions the CLI uses
in-process, and returns their reductions as JSON. Domain errors map onto
status codes by family: bad configs and kernel-build problems are 400,
golden-output mismatches 422, simulator invariant violations 500. Each
error body carries the exception class, message and the process exit
code a direct CLI run would have used.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..asm import assemble
from ..errors import ConfigError, GoldenMismatch, WarpsimError
from ..harness import (port_sweep, run_matrix, run_single, rows_to_csv,
                       scalability_sweep)
from ..kernels import BENCHMARKS
from ..kernels.common import BuildError
from .models import (AssembleRequest, MatrixRequest, PortSweepRequest,
                     RunRequest, ScalabilityRequest)


def _error_status(exc: WarpsimError) -> int:
    if isinstance(exc, ConfigError):
        return 400
    if isinstance(exc, GoldenMismatch):
        return 422
    return 500


def create_app() -> FastAPI:
    app = FastAPI(title="warpsim", version=__version__)

    @app.exception_handler(WarpsimError)
    def _domain_error(request, exc: WarpsimError):
        return JSONResponse(
            status_code=_error_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc),
                     "exit_code": exc.exit_code},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/benchmarks")
    def benchmarks():
        return {"benchmarks": [
            {"name": s.name, "points": list(s.points),
             "scale_point": s.scale_point,
             "headline_point": s.headline_point,
             "variants": list(s.variants), "scalability": s.scalability}
            for s in BENCHMARKS.values()
        ]}

    @app.post("/run")
    def run(req: RunRequest):
        cfg = req.config.to_config()
        if req.bench not in BENCHMARKS:
            raise BuildError(f"unknown benchmark {req.bench!r}; "
                             f"choose from {sorted(BENCHMARKS)}")
        point = req.point or BENCHMARKS[req.bench].scale_point
        rows, stats = run_single(cfg, req.bench, req.variant, point,
                                 req.seed)
        return {"config": cfg.to_dict(), "seed": req.seed,
                "rows": [r.to_dict() for r in rows], "aggregates": {},
                "stats": stats.to_dict(), "csv": rows_to_csv(rows)}

    @app.post("/matrix")
    def matrix(req: MatrixRequest):
        cfg = req.config.to_config()
        res = run_matrix(cfg, req.seed, benches=req.benches,
                         variants=req.variants, points=req.points,
                         workers=req.workers)
        return res.to_json_obj() | {"csv": res.to_csv()}

    @app.post("/scalability")
    def scalability(req: ScalabilityRequest):
        cfg = req.config.to_config()
        entries = scalability_sweep(
            cfg, req.seed, threads_axis=tuple(req.threads_axis),
            warps_axis=tuple(req.warps_axis), workers=req.workers)
        return {"config": cfg.to_dict(), "seed": req.seed,
                "entries": [e.to_dict() for e in entries]}

    @app.post("/ports")
    def ports(req: PortSweepRequest):
        cfg = req.config.to_config()
        entries = port_sweep(cfg, req.seed, bench=req.bench,
                             variant=req.variant, ports=tuple(req.ports),
                             point=req.point)
        return {"config": cfg.to_dict(), "seed": req.seed,
                "entries": entries}

    @app.post("/assemble")
    def do_assemble(req: AssembleRequest):
        prog = assemble(req.source, text_base=req.text_base)
        return {"count": len(prog), "text_base": prog.text_base,
                "words": [f"{w:#010x}" for w in prog.words],
                "symbols": prog.symbols, "listing": prog.disasm()}

    return app


app = create_app()
