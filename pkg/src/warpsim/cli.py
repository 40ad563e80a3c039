"""Command-line front end.

Runs everything in-process by default; --server URL turns each command
into a thin client of a running service instance, posting the same
parameters and rendering the same tables from the response. Config
precedence is defaults, then --config file (key=value lines, # comments),
then individual flags.

Exit codes: 0 success, 2 bad configuration or kernel build, 3 golden
output mismatch, 4 simulator invariant violation.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from .config import CoreConfig, VARIANTS
from .errors import ConfigError, WarpsimError
from .harness import (port_sweep, rows_to_csv, run_matrix, run_single,
                      scalability_sweep)
from .kernels import ALL_VARIANTS, BENCHMARKS

# flag name -> CoreConfig field
_FLAG_FIELDS = {
    "warps": "warps",
    "threads": "threads",
    "ports": "cache_ports",
    "dmsls": "stream_units",
    "credits": "stream_credits",
    "loop_levels": "loop_levels",
    "cache_size": "cache_size",
    "cache_ways": "cache_ways",
    "cache_banks": "cache_banks",
    "cache_line": "line_size",
    "cache_hit": "hit_latency",
    "cache_miss": "miss_latency",
    "cores": "cores",
}


def _config_options(f):
    opts = [
        click.option("--warps", type=int, default=None,
                     help="Warps per core."),
        click.option("--threads", type=int, default=None,
                     help="Threads per warp."),
        click.option("--ports", type=int, default=None,
                     help="L1 ports arbitrated per cycle."),
        click.option("--dmsls", type=int, default=None,
                     help="Memory stream units."),
        click.option("--credits", type=int, default=None,
                     help="Line credits per stream lane."),
        click.option("--loop-levels", type=int, default=None,
                     help="Hardware loop nesting depth."),
        click.option("--cache-size", type=int, default=None,
                     help="L1 capacity in bytes."),
        click.option("--cache-ways", type=int, default=None),
        click.option("--cache-banks", type=int, default=None),
        click.option("--cache-line", type=int, default=None,
                     help="L1 line size in bytes."),
        click.option("--cache-hit", type=int, default=None,
                     help="L1 hit latency in cycles."),
        click.option("--cache-miss", type=int, default=None,
                     help="L1 miss latency in cycles."),
        click.option("--cores", type=int, default=None,
                     help="Independent cores splitting the workload."),
        click.option("--config", "config_file",
                     type=click.Path(exists=True, dir_okay=False),
                     default=None, help="key=value config file."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _resolve_config(config_file, flags) -> CoreConfig:
    merged = CoreConfig().to_dict()
    if config_file:
        with open(config_file) as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{config_file}:{ln}: expected key=value")
                key, _, value = line.partition("=")
                merged[key.strip()] = value.strip()
    for flag, field in _FLAG_FIELDS.items():
        if flags.get(flag) is not None:
            merged[field] = flags[flag]
    return CoreConfig.from_dict(merged)


def _guarded(f):
    @functools.wraps(f)
    def inner(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except WarpsimError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
    return inner


def _post(server, path, payload):
    import httpx

    try:
        resp = httpx.post(server.rstrip("/") + path, json=payload,
                          timeout=3600.0)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach {server}: {exc}", err=True)
        sys.exit(1)
    if resp.status_code >= 400:
        try:
            body = resp.json()
            click.echo(f"error: {body['detail']}", err=True)
            sys.exit(int(body.get("exit_code", 1)))
        except (ValueError, KeyError):
            click.echo(f"error: HTTP {resp.status_code}: {resp.text}",
                       err=True)
            sys.exit(1)
    return resp.json()


_ROW_FMT = ("{benchmark:>9} {variant:>8} {point:>7} {cycles:>9} "
            "{instr_total:>10} {utilization:>6.3f} {speedup:>8.2f} "
            "{instr_reduction:>9.2f}")
_ROW_HDR = (f"{'bench':>9} {'variant':>8} {'point':>7} {'cycles':>9} "
            f"{'instr':>10} {'util':>6} {'speedup':>8} {'i-red':>9}")


def _print_rows(rows, aggregates):
    click.echo(_ROW_HDR)
    for row in rows:
        click.echo(_ROW_FMT.format(**row))
    if aggregates:
        click.echo("")
        for key, agg in aggregates.items():
            click.echo(f"{key:>18}: mean speedup {agg['mean_speedup']:.2f}, "
                       f"geomean {agg['geomean_speedup']:.2f}, "
                       f"mean instr reduction "
                       f"{agg['mean_instr_reduction']:.2f}")


def _print_stats(stats: dict):
    for key, value in stats.items():
        if key == "issue_hist":
            value = " ".join(str(v) for v in value)
        click.echo(f"{key:>18}: {value}")


def _emit(obj, rows, aggregates, json_out, csv_path):
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(obj["csv"])
    if json_out:
        out = {k: v for k, v in obj.items() if k != "csv"}
        click.echo(json.dumps(out, indent=2, sort_keys=True))
    else:
        _print_rows(rows, aggregates)


@click.group()
def main():
    """Cycle-level SIMT GPU simulator and benchmark harness."""


@main.command()
@click.option("--bench", type=click.Choice(sorted(BENCHMARKS)), default=None,
              help="One benchmark; default runs the whole suite.")
@click.option("--variant", type=click.Choice(ALL_VARIANTS), default=None,
              help="One kernel variant; default runs all supported.")
@click.option("--point", type=int, default=None,
              help="Workload size; default is the benchmark scale point.")
@click.option("--sweep", is_flag=True,
              help="Run all registry workload points.")
@_config_options
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--workers", type=int, default=None,
              help="Parallel worker processes.")
@click.option("--json", "json_out", is_flag=True, help="Emit JSON.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              default=None, help="Write the metric rows as CSV.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              default=None, help="Write an issue trace (single run only).")
@click.option("--server", default=None, help="Use a running service.")
@_guarded
def run(bench, variant, point, sweep, seed, workers, json_out, csv_path,
        trace_path, server, config_file, **flags):
    """Run benchmarks, verify outputs, and report metric rows."""
    cfg = _resolve_config(config_file, flags)
    benches = [bench] if bench else None
    variants = [variant] if variant else None
    if sweep and point is not None:
        raise ConfigError("--sweep and --point are mutually exclusive")
    if point is not None:
        points = [point]
    elif sweep or bench is None:
        points = None    # every registry point, per benchmark
    else:
        points = [BENCHMARKS[bench].scale_point]

    single = bench is not None and variant is not None and len(points or []) == 1
    if trace_path and not single:
        raise ConfigError(
            "--trace needs --bench, --variant and a single point")
    if trace_path and server:
        raise ConfigError("--trace is only available in-process")

    if single:
        if server:
            obj = _post(server, "/run",
                        {"bench": bench, "variant": variant,
                         "point": points[0], "seed": seed,
                         "config": cfg.to_dict()})
        else:
            trace_fh = open(trace_path, "w") if trace_path else None
            try:
                rows, stats = run_single(cfg, bench, variant, points[0],
                                         seed, trace=trace_fh)
            finally:
                if trace_fh:
                    trace_fh.close()
            obj = {"config": cfg.to_dict(), "seed": seed,
                   "rows": [r.to_dict() for r in rows], "aggregates": {},
                   "stats": stats.to_dict(), "csv": rows_to_csv(rows)}
        if csv_path:
            with open(csv_path, "w") as fh:
                fh.write(obj["csv"])
        if json_out:
            out = {k: v for k, v in obj.items() if k != "csv"}
            click.echo(json.dumps(out, indent=2, sort_keys=True))
        else:
            _print_rows(obj["rows"], {})
            click.echo("")
            _print_stats(obj["stats"])
        return

    if server:
        payload = {"benches": benches, "variants": variants,
                   "points": points, "seed": seed, "workers": workers,
                   "config": cfg.to_dict()}
        obj = _post(server, "/matrix", payload)
    else:
        res = run_matrix(cfg, seed, benches=benches, variants=variants,
                         points=points, workers=workers)
        obj = res.to_json_obj() | {"csv": res.to_csv()}
    _emit(obj, obj["rows"], obj["aggregates"], json_out, csv_path)


@main.command()
@click.option("--paper-fig", type=click.Choice(["6", "8", "9"]),
              required=True,
              help="Result set: 6 benchmark matrix, 8 machine-width "
                   "scaling, 9 cache-port sweep.")
@_config_options
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--json", "json_out", is_flag=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              default=None)
@click.option("--server", default=None, help="Use a running service.")
@_guarded
def reproduce(paper_fig, seed, workers, json_out, csv_path, server,
              config_file, **flags):
    """Reproduce a headline result table."""
    cfg = _resolve_config(config_file, flags)
    if paper_fig == "6":
        if server:
            obj = _post(server, "/matrix",
                        {"seed": seed, "workers": workers,
                         "config": cfg.to_dict()})
        else:
            res = run_matrix(cfg, seed, workers=workers)
            obj = res.to_json_obj() | {"csv": res.to_csv()}
        _emit(obj, obj["rows"], obj["aggregates"], json_out, csv_path)
        return

    if paper_fig == "8":
        if server:
            obj = _post(server, "/scalability",
                        {"seed": seed, "workers": workers,
                         "config": cfg.to_dict()})
            entries = obj["entries"]
        else:
            entries = [e.to_dict()
                       for e in scalability_sweep(cfg, seed, workers=workers)]
            obj = {"config": cfg.to_dict(), "seed": seed, "entries": entries}
        if json_out:
            click.echo(json.dumps(obj, indent=2, sort_keys=True))
        else:
            for e in entries:
                names = " ".join(f"{k}={v:.2f}"
                                 for k, v in e["speedups"].items())
                click.echo(f"{e['axis']}-sweep W={e['W']:>2} T={e['T']:>2}: "
                           f"avg {e['avg_speedup']:.2f}  ({names})  "
                           f"sgemm conflicts {e['sgemm_conflicts']}")
        if csv_path:
            lines = ["axis,W,T,avg_speedup,sgemm_conflicts"]
            lines += [f"{e['axis']},{e['W']},{e['T']},"
                      f"{e['avg_speedup']:.6f},{e['sgemm_conflicts']}"
                      for e in entries]
            with open(csv_path, "w") as fh:
                fh.write("\n".join(lines) + "\n")
        return

    if server:
        obj = _post(server, "/ports", {"seed": seed, "config": cfg.to_dict()})
        entries = obj["entries"]
    else:
        entries = port_sweep(cfg, seed)
        obj = {"config": cfg.to_dict(), "seed": seed, "entries": entries}
    if json_out:
        click.echo(json.dumps(obj, indent=2, sort_keys=True))
    else:
        for e in entries:
            click.echo(f"P={e['P']}: {e['cycles']} cycles "
                       f"(x{e['speedup_vs_p1']:.2f} vs P=1, "
                       f"{e['bank_conflicts']} bank conflicts)")
    if csv_path:
        lines = ["P,cycles,bank_conflicts,mshr_stalls,speedup_vs_p1"]
        lines += [f"{e['P']},{e['cycles']},{e['bank_conflicts']},"
                  f"{e['mshr_stalls']},{e['speedup_vs_p1']:.6f}"
                  for e in entries]
        with open(csv_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("warpsim.service:app", host=host, port=port)


@main.command()
def benchmarks():
    """List benchmarks, workload points, and supported variants."""
    for spec in BENCHMARKS.values():
        click.echo(f"{spec.name:>9}: points {list(spec.points)} "
                   f"variants {', '.join(spec.variants)}")


if __name__ == "__main__":
    main()
