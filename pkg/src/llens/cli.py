"""Command-line interface: ``llens eval|selfcheck|polygon|zeros|sato-tate|fetch|cache``.

Exit codes: 0 success, 1 failed check, 2 usage or curve-file error, 3 horizon
ceiling exceeded (curve too large for this machine), 4 network failure.
"""

from __future__ import annotations

import logging
import sys
import time
from pathlib import Path

import click
import sympy

from llens import cache as cache_mod
from llens.approximation import (
    HORIZON_CEILING,
    fast_evaluator,
    lambda_full,
    lambda_N_smooth,
    truncation_horizon,
)
from llens.config import RunConfig
from llens.curve import sato_tate_density
from llens.curvefile import CurveFile, resolve_curve
from llens.errors import (
    CurveFileError,
    DomainError,
    HorizonCeilingExceeded,
    LlensError,
    NetworkError,
)
from llens.precision import as_complex
from llens.report import bound, dec, dec_complex, digits_for, dump_json, scan_document, tag, zero_table_csv
from llens.spectrum import build_pole_set, lambda_N_direct
from llens.svg import constellation_svg
from llens.zeros import find_zeros, rank_scan

EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_HORIZON = 3
EXIT_NETWORK = 4

log = logging.getLogger("llens")


def selfcheck_grid(ctx) -> list:
    """Nine points with |s - 1/2| <= 2 kept away from the poles of the archimedean factor."""
    half = ctx.mpf(0.5)
    pts = [half + ctx.mpc(0, "0.1")]
    for k in range(8):
        r = ctx.mpf("1.9") if k % 2 else ctx.mpf("1.1")
        pts.append(half + r * ctx.expjpi(ctx.mpf(k) / 4 + ctx.mpf("0.1")))
    return pts


def _run_config(opts: dict, output_dir: Path | None = None) -> RunConfig:
    try:
        return RunConfig(bits=opts["bits"], workers=opts["workers"], horizon_ceiling=opts["horizon_ceiling"],
                         deterministic=opts["deterministic"], output_dir=output_dir or Path("."),
                         use_cache=opts.get("use_cache", True))
    except (ValueError, LlensError) as exc:
        raise click.UsageError(str(exc)) from None


def run_options(f):
    f = click.option("--bits", default=192, show_default=True, help="Working precision in bits.")(f)
    f = click.option("--workers", default=1, show_default=True, help="Worker processes for heavy loops.")(f)
    f = click.option("--horizon-ceiling", default=HORIZON_CEILING, show_default=True,
                     help="Largest truncation horizon accepted before refusing.")(f)
    f = click.option("--deterministic/--no-deterministic", default=True, show_default=True,
                     help="Omit timings and timestamps so output depends only on inputs.")(f)
    return f


def _load(name: str) -> CurveFile:
    try:
        return resolve_curve(name)
    except CurveFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _prime_index_bound(N: int) -> int:
    if N < 1:
        raise click.UsageError("N must be at least 1")
    return int(sympy.prime(N))


def parse_n_range(text: str) -> list[int]:
    """'78', '78:81' (inclusive) or '20,30,40'."""
    try:
        if ":" in text:
            lo, hi = (int(t) for t in text.split(":", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.UsageError(f"cannot parse N-range {text!r}") from None
    if not values:
        raise click.UsageError(f"N-range {text!r} is empty")
    if min(values) < 1:
        raise click.UsageError("N values must be at least 1")
    return values


class LlensGroup(click.Group):
    """Maps library errors onto exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except HorizonCeilingExceeded as exc:
            click.echo(f"refused: {exc}", err=True)
            sys.exit(EXIT_HORIZON)
        except NetworkError as exc:
            click.echo(f"network error: {exc}", err=True)
            click.echo("hint: bundled curves work offline; see `llens cache list`", err=True)
            sys.exit(EXIT_NETWORK)
        except CurveFileError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except DomainError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)


@click.group(cls=LlensGroup)
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (repeat for debug output).")
def main(verbose: int):
    """Finite Euler product approximations of elliptic curve L-functions."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command("eval")
@click.argument("curve")
@click.option("--pN", "p_N", type=int, help="Largest prime kept in the Euler product.")
@click.option("--N", "N", type=int, help="Keep the first N primes (alternative to --pN).")
@click.option("--s", "s_text", default="0.5", show_default=True, help="Point, e.g. 0.7+0.2i.")
@click.option("--full", is_flag=True, help="Evaluate the complete L-function instead of Lambda_N.")
@click.option("--method", type=click.Choice(["smooth", "direct", "fast"]), default="smooth", show_default=True)
@run_options
def cmd_eval(curve, p_N, N, s_text, full, method, **opts):
    """Print Lambda_N(E, s) or Lambda(E, s) with its error budget."""
    cf = _load(curve)
    run = _run_config(opts)
    cfg = run.precision()
    ctx = cfg.ctx
    try:
        s = as_complex(ctx, s_text)
    except (ValueError, TypeError):
        raise click.UsageError(f"cannot parse s = {s_text!r}") from None
    if full and (p_N is not None or N is not None):
        raise click.UsageError("--full cannot be combined with --pN or --N")
    if not full:
        if N is not None:
            p_N = _prime_index_bound(N)
        if p_N is None:
            raise click.UsageError("give --pN, --N or --full")
        if p_N < 2:
            raise click.UsageError("--pN must be at least 2")
    spec = cf.spec
    started = time.perf_counter()
    table = None
    if method != "direct":
        T = truncation_horizon(spec.conductor, cfg, 3.0, ceiling=run.horizon_ceiling)
        T = max(T, truncation_horizon(spec.conductor, cfg, max(1.0, float(abs(s - 0.5))),
                                      ceiling=run.horizon_ceiling))
        table = cache_mod.load_or_build(cf, T, workers=run.effective_workers, use_cache=run.use_cache)
    if method == "direct":
        if full:
            raise click.UsageError("the direct construction needs a finite Euler product (--pN)")
        result = lambda_N_direct(spec, p_N, s, cfg)
    elif method == "fast":
        radius = max(1.0, float(abs(s - 0.5)) * 1.01)
        ev = fast_evaluator(spec, None if full else p_N, cfg, radius=radius, table=table,
                            horizon_ceiling=run.horizon_ceiling)
        result = ev.evaluate(s)
    elif full:
        result = lambda_full(spec, s, cfg, table=table, workers=run.effective_workers,
                             horizon_ceiling=run.horizon_ceiling)
    else:
        result = lambda_N_smooth(spec, p_N, s, cfg, table=table, workers=run.effective_workers,
                                 horizon_ceiling=run.horizon_ceiling)
    digits = digits_for(cfg.target_bits)
    what = "Lambda(E,s)" if full else f"Lambda_N(E,s) p_N={p_N}"
    click.echo(f"curve: {cf.label}")
    click.echo(f"quantity: {what}")
    click.echo(f"method: {method}")
    click.echo(f"s: {dec_complex(s, digits)}")
    click.echo(f"value: {dec_complex(result.value, digits)} {tag(cfg.working_bits, digits)}")
    click.echo(f"truncation_bound: {bound(result.truncation_bound)}")
    click.echo(f"arithmetic_bound: {bound(result.arithmetic_bound)}")
    click.echo(f"budget: {bound(result.budget)}")
    if not run.deterministic:
        click.echo(f"elapsed_seconds: {time.perf_counter() - started:.3f}")


@main.command("selfcheck")
@click.argument("curve")
@click.option("--N-max", "n_max", default=3, show_default=True, help="Check N = 1..N-max (at most 6).")
@click.option("--tolerance", default="1e-20", show_default=True, help="Largest accepted discrepancy.")
@run_options
def cmd_selfcheck(curve, n_max, tolerance, **opts):
    """Compare the Euler-product and smooth-number constructions of Lambda_N on a 9-point grid."""
    if not 1 <= n_max <= 6:
        raise click.UsageError("--N-max must be between 1 and 6")
    cf = _load(curve)
    run = _run_config(opts)
    cfg = run.precision()
    ctx = cfg.ctx
    tol = ctx.mpf(tolerance)
    spec = cf.spec
    T = truncation_horizon(spec.conductor, cfg, 3.0, ceiling=run.horizon_ceiling)
    table = cache_mod.load_or_build(cf, T, workers=run.effective_workers, use_cache=run.use_cache)
    grid = selfcheck_grid(ctx)
    failed = False
    click.echo(f"curve: {cf.label}  grid: 9 points, |s-1/2| <= 2  precision: {cfg.working_bits}-bit")
    click.echo(f"{'N':>3} {'p_N':>5} {'max|direct-smooth|':>20} {'budget':>12} {'tolerance':>10}  status")
    for N in range(1, n_max + 1):
        p_N = int(sympy.prime(N))
        poles = build_pole_set(spec, p_N, R=3.0, cfg=cfg)
        worst = ctx.mpf(0)
        budget = ctx.mpf(0)
        for s in grid:
            a = lambda_N_direct(spec, p_N, s, cfg, pole_set=poles)
            b = lambda_N_smooth(spec, p_N, s, cfg, table=table)
            worst = max(worst, abs(a.value - b.value))
            budget = max(budget, a.budget + b.budget)
        ok = worst <= tol and worst <= max(budget, tol)
        failed |= not ok
        click.echo(f"{N:>3} {p_N:>5} {bound(worst):>20} {bound(budget):>12} {tolerance:>10}  "
                   f"{'PASS' if ok else 'FAIL'}")
    if failed:
        sys.exit(EXIT_CHECK)


@main.command("polygon")
@click.argument("curve")
@click.option("--N-range", "n_range", required=True, help="N values: '78:79', '78' or '70,75,80'.")
@click.option("--m", type=int, help="Analytic rank; estimated from Taylor coefficients when omitted.")
@click.option("--c-m", "c_m", help="Leading Taylor coefficient; estimated when omitted.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=Path("."),
              show_default=True, help="Directory for the SVG plots and polygon_report.json.")
@click.option("--delta-skip", default=0.1, show_default=True,
              help="Skip N when |a_{p_{N+1}}| < delta sqrt(p_{N+1}).")
@run_options
def cmd_polygon(curve, n_range, m, c_m, out_dir, delta_skip, **opts):
    """Zero constellations of Lambda_N near 1/2 against the limit polygons."""
    Ns = parse_n_range(n_range)
    cf = _load(curve)
    run = _run_config(opts, out_dir)
    cfg = run.precision()
    ctx = cfg.ctx
    spec = cf.spec
    T = truncation_horizon(spec.conductor, cfg, 3.0, ceiling=run.horizon_ceiling)
    table = cache_mod.load_or_build(cf, T, workers=run.effective_workers, use_cache=run.use_cache)
    if (m is None) != (c_m is None):
        raise click.UsageError("give both --m and --c-m, or neither")
    started = time.perf_counter()
    if m is None:
        from llens.zeros import estimate_taylor

        taylor = estimate_taylor(spec, cfg, table=table)
        m, c_m = taylor.m, taylor.c_m
    else:
        c_m = ctx.mpf(c_m)
    result = rank_scan(spec, Ns, cfg, m=m, c_m=c_m, delta_skip=delta_skip, workers=run.effective_workers,
                       table=table)
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = 30
    doc = scan_document(cf.label, result.entries, cfg.working_bits, digits, m, c_m,
                        result.summary_hausdorff, result.trend_slope)
    if not run.deterministic:
        doc["elapsed_seconds"] = f"{time.perf_counter() - started:.3f}"
    for e in result.entries:
        if e.report is not None:
            path = out_dir / f"{_file_label(cf.label)}_N{e.N}.svg"
            path.write_text(constellation_svg(e.report), encoding="utf-8")
            click.echo(f"N={e.N} p_N={e.p_N} zeros={e.zero_count} orientation={e.report.orientation} "
                       f"target={e.report.target_name} hausdorff={dec(e.report.hausdorff, 6)} -> {path}")
        else:
            click.echo(f"N={e.N} p_N={e.p_N} {e.status}")
    report_path = out_dir / "polygon_report.json"
    report_path.write_text(dump_json(doc), encoding="utf-8")
    click.echo(f"report: {report_path}")


def _file_label(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in ".-_" else "_" for ch in label)


@main.command("zeros")
@click.argument("curve")
@click.option("--N-range", "n_range", required=True, help="N values: '78:79', '78' or '70,75,80'.")
@click.option("--radius", default="0.1", show_default=True, help="Radius of the disk around 1/2.")
@click.option("--out", "out_file", type=click.Path(dir_okay=False, path_type=Path),
              help="CSV destination (stdout when omitted).")
@run_options
def cmd_zeros(curve, n_range, radius, out_file, **opts):
    """Table of the zeros of Lambda_N in a disk around 1/2 (CSV: N, p_N, j, re, im, residual)."""
    Ns = parse_n_range(n_range)
    cf = _load(curve)
    run = _run_config(opts)
    cfg = run.precision()
    ctx = cfg.ctx
    rad = ctx.mpf(radius)
    if rad <= 0:
        raise click.UsageError("--radius must be positive")
    spec = cf.spec
    T = truncation_horizon(spec.conductor, cfg, 3.0, ceiling=run.horizon_ceiling)
    table = cache_mod.load_or_build(cf, T, workers=run.effective_workers, use_cache=run.use_cache)
    rows = []
    for N in Ns:
        p_N = int(sympy.prime(N))
        ev = fast_evaluator(spec, p_N, cfg, radius=max(1.0, 1.1 * float(rad)), table=table,
                            horizon_ceiling=run.horizon_ceiling)
        zs = find_zeros(ev, ctx.mpf(0.5), rad, cfg=cfg, noise=ev.budget, p_N=p_N)
        rows.append((N, zs))
    text = zero_table_csv(rows, 30)
    if out_file is None:
        click.echo(text, nl=False)
    else:
        out_file.write_text(text, encoding="utf-8")


@main.command("sato-tate")
@click.argument("curve")
@click.option("--X", "X", default=100000, show_default=True, help="Count primes up to X.")
@click.option("--delta", default=0.5, show_default=True)
@click.option("--workers", default=1, show_default=True)
def cmd_sato_tate(curve, X, delta, workers):
    """Share of primes p <= X with a_p >= delta sqrt(p), against the semicircle prediction."""
    cf = _load(curve)
    if not 0 < delta < 2:
        raise click.UsageError("--delta must lie in (0, 2)")
    empirical, predicted = sato_tate_density(cf.spec, X, delta, workers=workers)
    click.echo(f"curve: {cf.label}")
    click.echo(f"X: {X}  delta: {delta}")
    click.echo(f"empirical: {dec(empirical, 6)}")
    click.echo(f"predicted: {dec(predicted, 6)}")
    click.echo(f"difference: {dec(abs(empirical - predicted), 3)}")


@main.command("fetch")
@click.argument("label")
@click.option("--endpoint", default=None, help="Base URL of an LMFDB-style API.")
@click.option("--out", "out_file", type=click.Path(dir_okay=False, path_type=Path),
              help="Where to write the curve file (default: LABEL.json).")
@click.option("--verify/--no-verify", default=True, show_default=True,
              help="Recount a_p for p < 100 and compare with the remote values.")
def cmd_fetch(label, endpoint, out_file, verify):
    """Download a curve record and write it as a validated curve file."""
    from llens.fetch import DEFAULT_ENDPOINT, fetch_curve

    cf = fetch_curve(label, endpoint or DEFAULT_ENDPOINT, verify=verify)
    path = out_file or Path(f"{_file_label(label)}.json")
    path.write_text(cf.to_json(), encoding="utf-8")
    click.echo(f"wrote {path} (conductor {cf.spec.conductor}, root number {cf.spec.root_number:+d})")


@main.group("cache")
def cmd_cache():
    """Manage the on-disk coefficient cache."""


@cmd_cache.command("build")
@click.argument("curve")
@click.option("--T", "T", type=int, help="Number of coefficients (default: the horizon for |s-1/2| <= 3).")
@run_options
def cmd_cache_build(curve, T, **opts):
    cf = _load(curve)
    run = _run_config(opts)
    if T is None:
        T = truncation_horizon(cf.spec.conductor, run.precision(), 3.0, ceiling=run.horizon_ceiling)
    elif T > run.horizon_ceiling:
        raise HorizonCeilingExceeded(cf.spec.conductor, T, run.horizon_ceiling)
    table = cache_mod.load_or_build(cf, T, workers=run.effective_workers)
    click.echo(f"{cache_mod.cache_path(cf, T)}: a_1..a_{table.limit}")


@cmd_cache.command("list")
def cmd_cache_list():
    """Cached tables and bundled curves."""
    from llens.curvefile import bundled_labels

    folder = cache_mod.cache_dir()
    click.echo(f"cache directory: {folder}")
    for path in sorted(folder.glob("*.bin")) if folder.is_dir() else []:
        click.echo(f"  {path.name}  {path.stat().st_size} bytes")
    click.echo("bundled curves: " + ", ".join(bundled_labels()))


@cmd_cache.command("clear")
@click.option("--yes", is_flag=True, help="Do not ask for confirmation.")
def cmd_cache_clear(yes):
    folder = cache_mod.cache_dir()
    files = sorted(folder.glob("*.bin")) if folder.is_dir() else []
    if files and not yes:
        click.confirm(f"delete {len(files)} cached tables in {folder}?", abort=True)
    for path in files:
        path.unlink()
    click.echo(f"removed {len(files)} files")


if __name__ == "__main__":
    main()
