"""Zeros of Lambda_N near the central point and the polygons they form.

Zeros are counted with the argument principle along circles and squares, isolated
by quad-tree subdivision and polished with Newton's method.  The rank and the
leading Taylor coefficient come from Cauchy means of the full L-function, and the
zeros of each Lambda_N are rescaled and compared with the limiting regular polygons.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import sympy
from scipy import stats

from llens.approximation import QuadratureEvaluator, fast_evaluator
from llens.curve import CoefficientTable, CurveSpec, coefficient_ap
from llens.errors import (
    PhaseTrackingFailed,
    RankIndeterminate,
    SubdivisionFloorReached,
    ZeroCoefficientScaling,
    ZeroCountMismatch,
    ZeroOnContour,
)
from llens.precision import DEFAULT_PRECISION, PrecisionConfig

MAX_REFINE_DEPTH = 14


class _Memo:
    """Caches evaluations by exact point so shared contour samples are computed once."""

    def __init__(self, f, ctx):
        self.f = f
        self.ctx = ctx
        self.cache = {}
        self.calls = 0

    def __call__(self, z):
        key = z._mpc_
        v = self.cache.get(key)
        if v is None:
            self.calls += 1
            v = self.ctx.mpc(self.f(z))
            self.cache[key] = v
        return v


def _winding(f, point: Callable, samples: int, threshold, ctx) -> int:
    """Winding number of f along the closed path point(t), t in [0, 1].

    Phase increments are taken between consecutive samples; a step whose phase jump
    exceeds pi/2 is bisected until it does not, up to a fixed depth.
    """
    ts = [ctx.mpf(k) / samples for k in range(samples + 1)]
    values = [f(point(t)) for t in ts]
    total = ctx.zero
    for k in range(samples):
        total += _phase_step(f, point, ts[k], ts[k + 1], values[k], values[k + 1], threshold, ctx, 0)
    winding = total / (2 * ctx.pi)
    n = int(ctx.nint(winding))
    if abs(winding - n) > 0.1:
        raise PhaseTrackingFailed(f"accumulated phase {ctx.nstr(winding, 6)} turns is not near an integer")
    return n


def _phase_step(f, point, t0, t1, v0, v1, threshold, ctx, depth):
    for v in (v0, v1):
        if abs(v) < threshold:
            raise ZeroOnContour(f"|f| = {ctx.nstr(abs(v), 3)} on the contour")
    jump = ctx.arg(v1 / v0)
    if abs(jump) <= ctx.pi / 2:
        return jump
    if depth >= MAX_REFINE_DEPTH:
        raise PhaseTrackingFailed("phase jump persists after maximal refinement")
    tm = (t0 + t1) / 2
    vm = f(point(tm))
    return (_phase_step(f, point, t0, tm, v0, vm, threshold, ctx, depth + 1)
            + _phase_step(f, point, tm, t1, vm, v1, threshold, ctx, depth + 1))


def _threshold(cfg: PrecisionConfig, noise) -> object:
    ctx = cfg.ctx
    return 10 * max(ctx.mpf(noise or 0), cfg.target_eps)


def count_zeros_in_disk(f, center, radius, samples: int = 64, cfg: PrecisionConfig = DEFAULT_PRECISION,
                        noise=0, max_nudges: int = 3) -> int:
    """Zeros of f inside |s - center| < radius, by the argument principle.

    ``noise`` is the absolute error of f.  If the contour passes too close to a
    zero the radius is nudged by a few percent, alternating outward and inward.
    """
    ctx = cfg.ctx
    f = f if isinstance(f, _Memo) else _Memo(f, ctx)
    center = ctx.mpc(center)
    threshold = _threshold(cfg, noise)
    for attempt in range(max_nudges + 1):
        r = ctx.mpf(radius) * (1 + 0.03 * ((attempt + 1) // 2) * (-1) ** attempt)

        def point(t, r=r):
            return center + r * ctx.expjpi(2 * t)

        try:
            return _winding(f, point, samples, threshold, ctx)
        except ZeroOnContour:
            continue
    raise ZeroOnContour(f"zero on the circle of radius {radius} around {center} after {max_nudges} nudges")


def _square_count(f, center, half, samples, threshold, ctx) -> int:
    corners = [center + half * ctx.mpc(a, b) for a, b in ((1, -1), (1, 1), (-1, 1), (-1, -1))]

    def point(t):
        k = min(int(t * 4), 3)
        frac = t * 4 - k
        return corners[k] + (corners[(k + 1) % 4] - corners[k]) * frac

    return _winding(f, point, 4 * samples, threshold, ctx)


@dataclass
class Zero:
    location: object
    residual: object
    multiplicity: int = 1


@dataclass
class ZeroSet:
    p_N: int | None
    center: object
    radius: object
    zeros: list[Zero]
    winding_count: int

    @property
    def locations(self) -> list:
        out = []
        for z in self.zeros:
            out.extend([z.location] * z.multiplicity)
        return out


def _newton(f, z0, cfg: PrecisionConfig, max_step=None, iterations: int = 80):
    ctx = cfg.ctx
    h = ctx.ldexp(1, -cfg.working_bits // 3)
    z = ctx.mpc(z0)
    tol = ctx.ldexp(1, -cfg.working_bits // 2)
    for _ in range(iterations):
        fz = f(z)
        d = (f(z + h) - f(z - h)) / (2 * h)
        if d == 0:
            return z, False
        step = fz / d
        if max_step is not None and abs(step) > max_step:
            step *= max_step / abs(step)
        z -= step
        if abs(step) <= tol * max(1, abs(z)):
            return z, True
    return z, False


def find_zeros(f, center, radius, expected_count: int | None = None, cfg: PrecisionConfig = DEFAULT_PRECISION,
               samples: int = 16, noise=0, floor=None, p_N: int | None = None) -> ZeroSet:
    """Locate every zero in |s - center| < radius.

    The bounding square (shifted slightly off the symmetry lines of Lambda_N, where
    zeros tend to sit) is split into quadrants until each cell holds one zero by
    winding number; Newton then polishes each from its cell centre.  A cell that
    still holds several zeros at the size floor is refined as a cluster and recorded
    with that multiplicity; if Newton cannot converge there the cluster is reported
    through SubdivisionFloorReached.
    """
    ctx = cfg.ctx
    f = f if isinstance(f, _Memo) else _Memo(f, ctx)
    center = ctx.mpc(center)
    radius = ctx.mpf(radius)
    threshold = _threshold(cfg, noise)
    total = count_zeros_in_disk(f, center, radius, 4 * samples, cfg, noise)
    if expected_count is not None and total != expected_count:
        raise ZeroCountMismatch(f"{total} zeros in the disk, expected {expected_count}")
    floor = ctx.mpf(floor) if floor is not None else radius * ctx.ldexp(1, -20)
    residual_tol = ctx.mpf(10) ** (-(cfg.working_bits // 4))
    shift = radius * ctx.mpc(0.0371, 0.0293)
    half = radius * ctx.mpf(1.08)
    stack = [(center + shift, half)]
    found: list[Zero] = []
    while stack:
        c, hw = stack.pop()
        try:
            k = _square_count(f, c, hw, samples, threshold, ctx)
        except ZeroOnContour:
            # move the cell a little and try again with a slightly larger square
            c, hw = c + hw * ctx.mpc(0.013, 0.007), hw * ctx.mpf(1.02)
            k = _square_count(f, c, hw, samples, threshold, ctx)
        if k <= 0:
            continue
        if k == 1:
            z, ok = _newton(f, c, cfg, max_step=hw)
            inside = abs((z - c).real) < hw and abs((z - c).imag) < hw
            if ok and inside and abs(f(z)) < max(residual_tol, threshold):
                found.append(Zero(z, abs(f(z))))
                continue
        if hw < floor:
            z, ok = _newton(f, c, cfg, max_step=hw)
            if not ok:
                raise SubdivisionFloorReached(c, hw, k)
            found.append(Zero(z, abs(f(z)), k))
            continue
        q = hw / 2
        for dx, dy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            stack.append((c + q * ctx.mpc(dx, dy), q))
    # the square is larger than the disk; keep what lies inside, then re-check the count
    kept = [z for z in found if abs(z.location - center) < radius]
    kept.sort(key=lambda z: (float(z.location.real), float(z.location.imag)))
    if sum(z.multiplicity for z in kept) != total:
        raise ZeroCountMismatch(
            f"refined {sum(z.multiplicity for z in kept)} zeros but the winding number is {total}")
    return ZeroSet(p_N, center, radius, kept, total)


@dataclass(frozen=True)
class TaylorData:
    m: int
    c_m: object
    c_m2: object
    imag_c_m: object
    noise_floor: object
    means: tuple = field(repr=False, default=())


def cauchy_means(f, center, r0, samples: int, kmax: int, cfg: PrecisionConfig) -> list:
    """Approximate Taylor coefficients of f at ``center`` from equally spaced circle samples."""
    ctx = cfg.ctx
    center = ctx.mpc(center)
    r0 = ctx.mpf(r0)
    roots = [ctx.expjpi(ctx.mpf(2 * j) / samples) for j in range(samples)]
    values = [ctx.mpc(f(center + r0 * w)) for w in roots]
    out = []
    for k in range(kmax + 1):
        acc = ctx.fsum(v * roots[(-j * k) % samples] for j, v in enumerate(values))
        out.append(acc / samples / r0**k)
    return out


def estimate_taylor(curve: CurveSpec, cfg: PrecisionConfig = DEFAULT_PRECISION, r0: float = 0.25,
                    samples: int = 64, kmax: int = 12, evaluator: QuadratureEvaluator | None = None,
                    table: CoefficientTable | None = None) -> TaylorData:
    """Order of vanishing at s = 1/2 and the leading Taylor coefficients of Lambda."""
    ctx = cfg.ctx
    ev = evaluator or fast_evaluator(curve, None, cfg, radius=max(1.0, r0), table=table)
    budget = ev.budget
    means = cauchy_means(ev, ctx.mpf(0.5), r0, samples, kmax + 2, cfg)
    w = curve.root_number

    def floor(k):
        return 1000 * budget / ctx.mpf(r0) ** k

    for k in range(kmax + 1):
        if (-1) ** k != w:
            continue
        if abs(means[k]) > floor(k):
            if abs(means[k].imag) > floor(k):
                raise RankIndeterminate(f"coefficient {k} is not real within the noise floor")
            return TaylorData(k, means[k].real, means[k + 2].real, means[k].imag, floor(k), tuple(means))
    raise RankIndeterminate(f"no Taylor coefficient up to order {kmax} clears the noise floor")


def _hausdorff(A: Sequence, B: Sequence) -> float:
    def directed(X, Y):
        return max(min(abs(x - y) for y in Y) for x in X)

    return float(max(directed(A, B), directed(B, A)))


def target_polygon(m: int, radius, sign: int, ctx) -> list:
    """Limit configuration: a regular m-gon (plus the origin for odd m).

    sign = +1 puts a vertex on the positive real axis, sign = -1 rotates by pi/m.
    """
    even = m if m % 2 == 0 else m - 1
    pts = [] if m % 2 == 0 else [ctx.mpc(0)]
    for j in range(1, even + 1):
        phase = ctx.mpf(2 * j) / even if sign > 0 else ctx.mpf(2 * j - 1) / even
        pts.append(radius * ctx.expjpi(phase))
    return pts


@dataclass
class PolygonReport:
    N: int | None
    p_N: int
    p_next: int
    a_next: int
    m: int
    zeros: list
    scaled: list
    target_sign: int
    target: list
    hausdorff: float
    orientation: str
    main_term_sign: int
    target_radius: object

    @property
    def target_name(self) -> str:
        return f"{'even' if self.m % 2 == 0 else 'odd'},{'+' if self.target_sign > 0 else '-'}"


def _orientation(points, m: int, ctx) -> str:
    tol = math.pi / (4 * m)
    angles = [float(ctx.arg(z)) for z in points if abs(z) > 0]
    if m % 2 == 1 and len(angles) == len(points):
        # drop the point playing the role of the centre
        smallest = min(range(len(points)), key=lambda i: abs(points[i]))
        angles = [float(ctx.arg(z)) for i, z in enumerate(points) if i != smallest]
    if not angles:
        return "indeterminate"

    def near(target):
        return any(abs((a - target + math.pi) % (2 * math.pi) - math.pi) <= tol for a in angles)

    if near(0.0):
        return "axes"
    if near(math.pi / m):
        return "diagonals"
    return "indeterminate"


def predicted_radius(curve: CurveSpec, p_next: int, a_next: int, m: int, c_m, cfg: PrecisionConfig):
    """Expected distance of the m nearest zeros of Lambda_N from 1/2."""
    ctx = cfg.ctx
    C = curve.conductor
    val = 2 * a_next * ctx.root(C, 4) * ctx.exp(-2 * ctx.pi * p_next / ctx.sqrt(C)) / (ctx.pi * p_next * c_m)
    return abs(val) ** (ctx.mpf(1) / m)


def scaled_zero_set(zs: ZeroSet, curve: CurveSpec, m: int, c_m, cfg: PrecisionConfig = DEFAULT_PRECISION,
                    a_next: int | None = None, N: int | None = None) -> PolygonReport:
    """Rescale the zeros by |p/a e^(2 pi p / sqrt C)|^(1/m) and match them to a limit polygon."""
    ctx = cfg.ctx
    zeros = zs.locations
    if len(zeros) != m:
        raise ZeroCountMismatch(f"expected {m} zeros, got {len(zeros)}")
    p_next = int(sympy.nextprime(zs.p_N))
    a = coefficient_ap(curve, p_next) if a_next is None else a_next
    if a == 0:
        raise ZeroCoefficientScaling(f"a_{p_next} = 0, the scaling is undefined")
    C = curve.conductor
    scale = abs(ctx.mpf(p_next) / a * ctx.exp(2 * ctx.pi * p_next / ctx.sqrt(C))) ** (ctx.mpf(1) / m)
    scaled = [scale * (z - ctx.mpf(0.5)) for z in zeros]
    radius = abs(2 * ctx.root(C, 4) / (ctx.pi * c_m)) ** (ctx.mpf(1) / m)
    options = []
    for sign in (1, -1):
        pts = target_polygon(m, radius, sign, ctx)
        options.append((_hausdorff(scaled, pts), sign, pts))
    dist, sign, pts = min(options, key=lambda o: (o[0], -o[1]))
    return PolygonReport(
        N=N,
        p_N=zs.p_N,
        p_next=p_next,
        a_next=a,
        m=m,
        zeros=zeros,
        scaled=scaled,
        target_sign=sign,
        target=pts,
        hausdorff=dist,
        orientation=_orientation(scaled, m, ctx),
        main_term_sign=1 if a > 0 else -1,
        target_radius=radius,
    )


@dataclass
class ScanEntry:
    N: int
    p_N: int
    status: str  # "ok", "skipped" or "count_mismatch"
    zero_count: int | None = None
    report: PolygonReport | None = None
    central_value: object = None


@dataclass
class ScanResult:
    entries: list[ScanEntry]
    summary_hausdorff: float | None
    trend_slope: float | None

    @property
    def zero_counts(self) -> list[int]:
        return [e.zero_count for e in self.entries if e.status != "skipped"]


def _pack(x):
    return x._mpc_ if hasattr(x, "_mpc_") else x._mpf_


def _scan_one(curve: CurveSpec, N: int, bits: int, guard: int, m: int, c_m_raw, delta_skip: float,
              table: CoefficientTable | None):
    """Work unit of rank_scan; returns only plain data so it can cross process boundaries."""
    cfg = PrecisionConfig(bits, guard)
    ctx = cfg.ctx
    c_m = ctx.make_mpf(c_m_raw)
    p_N = int(sympy.prime(N))
    p_next = int(sympy.nextprime(p_N))
    a = coefficient_ap(curve, p_next)
    out = {"N": N, "p_N": p_N, "status": "skipped"}
    if abs(a) < delta_skip * math.sqrt(p_next) or a == 0:
        return out
    disk = 3 * predicted_radius(curve, p_next, a, m, c_m, cfg)
    ev = fast_evaluator(curve, p_N, cfg, radius=max(1.0, float(disk) * 1.1), table=table)
    out["central_value"] = _pack(ev(ctx.mpf(0.5)))
    zs = find_zeros(ev, ctx.mpf(0.5), disk, cfg=cfg, noise=ev.budget, p_N=p_N)
    out["zero_count"] = zs.winding_count
    out["zeros"] = [(_pack(z.location), _pack(z.residual), z.multiplicity) for z in zs.zeros]
    out["disk"] = _pack(disk)
    out["status"] = "ok" if zs.winding_count == m else "count_mismatch"
    return out


def _unpack_zero_set(raw, cfg) -> ZeroSet:
    ctx = cfg.ctx
    zeros = [Zero(ctx.make_mpc(z), ctx.make_mpf(r), k) for z, r, k in raw["zeros"]]
    return ZeroSet(raw["p_N"], ctx.mpf(0.5), ctx.make_mpf(raw["disk"]), zeros, raw["zero_count"])


def rank_scan(curve: CurveSpec, N_range: Sequence[int], cfg: PrecisionConfig = DEFAULT_PRECISION, m: int | None = None,
              c_m=None, delta_skip: float = 0.1, workers: int = 1,
              table: CoefficientTable | None = None) -> ScanResult:
    """Zero polygons of Lambda_N for every N in ``N_range``.

    N is skipped when |a_{p_{N+1}}| < delta_skip sqrt(p_{N+1}).  The summary is the
    largest Hausdorff distance among the non-skipped N in the top quartile of the
    range, and the trend is the Theil-Sen slope of the distances against N.
    """
    ctx = cfg.ctx
    if m is None or c_m is None:
        taylor = estimate_taylor(curve, cfg, table=table)
        m, c_m = taylor.m, taylor.c_m
    c_m = ctx.mpf(c_m)
    Ns = list(N_range)
    args = (cfg.working_bits, cfg.guard_bits, m, c_m._mpf_, delta_skip, table)
    if workers > 1 and len(Ns) > 1:
        with ProcessPoolExecutor(workers) as pool:
            raws = list(pool.map(_scan_one, [curve] * len(Ns), Ns, *[[a] * len(Ns) for a in args]))
    else:
        raws = [_scan_one(curve, N, *args) for N in Ns]
    entries = []
    for raw in raws:
        entry = ScanEntry(raw["N"], raw["p_N"], raw["status"], raw.get("zero_count"))
        if "central_value" in raw:
            entry.central_value = ctx.make_mpc(raw["central_value"])
        if raw["status"] == "ok":
            entry.report = scaled_zero_set(_unpack_zero_set(raw, cfg), curve, m, c_m, cfg, N=raw["N"])
        entries.append(entry)
    good = [e for e in entries if e.report is not None]
    summary = None
    slope = None
    if good:
        cut = Ns[0] + 0.75 * (Ns[-1] - Ns[0])
        top = [e.report.hausdorff for e in good if e.N >= cut]
        summary = max(top) if top else None
        if len(good) >= 2:
            slope = float(stats.theilslopes([e.report.hausdorff for e in good], [e.N for e in good])[0])
    return ScanResult(entries, summary, slope)
