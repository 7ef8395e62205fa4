"""Series evaluators for Lambda(E, s) and its smooth-index approximations Lambda_N(E, s).

Each Dirichlet coefficient contributes a_n * term(n, s), where

    term(n, s) = 2 [C^(s/2) (2 pi n)^(-s-1/2) Gamma(s+1/2, x) + w C^((1-s)/2) (2 pi n)^(s-3/2) Gamma(3/2-s, x)]

with x = 2 pi n / sqrt(C).  Lambda sums over every n, Lambda_N only over n whose
prime factors are all at most p_N.  Writing u = s - 1/2 gives
term(n, s) = 2 C^(-1/4) [E(u, x) + w E(-u, x)] with E(u, x) = x^(-u-1) Gamma(u+1, x),
which is what the code evaluates; the two halves swap under s -> 1 - s.

:class:`QuadratureEvaluator` computes the same truncated sums through the integral
E(u, x) = int_0^oo exp((1+u) y - x e^y) dy.  All coefficients share one set of
quadrature nodes, so after a one-off precomputation each evaluation costs a few
hundred complex exponentials instead of thousands of incomplete gamma values.
"""

from __future__ import annotations

import functools
import heapq
import math
from collections.abc import Iterable, Iterator, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import sympy

from llens.curve import CoefficientTable, CurveSpec, coefficient_ap, extend_coefficients, primes_up_to
from llens.errors import CoefficientTableTooSmall, DomainError, HorizonCeilingExceeded, PrecisionUnachievable
from llens.precision import DEFAULT_PRECISION, PrecisionConfig, context, upper_incomplete_gamma

HORIZON_CEILING = 10**7


@dataclass(frozen=True)
class EvalResult:
    value: object
    truncation_bound: object
    arithmetic_bound: object

    @property
    def budget(self):
        return self.truncation_bound + self.arithmetic_bound


@dataclass(frozen=True)
class TermKernel:
    conductor: int
    root_number: int

    def half(self, n: int, u, cfg: PrecisionConfig):
        """C^(-1/4) x^(-u-1) Gamma(u+1, x) at x = 2 pi n / sqrt(C)."""
        ctx = cfg.ctx
        x = 2 * ctx.pi * n / ctx.sqrt(self.conductor)
        return ctx.power(x, -u - 1) * upper_incomplete_gamma(u + 1, x, cfg) / ctx.root(self.conductor, 4)

    def __call__(self, n: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION):
        return eval_term(self, n, s, cfg)


def eval_term(kernel: TermKernel, n: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION):
    if n < 1:
        raise DomainError("n must be positive")
    ctx = cfg.ctx
    u = ctx.mpc(s) - ctx.mpf(0.5)
    return 2 * (kernel.half(n, u, cfg) + kernel.root_number * kernel.half(n, -u, cfg))


def smooth_numbers(p_N: int, limit: int) -> Iterator[int]:
    """All n <= limit whose prime factors are at most p_N, in increasing order."""
    if limit < 1:
        raise DomainError("limit must be positive")
    primes = primes_up_to(p_N)
    # each entry remembers the index of its largest prime so products are built once
    heap = [(1, 0)]
    while heap:
        n, i = heapq.heappop(heap)
        yield n
        for j in range(i, len(primes)):
            m = n * primes[j]
            if m > limit:
                break
            heapq.heappush(heap, (m, j))


@dataclass(frozen=True)
class SmoothIndexStream:
    p_N: int
    limit: int

    def __iter__(self):
        return smooth_numbers(self.p_N, self.limit)


def _tail_log_bound(C: int, T: int) -> float:
    """log of 8 C^(1/4)/(2 pi) * exp(-(T+1) x1) / (1 - exp(-x1)), x1 = 2 pi / sqrt(C).

    For x >= 2R and |Re u| <= R, |E(+-u, x)| <= 2 e^(-x)/x, hence |term(n, s)| <=
    8 C^(-1/4) e^(-x)/x; with |a_n| <= n the tail over n > T sums to this geometric bound.
    """
    x1 = 2 * math.pi / math.sqrt(C)
    return (math.log(8 / (2 * math.pi)) + 0.25 * math.log(C) - (T + 1) * x1
            - math.log(-math.expm1(-x1)))


def truncation_horizon(C: int, cfg: PrecisionConfig = DEFAULT_PRECISION, R: float = 1.0,
                       ceiling: int = HORIZON_CEILING, eps=None) -> int:
    """Smallest T with sum_{n > T} n max_{|s-1/2| <= R} |term(n, s)| below eps."""
    if R < 1:
        raise DomainError("the region radius must be at least 1")
    log_eps = math.log(2) * -cfg.target_bits if eps is None else float(context(64).log(eps))
    x1 = 2 * math.pi / math.sqrt(C)
    T = max(math.ceil(2 * R / x1), 1)
    # _tail_log_bound is linear in T, so solve directly and then nudge
    T = max(T, math.ceil((_tail_log_bound(C, 0) - log_eps) / x1))
    while _tail_log_bound(C, T) >= log_eps:
        T += 1
    while T > 1 and _tail_log_bound(C, T - 1) < log_eps and (T - 1) * x1 >= 2 * R:
        T -= 1
    if T > ceiling:
        raise HorizonCeilingExceeded(C, T, ceiling)
    return T


def tail_bound(C: int, T: int, ctx):
    return ctx.exp(_tail_log_bound(C, T))


@functools.lru_cache(maxsize=16)
def coefficient_table(curve: CurveSpec, T: int) -> CoefficientTable:
    """In-memory cached a_1..a_T."""
    return extend_coefficients(curve, T)


def _region_radius(cfg, s) -> float:
    ctx = cfg.ctx
    return max(1.0, float(abs(ctx.mpc(s) - ctx.mpf(0.5))))


def _resolve_table(curve, cfg, s, table, horizon_ceiling):
    R = _region_radius(cfg, s)
    T = truncation_horizon(curve.conductor, cfg, R, ceiling=horizon_ceiling)
    if table is None:
        table = coefficient_table(curve, max(T, truncation_horizon(curve.conductor, cfg, 3.0,
                                                                   ceiling=horizon_ceiling)))
    if table.limit < T:
        raise CoefficientTableTooSmall(f"need a_n up to {T}, table stops at {table.limit}")
    return table, T


def _kernel_chunk(C, w, bits, guard, s_parts, ns):
    cfg = PrecisionConfig(bits, guard)
    ctx = cfg.ctx
    s = ctx.make_mpc(s_parts)
    kernel = TermKernel(C, w)
    return [eval_term(kernel, n, s, cfg)._mpc_ for n in ns]


def kernel_values(curve: CurveSpec, s, ns: Iterable[int], cfg: PrecisionConfig = DEFAULT_PRECISION,
                  workers: int = 1) -> dict[int, object]:
    """term(n, s) for every n in ``ns``; computed in worker processes when workers > 1."""
    ctx = cfg.ctx
    s = ctx.mpc(s)
    ns = list(ns)
    if workers <= 1 or len(ns) < 64:
        kernel = TermKernel(curve.conductor, curve.root_number)
        return {n: eval_term(kernel, n, s, cfg) for n in ns}
    chunks = [ns[i::workers] for i in range(workers)]
    args = (curve.conductor, curve.root_number, cfg.working_bits, cfg.guard_bits, s._mpc_)
    with ProcessPoolExecutor(workers) as pool:
        parts = list(pool.map(_kernel_chunk, *[[a] * workers for a in args], chunks))
    out = {}
    for chunk, part in zip(chunks, parts):
        out.update((n, ctx.make_mpc(v)) for n, v in zip(chunk, part))
    return {n: out[n] for n in ns}


def _assemble(curve, s, cfg, table, T, indices, terms, workers):
    ctx = cfg.ctx
    indices = [n for n in indices if table.values[n] != 0]
    if terms is None:
        terms = kernel_values(curve, s, indices, cfg, workers)
    pieces = [int(table.values[n]) * terms[n] for n in indices]
    value = ctx.fsum(pieces)
    magnitude = ctx.fsum(abs(p) for p in pieces)
    # the kernel carries at most ~2^-(working_bits) relative error from each gamma value
    arithmetic = magnitude * ctx.ldexp(1, -cfg.working_bits + 6)
    return EvalResult(value, tail_bound(curve.conductor, T, ctx), arithmetic)


def lambda_full(curve: CurveSpec, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                table: CoefficientTable | None = None, terms: Mapping | None = None,
                workers: int = 1, horizon_ceiling: int = HORIZON_CEILING) -> EvalResult:
    """Lambda(E, s) as the sum of a_n term(n, s) over n up to the truncation horizon."""
    table, T = _resolve_table(curve, cfg, s, table, horizon_ceiling)
    return _assemble(curve, s, cfg, table, T, range(1, T + 1), terms, workers)


def lambda_N_smooth(curve: CurveSpec, p_N: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                    table: CoefficientTable | None = None, terms: Mapping | None = None,
                    workers: int = 1, horizon_ceiling: int = HORIZON_CEILING) -> EvalResult:
    """Lambda_N(E, s): the same sum restricted to p_N-smooth n."""
    table, T = _resolve_table(curve, cfg, s, table, horizon_ceiling)
    return _assemble(curve, s, cfg, table, T, smooth_numbers(p_N, T), terms, workers)


def lambda_difference(curve: CurveSpec, p_N: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                      table: CoefficientTable | None = None, terms: Mapping | None = None,
                      workers: int = 1, horizon_ceiling: int = HORIZON_CEILING) -> EvalResult:
    """Lambda - Lambda_N, summed directly over the n that have a prime factor above p_N."""
    table, T = _resolve_table(curve, cfg, s, table, horizon_ceiling)
    smooth = set(smooth_numbers(p_N, T))
    rough = (n for n in range(1, T + 1) if n not in smooth)
    return _assemble(curve, s, cfg, table, T, rough, terms, workers)


def main_error_term(curve: CurveSpec, p_N: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                    a_next: int | None = None):
    """Leading behaviour of Lambda - Lambda_N, driven by the first excluded prime."""
    ctx = cfg.ctx
    s = ctx.mpc(s)
    p = int(sympy.nextprime(p_N))
    a = coefficient_ap(curve, p) if a_next is None else a_next
    C, w = curve.conductor, curve.root_number
    sqrtC = ctx.sqrt(C)
    bracket = 1 + w + (2 * s - 1) * sqrtC / (4 * ctx.pi * p) * (1 - w)
    return a * ctx.root(C, 4) / (ctx.pi * p) * ctx.exp(-2 * ctx.pi * p / sqrtC) * bracket


# ---------------------------------------------------------------------------
# shared-node quadrature evaluator


def _tanh_sinh_level(ctx, Y, h, start, step, floor):
    """Nodes t = k h for k = start, start + step, ... on both sides, mapped onto [0, Y]."""
    half_pi = ctx.pi / 2
    out = []
    k = start
    while True:
        t = k * h
        sh = half_pi * ctx.sinh(t)
        ch = ctx.cosh(sh)
        weight = Y / 2 * h * half_pi * ctx.cosh(t) / (ch * ch)
        if weight < floor:
            break
        th = ctx.tanh(sh)
        # y near Y is computed from the complement to keep relative accuracy
        out.append((Y / 2 * (1 + th), weight))
        if k:
            out.append((Y / 2 * (1 - th), weight))
        k += step
    return out


def _theta_fixed_point(b: list[int], q_fixed: int, nmax: int, bits: int) -> int:
    """sum_{n<=nmax} b[n] q^n in fixed point with ``bits`` fractional bits (Horner)."""
    acc = 0
    for n in range(nmax, 0, -1):
        acc = ((acc * q_fixed) >> bits) + (b[n] << bits)
    return (acc * q_fixed) >> bits


class QuadratureEvaluator:
    """Evaluates sum_n b_n term(n, s) for a fixed coefficient vector b on |s - 1/2| <= radius.

    The value equals 2 C^(-1/4) int_0^Y (e^(u y) + w e^(-u y)) e^y Theta(y) dy with
    Theta(y) = sum_n b_n exp(-n x1 e^y).  Theta is tabulated once on tanh-sinh nodes;
    the step is halved until two successive levels agree at probe points on the
    region boundary, and that disagreement is reported as the quadrature error.
    """

    def __init__(self, curve: CurveSpec, coefficients: list[int], cfg: PrecisionConfig = DEFAULT_PRECISION,
                 radius: float = 1.0, truncation=None, label: str = ""):
        self.curve = curve
        self.cfg = cfg
        self.radius = float(radius)
        self.label = label
        self.b = coefficients
        ctx = cfg.ctx
        self.C, self.w = curve.conductor, curve.root_number
        self.H = len(coefficients) - 1
        self.prefactor = 2 / ctx.root(self.C, 4)
        self.truncation = ctx.zero if truncation is None else truncation
        bits = cfg.working_bits
        self._fixed_bits = bits + 64
        self._hi = context(bits + 64)
        hi = self._hi
        self._x1 = 2 * hi.pi / hi.sqrt(self.C)
        # cut the integral where x1 e^Y reaches X: beyond that the integrand is below
        # e^(-X) times e^((1+R) Y), so X solves X = bits ln 2 + (1+R) Y + margin
        X = hi.mpf(bits * math.log(2) + 20)
        for _ in range(4):
            Y = hi.log(X / self._x1)
            X = hi.mpf(bits * math.log(2) + 20) + (1 + self.radius) * max(Y, 0)
        self._cut = X
        self.Y = hi.log(X / self._x1) if X > self._x1 else hi.mpf(1)
        self._floor = hi.ldexp(1, -(bits + 40))
        self._calibrate()

    # Theta at one node, returned as e^y Theta(y) at working precision
    def _node_value(self, y):
        hi = self._hi
        xe = self._x1 * hi.exp(y)
        nmax = min(self.H, int(self._cut / xe) + 1)
        if nmax < 1:
            return self.cfg.ctx.zero
        q_fixed = int(hi.ldexp(hi.exp(-xe), self._fixed_bits))
        acc = _theta_fixed_point(self.b, q_fixed, nmax, self._fixed_bits)
        return self.cfg.ctx.convert(hi.ldexp(acc, -self._fixed_bits) * hi.exp(y))

    def _tabulate(self, h, start, step):
        ctx = self.cfg.ctx
        nodes = _tanh_sinh_level(self._hi, self.Y, h, start, step, self._floor)
        ys = [ctx.convert(y) for y, _ in nodes]
        vals = [ctx.convert(wt) * self._node_value(y) for y, wt in nodes]
        return ys, vals

    def _calibrate(self):
        ctx = self.cfg.ctx
        hi = self._hi
        h = hi.mpf(1) / 8
        ys, vals = self._tabulate(h, 0, 1)
        probes = [ctx.mpc(0.5) + self.radius * ctx.expjpi(ctx.mpf(k) / 4) for k in range(8)]
        tol = self.cfg.target_eps
        previous = [self._sum(ys, vals, s) for s in probes]
        for _ in range(8):
            # halving the step: old nodes keep half their weight, new nodes sit at odd multiples
            new_ys, new_vals = self._tabulate(h / 2, 1, 2)
            ys = ys + new_ys
            vals = [v / 2 for v in vals] + new_vals
            h /= 2
            current = [self._sum(ys, vals, s) for s in probes]
            scale = max(max(abs(v) for v in current), ctx.mpf(1))
            diff = max(abs(a - b) for a, b in zip(current, previous))
            previous = current
            if diff <= tol * scale:
                self.quadrature_bound = diff
                self.ys, self.vals = ys, vals
                self.step = h
                mags = ctx.fsum(abs(v) * ctx.exp((1 + self.radius) * y) for y, v in zip(ys, vals))
                self.arithmetic = 2 * abs(self.prefactor) * mags * ctx.ldexp(1, -self.cfg.working_bits + 6)
                return
        raise PrecisionUnachievable("quadrature did not converge; raise the precision or shrink the radius")

    def _sum(self, ys, vals, s):
        ctx = self.cfg.ctx
        u = ctx.mpc(s) - ctx.mpf(0.5)
        terms = []
        for y, v in zip(ys, vals):
            e = ctx.exp(u * y)
            terms.append(v * (e + self.w / e))
        return self.prefactor * ctx.fsum(terms)

    @property
    def node_count(self) -> int:
        return len(self.ys)

    def __call__(self, s):
        return self._sum(self.ys, self.vals, s)

    def evaluate(self, s) -> EvalResult:
        ctx = self.cfg.ctx
        s = ctx.mpc(s)
        if abs(s - ctx.mpf(0.5)) > self.radius * (1 + 1e-9):
            raise DomainError(f"s = {s} lies outside the calibrated radius {self.radius}")
        return EvalResult(self(s), self.truncation + self.quadrature_bound, self.arithmetic)

    @property
    def budget(self):
        return self.truncation + self.quadrature_bound + self.arithmetic

    def taylor_coefficients(self, kmax: int) -> list:
        """Exact Taylor coefficients at s = 1/2 of the quadrature sum, from its moments."""
        ctx = self.cfg.ctx
        out = []
        for k in range(kmax + 1):
            moment = ctx.fsum(v * y**k for y, v in zip(self.ys, self.vals))
            out.append(self.prefactor * (1 + self.w * (-1) ** k) * moment / ctx.factorial(k))
        return out


def _coefficient_vector(table: CoefficientTable, T: int, keep) -> list[int]:
    return [0] + [int(table.values[n]) if keep(n) else 0 for n in range(1, T + 1)]


def fast_evaluator(curve: CurveSpec, p_N: int | None = None, cfg: PrecisionConfig = DEFAULT_PRECISION,
                   radius: float = 1.0, table: CoefficientTable | None = None, complement: bool = False,
                   horizon_ceiling: int = HORIZON_CEILING) -> QuadratureEvaluator:
    """Quadrature evaluator for Lambda (p_N None), Lambda_N, or Lambda - Lambda_N (complement)."""
    T = truncation_horizon(curve.conductor, cfg, max(radius, 1.0), ceiling=horizon_ceiling)
    if table is None:
        table = coefficient_table(curve, max(T, truncation_horizon(curve.conductor, cfg, 3.0,
                                                                   ceiling=horizon_ceiling)))
    if table.limit < T:
        raise CoefficientTableTooSmall(f"need a_n up to {T}, table stops at {table.limit}")
    if p_N is None:
        keep = lambda n: True  # noqa: E731
        label = "full"
    else:
        smooth = set(smooth_numbers(p_N, T))
        keep = (lambda n: n not in smooth) if complement else smooth.__contains__
        label = f"p_N={p_N}" + (" complement" if complement else "")
    b = _coefficient_vector(table, T, keep)
    return QuadratureEvaluator(curve, b, cfg, radius, tail_bound(curve.conductor, T, cfg.ctx), label)
