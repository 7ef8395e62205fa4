"""Precision configuration and the special functions used by the evaluators.

Every operation takes a :class:`PrecisionConfig` and computes inside a private
mpmath context bound to that configuration, so no global precision state is
read or modified.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath

from llens.errors import DomainError, PoleError, PrecisionUnachievable

Z_CEILING = 64


@functools.lru_cache(maxsize=None)
def context(bits: int) -> mpmath.ctx_mp.MPContext:
    """Return an isolated mpmath context running at ``bits`` of precision."""
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


@dataclass(frozen=True)
class PrecisionConfig:
    working_bits: int = 192
    guard_bits: int = 32

    def __post_init__(self):
        if self.working_bits < 64:
            raise DomainError("working_bits must be at least 64")
        if self.guard_bits < 16:
            raise DomainError("guard_bits must be at least 16")
        if self.working_bits - self.guard_bits < 48:
            raise DomainError("working_bits - guard_bits must be at least 48")

    @property
    def target_bits(self) -> int:
        return self.working_bits - self.guard_bits

    @property
    def ctx(self):
        return context(self.working_bits)

    @property
    def target_eps(self):
        return self.ctx.ldexp(1, -self.target_bits)

    def doubled(self) -> PrecisionConfig:
        return PrecisionConfig(2 * self.working_bits, self.guard_bits)


DEFAULT_PRECISION = PrecisionConfig()


def as_complex(ctx, s):
    """Convert numbers or strings such as ``"0.7+0.2i"`` into ``ctx.mpc``."""
    if isinstance(s, str):
        return _parse_complex(ctx, s.strip().replace(" ", "").replace("i", "j"))
    return ctx.mpc(s)


def _parse_complex(ctx, body: str):
    # Split "a+bj" into decimal strings so nothing is rounded through a float.
    if body.endswith("j"):
        body = body[:-1]
        cut = max(body.rfind("+", 1), body.rfind("-", 1))
        while cut > 0 and body[cut - 1] in "eE":
            cut = max(body.rfind("+", 1, cut - 1), body.rfind("-", 1, cut - 1))
        if cut <= 0:
            return ctx.mpc(0, ctx.mpf(body or "1"))
        re_part, im_part = body[:cut], body[cut:]
        if im_part in ("+", "-"):
            im_part += "1"
        return ctx.mpc(ctx.mpf(re_part), ctx.mpf(im_part))
    return ctx.mpc(ctx.mpf(body))


def ensure_finite(ctx, value):
    parts = (value.real, value.imag) if isinstance(value, ctx.mpc) else (value,)
    for part in parts:
        if ctx.isnan(part) or ctx.isinf(part):
            raise PrecisionUnachievable("non-finite intermediate result")
    return value


def _nearest_nonpositive_integer(ctx, z, tol) -> int | None:
    k = int(ctx.nint(z.real))
    if k > 0:
        return None
    if abs(z - k) <= tol * max(1, abs(k)):
        return k
    return None


def gamma(z, cfg: PrecisionConfig = DEFAULT_PRECISION):
    """Euler's Gamma function with a pole check at the nonpositive integers."""
    ctx = cfg.ctx
    z = ctx.convert(z)
    if _nearest_nonpositive_integer(ctx, ctx.mpc(z), cfg.target_eps) is not None:
        raise PoleError(f"Gamma has a pole at {z}")
    return ensure_finite(ctx, ctx.gamma(z))


def _real_if_possible(ctx, z):
    z = ctx.convert(z)
    if isinstance(z, ctx.mpc) and z.imag == 0:
        return z.real
    return z


@functools.lru_cache(maxsize=8192)
def _continued_fraction_cached(z_key, a_key, bits: int):
    ctx = context(bits)
    z = ctx.make_mpc(z_key) if isinstance(z_key[0], tuple) else ctx.make_mpf(z_key)
    return _continued_fraction(ctx, z, ctx.make_mpf(a_key), bits)


def _continued_fraction(ctx, z, a, bits: int):
    # Legendre continued fraction evaluated with the modified Lentz method;
    # magnitudes are compared through binary exponents (ctx.mag) to skip square roots.
    tiny_exp = -4 * bits
    tiny = ctx.ldexp(1, tiny_exp)
    stop = -(bits - 12)
    mag = ctx.mag
    b = a + 1 - z
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - z)
        b += 2
        d = an * d + b
        if mag(d) < tiny_exp:
            d = tiny
        c = b + an / c
        if mag(c) < tiny_exp:
            c = tiny
        d = 1 / d
        delta = d * c
        h *= delta
        if mag(delta - 1) < stop:
            return ctx.exp(z * ctx.log(a) - a) * h
    raise PrecisionUnachievable(f"continued fraction for Gamma({z}, {a}) did not converge")


def _key(x):
    if hasattr(x, "_mpc_"):
        return x._mpc_
    return x._mpf_


def _finite_interval(ctx, z, a, A, bits: int):
    """Integral of t^(z-1) e^(-t) over [a, A] by termwise integration of e^(-t)."""
    L = ctx.log(A / a)
    pa = ctx.power(a, z)
    pA = ctx.power(A, z)
    total = ctx.zero
    biggest = -10**9
    mag = ctx.mag
    stop = bits + 8
    fact = ctx.one
    kmin = int(A + abs(z)) + 1
    for k in range(100000):
        w = z + k
        if mag(w) < -1:
            # (A^w - a^w)/w without cancellation near w = 0
            x = w * L
            piece = pa * L if x == 0 else pa * L * ctx.expm1(x) / x
        else:
            piece = (pA - pa) / w
        term = piece / fact
        total = total - term if k % 2 else total + term
        size = mag(term)
        if size > biggest:
            biggest = size
        if k > kmin and size < mag(total) - stop:
            return total, biggest
        pa *= a
        pA *= A
        fact *= k + 1
    raise PrecisionUnachievable("finite-interval series did not converge")


def upper_incomplete_gamma(z, a, cfg: PrecisionConfig = DEFAULT_PRECISION, z_ceiling: float = Z_CEILING):
    """Gamma(z, a) for complex z and real a > 0.

    For a >= |z| + 2 the Legendre continued fraction is used directly.  Below that
    switch point the value is Gamma(z, A) at A = |z| + 2 (continued fraction) plus
    the integral over [a, A], which is an alternating power series with no poles
    in z, so nonpositive integer z are handled like any other value.
    """
    ctx = cfg.ctx
    z = _real_if_possible(ctx, z)
    a = ctx.convert(a)
    if isinstance(a, ctx.mpc):
        if a.imag != 0:
            raise DomainError("the lower limit must be real")
        a = a.real
    if a <= 0:
        raise DomainError(f"lower limit must be positive, got {a}")
    if abs(z) > z_ceiling:
        raise DomainError(f"|z| = {float(abs(z)):.3g} exceeds the ceiling {z_ceiling}")
    bits = cfg.working_bits + 16
    switch = abs(z) + 2
    if a >= switch:
        return ensure_finite(ctx, ctx.convert(_continued_fraction(context(bits), z, a, bits)))
    # snap the switch point to a short binary number so the cache hits across calls
    A = ctx.ldexp(math.ceil(float(switch) * 8), -3)
    head = _continued_fraction_cached(_key(context(bits).convert(z)), _key(A), bits)
    extra = int(math.ceil(float(A) * 1.4427)) + 16
    while True:
        wctx = context(bits + extra)
        tail, biggest = _finite_interval(wctx, wctx.convert(z), wctx.convert(a), wctx.convert(A), bits)
        total = wctx.convert(head) + tail
        lost_bits = max(0, biggest - max(wctx.mag(total), -10 * bits)) + 1
        if lost_bits + 8 <= extra:
            return ensure_finite(ctx, ctx.convert(total))
        if extra > 8 * bits:
            raise PrecisionUnachievable(f"cancellation in Gamma({z}, {a}) too severe")
        extra = lost_bits + 24


def archimedean_g(s, C: int, cfg: PrecisionConfig = DEFAULT_PRECISION):
    """g(s) = C^(s/2) * 2 * (2 pi)^(-s-1/2) * Gamma(s + 1/2)."""
    ctx = cfg.ctx
    s = ctx.convert(s)
    z = s + ctx.mpf(0.5)
    if _nearest_nonpositive_integer(ctx, ctx.mpc(z), cfg.target_eps) is not None:
        raise PoleError(f"g has a pole at s = {s}")
    value = ctx.power(C, s / 2) * 2 * ctx.power(2 * ctx.pi, -z) * ctx.gamma(z)
    return ensure_finite(ctx, value)


def gamma_pole_residue(l: int, C: int, cfg: PrecisionConfig = DEFAULT_PRECISION):
    """Residue of g at s = -l - 1/2, built by the exact one-step recurrence."""
    if l < 0:
        raise DomainError("l must be nonnegative")
    ctx = cfg.ctx
    r = 2 / ctx.root(C, 4)
    step = -2 * ctx.pi / ctx.sqrt(C)
    for k in range(l):
        r = r * step / (k + 1)
    return r
