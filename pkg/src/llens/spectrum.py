"""Local Euler factors, their poles, and the pole-subtraction construction of Lambda_N.

The finite Euler product g(s) * prod_{p <= p_N} L_p(s) is meromorphic.  Removing
the principal parts at all of its poles leaves an entire function, and
symmetrising that under s -> 1 - s gives Lambda_N directly, without the smooth
index series.  This module is the independent cross-check for the series
evaluator and is meant for small p_N and |s| <= 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from llens.approximation import EvalResult
from llens.curve import CurveSpec, ReductionType, coefficient_ap, primes_up_to
from llens.errors import (
    AdditiveFactorHasNoPoles,
    DomainError,
    PoleError,
    PrecisionUnachievable,
    TooCloseToPole,
    UnhandledHigherOrderPole,
)
from llens.precision import DEFAULT_PRECISION, PrecisionConfig, archimedean_g, gamma_pole_residue

IMAG_CEILING = 2000.0
BAND = 10.0


@dataclass(frozen=True)
class LocalFactor:
    """L_p(s) = 1 / inverse(s); the inverse is a polynomial in p^(-s-1/2)."""

    p: int
    reduction: ReductionType
    a_p: int

    @classmethod
    def of(cls, curve: CurveSpec, p: int) -> LocalFactor:
        return cls(p, curve.reduction(p), coefficient_ap(curve, p))

    def inverse(self, s, ctx):
        if self.reduction is ReductionType.ADDITIVE:
            return ctx.mpc(1)
        x = ctx.power(self.p, -s - ctx.mpf(0.5))
        if self.reduction is ReductionType.GOOD:
            return 1 - self.a_p * x + self.p * x * x
        return 1 - self.a_p * x

    def inverse_derivative(self, s, ctx):
        if self.reduction is ReductionType.ADDITIVE:
            return ctx.mpc(0)
        lp = ctx.log(self.p)
        x = ctx.power(self.p, -s - ctx.mpf(0.5))
        if self.reduction is ReductionType.GOOD:
            return lp * (self.a_p * x - 2 * self.p * x * x)
        return lp * self.a_p * x

    def inverse_series(self, ctx, K: int) -> list:
        """Taylor coefficients of the inverse factor at s = -1/2 + e, in powers of e."""
        lp = ctx.log(self.p)
        out = []
        for k in range(K):
            f = ctx.factorial(k)
            if self.reduction is ReductionType.GOOD:
                c = -self.a_p * (-lp) ** k / f + self.p * (-2 * lp) ** k / f
            elif self.reduction is ReductionType.ADDITIVE:
                c = ctx.zero
            else:
                c = -self.a_p * (-lp) ** k / f
            out.append(ctx.mpf(c) + (1 if k == 0 else 0))
        return out


@dataclass(frozen=True)
class Pole:
    """A pole; ``residue`` is that of the factor it came from, ``principal`` holds the
    Laurent coefficients (of (s-s0)^-1, (s-s0)^-2, ...) of the whole Euler product."""

    location: object
    residue: object
    order: int
    source: str
    principal: tuple = ()


@dataclass(frozen=True)
class PoleSet:
    p_N: int
    imag_cutoff: float
    gamma_depth: int
    poles: tuple[Pole, ...]
    tail_bound: object
    radius: float
    factors: tuple[LocalFactor, ...]
    conductor: int
    root_number: int
    working_bits: int

    def to_json(self, digits: int = 30) -> str:
        def num(z):
            return {"re": _dec(z.real, digits), "im": _dec(z.imag, digits)}

        doc = {
            "p_N": self.p_N,
            "imag_cutoff": self.imag_cutoff,
            "gamma_depth": self.gamma_depth,
            "radius": self.radius,
            "tail_bound": _dec(self.tail_bound, 6),
            "working_bits": self.working_bits,
            "poles": [
                {
                    "location": num(p.location),
                    "order": p.order,
                    "source": p.source,
                    "residue": num(p.residue),
                    "principal": [num(c) for c in p.principal],
                }
                for p in self.poles
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def _dec(x, digits):
    import mpmath

    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=-3, max_fixed=3)


def local_factor_eval(f: LocalFactor, s, cfg: PrecisionConfig = DEFAULT_PRECISION):
    ctx = cfg.ctx
    s = ctx.mpc(s)
    inv = f.inverse(s, ctx)
    if abs(inv) < ctx.ldexp(1, -cfg.working_bits // 2):
        raise PoleError(f"s = {s} is a pole of the factor at p = {f.p}")
    return 1 / inv


def _sort_key(pole: Pole):
    return (abs(pole.location.imag), pole.location.real, pole.location.imag)


def enumerate_poles(f: LocalFactor, T: float, cfg: PrecisionConfig = DEFAULT_PRECISION,
                    T_low: float = -1.0) -> list[Pole]:
    """Poles of L_p with T_low < |Im s| <= T, sorted by |Im|, then Re, then Im."""
    if f.reduction is ReductionType.ADDITIVE:
        raise AdditiveFactorHasNoPoles(f"the factor at p = {f.p} is identically 1")
    ctx = cfg.ctx
    lp = ctx.log(f.p)
    step = 2 * ctx.pi / lp
    out = []
    if f.reduction is ReductionType.GOOD:
        b = ctx.sqrt(4 * f.p - f.a_p * f.a_p)
        bases = []
        for sign in (1, -1):
            # p^(-s) = (a_p + sign*i*b) / (2 sqrt p) has modulus one, so s is imaginary
            theta = ctx.atan2(sign * b, f.a_p)
            bases.append((ctx.mpc(0, -theta / lp), (1 + sign * 1j * f.a_p / b) / (2 * lp)))
    else:
        half = ctx.mpf(-0.5)
        offset = 0 if f.reduction is ReductionType.SPLIT else ctx.pi / lp
        bases = [(ctx.mpc(half, offset), 1 / lp)]
    for base, residue in bases:
        kmax = int((T + abs(base.imag)) / step) + 1
        for k in range(-kmax, kmax + 1):
            loc = ctx.mpc(base.real, base.imag + k * step)
            if T_low < abs(loc.imag) <= T:
                out.append(Pole(loc, ctx.mpc(residue), 1, f"p={f.p}"))
    out.sort(key=_sort_key)
    return out


def _euler_product(factors, s, ctx):
    value = ctx.one
    for f in factors:
        value /= f.inverse(s, ctx)
    return value


def euler_product(curve: CurveSpec, p_N: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION):
    """g(s) * prod_{p <= p_N} L_p(s)."""
    ctx = cfg.ctx
    factors = [LocalFactor.of(curve, p) for p in primes_up_to(p_N)]
    return archimedean_g(s, curve.conductor, cfg) * _euler_product(factors, ctx.mpc(s), ctx)


def _series_mul(a, b, K):
    out = [0] * K
    for i in range(min(K, len(a))):
        for j in range(min(K - i, len(b))):
            out[i + j] += a[i] * b[j]
    return out


def _series_inv(a, K):
    out = [1 / a[0]]
    for n in range(1, K):
        out.append(-sum(a[k] * out[n - k] for k in range(1, min(n, len(a) - 1) + 1)) / a[0])
    return out


def _series_exp(a, K, ctx):
    # a[0] must be 0; uses e' = a' e
    out = [ctx.one]
    for n in range(1, K):
        out.append(sum(k * a[k] * out[n - k] for k in range(1, n + 1)) / n)
    return out


def _central_laurent(factors, C: int, cfg: PrecisionConfig):
    """Laurent coefficients of the Euler product at s = -1/2.

    With e = s + 1/2, g(s) = (2/C^(1/4)) e^(-1) exp(e (ln C/2 - ln 2 pi)) Gamma(1 + e),
    each split factor is 1/(1 - p^(-e)) = (1/(e ln p)) sum_k B_k (-e ln p)^k / k!, and
    every other factor is regular.  The pole order is 1 + #split primes.
    """
    ctx = cfg.ctx
    split = [f for f in factors if f.reduction is ReductionType.SPLIT]
    K = 1 + len(split)
    # exponent of C^(e/2) (2 pi)^(-e) Gamma(1 + e)
    expo = [ctx.zero, ctx.log(C) / 2 - ctx.log(2 * ctx.pi) - ctx.euler]
    expo += [(-1) ** k * ctx.zeta(k) / k for k in range(2, K)]
    series = _series_exp(expo[:K] + [ctx.zero] * (K - len(expo)), K, ctx)
    lead = gamma_pole_residue(0, C, cfg)
    for f in factors:
        if f.reduction is ReductionType.SPLIT:
            lp = ctx.log(f.p)
            lead /= lp
            bern = [ctx.bernoulli(k) * (-lp) ** k / ctx.factorial(k) for k in range(K)]
            series = _series_mul(series, bern, K)
        elif f.reduction is not ReductionType.ADDITIVE:
            series = _series_mul(series, _series_inv(f.inverse_series(ctx, K), K), K)
    # coefficient of e^-j is lead * series[K - j]
    return K, tuple(lead * series[K - j] for j in range(1, K + 1))


def build_pole_set(curve: CurveSpec, p_N: int, R: float = 3.0, eps=None,
                   cfg: PrecisionConfig = DEFAULT_PRECISION,
                   imag_ceiling: float = IMAG_CEILING) -> PoleSet:
    """Enumerate enough poles that the omitted principal parts stay below eps on |s| <= R.

    The gamma-pole tail is bounded rigorously (every local factor has modulus at most
    one at s = -l - 1/2 for l >= 1).  The imaginary cutoff is found by scanning bands
    of width 10 until one contributes less than eps/64; the reported tail bound
    extrapolates the observed band-to-band decay, so it is an estimate.
    """
    if R < 3:
        raise DomainError("the evaluation radius must be at least 3")
    ctx = cfg.ctx
    eps = ctx.mpf(cfg.target_eps if eps is None else eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    C, w = curve.conductor, curve.root_number
    factors = tuple(LocalFactor.of(curve, p) for p in primes_up_to(p_N))
    active = [f for f in factors if f.reduction is not ReductionType.ADDITIVE]

    def principal_coefficient(pole: Pole, owner: LocalFactor):
        s0 = pole.location
        rest = archimedean_g(s0, C, cfg)
        for f in factors:
            if f is not owner:
                rest /= f.inverse(s0, ctx)
        return rest * pole.residue

    poles: list[Pole] = []
    masses = []
    T = 0.0
    while True:
        low, T = T, T + BAND
        band_mass = ctx.zero
        for f in active:
            for pole in enumerate_poles(f, T, cfg, T_low=low):
                if pole.location.imag == 0 and pole.location.real == -0.5:
                    continue  # merged into the central pole below
                rho = principal_coefficient(pole, f)
                poles.append(Pole(pole.location, pole.residue, 1, pole.source, (rho,)))
                band_mass += abs(rho) / max(abs(pole.location) - R, ctx.mpf(0.5))
        masses.append(band_mass)
        if T >= R + BAND and band_mass < eps / 64:
            break
        if T > imag_ceiling:
            raise PrecisionUnachievable(
                f"the imaginary cutoff would exceed {imag_ceiling} for eps = {ctx.nstr(eps, 3)}")
    prev = masses[-2] if len(masses) > 1 else ctx.zero
    ratio = min(masses[-1] / prev, ctx.mpf(0.5)) if prev > 0 else ctx.mpf(0.5)
    pole_tail = masses[-1] * ratio / (1 - ratio)

    # archimedean poles at -l - 1/2; l = 0 may carry split-prime poles too
    K, principal = _central_laurent(factors, C, cfg)
    sources = "+".join(["archimedean"] + [f"p={f.p}" for f in factors if f.reduction is ReductionType.SPLIT])
    poles.append(Pole(ctx.mpc(-0.5), ctx.mpc(gamma_pole_residue(0, C, cfg)), K, sources, principal))
    l = 0
    gamma_tail = None
    while True:
        l += 1
        loc = ctx.mpc(-l - 0.5)
        r = gamma_pole_residue(l, C, cfg)
        rho = r * _euler_product(factors, loc, ctx)
        poles.append(Pole(loc, ctx.mpc(r), 1, "archimedean", (rho,)))
        if l + 0.5 > R + 1:
            # remaining residues shrink at least geometrically by 2 pi / (sqrt(C) (l + 1))
            q = 2 * ctx.pi / (ctx.sqrt(C) * (l + 1))
            if q < 0.5:
                nxt = abs(gamma_pole_residue(l + 1, C, cfg))
                gamma_tail = nxt / (1 - q) / (l + 1.5 - R)
                if gamma_tail < eps / 64:
                    break
    _check_collisions(poles, cfg)
    poles.sort(key=_sort_key)
    return PoleSet(
        p_N=p_N,
        imag_cutoff=T,
        gamma_depth=l,
        poles=tuple(poles),
        tail_bound=pole_tail + gamma_tail,
        radius=float(R),
        factors=factors,
        conductor=C,
        root_number=w,
        working_bits=cfg.working_bits,
    )


def _check_collisions(poles: list[Pole], cfg: PrecisionConfig) -> None:
    ctx = cfg.ctx
    tol = ctx.ldexp(1, -cfg.working_bits // 2)
    ordered = sorted(poles, key=lambda p: (p.location.real, p.location.imag))
    for a, b in zip(ordered, ordered[1:]):
        if a.source != b.source and abs(a.location - b.location) < tol:
            raise UnhandledHigherOrderPole(
                f"poles of {a.source} and {b.source} coincide near {ctx.nstr(a.location, 12)}")


def principal_part_eval(ps: PoleSet, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                        separation: float = 1e-6):
    ctx = cfg.ctx
    s = ctx.mpc(s)
    if abs(s) > ps.radius:
        raise DomainError(f"|s| = {ctx.nstr(abs(s), 5)} lies outside the pole set radius {ps.radius}")
    pieces = []
    for pole in ps.poles:
        d = s - pole.location
        if abs(d) <= separation:
            raise TooCloseToPole(f"s = {s} is within {separation} of the pole at {pole.location}")
        inv = 1 / d
        power = inv
        for coeff in pole.principal:
            pieces.append(coeff * power)
            power *= inv
    return ctx.fsum(pieces)


def lambda_N_direct(curve: CurveSpec, p_N: int, s, cfg: PrecisionConfig = DEFAULT_PRECISION,
                    pole_set: PoleSet | None = None) -> EvalResult:
    """Lambda_N(s) = F(s) + w F(1 - s) with F = Euler product minus its principal parts."""
    ctx = cfg.ctx
    ps = pole_set or build_pole_set(curve, p_N, cfg=cfg)
    s = ctx.mpc(s)

    def ingoing(z):
        euler = archimedean_g(z, ps.conductor, cfg) * _euler_product(ps.factors, z, ctx)
        pp = principal_part_eval(ps, z, cfg)
        return euler - pp, max(abs(euler), abs(pp))

    a, ma = ingoing(s)
    b, mb = ingoing(1 - s)
    value = a + ps.root_number * b
    arithmetic = (ma + mb) * len(ps.poles) * ctx.ldexp(1, -cfg.working_bits + 4)
    return EvalResult(value, 2 * ps.tail_bound, arithmetic)
