import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from llens.approximation import lambda_N_smooth
from llens.curve import ReductionType
from llens.errors import AdditiveFactorHasNoPoles, DomainError, PoleError, TooCloseToPole, UnhandledHigherOrderPole
from llens.precision import DEFAULT_PRECISION, archimedean_g, gamma_pole_residue
from llens.spectrum import (
    LocalFactor,
    Pole,
    _check_collisions,
    build_pole_set,
    enumerate_poles,
    euler_product,
    lambda_N_direct,
    local_factor_eval,
    principal_part_eval,
)

GOOD_FACTORS = [LocalFactor(2, ReductionType.GOOD, -2), LocalFactor(3, ReductionType.GOOD, 0),
                LocalFactor(13, ReductionType.GOOD, 4), LocalFactor(47, ReductionType.GOOD, -13)]
BAD_FACTORS = [LocalFactor(11, ReductionType.SPLIT, 1), LocalFactor(37, ReductionType.NONSPLIT, -1)]


def test_local_factor_values(cfg, ctx):
    assert local_factor_eval(LocalFactor(3, ReductionType.ADDITIVE, 0), ctx.mpc(0.3, 7), cfg) == 1
    assert abs(local_factor_eval(LocalFactor(5, ReductionType.GOOD, 0), 0, cfg) - ctx.mpf(0.5)) < cfg.target_eps
    with pytest.raises(PoleError):
        local_factor_eval(LocalFactor(11, ReductionType.SPLIT, 1), -0.5, cfg)
    # good factor: 1 / (1 - a p^(-s-1/2) + p^(-2s))
    f = LocalFactor(7, ReductionType.GOOD, -4)
    s = ctx.mpc("0.3", "1.1")
    direct = 1 / (1 + 4 * ctx.power(7, -s - 0.5) + ctx.power(7, -2 * s))
    assert abs(local_factor_eval(f, s, cfg) - direct) < cfg.target_eps


def test_additive_has_no_poles(cfg):
    with pytest.raises(AdditiveFactorHasNoPoles):
        enumerate_poles(LocalFactor(2, ReductionType.ADDITIVE, 0), 10.0, cfg)


def test_poles_for_vanishing_ap(cfg, ctx):
    p = 3
    lp = ctx.log(p)
    poles = enumerate_poles(LocalFactor(p, ReductionType.GOOD, 0), 30.0, cfg)
    expected = set()
    for k in range(-20, 21):
        for sign in (1, -1):
            im = 2 * ctx.pi * k / lp + sign * ctx.pi / (2 * lp)
            if abs(im) <= 30:
                expected.add(round(float(im), 20))
    assert {round(float(q.location.imag), 20) for q in poles} == expected
    for q in poles:
        assert abs(q.location.real) < cfg.target_eps
        assert abs(q.residue - 1 / (2 * lp)) < cfg.target_eps


@pytest.mark.parametrize("f", GOOD_FACTORS + BAD_FACTORS, ids=lambda f: f"{f.reduction.value}-{f.p}")
def test_pole_roots_and_residues(cfg, ctx, f):
    poles = enumerate_poles(f, 40.0, cfg)
    assert poles
    for q in poles:
        s0 = q.location
        assert abs(f.inverse(s0, ctx)) < 10 * cfg.target_eps
        # residue of 1/inverse is 1/inverse'
        assert abs(q.residue - 1 / f.inverse_derivative(s0, ctx)) < 100 * cfg.target_eps
        if f.reduction is ReductionType.GOOD:
            assert abs(s0.real) < cfg.target_eps
        else:
            assert s0.real == -0.5


@pytest.mark.parametrize("f", GOOD_FACTORS, ids=lambda f: f"good-{f.p}")
def test_residues_match_closed_form(cfg, ctx, f):
    # the two residue branches (1 -/+ i a / sqrt(4p - a^2)) / (2 ln p), with p^s on the unit circle
    p, a = f.p, f.a_p
    b = ctx.sqrt(4 * p - a * a)
    lp = ctx.log(p)
    for q in enumerate_poles(f, 25.0, cfg):
        ps = ctx.power(p, q.location)
        assert abs(abs(ps) - 1) < cfg.target_eps
        branch = 1 if abs(ps - (a + 1j * b) / (2 * ctx.sqrt(p))) < 1e-30 else -1
        assert abs(ps - (a + branch * 1j * b) / (2 * ctx.sqrt(p))) < 1e-30
        assert abs(q.residue - (1 - branch * 1j * a / b) / (2 * lp)) < 100 * cfg.target_eps


def test_nonsplit_poles(cfg, ctx):
    p = 37
    lp = ctx.log(p)
    poles = enumerate_poles(LocalFactor(p, ReductionType.NONSPLIT, -1), 20.0, cfg)
    for q in poles:
        k = (q.location.imag * lp / ctx.pi - 1) / 2
        assert abs(k - ctx.nint(k)) < 1e-40
        assert abs(q.residue - 1 / lp) < cfg.target_eps


@pytest.mark.parametrize("f", GOOD_FACTORS + BAD_FACTORS, ids=lambda f: f"{f.reduction.value}-{f.p}")
def test_conjugate_symmetry(cfg, ctx, f):
    poles = enumerate_poles(f, 30.0, cfg)
    keys = {(round(float(q.location.real), 25), round(float(q.location.imag), 25),
             round(float(q.residue.real), 25), round(float(q.residue.imag), 25)) for q in poles}
    mirrored = {(a, -b if b else 0.0, c, -d if d else 0.0) for a, b, c, d in keys}
    assert keys == mirrored


def test_poles_sorted(cfg):
    poles = enumerate_poles(GOOD_FACTORS[2], 50.0, cfg)
    keys = [(abs(q.location.imag), q.location.real, q.location.imag) for q in poles]
    assert keys == sorted(keys)


def test_pole_set_tail_and_monotonicity(c15, cfg, ctx):
    tight = build_pole_set(c15, 5, R=3.0, eps=ctx.mpf("1e-40"), cfg=cfg)
    loose = build_pole_set(c15, 5, R=3.0, eps=ctx.mpf("1e-12"), cfg=cfg)
    assert tight.tail_bound <= ctx.mpf("1e-40")
    assert loose.tail_bound <= ctx.mpf("1e-12")
    assert loose.imag_cutoff <= tight.imag_cutoff
    assert loose.gamma_depth <= tight.gamma_depth
    assert len(loose.poles) <= len(tight.poles)
    with pytest.raises(DomainError):
        build_pole_set(c15, 5, R=2.0, cfg=cfg)


def test_gamma_tail_depth_reasonable(c15, rank4, cfg):
    # residues fall off factorially once l exceeds 2 pi / sqrt(C)
    for spec in (c15, rank4):
        ps = build_pole_set(spec, 3, cfg=cfg)
        assert ps.gamma_depth < 60


def test_pole_set_contents(c11, cfg, ctx):
    ps = build_pole_set(c11, 11, cfg=cfg)
    sources = {q.source for q in ps.poles}
    assert "archimedean+p=11" in sources  # double pole at -1/2
    central = next(q for q in ps.poles if q.source.startswith("archimedean+"))
    assert central.order == 2 and len(central.principal) == 2
    assert all(q.order == 1 for q in ps.poles if q is not central)
    for q in ps.poles:
        assert abs(q.location.imag) <= ps.imag_cutoff
    doc = json.loads(ps.to_json())
    assert len(doc["poles"]) == len(ps.poles)


def contour_laurent(f, s0, radius, j, ctx, samples=256):
    """Coefficient of (s - s0)^(-j) from the circle integral of f(s) (s - s0)^(j-1)."""
    total = ctx.zero
    for k in range(samples):
        w = ctx.expjpi(ctx.mpf(2 * k) / samples)
        total += f(s0 + radius * w) * (radius * w) ** j
    return total / samples


@pytest.mark.parametrize("label,p_N", [("11a1", 11), ("15a1", 5), ("37a1", 37), ("58a1", 29)])
def test_central_laurent_by_contour(cfg, ctx, label, p_N):
    from llens.curvefile import bundled_curve

    spec = bundled_curve(label).spec
    ps = build_pole_set(spec, p_N, cfg=cfg)
    central = next(q for q in ps.poles if q.location == -0.5)
    f = lambda s: euler_product(spec, p_N, s, cfg)  # noqa: E731
    for j, coeff in enumerate(central.principal, start=1):
        got = contour_laurent(f, ctx.mpf(-0.5), ctx.mpf("0.05"), j, ctx)
        assert abs(got - coeff) < 1e-40 * max(1, abs(coeff))
    # nothing beyond the stated order
    assert abs(contour_laurent(f, ctx.mpf(-0.5), ctx.mpf("0.05"), central.order + 1, ctx)) < 1e-40


def test_additive_only_principal_part(c36, cfg, ctx):
    # with only additive primes kept, the principal part is sum_l R_l / (s + l + 1/2)
    ps = build_pole_set(c36, 3, cfg=cfg)
    assert all(q.source == "archimedean" for q in ps.poles)
    s = ctx.mpc("0.37", "1.21")
    explicit = ctx.fsum(gamma_pole_residue(l, 36, cfg) / (s + l + 0.5) for l in range(ps.gamma_depth + 1))
    assert abs(principal_part_eval(ps, s, cfg) - explicit) < cfg.target_eps
    # and Lambda_N is g(s) - pp(s) symmetrised
    ing = lambda z: archimedean_g(z, 36, cfg) - principal_part_eval(ps, z, cfg)  # noqa: E731
    value = lambda_N_direct(c36, 3, s, cfg, pole_set=ps).value
    assert abs(value - (ing(s) + ing(1 - s))) < cfg.target_eps


def test_principal_part_guards(c15, cfg, ctx):
    ps = build_pole_set(c15, 5, cfg=cfg)
    with pytest.raises(DomainError):
        principal_part_eval(ps, ctx.mpc(3.5, 0), cfg)
    with pytest.raises(TooCloseToPole):
        principal_part_eval(ps, ctx.mpc(-1.5 + 1e-9, 0), cfg)


def test_principal_part_decay(c11, cfg, ctx):
    ps = build_pole_set(c11, 3, R=40.0, cfg=cfg)
    # a line between the pole columns at Re s = 0 and the gamma poles
    scaled = []
    for t in (2.1, 5.3, 9.7, 17.9, 31.1):
        s = ctx.mpc(1.25, t)
        scaled.append(abs(principal_part_eval(ps, s, cfg)) * (1 + abs(s)))
    assert max(scaled) <= 10 * min(scaled)


def test_collision_detection(cfg, ctx):
    a = Pole(ctx.mpc(0, 1), ctx.mpc(1), 1, "p=2", (ctx.mpc(1),))
    b = Pole(ctx.mpc(0, 1) + ctx.ldexp(1, -150), ctx.mpc(1), 1, "p=3", (ctx.mpc(1),))
    with pytest.raises(UnhandledHigherOrderPole):
        _check_collisions([a, b], cfg)
    _check_collisions([a, Pole(ctx.mpc(0, 1.001), ctx.mpc(1), 1, "p=3")], cfg)


def test_direct_functional_equation_and_centre(c37, c15, cfg, ctx):
    ps37 = build_pole_set(c37, 3, cfg=cfg)
    assert abs(lambda_N_direct(c37, 3, 0.5, cfg, pole_set=ps37).value) < 1e-45
    ps = build_pole_set(c15, 3, cfg=cfg)
    for s in (ctx.mpc("0.9", "0.4"), ctx.mpc("-0.8", "1.3")):
        a = lambda_N_direct(c15, 3, s, cfg, pole_set=ps).value
        b = lambda_N_direct(c15, 3, 1 - s, cfg, pole_set=ps).value
        assert abs(a - b) < 1e-50


@given(st.floats(min_value=-1.4, max_value=2.4), st.floats(min_value=-1.9, max_value=1.9))
def test_direct_matches_smooth(x, y):
    from llens.curvefile import bundled_curve

    cfg = DEFAULT_PRECISION
    ctx = cfg.ctx
    spec = bundled_curve("15a1").spec
    s = ctx.mpc(x, y)
    if abs(s) > 2.9 or abs(1 - s) > 2.9 or min(abs(s + l + 0.5) for l in range(3)) < 1e-3 \
            or min(abs(1 - s + l + 0.5) for l in range(3)) < 1e-3:
        return
    ps = _pole_set_15()
    a = lambda_N_direct(spec, 5, s, cfg, pole_set=ps)
    b = lambda_N_smooth(spec, 5, s, cfg)
    assert abs(a.value - b.value) <= a.budget + b.budget


_cached = {}


def _pole_set_15():
    if "ps" not in _cached:
        from llens.curvefile import bundled_curve

        _cached["ps"] = build_pole_set(bundled_curve("15a1").spec, 5, cfg=DEFAULT_PRECISION)
    return _cached["ps"]
