import json

import httpx
import pytest

from llens import cache
from llens.approximation import coefficient_table
from llens.curve import coefficient_ap, primes_up_to
from llens.curvefile import CURVE_SCHEMA, bundled_curve, bundled_labels, load_curve, loads_curve, resolve_curve
from llens.errors import CurveFileError, NetworkError, SchemaMismatch
from llens.fetch import fetch_curve, recount_mismatches
from llens.report import bound, dec, dec_complex, zero_table_csv
from llens.svg import constellation_svg
from llens.zeros import PolygonReport, Zero, ZeroSet, target_polygon


def test_bundled_dataset():
    labels = bundled_labels()
    for needed in ("234446.a1", "rank6-large", "rank5-large", "11a1", "37a1"):
        assert needed in labels
    assert bundled_curve("234446.a1").spec.conductor == 234446
    assert bundled_curve("rank6-large").desk_scale is False
    assert bundled_curve("rank5-large").desk_scale is False
    signs = {bundled_curve(lab).spec.root_number for lab in ("11a1", "37a1")}
    assert signs == {1, -1}


@pytest.mark.parametrize("label", bundled_labels())
def test_round_trip_is_byte_identical(label, tmp_path):
    cf = bundled_curve(label)
    text = cf.to_json()
    assert loads_curve(text).to_json() == text
    path = tmp_path / "c.json"
    path.write_text(text)
    assert load_curve(path).to_json() == text
    assert resolve_curve(str(path)) == cf


def test_schema_errors():
    good = json.loads(bundled_curve("11a1").to_json())
    for mutate in (
        lambda d: d.pop("conductor"),
        lambda d: d.update(conductor=7),
        lambda d: d.update(root_number=0),
        lambda d: d.update(weierstrass=[0, 1]),
        lambda d: d["bad_primes"][0].update(inverse_factor="1+p^-s"),
        lambda d: d.update(extra=True),
        lambda d: d.update(schema_version=99),
    ):
        doc = json.loads(json.dumps(good))
        mutate(doc)
        with pytest.raises(CurveFileError):
            loads_curve(json.dumps(doc))
    with pytest.raises(CurveFileError):
        loads_curve("{not json")
    with pytest.raises(CurveFileError):
        resolve_curve("no-such-curve")
    assert CURVE_SCHEMA["properties"]["conductor"]["minimum"] == 11


def test_inconsistent_bad_primes_rejected():
    doc = json.loads(bundled_curve("15a1").to_json())
    doc["bad_primes"] = doc["bad_primes"][:1]
    with pytest.raises(CurveFileError):
        loads_curve(json.dumps(doc))


def test_cache_round_trip(tmp_path):
    cf = bundled_curve("15a1")
    table = cache.load_or_build(cf, 500, directory=tmp_path)
    path = cache.cache_path(cf, 500, tmp_path)
    raw = path.read_bytes()
    assert raw[:6] == b"LLENS1" and len(raw) == 6 + 32 + 8 + 8 * 500
    again = cache.read_table(path, cf)
    assert again is not None and again.as_list() == table.as_list()
    assert again.as_list() == coefficient_table(cf.spec, 500).as_list()
    # a smaller request is served from the larger file
    small = cache.load_or_build(cf, 100, directory=tmp_path)
    assert small.provenance == "cached" and small.as_list() == table.as_list()[:101]


def test_cache_rejects_mismatch(tmp_path, caplog):
    cf = bundled_curve("15a1")
    other = bundled_curve("11a1")
    cache.load_or_build(cf, 200, directory=tmp_path)
    path = cache.cache_path(cf, 200, tmp_path)
    assert cache.read_table(path, other) is None
    # flip a coefficient byte: hash still matches, so corrupt a_1 instead
    data = bytearray(path.read_bytes())
    data[46] = 5
    path.write_bytes(bytes(data))
    assert cache.read_table(path, cf) is None
    rebuilt = cache.load_or_build(cf, 200, directory=tmp_path)
    assert rebuilt[1] == 1 and rebuilt.provenance != "cached"
    path.write_bytes(b"LLENS1short")
    assert cache.read_table(path, cf) is None
    assert "ignoring" in caplog.text


def test_cache_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LLENS_CACHE_DIR", str(tmp_path / "x"))
    assert cache.cache_dir() == tmp_path / "x"


def _lmfdb_handler(curve, aplist=None, drift=False):
    spec = curve.spec

    def handler(request: httpx.Request):
        name = request.url.path.rstrip("/").rsplit("/", 1)[-1]
        if name == "ec_curvedata":
            row = {"lmfdb_label": spec.label, "ainvs": list(spec.ainvs), "conductor": spec.conductor,
                   "analytic_rank": 0 if spec.root_number == 1 else 1}
            if drift:
                row["ainvs"] = "[0,1]"
            return httpx.Response(200, json={"data": [row]})
        if name == "ec_localdata":
            code = {"split_multiplicative": 1, "nonsplit_multiplicative": -1, "additive": 0}
            return httpx.Response(200, json={"data": [{"prime": b.p, "red": code[b.reduction.value]}
                                                      for b in spec.bad_primes]})
        if name == "ec_classdata":
            values = aplist or [coefficient_ap(spec, p) for p in primes_up_to(100)]
            return httpx.Response(200, json={"data": [{"aplist": values}]})
        return httpx.Response(404)

    return handler


def test_fetch_with_mock_transport():
    cf = bundled_curve("37a1")
    got = fetch_curve("37a1", "https://example.test/api", transport=httpx.MockTransport(_lmfdb_handler(cf)))
    assert got.spec == cf.spec
    assert got.spec.conductor == 37


def test_fetch_detects_drift_and_wrong_ap():
    cf = bundled_curve("11a1")
    with pytest.raises(SchemaMismatch):
        fetch_curve("11a1", transport=httpx.MockTransport(_lmfdb_handler(cf, drift=True)))
    wrong = [coefficient_ap(cf.spec, p) for p in primes_up_to(100)]
    wrong[3] += 1
    with pytest.raises(SchemaMismatch):
        fetch_curve("11a1", transport=httpx.MockTransport(_lmfdb_handler(cf, aplist=wrong)))
    assert recount_mismatches(cf.spec, {2: -2, 3: -1}) == []


def test_fetch_network_failure():
    def boom(request):
        raise httpx.ConnectError("offline", request=request)

    with pytest.raises(NetworkError):
        fetch_curve("11a1", transport=httpx.MockTransport(boom))
    with pytest.raises(NetworkError):
        fetch_curve("11a1", transport=httpx.MockTransport(lambda r: httpx.Response(503)))


def test_decimal_formatting(ctx):
    assert dec(ctx.mpf("0.125"), 5) == "0.12500"
    assert dec(ctx.mpf(0), 5) == "0.0"
    assert dec(7, 5) == "7"
    assert dec_complex(ctx.mpc("0.5", "-0.25"), 3) == "0.500-0.250i"
    assert bound(ctx.mpf("1.2341e-40")) == "1.24e-40"
    assert bound(0) == "0"


def _fake_report(ctx, sign):
    radius = ctx.mpf("0.6877")
    target = target_polygon(4, radius, sign, ctx)
    scaled = [z * ctx.mpf("0.7") for z in target]
    return PolygonReport(N=78, p_N=397, p_next=401, a_next=-16, m=4, zeros=[0.5 + z / 10 for z in scaled],
                         scaled=scaled, target_sign=sign, target=target, hausdorff=0.2063, orientation="axes",
                         main_term_sign=-1, target_radius=radius)


def test_svg_is_deterministic(ctx):
    a = constellation_svg(_fake_report(ctx, 1))
    b = constellation_svg(_fake_report(ctx, 1))
    assert a == b
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert a.count('class="zero"') == 4 and a.count('class="target-vertex"') == 4
    assert 'class="critical-line"' in a and 'class="real-axis"' in a
    assert "-0.000" not in a


def test_zero_csv(ctx):
    zs = ZeroSet(5, ctx.mpf(0.5), ctx.mpf(0.1), [Zero(ctx.mpc("0.5", "0.01"), ctx.mpf("1e-50"))], 1)
    text = zero_table_csv([(3, zs)], 10)
    lines = text.splitlines()
    assert lines[0] == "N,p_N,j,re,im,residual"
    assert lines[1] == "3,5,1,0.5000000000,0.01000000000,1.00e-50"
