import json

import pytest
from click.testing import CliRunner

from llens.approximation import lambda_N_smooth
from llens.cli import main, selfcheck_grid
from llens.curve import BadPrime, CurveSpec, ReductionType
from llens.curvefile import CurveFile, bundled_curve
from llens.precision import as_complex
from llens.report import dec_complex, digits_for

C2_389 = "1.0733969700286873494313702780872696666725702684788"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def curve389(tmp_path):
    spec = CurveSpec((0, 1, 1, -2, 0), 389, 1, (BadPrime(389, ReductionType.SPLIT),), "389a1")
    path = tmp_path / "389a1.json"
    path.write_text(CurveFile(spec).to_json())
    return path


def _field(output, name):
    return next(line.split(": ", 1)[1] for line in output.splitlines() if line.startswith(name + ":"))


def test_eval_matches_library(runner, cfg):
    res = runner.invoke(main, ["eval", "15a1", "--pN", "3", "--s", "0.7+0.2i"])
    assert res.exit_code == 0, res.output
    value = lambda_N_smooth(bundled_curve("15a1").spec, 3, as_complex(cfg.ctx, "0.7+0.2i"), cfg).value
    digits = digits_for(cfg.target_bits)
    assert _field(res.output, "value") == f"{dec_complex(value, digits)} [192-bit, {digits} digits]"
    again = runner.invoke(main, ["eval", "15a1", "--pN", "3", "--s", "0.7+0.2i"])
    assert again.output == res.output


def test_eval_methods_agree(runner):
    outs = {}
    for method in ("smooth", "direct", "fast"):
        res = runner.invoke(main, ["eval", "37a1", "--N", "2", "--s", "0.9+0.3i", "--method", method])
        assert res.exit_code == 0, res.output
        outs[method] = _field(res.output, "value")[:40]
    assert len(set(outs.values())) == 1


def test_eval_full_odd_centre(runner, ctx):
    res = runner.invoke(main, ["eval", "37a1", "--full", "--s", "0.5"])
    assert res.exit_code == 0
    value = as_complex(ctx, _field(res.output, "value").split(" [")[0])
    assert abs(value) <= ctx.mpf(_field(res.output, "budget"))


@pytest.mark.parametrize("label", ["rank6-large", "rank5-large"])
def test_eval_refuses_large_conductor(runner, label):
    res = runner.invoke(main, ["eval", label, "--full"])
    assert res.exit_code == 3
    assert "beyond desk scale" in res.output


def test_eval_usage_errors(runner, tmp_path):
    assert runner.invoke(main, ["eval", "nope"]).exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"label": "x"}')
    res = runner.invoke(main, ["eval", str(bad), "--pN", "3"])
    assert res.exit_code == 2 and "invalid" in res.output
    assert runner.invoke(main, ["eval", "11a1"]).exit_code == 2
    assert runner.invoke(main, ["eval", "11a1", "--pN", "3", "--s", "zz"]).exit_code == 2
    assert runner.invoke(main, ["eval", "11a1", "--pN", "3", "--bits", "40"]).exit_code == 2


def test_selfcheck(runner):
    res = runner.invoke(main, ["selfcheck", "37a1", "--N-max", "2"])
    assert res.exit_code == 0, res.output
    assert res.output.count("PASS") == 2
    again = runner.invoke(main, ["selfcheck", "37a1", "--N-max", "2"])
    assert again.output == res.output
    fail = runner.invoke(main, ["selfcheck", "37a1", "--N-max", "1", "--tolerance", "1e-80"])
    assert fail.exit_code == 1 and "FAIL" in fail.output
    assert runner.invoke(main, ["selfcheck", "37a1", "--N-max", "7"]).exit_code == 2


def test_selfcheck_additive_only(runner):
    res = runner.invoke(main, ["selfcheck", "36a1", "--N-max", "2"])
    assert res.exit_code == 0, res.output


def test_selfcheck_grid(ctx):
    pts = selfcheck_grid(ctx)
    assert len(pts) == 9
    for s in pts:
        assert abs(s - 0.5) <= 2
        for z in (s, 1 - s):
            assert min(abs(z + l + 0.5) for l in range(4)) > 0.05


def test_polygon_outputs(runner, curve389, tmp_path):
    out = tmp_path / "run1"
    args = ["polygon", str(curve389), "--N-range", "8", "--m", "2", "--c-m", C2_389]
    res = runner.invoke(main, args + ["--out", str(out)])
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "polygon_report.json").read_text())
    entry = doc["entries"][0]
    assert entry["N"] == 8 and entry["zero_count"] == 2
    assert entry["report"]["orientation"] == "diagonals"
    assert doc["precision"] == {"working_bits": 192, "printed_digits": 30}
    assert all(isinstance(v, str) for v in (entry["report"]["hausdorff"], entry["report"]["target_radius"]))
    svg = (out / "389a1_N8.svg").read_text()
    assert svg.count('class="zero"') == 2
    # identical bytes on a second run and with a different worker count
    out2 = tmp_path / "run2"
    runner.invoke(main, args + ["--out", str(out2), "--workers", "2"])
    for name in ("polygon_report.json", "389a1_N8.svg"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()


def test_polygon_notes_skipped(runner, curve389, tmp_path):
    # a_{p_{N+1}} = 0 forces a skip
    res = runner.invoke(main, ["polygon", str(curve389), "--N-range", "1:2", "--m", "2", "--c-m", C2_389,
                               "--out", str(tmp_path), "--delta-skip", "10"])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "polygon_report.json").read_text())
    assert [e["status"] for e in doc["entries"]] == ["skipped", "skipped"]


def test_polygon_empty_range(runner, tmp_path):
    for bad in ("5:4", ",", "x"):
        res = runner.invoke(main, ["polygon", "234446.a1", "--N-range", bad, "--out", str(tmp_path)])
        assert res.exit_code == 2


def test_zeros_csv(runner, tmp_path):
    out = tmp_path / "z.csv"
    res = runner.invoke(main, ["zeros", "37a1", "--N-range", "3", "--radius", "0.2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "N,p_N,j,re,im,residual"
    assert lines[1].startswith("3,5,1,0.5")


def test_sato_tate_command(runner):
    res = runner.invoke(main, ["sato-tate", "11a1", "--X", "3000", "--delta", "0.5"])
    assert res.exit_code == 0
    assert _field(res.output, "predicted") == "0.342519"
    assert runner.invoke(main, ["sato-tate", "11a1", "--delta", "2.5"]).exit_code == 2


def test_fetch_offline(runner, tmp_path):
    res = runner.invoke(main, ["fetch", "234446.a1", "--endpoint", "http://127.0.0.1:9/api",
                               "--out", str(tmp_path / "x.json")])
    assert res.exit_code == 4
    assert "bundled" in res.output


def test_cache_commands(runner):
    res = runner.invoke(main, ["cache", "build", "11a1", "--T", "300"])
    assert res.exit_code == 0, res.output
    listing = runner.invoke(main, ["cache", "list"])
    assert "11a1.T300.bin" in listing.output and "234446.a1" in listing.output
    assert runner.invoke(main, ["cache", "build", "11a1", "--T", "300", "--horizon-ceiling", "100"]).exit_code == 3
    cleared = runner.invoke(main, ["cache", "clear", "--yes"])
    assert "removed 1 files" in cleared.output
