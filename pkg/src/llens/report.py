"""Text, JSON and CSV renderings of numerical results.

Numbers leave the program as decimal strings with a stated number of significant
digits; nothing is printed through binary floats.
"""

from __future__ import annotations

import csv
import io
import json
import math

import mpmath

from llens.zeros import PolygonReport, ScanEntry, ZeroSet


def digits_for(bits: int) -> int:
    """Decimal digits carried by a binary mantissa of ``bits`` bits."""
    return max(1, int(bits * math.log10(2)))


def dec(x, digits: int) -> str:
    """Real number as a decimal string with ``digits`` significant digits."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if not isinstance(x, mpmath.ctx_mp_python.mpnumeric):
        x = mpmath.mpf(x)
    text = mpmath.nstr(x, digits, min_fixed=-6, max_fixed=digits + 1, strip_zeros=False)
    return "0.0" if text in ("-0.0", "0.0") or x == 0 else text


def dec_complex(z, digits: int) -> str:
    """Complex number as ``re+imi`` / ``re-imi``."""
    re = dec(z.real, digits)
    im = dec(z.imag, digits)
    if im.startswith("-"):
        return f"{re}-{im[1:]}i"
    return f"{re}+{im}i"


def tag(bits: int, digits: int) -> str:
    return f"[{bits}-bit, {digits} digits]"


def bound(x, digits: int = 3) -> str:
    """Error bounds are printed with a few digits, rounded up."""
    if x == 0:
        return "0"
    x = mpmath.mpf(x)
    e = int(mpmath.floor(mpmath.log10(x)))
    mant = mpmath.ceil(x / mpmath.mpf(10) ** (e - digits + 1))
    if mant >= 10 ** digits:
        mant /= 10
        e += 1
    m = str(int(mant))
    return f"{m[0]}.{m[1:]}e{e}" if len(m) > 1 else f"{m}e{e}"


def zero_dict(z, digits: int) -> dict:
    return {"re": dec(z.real, digits), "im": dec(z.imag, digits)}


def polygon_dict(report: PolygonReport, digits: int) -> dict:
    return {
        "N": report.N,
        "p_N": report.p_N,
        "p_next": report.p_next,
        "a_next": report.a_next,
        "m": report.m,
        "zeros": [zero_dict(z, digits) for z in report.zeros],
        "scaled": [zero_dict(z, digits) for z in report.scaled],
        "target": report.target_name,
        "target_radius": dec(report.target_radius, digits),
        "target_vertices": [zero_dict(z, digits) for z in report.target],
        "hausdorff": dec(report.hausdorff, 6),
        "orientation": report.orientation,
        "main_term_sign": report.main_term_sign,
    }


def scan_document(curve_label: str, entries: list[ScanEntry], bits: int, digits: int, m: int, c_m,
                  summary=None, slope=None) -> dict:
    rows = []
    for e in entries:
        row = {"N": e.N, "p_N": e.p_N, "status": e.status}
        if e.zero_count is not None:
            row["zero_count"] = e.zero_count
        if e.central_value is not None:
            row["central_value"] = dec(e.central_value.real, digits)
        if e.report is not None:
            row["report"] = polygon_dict(e.report, digits)
        rows.append(row)
    return {
        "curve": curve_label,
        "precision": {"working_bits": bits, "printed_digits": digits},
        "m": m,
        "c_m": dec(c_m, digits),
        "summary_hausdorff": None if summary is None else dec(summary, 6),
        "trend_slope": None if slope is None else dec(slope, 6),
        "entries": rows,
    }


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


ZERO_COLUMNS = ("N", "p_N", "j", "re", "im", "residual")


def zero_table_csv(rows: list[tuple[int | None, ZeroSet]], digits: int) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(ZERO_COLUMNS)
    for N, zs in rows:
        for j, z in enumerate(zs.zeros, start=1):
            out.writerow([N, zs.p_N, j, dec(z.location.real, digits), dec(z.location.imag, digits),
                          bound(z.residual)])
    return buf.getvalue()
