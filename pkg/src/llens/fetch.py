"""Client for LMFDB-style REST endpoints serving elliptic curve data.

Three collections are read: ``ec_curvedata`` (Weierstrass model, conductor, analytic
rank), ``ec_localdata`` (reduction type per bad prime) and, optionally,
``ec_classdata`` (a_p for small p, used as a recount check).  Anything missing or
of the wrong type raises :class:`SchemaMismatch`; values are never guessed.
"""

from __future__ import annotations

import logging

import httpx

from llens.curve import BadPrime, CurveSpec, ReductionType, coefficient_ap, primes_up_to
from llens.curvefile import CurveFile
from llens.errors import CurveFileError, NetworkError, SchemaMismatch

DEFAULT_ENDPOINT = "https://www.lmfdb.org/api"
TIMEOUT = 30.0

log = logging.getLogger(__name__)

# LMFDB encodes reduction as +1 split, -1 nonsplit, 0 additive
_RED = {1: ReductionType.SPLIT, -1: ReductionType.NONSPLIT, 0: ReductionType.ADDITIVE}


def _int(value, what: str) -> int:
    if isinstance(value, bool):
        raise SchemaMismatch(f"{what}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            pass
    raise SchemaMismatch(f"{what}: expected an integer, got {value!r}")


class CurveClient:
    def __init__(self, endpoint: str = DEFAULT_ENDPOINT, transport: httpx.BaseTransport | None = None,
                 timeout: float = TIMEOUT):
        self.endpoint = endpoint.rstrip("/")
        self._client = httpx.Client(transport=transport, timeout=timeout, follow_redirects=True)

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _rows(self, collection: str, **query) -> list[dict]:
        params = {**query, "_format": "json"}
        url = f"{self.endpoint}/{collection}/"
        try:
            resp = self._client.get(url, params=params)
        except httpx.HTTPError as exc:
            raise NetworkError(f"could not reach {url}: {exc}") from exc
        if resp.status_code != 200:
            raise NetworkError(f"{url} answered HTTP {resp.status_code}")
        try:
            doc = resp.json()
        except ValueError:
            raise SchemaMismatch(f"{url} did not return JSON") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("data"), list):
            raise SchemaMismatch(f"{url}: response has no 'data' list")
        return doc["data"]

    def _one(self, collection: str, **query) -> dict:
        rows = self._rows(collection, **query)
        if len(rows) != 1 or not isinstance(rows[0], dict):
            raise SchemaMismatch(f"{collection}: expected one record for {query}, got {len(rows)}")
        return rows[0]

    def curve(self, label: str) -> CurveFile:
        row = self._one("ec_curvedata", lmfdb_label=label)
        for key in ("ainvs", "conductor", "analytic_rank"):
            if key not in row:
                raise SchemaMismatch(f"ec_curvedata record lacks {key!r}")
        ainvs = row["ainvs"]
        if not isinstance(ainvs, list) or len(ainvs) != 5:
            raise SchemaMismatch(f"ainvs should be a list of five integers, got {ainvs!r}")
        ainvs = tuple(_int(a, "ainvs") for a in ainvs)
        conductor = _int(row["conductor"], "conductor")
        rank = _int(row["analytic_rank"], "analytic_rank")

        local = self._rows("ec_localdata", lmfdb_label=label)
        bad = []
        for rec in local:
            if "prime" not in rec or "red" not in rec:
                raise SchemaMismatch("ec_localdata record lacks 'prime' or 'red'")
            red = _int(rec["red"], "red")
            if red not in _RED:
                raise SchemaMismatch(f"unknown reduction code {red}")
            bad.append(BadPrime(_int(rec["prime"], "prime"), _RED[red]))
        bad.sort(key=lambda b: b.p)
        try:
            spec = CurveSpec(ainvs, conductor, -1 if rank % 2 else 1, tuple(bad), label)
        except (ValueError, CurveFileError) as exc:
            raise SchemaMismatch(f"upstream record for {label} is inconsistent: {exc}") from exc
        notes = f"fetched from {self.endpoint}; analytic rank {rank}"
        return CurveFile(spec, desk_scale=spec.desk_scale, notes=notes)

    def aplist(self, label: str) -> dict[int, int]:
        """a_p for p < 100 from the isogeny class record."""
        iso = label.rstrip("0123456789")
        row = self._one("ec_classdata", lmfdb_iso=iso)
        values = row.get("aplist")
        if not isinstance(values, list):
            raise SchemaMismatch("ec_classdata record lacks an 'aplist' list")
        primes = primes_up_to(100)
        if len(values) < len(primes):
            raise SchemaMismatch(f"aplist has {len(values)} entries, expected {len(primes)}")
        return {p: _int(a, "aplist") for p, a in zip(primes, values)}


def recount_mismatches(spec: CurveSpec, reference: dict[int, int]) -> list[tuple[int, int, int]]:
    """Primes where local point counting disagrees with ``reference``: (p, local, remote)."""
    bad = []
    for p, remote in sorted(reference.items()):
        local = coefficient_ap(spec, p)
        if local != remote:
            bad.append((p, local, remote))
    return bad


def fetch_curve(label: str, endpoint: str = DEFAULT_ENDPOINT, verify: bool = True,
                transport: httpx.BaseTransport | None = None) -> CurveFile:
    with CurveClient(endpoint, transport) as client:
        cf = client.curve(label)
        if verify:
            wrong = recount_mismatches(cf.spec, client.aplist(label))
            if wrong:
                raise SchemaMismatch(f"remote a_p disagree with point counts at {wrong[:5]}")
    return cf
