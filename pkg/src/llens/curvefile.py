"""Curve files: the JSON form of a :class:`CurveSpec` plus the bundled dataset."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from llens.curve import INVERSE_FACTORS, BadPrime, CurveSpec
from llens.errors import CurveFileError

SCHEMA_VERSION = 1

CURVE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "label", "weierstrass", "conductor", "root_number", "bad_primes"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "label": {"type": "string", "minLength": 1},
        "weierstrass": {"type": "array", "items": {"type": "integer"}, "minItems": 5, "maxItems": 5},
        "conductor": {"type": "integer", "minimum": 11},
        "root_number": {"enum": [1, -1]},
        "bad_primes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["p", "inverse_factor"],
                "properties": {
                    "p": {"type": "integer", "minimum": 2},
                    "inverse_factor": {"enum": sorted(INVERSE_FACTORS)},
                },
            },
        },
        "desk_scale": {"type": "boolean"},
        "notes": {"type": "string"},
    },
}


@dataclass(frozen=True)
class CurveFile:
    spec: CurveSpec
    desk_scale: bool = True
    notes: str = ""

    @property
    def label(self) -> str:
        return self.spec.label or ""

    def to_dict(self) -> dict:
        s = self.spec
        return {
            "schema_version": SCHEMA_VERSION,
            "label": s.label,
            "weierstrass": list(s.ainvs),
            "conductor": s.conductor,
            "root_number": s.root_number,
            "bad_primes": [{"p": b.p, "inverse_factor": b.inverse_factor} for b in s.bad_primes],
            "desk_scale": self.desk_scale,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def content_hash(self) -> bytes:
        """SHA-256 of the canonical serialisation; identifies the curve in cache headers."""
        return hashlib.sha256(self.to_json().encode()).digest()


def parse_curve(doc: dict) -> CurveFile:
    try:
        jsonschema.validate(doc, CURVE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise CurveFileError(f"curve file invalid: {exc.message}") from None
    bad = tuple(BadPrime.from_inverse_factor(b["p"], b["inverse_factor"]) for b in doc["bad_primes"])
    spec = CurveSpec(tuple(doc["weierstrass"]), doc["conductor"], doc["root_number"], bad, doc["label"])
    return CurveFile(spec, doc.get("desk_scale", True), doc.get("notes", ""))


def loads_curve(text: str) -> CurveFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CurveFileError(f"not valid JSON: {exc}") from None
    return parse_curve(doc)


def load_curve(path) -> CurveFile:
    return loads_curve(Path(path).read_text(encoding="utf-8"))


def bundled_labels() -> list[str]:
    folder = resources.files("llens") / "data" / "curves"
    return sorted(p.name[: -len(".json")] for p in folder.iterdir() if p.name.endswith(".json"))


def bundled_curve(label: str) -> CurveFile:
    path = resources.files("llens") / "data" / "curves" / f"{label}.json"
    if not path.is_file():
        raise CurveFileError(f"no bundled curve {label!r}; available: {', '.join(bundled_labels())}")
    return loads_curve(path.read_text(encoding="utf-8"))


def resolve_curve(name: str) -> CurveFile:
    """Accept either a path to a curve file or the label of a bundled curve."""
    path = Path(name)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise CurveFileError(f"curve file {name} not found")
        return load_curve(path)
    return bundled_curve(name)
