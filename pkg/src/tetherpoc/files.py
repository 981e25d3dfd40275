"""Event and report files (JSON documents, schema version 1).

Field names carry their units (``_m``, ``_m2``, ``_m_s``). The schemas ship
with the package as ``event.schema.json`` and ``report.schema.json``.
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from tetherpoc.assessment import RiskReport
from tetherpoc.errors import SchemaViolation, UnitViolation
from tetherpoc.estimators import ConjunctionEvent, EstimateResult
from tetherpoc.geometry import (
    build_encounter_frame,
    build_rtn,
    check_symmetric,
    planar_ellipse_q,
    project_covariance,
    project_point,
    radial_direction_u,
)
from tetherpoc.tether import HardBodyRadii, TetherChain, TetherLimits

SCHEMA_VERSION = 1
REPORT_DIGITS = 12


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    """Load a bundled schema, ``"event"`` or ``"report"``."""
    text = resources.files("tetherpoc.data").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def bundled_event_path(name: str) -> Path:
    """Path of a bundled example event, e.g. ``"case1"``."""
    return Path(str(resources.files("tetherpoc.data").joinpath(f"{name}.event")))


def validate_event_document(doc: dict) -> None:
    """Raise SchemaViolation or UnitViolation for an invalid event document."""
    try:
        jsonschema.validate(doc, load_schema("event"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"{where}: {exc.message}") from None

    tether = doc["tether"]
    if tether["length_m"] <= 0:
        raise UnitViolation(f"tether length_m must be positive, got {tether['length_m']}")
    for key, val in [("r_p1_m", tether["r_p1_m"]), ("r_p2_m", tether["r_p2_m"]), ("r_s_m", doc["secondary"]["r_s_m"])]:
        if val < 0:
            raise UnitViolation(f"{key} must be non-negative, got {val}")
    if doc["mode"] == "plane":
        block = doc["plane"]
        mats = {k: block[k] for k in ("sigma_m2", "q_planar_m2") if k in block}
    else:
        block = doc["full"]
        mats = {k: block[k] for k in ("sigma_p_m2", "sigma_s_m2")}
    for key, mat in mats.items():
        check_symmetric(np.asarray(mat, dtype=float), key)


def event_from_document(doc: dict) -> ConjunctionEvent:
    """Build a :class:`ConjunctionEvent` from a validated event document.

    In full mode the encounter and RTN frames are built from the inertial
    states and the plane quantities (relative position, combined covariance,
    radial direction, planar ellipse) are derived from them.
    """
    validate_event_document(doc)
    tether = doc["tether"]
    limits = TetherLimits(float(tether["length_m"]))
    radii = HardBodyRadii(float(tether["r_p1_m"]), float(tether["r_p2_m"]), float(doc["secondary"]["r_s_m"]))
    meta = dict(doc.get("metadata", {}))

    if doc["mode"] == "plane":
        plane = doc["plane"]
        return ConjunctionEvent(
            xs_rel=plane["xs_rel_m"],
            sigma=plane["sigma_m2"],
            limits=limits,
            radii=radii,
            u_radial=plane.get("u_radial"),
            q_planar=plane.get("q_planar_m2"),
            name=doc["name"],
            metadata=meta,
        )

    full = doc["full"]
    frame = build_encounter_frame(full["v_p_m_s"], full["v_s_m_s"], full["r_p_m"])
    rtn = build_rtn(full["r_p_m"], full["v_p_m_s"])
    sigma = project_covariance(frame, full["sigma_p_m2"]) + project_covariance(frame, full["sigma_s_m2"])
    return ConjunctionEvent(
        xs_rel=project_point(frame, full["r_s_m"]),
        sigma=sigma,
        limits=limits,
        radii=radii,
        u_radial=radial_direction_u(frame, rtn),
        q_planar=planar_ellipse_q(frame, rtn, limits.total_length),
        name=doc["name"],
        metadata=meta,
    )


def read_document(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from None


def parse_event(path) -> ConjunctionEvent:
    """Read and validate an event file."""
    return event_from_document(read_document(path))


def event_to_document(event: ConjunctionEvent) -> dict:
    """Plane-mode document for ``event`` (derived quantities written out)."""
    plane = {"xs_rel_m": event.xs_rel.tolist(), "sigma_m2": event.sigma.tolist()}
    if event.u_radial is not None:
        plane["u_radial"] = event.u_radial.tolist()
    if event.q_planar is not None:
        plane["q_planar_m2"] = event.q_planar.tolist()
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": event.name,
        "mode": "plane",
        "plane": plane,
        "tether": {
            "length_m": event.limits.total_length,
            "r_p1_m": event.radii.r_p1,
            "r_p2_m": event.radii.r_p2,
        },
        "secondary": {"r_s_m": event.radii.r_s},
    }
    if event.metadata:
        doc["metadata"] = dict(event.metadata)
    return doc


def write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_event(event: ConjunctionEvent, path) -> None:
    write_json(event_to_document(event), path)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _sig(x: float) -> float:
    return float(f"{x:.{REPORT_DIGITS}g}")


def chain_to_document(chain: TetherChain) -> dict:
    return {
        "n_segments": chain.n_segments,
        "segments": [{"length_m": _sig(l), "angle_rad": _sig(a)} for l, a in zip(chain.lengths, chain.angles)],
        "joints_m": [[_sig(x), _sig(y)] for x, y in chain.joints],
    }


def _plain(obj):
    """Convert numpy scalars and arrays inside diagnostics to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def estimate_to_document(est: EstimateResult) -> dict:
    return {
        "status": "ok",
        "value": est.value,
        "raw_value": est.raw,
        "chain": None if est.chain is None else chain_to_document(est.chain),
        "diagnostics": _plain(est.diagnostics),
    }


def report_to_document(report: RiskReport) -> dict:
    estimates = {name: estimate_to_document(est) for name, est in report.estimates.items()}
    for name, reason in report.unavailable.items():
        estimates[name] = {"status": "unavailable", "reason": reason}
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "tetherpoc", "version": report.version},
        "event": event_to_document(report.event),
        "options": report.options.to_dict(),
        "estimates": estimates,
        "ordering": report.ordering.to_dict() if report.ordering is not None else None,
        "verification": _plain(report.verification),
    }


def validate_report_document(doc: dict) -> None:
    try:
        jsonschema.validate(doc, load_schema("report"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"report {where}: {exc.message}") from None


def write_report(report: RiskReport, path) -> dict:
    doc = report_to_document(report)
    validate_report_document(doc)
    write_json(doc, path)
    return doc
