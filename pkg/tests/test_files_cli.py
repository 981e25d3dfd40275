import copy
import json
import math
import re

import numpy as np
import pytest

from tetherpoc.assessment import assess
from tetherpoc.cli import main
from tetherpoc.errors import DegenerateEncounter, NonSymmetric, SchemaViolation, UnitViolation
from tetherpoc.estimators import OptimizerOptions
from tetherpoc.files import (
    bundled_event_path,
    event_from_document,
    parse_event,
    read_document,
    report_to_document,
    validate_report_document,
    write_event,
    write_json,
    write_report,
)
from tetherpoc.svg import render_svg

FAST_ARGS = ["--starts", "10", "--segments", "1,2"]


def full_doc():
    return {
        "schema_version": 1,
        "name": "hand",
        "mode": "full",
        "full": {
            "r_p_m": [7e6, 0, 0],
            "v_p_m_s": [0, 7500, 0],
            "r_s_m": [7e6 - 100, -50 / math.sqrt(2), -50 / math.sqrt(2)],
            "v_s_m_s": [0, 0, 7500],
            "sigma_p_m2": [[100, 0, 0], [0, 200, 0], [0, 0, 300]],
            "sigma_s_m2": [[10, 0, 0], [0, 10, 0], [0, 0, 10]],
        },
        "tether": {"length_m": 4000, "r_p1_m": 5, "r_p2_m": 1},
        "secondary": {"r_s_m": 1},
    }


def test_case1_plane_values(case1):
    np.testing.assert_array_equal(case1.xs_rel, [1325, 1313])
    np.testing.assert_array_equal(case1.sigma, [[21446, -72258], [-72258, 1435168]])
    assert case1.length == 4000 and case1.radii.r_s == 1
    assert case1.u_radial is None and case1.q_planar is None
    assert case1.metadata["miss_distance_m"] == 1865


def test_case2_plane_values(case2):
    np.testing.assert_array_equal(case2.xs_rel, [-2401, 40770])


def test_full_mode_hand_checked_frames():
    ev = event_from_document(full_doc())
    np.testing.assert_allclose(ev.xs_rel, [100, 50], atol=1e-6)
    np.testing.assert_allclose(ev.sigma, np.diag([110, 260]), atol=1e-9)
    np.testing.assert_allclose(ev.u_radial, [-1, 0], atol=1e-12)
    np.testing.assert_allclose(ev.q_planar, 4000**2 * np.diag([1, 0.5]), rtol=1e-12)


def test_bundled_full_example_invariants():
    ev = parse_event(bundled_event_path("synthetic_full"))
    assert np.linalg.norm(ev.u_radial) <= 1 + 1e-12
    evals = np.linalg.eigvalsh(ev.q_planar)
    assert evals[0] >= -1e-6 and evals[1] <= 4000**2 * (1 + 1e-12)


def test_both_modes_rejected(case1):
    doc = read_document(bundled_event_path("case1"))
    doc["full"] = full_doc()["full"]
    with pytest.raises(SchemaViolation):
        event_from_document(doc)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("tether"),
        lambda d: d["plane"].pop("sigma_m2"),
        lambda d: d.update(extra=1),
        lambda d: d.update(schema_version=2),
        lambda d: d.update(mode="full"),
        lambda d: d["plane"].update(xs_rel_m=[1, 2, 3]),
    ],
)
def test_schema_violations(mutate):
    doc = read_document(bundled_event_path("case1"))
    mutate(doc)
    with pytest.raises(SchemaViolation):
        event_from_document(doc)


def test_unit_violations():
    doc = read_document(bundled_event_path("case1"))
    doc["tether"]["length_m"] = 0
    with pytest.raises(UnitViolation):
        event_from_document(doc)
    doc = read_document(bundled_event_path("case1"))
    doc["secondary"]["r_s_m"] = -1
    with pytest.raises(UnitViolation):
        event_from_document(doc)


def test_asymmetric_matrix_rejected():
    doc = read_document(bundled_event_path("case1"))
    doc["plane"]["sigma_m2"][0][1] = -70000
    with pytest.raises(NonSymmetric):
        event_from_document(doc)


def test_degenerate_full_event():
    doc = full_doc()
    doc["full"]["v_s_m_s"] = [0, 15000, 0]
    with pytest.raises(DegenerateEncounter):
        event_from_document(doc)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.event"
    path.write_text("{not json")
    with pytest.raises(SchemaViolation):
        parse_event(path)


def test_round_trip(tmp_path):
    ev = parse_event(bundled_event_path("synthetic_full"))
    path = tmp_path / "rt.event"
    write_event(ev, path)
    back = parse_event(path)
    for name in ("xs_rel", "sigma", "u_radial", "q_planar"):
        np.testing.assert_allclose(getattr(back, name), getattr(ev, name), rtol=1e-12, atol=0)
    assert back.radii == ev.radii and back.limits == ev.limits and back.name == ev.name


def test_report_document_validates(case1, tmp_path):
    report = assess(case1, OptimizerOptions(starts_per_n=10, segment_grid=(1, 2)), "std,chaos,radial")
    doc = write_report(report, tmp_path / "r.json")
    assert doc["estimates"]["radial"]["status"] == "unavailable"
    assert doc["ordering"]["passed"]
    chain = doc["estimates"]["chaos"]["chain"]
    joints = np.array(chain["joints_m"])
    lengths = [s["length_m"] for s in chain["segments"]]
    np.testing.assert_allclose(np.hypot(*np.diff(joints, axis=0).T), lengths, rtol=1e-10)
    assert sum(lengths) <= 4000 + 1e-6
    on_disk = json.loads((tmp_path / "r.json").read_text())
    validate_report_document(on_disk)
    bad = copy.deepcopy(on_disk)
    bad["estimates"]["std"]["value"] = 1.5
    with pytest.raises(SchemaViolation):
        validate_report_document(bad)


def test_cli_smoke(tmp_path, capsys):
    out = tmp_path / "r.json"
    rc = main(["assess", "--input", "case1", "--estimators", "std,chaos", "--seed", "0", "--out", str(out), *FAST_ARGS])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert set(doc["estimates"]) == {"std", "chaos"}
    assert "PoC" in capsys.readouterr().out


def test_cli_accepts_file_path(tmp_path):
    src = tmp_path / "e.event"
    write_json(full_doc(), src)
    rc = main(["assess", "--input", str(src), "--out", str(tmp_path / "r.json"), *FAST_ARGS])
    doc = json.loads((tmp_path / "r.json").read_text())
    assert rc == 0 and set(doc["estimates"]) == {"std", "radial", "plane", "chaos"}


def test_cli_unavailable_estimator_exit_code(tmp_path):
    out = tmp_path / "r.json"
    assert main(["assess", "--input", "case1", "--estimators", "radial", "--out", str(out)]) == 2
    assert json.loads(out.read_text())["estimates"]["radial"]["status"] == "unavailable"


def test_cli_default_selection_tolerates_missing_orientation(tmp_path):
    assert main(["assess", "--input", "case2", "--out", str(tmp_path / "r.json"), *FAST_ARGS]) == 0


def test_cli_errors_exit_one(tmp_path, capsys):
    assert main(["assess", "--input", "nope.event", "--out", str(tmp_path / "r.json")]) == 1
    bad = tmp_path / "bad.event"
    bad.write_text("{}")
    assert main(["assess", "--input", str(bad), "--out", str(tmp_path / "r.json")]) == 1
    assert main(["assess", "--input", "case1", "--estimators", "foo", "--out", str(tmp_path / "r.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_verify_mc(tmp_path):
    out = tmp_path / "r.json"
    args = ["assess", "--input", "case2", "--estimators", "std,chaos", "--verify", "mc"]
    assert main([*args, "--mc-samples", "1000000", "--out", str(out), *FAST_ARGS]) == 0
    ver = json.loads(out.read_text())["verification"]
    assert ver["mode"] == "mc"
    assert set(ver["oracles"]) == {"std", "chaos"}
    assert ver["oracles"]["std"]["within_interval"]
    assert ver["oracles"]["std"]["mc"]["n_samples"] == 1_000_000


def test_cli_verify_full(tmp_path):
    out = tmp_path / "r.json"
    args = ["assess", "--input", "synthetic_full", "--verify", "full", "--mc-samples", "20000"]
    assert main([*args, "--out", str(out), *FAST_ARGS]) == 0
    ver = json.loads(out.read_text())["verification"]
    assert [b["distribution"]["family"] for b in ver["upper_bound"]] == ["uniform", "ellipse", "fixed"]
    assert all(b["passed"] for b in ver["upper_bound"])


def _report_doc(event, estimators):
    return report_to_document(assess(event, OptimizerOptions(starts_per_n=10, segment_grid=(1, 2)), estimators))


def test_svg_case1(case1):
    svg = render_svg(_report_doc(case1, "std,chaos"))
    assert svg.count('class="covariance"') == 1
    circles = re.findall(r'<circle class="std-hbr" data-radius-m="([^"]+)"[^>]*stroke-dasharray', svg)
    assert circles == ["4001"]
    assert svg.count('class="chain chain-chaos"') == 1
    assert 'class="main-body"' in svg and 'class="small-body"' in svg
    assert "j [m]" in svg and "k [m]" in svg


def test_svg_with_planar_region():
    svg = render_svg(_report_doc(parse_event(bundled_event_path("synthetic_full")), "std,radial,plane,chaos"))
    assert 'class="planar-region"' in svg and 'stroke="green"' in svg
    assert svg.count("<polyline") == 3


def test_svg_without_chains(case1, tmp_path):
    path = tmp_path / "p.svg"
    svg = render_svg(_report_doc(case1, "std"), path)
    assert "<polyline" not in svg
    assert 'class="std-hbr"' in svg and svg.count('class="covariance"') == 1
    assert path.read_text() == svg


def test_cli_outputs_are_deterministic(tmp_path):
    outs = []
    for run in ("a", "b"):
        out, plot = tmp_path / f"{run}.json", tmp_path / f"{run}.svg"
        main(["assess", "--input", "case1", "--seed", "0", "--out", str(out), "--plot", str(plot), *FAST_ARGS])
        outs.append((out.read_bytes(), plot.read_bytes()))
    assert outs[0] == outs[1]
