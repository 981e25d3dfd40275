"""Static SVG of the conjunction plane for a report document.

Shows the maximizing chains (red), the main and small bodies (navy squares),
the 1-sigma ellipse of the combined covariance around the secondary, the
inflated-sphere disk (black dashed) and, when known, the planar admissible
ellipse (green dashed). Axes are the ``(j, k)`` coordinates in meters.
"""
from __future__ import annotations

import math

import numpy as np

CANVAS = 800
PAD = 70
MARGIN = 0.10
CHAIN_STYLES = {
    "chaos": ("#d62728", ""),
    "plane": ("#ff7f0e", "12 4"),
    "radial": ("#8c1010", "4 3"),
}


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _nice_step(span: float) -> float:
    raw = span / 6.0
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if mult * mag >= raw:
            return mult * mag
    return 10 * mag


def _ellipse_params(cov, scale: float = 1.0):
    """Semi-axes and orientation (degrees, counter-clockwise) of an ellipse x^T C^-1 x = scale^2."""
    evals, evecs = np.linalg.eigh(np.asarray(cov, dtype=float))
    evals = np.maximum(evals, 0.0)
    major = evecs[:, 1]
    angle = math.degrees(math.atan2(major[1], major[0]))
    return scale * math.sqrt(evals[1]), scale * math.sqrt(evals[0]), angle


def render_svg(report: dict, path=None) -> str:
    """Render a report document; writes to ``path`` when given and returns the SVG text."""
    event = report["event"]
    plane = event["plane"]
    length = event["tether"]["length_m"]
    r_s = event["secondary"]["r_s_m"]
    std_radius = length + r_s
    mean = np.asarray(plane["xs_rel_m"], dtype=float)
    sigma = np.asarray(plane["sigma_m2"], dtype=float)
    q = plane.get("q_planar_m2")

    chains = {}
    for name in ("radial", "plane", "chaos"):
        est = report["estimates"].get(name)
        if est and est.get("status") == "ok" and est.get("chain"):
            chains[name] = np.asarray(est["chain"]["joints_m"], dtype=float)

    # Bounding box in plane coordinates.
    xs = [-std_radius, std_radius]
    ys = [-std_radius, std_radius]
    sd = np.sqrt(np.diag(sigma))
    xs += [mean[0] - sd[0], mean[0] + sd[0]]
    ys += [mean[1] - sd[1], mean[1] + sd[1]]
    for joints in chains.values():
        xs += list(joints[:, 0])
        ys += list(joints[:, 1])
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    half = 0.5 * span * (1 + 2 * MARGIN)
    x0, x1, y0, y1 = cx - half, cx + half, cy - half, cy + half
    scale = (CANVAS - 2 * PAD) / (2 * half)

    def px(x):
        return PAD + (x - x0) * scale

    def py(y):
        return PAD + (y1 - y) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}" font-family="sans-serif" font-size="12">',
        f"<title>{event.get('name', '')}: conjunction plane</title>",
        f'<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]

    # Axes with ticks.
    inner = CANVAS - 2 * PAD
    out.append(f'<rect class="frame" x="{PAD}" y="{PAD}" width="{inner}" height="{inner}" fill="none" stroke="#444"/>')
    step = _nice_step(2 * half)
    tick = math.ceil(x0 / step) * step
    while tick <= x1:
        x = px(tick)
        out.append(f'<line x1="{_fmt(x)}" y1="{CANVAS - PAD}" x2="{_fmt(x)}" y2="{CANVAS - PAD + 5}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(x)}" y="{CANVAS - PAD + 18}" text-anchor="middle">{tick:g}</text>')
        tick += step
    tick = math.ceil(y0 / step) * step
    while tick <= y1:
        y = py(tick)
        out.append(f'<line x1="{PAD - 5}" y1="{_fmt(y)}" x2="{PAD}" y2="{_fmt(y)}" stroke="#444"/>')
        out.append(f'<text x="{PAD - 8}" y="{_fmt(y + 4)}" text-anchor="end">{tick:g}</text>')
        tick += step
    out.append(f'<text x="{CANVAS / 2}" y="{CANVAS - 20}" text-anchor="middle">j [m]</text>')
    out.append(f'<text x="20" y="{CANVAS / 2}" text-anchor="middle" transform="rotate(-90 20 {CANVAS / 2})">k [m]</text>')

    out.append(
        f'<circle class="std-hbr" data-radius-m="{std_radius:g}" cx="{_fmt(px(0))}" cy="{_fmt(py(0))}" '
        f'r="{_fmt(std_radius * scale)}" fill="none" stroke="black" stroke-dasharray="8 5"/>'
    )
    if q is not None:
        a, b, ang = _ellipse_params(q)
        out.append(
            f'<ellipse class="planar-region" cx="{_fmt(px(0))}" cy="{_fmt(py(0))}" rx="{_fmt(a * scale)}" '
            f'ry="{_fmt(b * scale)}" transform="rotate({_fmt(-ang)} {_fmt(px(0))} {_fmt(py(0))})" '
            f'fill="none" stroke="green" stroke-dasharray="8 5"/>'
        )
    a, b, ang = _ellipse_params(sigma)
    out.append(
        f'<ellipse class="covariance" cx="{_fmt(px(mean[0]))}" cy="{_fmt(py(mean[1]))}" rx="{_fmt(a * scale)}" '
        f'ry="{_fmt(b * scale)}" transform="rotate({_fmt(-ang)} {_fmt(px(mean[0]))} {_fmt(py(mean[1]))})" '
        f'fill="#1f77b4" fill-opacity="0.15" stroke="#1f77b4"/>'
    )
    out.append(f'<circle class="secondary" cx="{_fmt(px(mean[0]))}" cy="{_fmt(py(mean[1]))}" r="3" fill="#1f77b4"/>')

    for name, joints in chains.items():
        color, dash = CHAIN_STYLES[name]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in joints)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(
            f'<polyline class="chain chain-{name}" points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="2"{dash_attr}/>'
        )
        tx, ty = px(joints[-1, 0]), py(joints[-1, 1])
        out.append(f'<rect class="small-body" x="{_fmt(tx - 4)}" y="{_fmt(ty - 4)}" width="8" height="8" fill="navy"/>')
    out.append(f'<rect class="main-body" x="{_fmt(px(0) - 5)}" y="{_fmt(py(0) - 5)}" width="10" height="10" fill="navy"/>')

    # Legend.
    lx, ly = PAD + 10, PAD + 18
    entries = [("black", "8 5", f"inflated HBR disk, radius {std_radius:g} m")]
    if q is not None:
        entries.append(("green", "8 5", "planar admissible region"))
    entries.append(("#1f77b4", "", "1-sigma combined covariance"))
    for name in chains:
        color, dash = CHAIN_STYLES[name]
        value = report["estimates"][name]["value"]
        entries.append((color, dash, f"{name} maximizer, PoC {value:.3g}"))
    for i, (color, dash, label) in enumerate(entries):
        y = ly + 16 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 24}" y2="{y - 4}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 30}" y="{y}">{label}</text>')

    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
