"""Seeded synthetic full-mode conjunctions between circular LEO orbits.

Used for property campaigns and the bundled ``synthetic_full`` example. The
main body's orbital plane is random; the secondary crosses it at a random
angle with a miss vector lying in the conjunction plane. Position
covariances are diagonal in each object's RTN frame.
"""
from __future__ import annotations

import math

import numpy as np

from tetherpoc.files import event_from_document
from tetherpoc.geometry import build_encounter_frame

MU_EARTH = 3.986004418e14
R_EARTH = 6_378_137.0


def _random_unit(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _rtn_covariance(rng, r_hat, t_hat, n_hat, spans) -> np.ndarray:
    sig = [rng.uniform(*span) for span in spans]
    basis = np.column_stack([r_hat, t_hat, n_hat])
    return basis @ np.diag(np.square(sig)) @ basis.T


def synthetic_document(seed: int, length_m: float = 4000.0, max_miss_m: float = 8000.0) -> dict:
    """Full-mode event document for ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    radius = R_EARTH + rng.uniform(500e3, 900e3)
    speed = math.sqrt(MU_EARTH / radius)

    n_p = _random_unit(rng)
    r_hat = _random_unit(rng)
    r_hat -= (r_hat @ n_p) * n_p
    r_hat /= np.linalg.norm(r_hat)
    t_p = np.cross(n_p, r_hat)
    r_p = radius * r_hat
    v_p = speed * t_p

    crossing = math.radians(rng.uniform(10.0, 170.0))
    t_s = math.cos(crossing) * t_p + math.sin(crossing) * n_p
    v_s = speed * t_s

    frame = build_encounter_frame(v_p, v_s, r_p)
    miss = rng.uniform(0.0, max_miss_m)
    phi = rng.uniform(0.0, 2 * math.pi)
    r_s = r_p + miss * (math.cos(phi) * frame.j + math.sin(phi) * frame.k)

    spans = [(20.0, 300.0), (100.0, 3000.0), (20.0, 300.0)]
    sigma_p = _rtn_covariance(rng, r_hat, t_p, n_p, spans)
    n_s = np.cross(r_hat, t_s)
    sigma_s = _rtn_covariance(rng, r_hat, t_s, n_s, spans)

    return {
        "schema_version": 1,
        "name": f"synthetic-{seed}",
        "mode": "full",
        "full": {
            "r_p_m": r_p.tolist(),
            "v_p_m_s": v_p.tolist(),
            "r_s_m": r_s.tolist(),
            "v_s_m_s": v_s.tolist(),
            "sigma_p_m2": sigma_p.tolist(),
            "sigma_s_m2": sigma_s.tolist(),
        },
        "tether": {"length_m": length_m, "r_p1_m": 5.0, "r_p2_m": 1.0},
        "secondary": {"r_s_m": 1.0},
        "metadata": {
            "miss_distance_m": float(miss),
            "relative_speed_km_s": float(np.linalg.norm(v_s - v_p) / 1000.0),
        },
    }


def synthetic_event(seed: int, **kwargs):
    return event_from_document(synthetic_document(seed, **kwargs))
