"""Encounter frame, RTN frame and conjunction-plane projections.

All positions are in meters and velocities in meters/second. Plane points are
returned as ``(2,)`` numpy arrays holding the coordinates along ``(j, k)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tetherpoc.errors import DegenerateEncounter, DegenerateOrbit, NonSymmetric

# Cross products smaller than this fraction of the operand norms are degenerate.
PARALLEL_TOL = 1e-9
SYMMETRY_TOL = 1e-9


def _vec3(x, name: str) -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite components: {v}")
    return v


def _frozen(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class EncounterFrame:
    """Local encounter frame ``(origin; i, j, k)``.

    ``i`` follows the relative velocity of the secondary with respect to the
    main body, ``j`` is normal to both velocities and ``k = i x j``. The
    conjunction plane is spanned by ``(j, k)`` through ``origin``.
    """

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    origin: np.ndarray

    @property
    def plane_basis(self) -> np.ndarray:
        """2x3 matrix whose rows are ``j`` and ``k``."""
        return np.vstack([self.j, self.k])


@dataclass(frozen=True)
class RtnFrame:
    """Radial / along-track / cross-track triad of the main body."""

    R: np.ndarray
    T: np.ndarray
    N: np.ndarray


def build_encounter_frame(v_p, v_s, origin=(0.0, 0.0, 0.0)) -> EncounterFrame:
    """Build the encounter frame from the main-body and secondary velocities.

    Raises:
        DegenerateEncounter: if the velocities are equal or parallel.
    """
    v_p = _vec3(v_p, "v_p")
    v_s = _vec3(v_s, "v_s")
    origin = _vec3(origin, "origin")

    rel = v_s - v_p
    rel_norm = np.linalg.norm(rel)
    if rel_norm == 0.0:
        raise DegenerateEncounter("zero relative velocity")
    cross = np.cross(v_s, v_p)
    cross_norm = np.linalg.norm(cross)
    if cross_norm <= PARALLEL_TOL * np.linalg.norm(v_s) * np.linalg.norm(v_p):
        raise DegenerateEncounter("main-body and secondary velocities are parallel")

    i = rel / rel_norm
    j = cross / cross_norm
    k = np.cross(i, j)
    return EncounterFrame(_frozen(i), _frozen(j), _frozen(k), _frozen(origin))


def build_rtn(r_p, v_p) -> RtnFrame:
    """Build the RTN frame of the main body from its inertial state.

    ``R = r/|r|``, ``N = (r x v)/|r x v|``, ``T = N x R``.
    """
    r_p = _vec3(r_p, "r_p")
    v_p = _vec3(v_p, "v_p")
    r_norm = np.linalg.norm(r_p)
    if r_norm == 0.0:
        raise DegenerateOrbit("zero position vector")
    h = np.cross(r_p, v_p)
    h_norm = np.linalg.norm(h)
    if h_norm <= PARALLEL_TOL * r_norm * np.linalg.norm(v_p):
        raise DegenerateOrbit("position and velocity are parallel")
    R = r_p / r_norm
    N = h / h_norm
    T = np.cross(N, R)
    return RtnFrame(_frozen(R), _frozen(T), _frozen(N))


def project_point(frame: EncounterFrame, x) -> np.ndarray:
    """Coordinates of ``x`` along ``(j, k)`` relative to the frame origin."""
    d = _vec3(x, "x") - frame.origin
    return np.array([d @ frame.j, d @ frame.k])


def project_covariance(frame: EncounterFrame, sigma3) -> np.ndarray:
    """Project a 3x3 position covariance onto the conjunction plane.

    Raises:
        NonSymmetric: if ``sigma3`` is asymmetric beyond 1e-9 relative.
    """
    s = np.asarray(sigma3, dtype=float)
    if s.shape != (3, 3):
        raise ValueError(f"sigma3 must be 3x3, got {s.shape}")
    check_symmetric(s, "sigma3")
    m = frame.plane_basis
    out = m @ s @ m.T
    return 0.5 * (out + out.T)


def check_symmetric(s: np.ndarray, name: str = "matrix") -> None:
    scale = np.max(np.abs(s))
    if scale > 0 and np.max(np.abs(s - s.T)) > SYMMETRY_TOL * scale:
        raise NonSymmetric(f"{name} is not symmetric: {s.tolist()}")


def projection_matrix(frame: EncounterFrame, rtn: RtnFrame) -> np.ndarray:
    """The 2x2 matrix mapping orbital-plane (R, T) coordinates into (j, k)."""
    return np.array(
        [
            [rtn.R @ frame.j, rtn.T @ frame.j],
            [rtn.R @ frame.k, rtn.T @ frame.k],
        ]
    )


def planar_ellipse_q(frame: EncounterFrame, rtn: RtnFrame, length: float) -> np.ndarray:
    """Shape matrix of the projected orbital-plane disk of radius ``length``.

    Any point of the tether confined to the main body's orbital plane projects
    into ``{x : x^T Q^-1 x <= 1}``. Q may be rank deficient when the orbital
    plane is seen edge-on.
    """
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    p = projection_matrix(frame, rtn)
    q = length**2 * (p @ p.T)
    return 0.5 * (q + q.T)


def radial_direction_u(frame: EncounterFrame, rtn: RtnFrame) -> np.ndarray:
    """Projection of the radial unit vector onto the conjunction plane."""
    return np.array([rtn.R @ frame.j, rtn.R @ frame.k])
