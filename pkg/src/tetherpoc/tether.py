"""Tether configurations as chains of rigid bars in the conjunction plane."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tetherpoc.errors import EmptyChain, FeasibleSampleNotFound, LengthBudgetExceeded, UnitViolation

TWO_PI = 2.0 * math.pi
BUDGET_TOL = 1e-9
MAX_SAMPLE_ATTEMPTS = 10_000
# Null-direction regularization of a rank-deficient Q, relative to the tether length.
Q_REGULARIZATION = 1e-6


@dataclass(frozen=True)
class HardBodyRadii:
    r_p1: float
    r_p2: float
    r_s: float

    def __post_init__(self):
        for name in ("r_p1", "r_p2", "r_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise UnitViolation(f"{name} must be a finite non-negative radius, got {v}")


@dataclass(frozen=True)
class TetherLimits:
    total_length: float

    def __post_init__(self):
        if not (math.isfinite(self.total_length) and self.total_length > 0):
            raise UnitViolation(f"tether length must be positive, got {self.total_length}")


def wrap_angles(angles) -> np.ndarray:
    a = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    return np.where(a >= TWO_PI, 0.0, a)


def chain_joints(lengths, angles) -> np.ndarray:
    """Joint positions ``(..., N+1, 2)`` of chains starting at the origin.

    Works on a single chain or a batch (leading dimensions broadcast).
    """
    lengths = np.asarray(lengths, dtype=float)
    angles = np.asarray(angles, dtype=float)
    steps = np.stack([lengths * np.cos(angles), lengths * np.sin(angles)], axis=-1)
    zero = np.zeros(steps.shape[:-2] + (1, 2))
    return np.concatenate([zero, np.cumsum(steps, axis=-2)], axis=-2)


@dataclass(frozen=True)
class TetherChain:
    """N rigid bars laid end to end from the main body at the origin.

    ``joints[0]`` is the main body and ``joints[-1]`` the small body.
    Angles are stored wrapped to ``[0, 2*pi)``.
    """

    lengths: np.ndarray
    angles: np.ndarray
    joints: np.ndarray = field(repr=False)

    @property
    def n_segments(self) -> int:
        return len(self.lengths)

    @property
    def total_length(self) -> float:
        return float(np.sum(self.lengths))

    @property
    def tip(self) -> np.ndarray:
        return self.joints[-1]

    def to_dict(self) -> dict:
        return {
            "segments": [[float(l), float(a)] for l, a in zip(self.lengths, self.angles)],
            "joints_m": [[float(x), float(y)] for x, y in self.joints],
        }


def build_chain(lengths, angles, limits: TetherLimits | None = None) -> TetherChain:
    """Build a chain from bar lengths (meters) and orientation angles (radians).

    Raises:
        EmptyChain: if no bars are given.
        LengthBudgetExceeded: if ``limits`` is given and the bars are too long.
    """
    lengths = np.array(lengths, dtype=float).reshape(-1)
    angles = np.array(angles, dtype=float).reshape(-1)
    if lengths.size == 0:
        raise EmptyChain("a chain needs at least one bar")
    if lengths.shape != angles.shape:
        raise ValueError(f"{lengths.size} lengths but {angles.size} angles")
    if not np.all(np.isfinite(lengths)) or not np.all(lengths > 0):
        raise ValueError(f"bar lengths must be finite and positive: {lengths}")
    if not np.all(np.isfinite(angles)):
        raise ValueError(f"angles must be finite: {angles}")
    if limits is not None and lengths.sum() > limits.total_length + BUDGET_TOL:
        raise LengthBudgetExceeded(
            f"bars total {lengths.sum():.12g} m, budget is {limits.total_length:.12g} m"
        )
    angles = wrap_angles(angles)
    joints = chain_joints(lengths, angles)
    for arr in (lengths, angles, joints):
        arr.setflags(write=False)
    return TetherChain(lengths, angles, joints)


def chain_from_joints(joints, limits: TetherLimits | None = None) -> TetherChain:
    """Inverse of the joint recursion; ``joints[0]`` must be the origin."""
    joints = np.asarray(joints, dtype=float)
    steps = np.diff(joints, axis=0)
    lengths = np.maximum(np.hypot(steps[:, 0], steps[:, 1]), 1e-12)
    angles = np.arctan2(steps[:, 1], steps[:, 0])
    return build_chain(lengths, angles, limits)


def regularize_q(q, length: float) -> tuple[np.ndarray, float]:
    """Make Q invertible by lifting a (near) null eigenvalue.

    Returns the regularized matrix and the amount added along the null
    eigenvector (zero when Q was already well conditioned).
    """
    q = np.asarray(q, dtype=float)
    q = 0.5 * (q + q.T)
    eps = (Q_REGULARIZATION * length) ** 2
    evals, evecs = np.linalg.eigh(q)
    if evals[0] >= eps:
        return q, 0.0
    v = evecs[:, 0]
    return q + eps * np.outer(v, v), eps


def ellipse_levels(points, q_inv) -> np.ndarray:
    """Quadratic form ``x^T Q^-1 x`` for each row of ``points``."""
    points = np.asarray(points, dtype=float)
    return np.einsum("...i,ij,...j->...", points, q_inv, points)


def planar_feasible(chain: TetherChain, q, tol: float = 1e-9, length: float | None = None) -> bool:
    """True when every joint lies in the ellipse ``x^T Q^-1 x <= 1 + tol``.

    ``length`` sets the regularization scale for a rank-deficient Q and
    defaults to ``sqrt(trace(Q))``.
    """
    q = np.asarray(q, dtype=float)
    if length is None:
        length = max(math.sqrt(max(np.trace(q), 0.0)), 1.0)
    q_reg, _ = regularize_q(q, length)
    levels = ellipse_levels(chain.joints, np.linalg.inv(q_reg))
    return bool(np.all(levels <= 1.0 + tol))


def _segment_distance(points, a, b) -> np.ndarray:
    d = b - a
    dd = d @ d
    rel = points - a
    t = np.clip(rel @ d / dd, 0.0, 1.0) if dd > 0 else np.zeros(len(points))
    diff = rel - t[:, None] * d
    return np.hypot(diff[:, 0], diff[:, 1])


def hard_body_contains(chain: TetherChain, radii: HardBodyRadii, p):
    """Membership test for the combined tether hard body.

    The region is the union of the main-body disk (radius ``r_p1 + r_s``),
    the tube of radius ``r_s`` around the chain and the small-body disk
    (radius ``r_p2 + r_s``). ``p`` may be a single point or an ``(n, 2)``
    array; the result has matching shape.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    j = chain.joints
    inside = np.hypot(*(pts - j[0]).T) <= radii.r_p1 + radii.r_s
    inside |= np.hypot(*(pts - j[-1]).T) <= radii.r_p2 + radii.r_s
    for a, b in zip(j[:-1], j[1:]):
        todo = np.flatnonzero(~inside)
        if todo.size == 0:
            break
        inside[todo] = _segment_distance(pts[todo], a, b) <= radii.r_s
    return bool(inside[0]) if single else inside


def _random_chains(rng: np.random.Generator, count: int, n_segments: int, total: float):
    lengths = total * rng.dirichlet(np.ones(n_segments), size=count)
    angles = rng.uniform(0.0, TWO_PI, size=(count, n_segments))
    return lengths, angles


def sample_chain(rng_seed, n_segments: int, limits: TetherLimits, q=None) -> TetherChain:
    """Random chain using the whole length budget.

    Bar lengths are uniform on the simplex ``sum = total_length`` and angles
    uniform on ``[0, 2*pi)``. With ``q``, candidates are rejection-sampled
    until every joint lies in the planar ellipse.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.

    Raises:
        FeasibleSampleNotFound: if no candidate out of 10 000 is feasible.
    """
    if n_segments < 1:
        raise EmptyChain("n_segments must be >= 1")
    rng = np.random.default_rng(rng_seed)
    total = limits.total_length
    if q is None:
        lengths, angles = _random_chains(rng, 1, n_segments, total)
        return build_chain(lengths[0], angles[0], limits)

    q_reg, _ = regularize_q(q, total)
    q_inv = np.linalg.inv(q_reg)
    batch = 1000
    for _ in range(MAX_SAMPLE_ATTEMPTS // batch):
        lengths, angles = _random_chains(rng, batch, n_segments, total)
        levels = ellipse_levels(chain_joints(lengths, angles), q_inv)
        ok = np.flatnonzero(np.all(levels <= 1.0 + 1e-9, axis=1))
        if ok.size:
            return build_chain(lengths[ok[0]], angles[ok[0]], limits)
    raise FeasibleSampleNotFound(
        f"no planar-feasible {n_segments}-bar chain in {MAX_SAMPLE_ATTEMPTS} attempts"
    )


def contract_into_ellipse(chain: TetherChain, q, limits: TetherLimits) -> TetherChain:
    """Map a chain's joints through ``Q^(1/2) / total_length``.

    Any chain within the disk of radius ``total_length`` lands inside the
    ellipse; bar lengths can only shrink because Q is dominated by
    ``total_length^2 * I``.
    """
    q_reg, _ = regularize_q(q, limits.total_length)
    evals, evecs = np.linalg.eigh(q_reg)
    root = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0))) @ evecs.T
    joints = chain.joints @ (root.T / limits.total_length)
    total = np.sum(np.hypot(*np.diff(joints, axis=0).T))
    if total > limits.total_length:
        joints *= limits.total_length / total
    return chain_from_joints(joints, limits)
