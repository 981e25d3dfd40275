"""Collision-probability estimators for a tethered primary.

Four figures are produced for a :class:`ConjunctionEvent`:

* ``std``: inflated-sphere method, a disk of radius ``length + r_s``;
* ``radial``: the single straight Earth-pointing configuration;
* ``plane``: worst case over chains confined to the projected orbital plane;
* ``chaos``: worst case over every chain of the given length.

The worst cases maximize the fast over-approximation of
:func:`approx_poc_chain` (end disks plus one rectangle per bar) with a
random multistart followed by L-BFGS-B refinement.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from tetherpoc.errors import FeasibleSampleNotFound, MissingOrientation, UnitViolation
from tetherpoc.gaussian import (
    DEFAULT_ABS_TOL,
    Disk2,
    Gaussian2,
    disk_probabilities,
    poc_disk,
    rect_probabilities,
)
from tetherpoc.geometry import check_symmetric
from tetherpoc.tether import (
    HardBodyRadii,
    TetherChain,
    TetherLimits,
    build_chain,
    chain_from_joints,
    chain_joints,
    contract_into_ellipse,
    ellipse_levels,
    regularize_q,
    sample_chain,
)

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
# A radial footprint shorter than this is treated as a point.
DEGENERATE_FOOTPRINT_M = 1e-9
_MIN_WEIGHT = 1e-3
# Below this chain total, 4-corner bar errors near 1e-15 exceed 1e-9 relative.
SMALL_TOTAL = 1e-6


@dataclass(frozen=True)
class ConjunctionEvent:
    """Everything needed at TCA, expressed in the conjunction plane.

    ``xs_rel`` is the secondary position relative to the main body (m) and
    ``sigma`` the combined 2x2 position covariance (m^2).
    """

    xs_rel: np.ndarray
    sigma: np.ndarray
    limits: TetherLimits
    radii: HardBodyRadii
    u_radial: np.ndarray | None = None
    q_planar: np.ndarray | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "xs_rel", np.array(self.xs_rel, dtype=float).reshape(2))
        sigma = np.array(self.sigma, dtype=float).reshape(2, 2)
        check_symmetric(sigma, "sigma")
        object.__setattr__(self, "sigma", sigma)
        if self.u_radial is not None:
            u = np.array(self.u_radial, dtype=float).reshape(2)
            if np.hypot(*u) > 1 + 1e-9:
                raise UnitViolation(f"|u_radial| must be <= 1, got {np.hypot(*u)}")
            object.__setattr__(self, "u_radial", u)
        if self.q_planar is not None:
            q = np.array(self.q_planar, dtype=float).reshape(2, 2)
            check_symmetric(q, "q_planar")
            if np.linalg.eigvalsh(q)[0] < -1e-9 * max(np.trace(q), 1.0):
                raise UnitViolation(f"q_planar must be positive semidefinite: {q.tolist()}")
            object.__setattr__(self, "q_planar", q)

    @cached_property
    def gaussian(self) -> Gaussian2:
        return Gaussian2(self.xs_rel, self.sigma)

    @property
    def length(self) -> float:
        return self.limits.total_length


@dataclass(frozen=True)
class OptimizerOptions:
    seed: int = 0
    starts_per_n: int = 200
    refine_top: int = 10
    segment_grid: tuple[int, ...] = (1, 2, 4, 8, 16)
    penalty_weights: tuple[float, ...] = (1e2, 1e4, 1e6)
    gradient_fd_step: float = 1e-6
    convergence_tol: float = 1e-9
    max_iterations: int = 500
    abs_tol: float = DEFAULT_ABS_TOL

    def __post_init__(self):
        object.__setattr__(self, "segment_grid", tuple(int(n) for n in self.segment_grid))
        object.__setattr__(self, "penalty_weights", tuple(float(w) for w in self.penalty_weights))
        if not self.segment_grid or min(self.segment_grid) < 1:
            raise ValueError(f"segment_grid must be non-empty with N >= 1: {self.segment_grid}")
        if min(self.starts_per_n, self.refine_top, self.max_iterations) < 1:
            raise ValueError("starts_per_n, refine_top and max_iterations must be positive")
        if not self.penalty_weights or min(self.penalty_weights) <= 0:
            raise ValueError(f"penalty weights must be positive: {self.penalty_weights}")
        if not (self.gradient_fd_step > 0 and self.convergence_tol > 0):
            raise ValueError("gradient_fd_step and convergence_tol must be positive")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "starts_per_n": self.starts_per_n,
            "refine_top": self.refine_top,
            "segment_grid": list(self.segment_grid),
            "penalty_weights": list(self.penalty_weights),
            "gradient_fd_step": self.gradient_fd_step,
            "convergence_tol": self.convergence_tol,
            "max_iterations": self.max_iterations,
            "abs_tol": self.abs_tol,
        }


@dataclass(frozen=True)
class EstimateResult:
    """One PoC figure; ``value`` is ``raw`` clamped to ``[0, 1]``."""

    name: str
    value: float
    raw: float
    chain: TetherChain | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


class ChainObjective:
    """Batched evaluation of the approximate chain PoC for one event.

    The main-body term does not depend on the configuration and is computed
    once. Bars are first evaluated to absolute accuracy only; chains whose
    total is small enough for that to matter get their bars recomputed to
    relative precision.
    """

    def __init__(self, event: ConjunctionEvent, abs_tol: float = DEFAULT_ABS_TOL):
        self.event = event
        self.abs_tol = abs_tol
        self.g = event.gaussian
        r = event.radii
        self.main_term = poc_disk(Disk2((0.0, 0.0), r.r_p1 + r.r_s), self.g, abs_tol)
        self.tip_radius = r.r_p2 + r.r_s
        self.halfwidth = r.r_s
        self.n_evals = 0

    def raw(self, lengths, angles) -> np.ndarray:
        """Approximate PoC of each chain in a ``(B, N)`` batch."""
        lengths = np.atleast_2d(lengths)
        angles = np.atleast_2d(angles)
        b, n = lengths.shape
        self.n_evals += b
        joints = chain_joints(lengths, angles)
        axes = np.stack([np.cos(angles), np.sin(angles)], axis=-1).reshape(-1, 2)
        anchors = joints[:, :-1, :].reshape(-1, 2)
        flat = lengths.reshape(-1)
        rects = rect_probabilities(anchors, axes, flat, self.halfwidth, self.g, precise_below=0.0).reshape(b, n)
        tip = disk_probabilities(joints[:, -1, :], self.tip_radius, self.g, self.abs_tol)
        total = self.main_term + rects.sum(axis=1) + tip
        small = np.repeat(total < SMALL_TOTAL, n)
        if np.any(small):
            rects.reshape(-1)[small] = rect_probabilities(anchors[small], axes[small], flat[small], self.halfwidth, self.g)
            total = self.main_term + rects.sum(axis=1) + tip
        return total

    def chain_raw(self, chain: TetherChain) -> float:
        return float(self.raw(chain.lengths[None, :], chain.angles[None, :])[0])


def approx_poc_chain(chain: TetherChain, event: ConjunctionEvent, abs_tol: float = DEFAULT_ABS_TOL) -> float:
    """Approximate PoC of a chain: both end disks plus one rectangle per bar.

    Returns the raw sum, which may exceed 1; clamp before reporting as a
    probability.
    """
    return ChainObjective(event, abs_tol).chain_raw(chain)


def _result(name: str, raw: float, chain=None, **diagnostics) -> EstimateResult:
    return EstimateResult(name, float(min(max(raw, 0.0), 1.0)), float(raw), chain, diagnostics)


# ---------------------------------------------------------------------------
# Closed evaluations
# ---------------------------------------------------------------------------


def poc_std(event: ConjunctionEvent, abs_tol: float = DEFAULT_ABS_TOL) -> EstimateResult:
    """Inflated-sphere PoC: disk of radius ``length + r_s`` on the main body."""
    radius = event.length + event.radii.r_s
    raw = poc_disk(Disk2((0.0, 0.0), radius), event.gaussian, abs_tol)
    return _result("std", raw, None, disk_radius_m=radius)


def radial_chain(event: ConjunctionEvent) -> TetherChain:
    if event.u_radial is None:
        raise MissingOrientation("event has no radial direction u_radial")
    tip = -event.length * event.u_radial
    reach = float(np.hypot(*tip))
    if reach < DEGENERATE_FOOTPRINT_M:
        return build_chain([DEGENERATE_FOOTPRINT_M * 1e-3], [0.0])
    return build_chain([reach], [math.atan2(tip[1], tip[0])], event.limits)


def poc_radial(event: ConjunctionEvent, abs_tol: float = DEFAULT_ABS_TOL) -> EstimateResult:
    """PoC of the straight tether hanging along ``-R_p``.

    A footprint that collapses to a point is evaluated as a single disk of
    radius ``max(r_p1, r_p2) + r_s``.
    """
    chain = radial_chain(event)
    r = event.radii
    footprint = event.length * float(np.hypot(*event.u_radial))
    if footprint < DEGENERATE_FOOTPRINT_M:
        raw = poc_disk(Disk2((0.0, 0.0), max(r.r_p1, r.r_p2) + r.r_s), event.gaussian, abs_tol)
        return _result("radial", raw, chain, degenerate_footprint=True, footprint_m=footprint)
    raw = approx_poc_chain(chain, event, abs_tol)
    return _result("radial", raw, chain, degenerate_footprint=False, footprint_m=footprint)


# ---------------------------------------------------------------------------
# Worst-case search
# ---------------------------------------------------------------------------


@dataclass
class _Candidate:
    raw: float
    chain: TetherChain
    origin: str


def _weights_from_lengths(lengths) -> np.ndarray:
    w = np.sqrt(np.asarray(lengths, dtype=float))
    return np.clip(w / w.max(), _MIN_WEIGHT, 1.0)


def _unpack(z, n: int, total: float):
    w2 = z[..., :n] ** 2
    lengths = total * w2 / w2.sum(axis=-1, keepdims=True)
    return lengths, z[..., n:]


class _Refiner:
    """L-BFGS-B on ``-raw/scale`` (+ ellipse penalty) with batched forward differences."""

    def __init__(self, objective: ChainObjective, opts: OptimizerOptions, scale: float, q_inv=None):
        self.obj = objective
        self.opts = opts
        self.scale = scale
        self.q_inv = q_inv
        self.total = objective.event.length

    def values(self, z_batch, n: int, weight: float) -> np.ndarray:
        lengths, angles = _unpack(z_batch, n, self.total)
        val = -self.obj.raw(lengths, angles) / self.scale
        if self.q_inv is not None and weight > 0:
            levels = ellipse_levels(chain_joints(lengths, angles)[:, 1:, :], self.q_inv)
            val = val + weight * np.sum(np.maximum(levels - 1.0, 0.0) ** 2, axis=1)
        return val

    def value_and_grad(self, z, n: int, weight: float):
        steps = self.opts.gradient_fd_step * np.maximum(np.abs(z), 1.0)
        batch = np.vstack([z, z + np.diag(steps)])
        vals = self.values(batch, n, weight)
        return float(vals[0]), (vals[1:] - vals[0]) / steps

    def run(self, z0, n: int, weights: Sequence[float]):
        bounds = [(_MIN_WEIGHT, 1.0)] * n + [(None, None)] * n
        z = np.asarray(z0, dtype=float)
        iterations = 0
        for weight in weights:
            res = minimize(
                self.value_and_grad,
                z,
                args=(n, weight),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={
                    "maxiter": self.opts.max_iterations,
                    "ftol": self.opts.convergence_tol,
                    "gtol": self.opts.convergence_tol,
                },
            )
            z = res.x
            iterations += int(res.nit)
        lengths, angles = _unpack(z, n, self.total)
        return lengths, angles, iterations


def _start_streams(seed: int, n: int, count: int):
    return [np.random.SeedSequence([seed, n, idx]) for idx in range(count)]


def _repair_into_ellipse(chain: TetherChain, q_inv, limits: TetherLimits) -> tuple[TetherChain, float]:
    """Pull offending joints radially onto the ellipse boundary.

    Returns the repaired chain and the worst violation before repair.
    """
    joints = np.array(chain.joints)
    levels = ellipse_levels(joints, q_inv)
    residual = float(max(levels.max() - 1.0, 0.0))
    if residual <= FEASIBILITY_TOL:
        return chain, residual
    bad = levels > 1.0
    joints[bad] /= np.sqrt(levels[bad])[:, None]
    total = np.sum(np.hypot(*np.diff(joints, axis=0).T))
    if total > limits.total_length:
        joints *= limits.total_length / total
    return chain_from_joints(joints, limits), residual


def _maximize(
    name: str,
    event: ConjunctionEvent,
    opts: OptimizerOptions,
    seeds: Sequence[TetherChain],
    q=None,
) -> EstimateResult:
    objective = ChainObjective(event, opts.abs_tol)
    limits = event.limits
    q_inv = None
    reg_eps = 0.0
    if q is not None:
        q_reg, reg_eps = regularize_q(q, limits.total_length)
        q_inv = np.linalg.inv(q_reg)

    candidates: list[_Candidate] = []
    for chain in seeds:
        if q_inv is not None and ellipse_levels(chain.joints, q_inv).max() > 1.0 + FEASIBILITY_TOL:
            log.warning("%s: seed chain violates the planar constraint, skipped", name)
            continue
        candidates.append(_Candidate(objective.chain_raw(chain), chain, "seed"))

    phase1_best = 0.0
    per_n = {}
    contracted = 0
    starts = []
    for n in opts.segment_grid:
        chains = []
        for stream in _start_streams(opts.seed, n, opts.starts_per_n):
            if q is None:
                chains.append(sample_chain(stream, n, limits))
                continue
            try:
                chains.append(sample_chain(stream, n, limits, q))
            except FeasibleSampleNotFound:
                contracted += 1
                chains.append(contract_into_ellipse(sample_chain(stream, n, limits), q, limits))
        lengths = np.array([c.lengths for c in chains])
        angles = np.array([c.angles for c in chains])
        raws = objective.raw(lengths, angles)
        order = np.argsort(-raws, kind="stable")
        best = chains[order[0]]
        candidates.append(_Candidate(float(raws[order[0]]), best, f"sample N={n}"))
        phase1_best = max(phase1_best, float(raws[order[0]]))
        per_n[n] = {"phase1_best": float(raws[order[0]])}
        for idx in order[: opts.refine_top]:
            starts.append((n, chains[idx], f"refined N={n}"))

    for chain in seeds:
        starts.append((chain.n_segments, chain, "refined seed"))

    scale = max([c.raw for c in candidates] + [1e-300])
    refiner = _Refiner(objective, opts, scale, q_inv)
    weights = opts.penalty_weights if q_inv is not None else (0.0,)
    iterations = 0
    worst_residual = 0.0
    for n, chain, origin in starts:
        z0 = np.concatenate([_weights_from_lengths(chain.lengths), chain.angles])
        lengths, angles, nit = refiner.run(z0, n, weights)
        iterations += nit
        refined = build_chain(lengths, angles, limits)
        if q_inv is not None:
            refined, residual = _repair_into_ellipse(refined, q_inv, limits)
            worst_residual = max(worst_residual, residual)
        raw = objective.chain_raw(refined)
        candidates.append(_Candidate(raw, refined, origin))
        if n in per_n:
            per_n[n]["refined_best"] = max(per_n[n].get("refined_best", 0.0), raw)

    best = max(candidates, key=lambda c: c.raw)
    feasibility = 0.0
    if q_inv is not None:
        feasibility = float(max(ellipse_levels(best.chain.joints, q_inv).max() - 1.0, 0.0))
    return _result(
        name,
        best.raw,
        best.chain,
        origin=best.origin,
        iterations=iterations,
        starts_explored=opts.starts_per_n * len(opts.segment_grid),
        refinements=len(starts),
        objective_evaluations=objective.n_evals,
        phase1_best_raw=phase1_best,
        per_segment_count={str(n): v for n, v in per_n.items()},
        feasibility_residual=feasibility,
        max_repaired_violation=worst_residual,
        q_regularization=reg_eps,
        contracted_samples=contracted,
    )


def maximize_poc_chaos(
    event: ConjunctionEvent,
    opts: OptimizerOptions = OptimizerOptions(),
    seeds: Sequence[TetherChain] = (),
) -> EstimateResult:
    """Worst-case PoC over all chains of the event's tether length.

    Chains in ``seeds`` (typically the planar or radial maximizer) are
    evaluated as candidates and refined, so the result is never below
    their values.
    """
    return _maximize("chaos", event, opts, seeds)


def maximize_poc_plane(
    event: ConjunctionEvent,
    opts: OptimizerOptions = OptimizerOptions(),
    seeds: Sequence[TetherChain] = (),
) -> EstimateResult:
    """Worst-case PoC over chains whose joints stay in the planar ellipse.

    Raises:
        MissingOrientation: if the event has no ``q_planar``.
    """
    if event.q_planar is None:
        raise MissingOrientation("event has no planar ellipse q_planar")
    return _maximize("plane", event, opts, seeds, q=event.q_planar)
