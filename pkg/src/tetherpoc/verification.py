"""Monte Carlo oracle and property checks.

The oracle samples the secondary's position and classifies each sample
against the exact combined hard body, so it is independent of the
quadrature and bivariate-CDF code paths used by the estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from tetherpoc.estimators import (
    ConjunctionEvent,
    EstimateResult,
    OptimizerOptions,
    maximize_poc_chaos,
)
from tetherpoc.gaussian import Gaussian2, disk_probabilities
from tetherpoc.tether import (
    TetherChain,
    contract_into_ellipse,
    hard_body_contains,
    sample_chain,
)

BATCH = 1_000_000
DEFAULT_SIGMAS = 3.0


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    stderr: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "stderr": self.stderr, "n_samples": self.n_samples, "seed": self.seed}


def _binomial(hits: int, n: int, seed: int) -> McEstimate:
    p = hits / n
    return McEstimate(p, math.sqrt(p * (1.0 - p) / n), n, seed)


def sample_gaussian(g: Gaussian2, n: int, seed: int):
    """Yield batches of samples from ``g``.

    Each batch has its own child stream of ``SeedSequence(seed)``, so a batch
    can be generated independently of the others.
    """
    root = np.linalg.cholesky(g.cov)
    n_batches = -(-n // BATCH)
    for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        size = min(BATCH, n - b * BATCH)
        z = np.random.default_rng(child).standard_normal((size, 2))
        yield g.mean + z @ root.T


def mc_poc_region(contains: Callable[[np.ndarray], np.ndarray], g: Gaussian2, n_samples: int, seed: int) -> McEstimate:
    """Hit fraction of ``n_samples`` draws of ``g`` for an arbitrary region."""
    hits = 0
    for pts in sample_gaussian(g, n_samples, seed):
        hits += int(np.count_nonzero(contains(pts)))
    return _binomial(hits, n_samples, seed)


def mc_poc_union(chain: TetherChain, event: ConjunctionEvent, n_samples: int, seed: int) -> McEstimate:
    """Monte Carlo PoC of the exact combined hard body of ``chain``."""
    if n_samples < 1000:
        raise ValueError(f"n_samples must be >= 1000, got {n_samples}")
    return mc_poc_region(lambda p: hard_body_contains(chain, event.radii, p), event.gaussian, n_samples, seed)


def wedge_slack(chain: TetherChain, event: ConjunctionEvent) -> float:
    """Gaussian mass of ``r_s`` disks on the interior joints.

    Covers the round corners of the exact tube that the per-bar rectangles
    leave out at bends.
    """
    interior = chain.joints[1:-1]
    if len(interior) == 0 or event.radii.r_s == 0:
        return 0.0
    return float(disk_probabilities(interior, event.radii.r_s, event.gaussian).sum())


# ---------------------------------------------------------------------------
# Configuration distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfigDistribution:
    """A named family of random tether configurations.

    ``uniform``: uniform-simplex lengths and uniform angles;
    ``ellipse``: the same, confined to the planar ellipse ``q``;
    ``fixed``: always ``chain``.
    """

    family: str
    n_segments: int = 4
    q: np.ndarray | None = None
    chain: TetherChain | None = None

    def __post_init__(self):
        if self.family not in ("uniform", "ellipse", "fixed"):
            raise ValueError(f"unknown distribution family {self.family!r}")
        if self.family == "ellipse" and self.q is None:
            raise ValueError("the ellipse family needs q")
        if self.family == "fixed" and self.chain is None:
            raise ValueError("the fixed family needs a chain")

    def draw(self, seed_seq: np.random.SeedSequence, event: ConjunctionEvent) -> TetherChain:
        if self.family == "fixed":
            return self.chain
        if self.family == "uniform":
            return sample_chain(seed_seq, self.n_segments, event.limits)
        # Contraction keeps the law well defined even for a sliver ellipse.
        return contract_into_ellipse(sample_chain(seed_seq, self.n_segments, event.limits), self.q, event.limits)

    def describe(self) -> dict:
        out = {"family": self.family, "n_segments": self.n_segments}
        if self.family == "fixed":
            out["chain"] = self.chain.to_dict()
        return out


def mc_poc_reference(
    event: ConjunctionEvent, dist: ConfigDistribution, n_configs: int, n_samples: int, seed: int
) -> McEstimate:
    """Average exact-union PoC over configurations drawn from ``dist``.

    Every configuration is scored on the same sample points, so their
    sampling errors are correlated and do not average out. The standard
    error therefore adds the spread between configurations to the full mean
    within-configuration variance, which bounds the variance of an average
    of correlated estimates.
    """
    if n_configs < 10:
        raise ValueError(f"n_configs must be >= 10, got {n_configs}")
    config_seqs = np.random.SeedSequence([seed, 1]).spawn(n_configs)
    p = np.empty(n_configs)
    within = np.empty(n_configs)
    for c, seq in enumerate(config_seqs):
        chain = dist.draw(seq, event)
        est = mc_poc_union(chain, event, n_samples, seed)
        p[c] = est.p_hat
        within[c] = est.stderr**2
    between = p.var(ddof=1) / n_configs if n_configs > 1 else 0.0
    stderr = math.sqrt(between + within.mean())
    return McEstimate(float(p.mean()), stderr, n_configs * n_samples, seed)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Inequality:
    lower: str
    upper: str
    margin: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class OrderingVerdict:
    checks: tuple[Inequality, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


ORDER = ("radial", "plane", "chaos", "std")


def check_ordering(values: dict, std_rel_tol: float = 1e-3) -> OrderingVerdict:
    """Check ``radial <= plane <= chaos <= std`` on whichever figures exist.

    ``values`` maps estimator names to probabilities or
    :class:`EstimateResult`. Inequalities among radial/plane/chaos are
    structural and checked exactly; an inequality against std is allowed a
    relative tolerance of ``std_rel_tol``. Margins are ``upper - lower``.
    """
    vals = {}
    for key, v in values.items():
        if v is None:
            continue
        vals[key] = v.value if isinstance(v, EstimateResult) else float(v)
    present = [k for k in ORDER if k in vals]
    checks = []
    for lo, hi in zip(present, present[1:]):
        tol = std_rel_tol * vals[hi] if hi == "std" else 0.0
        margin = vals[hi] - vals[lo]
        checks.append(Inequality(lo, hi, margin, tol, margin >= -tol))
    return OrderingVerdict(tuple(checks))


@dataclass(frozen=True)
class BoundVerdict:
    passed: bool
    chaos_value: float
    reference: McEstimate
    distribution: dict = field(default_factory=dict)
    n_sigmas: float = DEFAULT_SIGMAS

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "chaos_value": self.chaos_value,
            "reference": self.reference.to_dict(),
            "distribution": self.distribution,
            "n_sigmas": self.n_sigmas,
        }


def check_upper_bound(
    event: ConjunctionEvent,
    dist: ConfigDistribution,
    opts: OptimizerOptions = OptimizerOptions(),
    chaos: EstimateResult | None = None,
    n_configs: int = 20,
    n_samples: int = 100_000,
    seed: int = 0,
) -> BoundVerdict:
    """Check that the worst case bounds the configuration-averaged PoC.

    Passes when the reference estimate is at most the chaos value plus
    three standard errors. ``chaos`` is computed with ``opts`` when not
    supplied.
    """
    if chaos is None:
        chaos = maximize_poc_chaos(event, opts)
    ref = mc_poc_reference(event, dist, n_configs, n_samples, seed)
    passed = ref.p_hat <= chaos.value + DEFAULT_SIGMAS * ref.stderr
    return BoundVerdict(passed, chaos.value, ref, dist.describe())

