"""Run the selected estimators on one event and collect a report."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from tetherpoc import __version__
from tetherpoc.errors import TetherPocError
from tetherpoc.estimators import (
    ConjunctionEvent,
    EstimateResult,
    OptimizerOptions,
    maximize_poc_chaos,
    maximize_poc_plane,
    poc_radial,
    poc_std,
)
from tetherpoc.verification import OrderingVerdict, check_ordering

log = logging.getLogger(__name__)

ESTIMATORS = ("std", "radial", "plane", "chaos")


@dataclass
class RiskReport:
    event: ConjunctionEvent
    options: OptimizerOptions
    estimates: dict[str, EstimateResult] = field(default_factory=dict)
    unavailable: dict[str, str] = field(default_factory=dict)
    ordering: OrderingVerdict | None = None
    verification: dict = field(default_factory=dict)
    version: str = __version__

    def value(self, name: str) -> float | None:
        est = self.estimates.get(name)
        return None if est is None else est.value


def _parse_selection(selection) -> tuple[str, ...]:
    if isinstance(selection, str):
        selection = [s.strip() for s in selection.split(",") if s.strip()]
    chosen = tuple(dict.fromkeys(selection))
    unknown = [s for s in chosen if s not in ESTIMATORS]
    if unknown or not chosen:
        raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}, got {selection}")
    return chosen


def assess(
    event: ConjunctionEvent,
    opts: OptimizerOptions = OptimizerOptions(),
    estimators=ESTIMATORS,
) -> RiskReport:
    """Compute the selected PoC figures in the order radial, plane, chaos, std.

    Each worst-case search is seeded with the maximizers already found, so
    ``radial <= plane <= chaos`` holds by construction. An estimator that
    fails is recorded in ``unavailable`` and the others still run.
    """
    chosen = _parse_selection(estimators)
    report = RiskReport(event, opts)
    seeds = []

    def attempt(name, fn):
        try:
            result = fn()
        except TetherPocError as exc:
            log.info("%s unavailable: %s", name, exc)
            report.unavailable[name] = f"{type(exc).__name__}: {exc}"
            return None
        report.estimates[name] = result
        return result

    if "radial" in chosen:
        res = attempt("radial", lambda: poc_radial(event, opts.abs_tol))
        if res is not None:
            seeds.append(res.chain)
    if "plane" in chosen:
        res = attempt("plane", lambda: maximize_poc_plane(event, opts, tuple(seeds)))
        if res is not None:
            seeds.append(res.chain)
    if "chaos" in chosen:
        attempt("chaos", lambda: maximize_poc_chaos(event, opts, tuple(seeds)))
    if "std" in chosen:
        attempt("std", lambda: poc_std(event, opts.abs_tol))

    report.estimates = {k: report.estimates[k] for k in ESTIMATORS if k in report.estimates}
    report.ordering = check_ordering(report.estimates)
    return report
