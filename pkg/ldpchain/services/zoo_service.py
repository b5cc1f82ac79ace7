from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ldpchain.errors import PreconditionError
from ldpchain.kernels.base import X_INIT, KernelModel, sample_paths
from ldpchain.kernels.zoo import LotkaVolterra, PerturbedSystem
from ldpchain.measures import as_proxy
from ldpchain.models import ClassStructure, Orthant, ProbeReport, RateEntry
from ldpchain.services.classes_service import check_admissible, product_classes_extinction
from ldpchain.services.estimator_service import LpBall, Target, mix_measures
from ldpchain.services.sampling_service import clopper_pearson, count_grid

logger = logging.getLogger("ldpchain.zoo")

# Width of the start interval on the blocked side of a ratchet.
RATCHET_START_SPAN = 1.0
SIDES = ("left", "right")


def ratchet_check(
    model: PerturbedSystem,
    a: float,
    side: str,
    paths: int,
    n: int,
    seed: int,
) -> ProbeReport:
    """Paths started on the blocked side of a never cross it.

    left: f(a) - a <= -1, starts in [a - span, a], a crossing is a letter > a.
    right: f(a) - a >= 1, starts in [a, a + span], a crossing is a letter < a.
    """
    if side not in SIDES:
        raise RuntimeError(f"Unknown ratchet side: {side}")
    if not isinstance(model, PerturbedSystem):
        raise PreconditionError("ratchets are defined for the perturbed 1-D system")
    gap = float(model.f(a)) - a
    if side == "left" and gap > -1.0:
        raise PreconditionError(f"f(a) - a <= -1 violated at a={a}: f(a) - a = {gap:.6g}")
    if side == "right" and gap < 1.0:
        raise PreconditionError(f"f(a) - a >= 1 violated at a={a}: f(a) - a = {gap:.6g}")

    rng = np.random.default_rng(seed)
    if side == "left":
        starts = rng.uniform(a - RATCHET_START_SPAN, a, size=(paths, 1))
    else:
        starts = rng.uniform(a, a + RATCHET_START_SPAN, size=(paths, 1))
    words = sample_paths(model, starts, n, paths, rng)[:, :, 0]
    crossed = np.any(words > a, axis=1) if side == "left" else np.any(words < a, axis=1)
    crossings = int(crossed.sum())
    if crossings:
        logger.warning("ratchet: %s of %s paths crossed a=%s (%s)", crossings, paths, a, side)
    else:
        logger.info("ratchet: no crossings at a=%s (%s) over %s paths", a, side, paths)
    row = {"a": a, "side": side, "f_minus_x": gap, "paths": paths, "n": n, "crossings": crossings}
    return ProbeReport(name="ratchet", passed=crossings == 0, rows=[row])


@dataclass(frozen=True)
class Occupation:
    """L_n(U) >= kappa for the open interval U = (lo, hi)."""

    lo: float
    hi: float
    kappa: float

    def __call__(self, paths: np.ndarray) -> np.ndarray:
        letters = paths[:, :, 0]
        share = np.mean((letters > self.lo) & (letters < self.hi), axis=1)
        return share >= self.kappa


def escape_decay_probe(
    model: KernelModel,
    U: tuple[float, float],
    kappa: float,
    ns: Sequence[int],
    samples: int,
    seed: int,
    workers: int = 1,
) -> ProbeReport:
    """(1/n) log P(L_n(U) >= kappa) across n; passes when strictly decreasing."""
    if model.dim != 1:
        raise PreconditionError("the escape probe runs on 1-D chains")
    event = Occupation(lo=float(U[0]), hi=float(U[1]), kappa=float(kappa))
    rows: list[dict[str, Any]] = []
    rates: list[float] = []
    for n in ns:
        hits = int(count_grid(model, n, event, samples, np.random.SeedSequence([seed, n]), workers=workers))
        lo, hi = clopper_pearson(hits, samples)
        entry = RateEntry(n=n, delta=0.0, hits=hits, samples=samples, ci_low=lo, ci_high=hi)
        rates.append(-math.inf if entry.censored else entry.estimate)
        row = entry.to_row()
        row.pop("delta")
        rows.append(row)
        logger.info("escape probe: n=%s hits=%s/%s", n, hits, samples)
    decreasing = all(b < a for a, b in zip(rates, rates[1:]))
    details = {"U": list(U), "kappa": kappa, "strictly_decreasing": decreasing, "censored": sum(r == -math.inf for r in rates)}
    return ProbeReport(name="escape", passed=decreasing, rows=rows, details=details)


def extinction_violations(model: LotkaVolterra, paths: int, n: int, seed: int) -> int:
    """Paths on which some species comes back above 0 after going extinct."""
    words = sample_paths(model, X_INIT, n, paths, np.random.default_rng(seed))
    extinct = np.logical_or.accumulate(words <= 0, axis=1)
    return int(np.any(extinct & (words > 0), axis=(1, 2)).sum())


def beta_reach_box(cs: ClassStructure, low: float, high: float) -> list[bool]:
    """Orthant classes met by the support [low, high]^d of beta."""
    out = []
    for region in cs.classes:
        if not isinstance(region, Orthant):
            raise PreconditionError("beta boxes apply to orthant class structures")
        neg = set(region.negative)
        out.append(all((low < 0) if i in neg else (high > 0) for i in range(region.dim)))
    return out


def lv_demo(
    model: LotkaVolterra,
    mu1: Target,
    mu2: Target,
    delta: float,
    ns: Sequence[int],
    samples: int,
    seed: int,
    workers: int = 1,
    beta_box: tuple[float, float] | None = None,
    proxy_cells: int = 16,
) -> ProbeReport:
    """Admissibility of mu1, mu2 and their midpoint, with ball hit counts across n.

    Passes when both endpoints are admissible, the midpoint is not, and the
    midpoint has no hits at the largest n while mu1 still has some.
    """
    cs = product_classes_extinction(model.dim)
    if beta_box is not None:
        cs = product_classes_extinction(model.dim, beta_reach_box(cs, *beta_box))
    targets = {"mu1": mu1, "mu2": mu2, "midpoint": mix_measures(mu1, mu2, 0.5, proxy_cells)}
    verdicts = {label: check_admissible(mu, cs) for label, mu in targets.items()}
    rows: list[dict[str, Any]] = []
    last: dict[str, int] = {}
    for label, mu in targets.items():
        ball = LpBall(as_proxy(mu, proxy_cells), (float(delta),))
        for n in ns:
            hits = int(count_grid(model, n, ball, samples, np.random.SeedSequence([seed, n]), workers=workers))
            lo, hi = clopper_pearson(hits, samples)
            rows.append(
                {
                    "measure": label,
                    "admissible": verdicts[label].admissible,
                    "charged_classes": " ".join(cs.labels[j] for j in verdicts[label].charged),
                    "n": n,
                    "delta": delta,
                    "hits": hits,
                    "samples": samples,
                    "p_ci_low": lo,
                    "p_ci_high": hi,
                }
            )
            last[label] = hits
        logger.info("lv demo: %s admissible=%s hits=%s", label, verdicts[label].admissible, last[label])
    classified = verdicts["mu1"].admissible and verdicts["mu2"].admissible and not verdicts["midpoint"].admissible
    collapsed = last["midpoint"] == 0 and last["mu1"] > 0
    details = {
        "classification_as_expected": classified,
        "midpoint_collapse": collapsed,
        "admissibility": {label: v.to_record() for label, v in verdicts.items()},
    }
    return ProbeReport(name="lv-demo", passed=classified and collapsed, rows=rows, details=details)

