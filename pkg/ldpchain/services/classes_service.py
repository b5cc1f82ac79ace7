from __future__ import annotations

import itertools
import logging
import math
from typing import Any, Callable, Sequence

import numpy as np
from scipy import ndimage

from ldpchain.errors import FrameRejected, PreconditionError
from ldpchain.kernels.base import X_INIT, KernelModel, iterated_profile
from ldpchain.measures import EmpiricalMeasure, PiecewiseDensity
from ldpchain.models import (
    AdmissibilityReport,
    Box,
    CellUnion,
    ClassStructure,
    CompactFrame,
    Interval,
    Orthant,
    Region,
    TauTable,
    order_closure,
)

logger = logging.getLogger("ldpchain.classes")

BISECTION_TOL = 1e-9
# Standard errors allowed between two exponents before they stop counting as a tie.
TIE_Z = 3.0
# Positive-probe threshold for grid classification, in standard errors.
POSITIVE_Z = 3.0
# c_K is taken from the ratio of confidence bounds this many standard errors out.
C_K_Z = 4.0
# Beta-reach iteration for 1-D maps stops after this many image steps.
REACH_STEPS = 500


# ---------------------------------------------------------------------------
# Discovery
# ---------------------------------------------------------------------------


def discover_classes_1d(
    f: Callable[[np.ndarray], np.ndarray],
    domain: tuple[float, float],
    resolution: float,
    beta_support: tuple[float, float] | None = None,
) -> ClassStructure:
    """Connected components of {x : f(x) - x in (-1, 1)} inside the domain.

    Consecutive components are ordered by the sign of f - x on the gap between
    them: f - x >= 1 drives the chain to the right, f - x <= -1 to the left.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise ValueError("domain must be a nonempty interval")
    grid = np.linspace(lo, hi, int(math.ceil((hi - lo) / resolution)) + 1)
    values = np.asarray(f(grid), dtype=float)
    if np.any(np.diff(values) < -1e-12):
        raise PreconditionError("f is not nondecreasing on the scan grid")

    def inside(x: float) -> bool:
        return abs(float(f(np.array(x))) - x) < 1.0

    def boundary(out_pt: float, in_pt: float) -> float:
        while abs(in_pt - out_pt) > BISECTION_TOL:
            mid = 0.5 * (out_pt + in_pt)
            if inside(mid):
                in_pt = mid
            else:
                out_pt = mid
        return 0.5 * (out_pt + in_pt)

    flags = np.abs(values - grid) < 1.0
    intervals: list[Interval] = []
    i = 0
    while i < len(grid):
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and flags[j + 1]:
            j += 1
        left = lo if i == 0 else boundary(grid[i - 1], grid[i])
        right = hi if j == len(grid) - 1 else boundary(grid[j + 1], grid[j])
        intervals.append(Interval(left, right))
        i = j + 1

    r = len(intervals)
    order = np.eye(r, dtype=bool)
    for k in range(r - 1):
        mid = 0.5 * (intervals[k].hi + intervals[k + 1].lo)
        gap = float(f(np.array(mid))) - mid
        if gap >= 1.0:
            order[k, k + 1] = True
        elif gap <= -1.0:
            order[k + 1, k] = True
    order = order_closure(order)

    if beta_support is None:
        beta_reach = [True] * r
    else:
        beta_reach = _beta_reach_1d(f, beta_support, intervals, order)

    logger.info("1-D classes: %s component(s) on [%s, %s]", r, lo, hi)
    return ClassStructure(
        classes=list(intervals),
        order=order,
        beta_reach=beta_reach,
        labels=[f"C{k + 1}" for k in range(r)],
        kind="interval",
        provenance={"method": "analytic", "domain": [lo, hi], "resolution": resolution},
    )


def _beta_reach_1d(f, support: tuple[float, float], intervals: list[Interval], order: np.ndarray) -> list[bool]:
    # Reachable letters after k steps form the interval (f(a) - 1, f(b) + 1).
    a, b = float(support[0]), float(support[1])
    hit = np.zeros(len(intervals), dtype=bool)
    for _ in range(REACH_STEPS):
        for k, c in enumerate(intervals):
            if max(a, c.lo) < min(b, c.hi):
                hit[k] = True
        na, nb = float(f(np.array(a))) - 1.0, float(f(np.array(b))) + 1.0
        if abs(na - a) < 1e-12 and abs(nb - b) < 1e-12:
            break
        a, b = na, nb
    reach = hit.copy()
    for k in np.flatnonzero(hit):
        reach |= order[k]
    return reach.tolist()


def product_classes_extinction(d: int, beta_reach: Sequence[bool] | None = None) -> ClassStructure:
    """2^d classes indexed by the extinct species; I1 ⤳ I2 iff I1 ⊆ I2."""
    if d < 1:
        raise ValueError("d must be >= 1")
    subsets = [frozenset(s) for size in range(d + 1) for s in itertools.combinations(range(d), size)]
    order = np.array([[a <= b for b in subsets] for a in subsets], dtype=bool)
    labels = ["{" + ",".join(str(i + 1) for i in sorted(s)) + "}" if s else "∅" for s in subsets]
    return ClassStructure(
        classes=[Orthant(negative=s, dim=d) for s in subsets],
        order=order,
        beta_reach=list(beta_reach) if beta_reach is not None else [True] * len(subsets),
        labels=labels,
        kind="orthant",
        provenance={"method": "extinction", "d": d},
    )


def grid_class_probe(
    model: KernelModel,
    lows: Sequence[float],
    highs: Sequence[float],
    cells: Sequence[int],
    k_max: int,
    samples: int,
    rng: np.random.Generator,
) -> ClassStructure:
    """Approximate classes from rho~(x, x) > 0 at cell centres of a 1-D or 2-D lattice.

    Positive cells are clustered by adjacency, clusters that reach each other
    are merged, and the order comes from rho~ between clusters.
    """
    lows, highs = np.asarray(lows, dtype=float), np.asarray(highs, dtype=float)
    shape = tuple(int(c) for c in cells)
    if len(shape) not in (1, 2) or len(shape) != model.dim:
        raise ValueError("grid probe needs a 1-D or 2-D lattice matching the model dimension")
    width = (highs - lows) / np.asarray(shape)
    axes = [lows[i] + (np.arange(shape[i]) + 0.5) * width[i] for i in range(len(shape))]
    centres = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(shape))

    status = np.zeros(centres.shape[0], dtype=int)  # 1 positive, 0 zero, -1 inconclusive
    for c, x in enumerate(centres):
        est, err = iterated_profile(model, x, x[None, :], k_max, samples, rng)
        if np.any((est[:, 0] > 0) & (est[:, 0] > POSITIVE_Z * err[:, 0])):
            status[c] = 1
        elif np.all(est[:, 0] == 0):
            status[c] = 0
        else:
            status[c] = -1

    labelled, count = ndimage.label((status == 1).reshape(shape))
    labelled = labelled.reshape(-1)
    clusters = [np.flatnonzero(labelled == k + 1) for k in range(count)]

    def reaches(src: np.ndarray, dst: np.ndarray) -> bool:
        rep = centres[src[len(src) // 2]]
        est, err = iterated_profile(model, rep, centres[dst], k_max, samples, rng)
        return bool(np.any((est > 0) & (est > POSITIVE_Z * err)))

    reach = np.eye(count, dtype=bool)
    for a, b in itertools.permutations(range(count), 2):
        reach[a, b] = reaches(clusters[a], clusters[b])
    reach = order_closure(reach)

    # Mutually reachable clusters are one class.
    groups: list[list[int]] = []
    seen: set[int] = set()
    for a in range(count):
        if a in seen:
            continue
        group = [b for b in range(count) if reach[a, b] and reach[b, a]]
        seen.update(group)
        groups.append(group)
    members = [np.concatenate([clusters[g] for g in group]) for group in groups]
    order = np.array([[reach[ga[0], gb[0]] for gb in groups] for ga in groups], dtype=bool).reshape(
        len(groups), len(groups)
    )

    beta_reach = []
    for idx in members:
        est, err = iterated_profile(model, X_INIT, centres[idx], k_max, samples, rng)
        beta_reach.append(bool(np.any((est > 0) & (est > POSITIVE_Z * err))))

    regions: list[Region] = [CellUnion(centres=centres[idx], half_width=width / 2.0) for idx in members]
    inconclusive = centres[status == -1].tolist()
    if inconclusive:
        logger.warning("grid probe: %s inconclusive cell(s) left unclassified", len(inconclusive))
    logger.info("grid probe: %s cluster(s), %s class(es)", count, len(groups))
    return ClassStructure(
        classes=regions,
        order=order_closure(order),
        beta_reach=beta_reach,
        labels=[f"C{k + 1}" for k in range(len(groups))],
        kind="cells",
        inconclusive=inconclusive,
        provenance={
            "method": "grid",
            "approximate": True,
            "cells": list(shape),
            "k_max": k_max,
            "samples": samples,
        },
    )


def class_structure_record(cs: ClassStructure) -> dict[str, Any]:
    return {
        "kind": cs.kind,
        "classes": [
            {"index": j + 1, "label": label, "region": region.to_record(), "beta_reachable": bool(beta)}
            for j, (label, region, beta) in enumerate(zip(cs.labels, cs.classes, cs.beta_reach))
        ],
        "order": cs.relation_labels(),
        "adjacency": {str(i + 1): [j + 1 for j in range(cs.size) if i != j and cs.order[i, j]] for i in range(cs.size)},
        "inconclusive": cs.inconclusive,
        "provenance": cs.provenance,
    }


def class_rows(cs: ClassStructure) -> list[dict[str, Any]]:
    rows = []
    for j, (label, region, beta) in enumerate(zip(cs.labels, cs.classes, cs.beta_reach)):
        rec = region.to_record()
        rows.append(
            {
                "index": j + 1,
                "label": label,
                "kind": rec.pop("kind"),
                "region": " ".join(f"{k}={v}" for k, v in rec.items()),
                "beta_reachable": bool(beta),
                "leads_to": " ".join(str(k + 1) for k in range(cs.size) if k != j and cs.order[j, k]),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


def check_admissible(mu: PiecewiseDensity | EmpiricalMeasure, cs: ClassStructure) -> AdmissibilityReport:
    """The four admissibility conditions, each reported separately."""
    if isinstance(mu, PiecewiseDensity):
        absolutely_continuous = True
        support_pts = np.vstack([pts for _, pts in mu.probe_points()])
        charge_pts = np.vstack([pts for _, pts in mu.interior_points()])
        kind = "density"
    else:
        absolutely_continuous = bool(mu.density_proxy)
        support_pts = charge_pts = mu.atoms[mu.weights > 0]
        kind = "density_proxy" if mu.density_proxy else "atoms"

    outside = ~cs.in_closure(support_pts)
    support_ok = not bool(outside.any())
    idx = cs.class_index(charge_pts)
    charged = sorted({int(j) for j in idx if j >= 0})
    beta_ok = all(cs.beta_reach[j] for j in charged)
    total_ok = all(cs.order[a, b] or cs.order[b, a] for a, b in itertools.combinations(charged, 2))
    return AdmissibilityReport(
        absolutely_continuous=absolutely_continuous,
        support_in_closure=support_ok,
        beta_reachable=beta_ok,
        totally_ordered=total_ok,
        charged=charged,
        details={"measure_kind": kind, "support_points_outside": int(outside.sum())},
    )


# ---------------------------------------------------------------------------
# Compact frames
# ---------------------------------------------------------------------------


def build_compact_frame(
    model: KernelModel,
    cs: ClassStructure,
    class_subset: Sequence[int],
    quantile: float,
    delta: float,
    tau_max: int,
    samples: int,
    rng: np.random.Generator,
    probes_per_class: int = 3,
    k_probe: int | None = None,
    cores: Sequence[PiecewiseDensity] | None = None,
) -> CompactFrame:
    """Admissible compact K over the chosen classes (1-based), with its tau table and c_K.

    Frame classes are relabelled 1..r along ⤳. tau(x, y) is the smallest
    exponent within TIE_Z standard errors of the best rho^i(x, y), i <= tau_max.
    c_K bounds the ratio of the upper to the lower C_K_Z-standard-error bounds.
    """
    if not class_subset:
        raise PreconditionError("class_subset must not be empty")
    chosen = [int(j) - 1 for j in class_subset]
    if any(j < 0 or j >= cs.size for j in chosen):
        raise PreconditionError(f"class_subset {list(class_subset)} names unknown classes")
    if cores and len(cores) != len(chosen):
        raise PreconditionError("one compact core per selected class")
    for a, b in itertools.combinations(chosen, 2):
        if not (cs.order[a, b] or cs.order[b, a]):
            raise PreconditionError(f"classes {a + 1} and {b + 1} are not comparable under ⤳")
    if not all(cs.beta_reach[j] for j in chosen):
        raise PreconditionError("every selected class must be reachable from beta")

    core_of = dict(zip(chosen, cores)) if cores else {}
    # The class leading to the most others comes first.
    ranked = sorted(chosen, key=lambda j: -int(sum(cs.order[j, k] for k in chosen)))
    slices = [_compact_slice(cs.classes[j], cs.labels[j], quantile, delta, core_of.get(j)) for j in ranked]
    regions = [cs.classes[j] for j in ranked]
    k_probe = k_probe or 4 * tau_max

    probes = [piece.grid(probes_per_class) for piece in slices]
    probe_class = np.concatenate([np.full(p.shape[0], j + 1) for j, p in enumerate(probes)])
    ys = np.vstack(probes)
    est, err = _profiles(model, ys, ys, k_probe, samples, rng)
    valid = _valid_pairs(probe_class, probe_class)

    table, den, den_err = _tau_from_profiles(est, err, tau_max)
    dead = valid & ~(den > 0)
    if dead.any():
        row, col = (int(v) for v in np.argwhere(dead)[0])
        source = "x_init" if row == 0 else ys[row - 1].tolist()
        logger.warning("frame rejected: rho^tau vanishes at %s pair(s)", int(dead.sum()))
        raise FrameRejected(f"estimated rho^tau(x, y) = 0 at x={source}, y={ys[col].tolist()}; enlarge tau_max")

    num, num_err = _sup_over_sources(est, err, valid)
    upper = num + C_K_Z * num_err
    lower = np.maximum(den - C_K_Z * den_err, 0.5 * den)
    ratio = np.where(valid, upper[None, :] / np.where(lower > 0, lower, 1.0), 0.0)
    c_K = max(1.0, float(ratio.max()))
    tau_K = int(table[valid].max())
    logger.info("compact frame: r=%s tau_K=%s c_K=%.4g probes=%s", len(slices), tau_K, c_K, ys.shape[0])
    return CompactFrame(
        slices=slices,
        class_regions=regions,
        class_labels=[cs.labels[j] for j in ranked],
        tau=TauTable(x_probes=ys, y_probes=ys, table=table),
        tau_K=max(tau_K, 1),
        c_K=c_K,
        source_classes=[j + 1 for j in ranked],
        provenance={
            "k_probe": k_probe,
            "tau_max": tau_max,
            "probes": int(ys.shape[0]),
            "samples": samples,
            "quantile": quantile,
            "delta": delta,
            "tie_z": TIE_Z,
            "c_k_z": C_K_Z,
        },
    )


def frame_violation_rate(model: KernelModel, frame: CompactFrame, samples: int, rng: np.random.Generator) -> float:
    """Share of probe pairs where fresh estimates break sup_k rho^k <= c_K rho^tau."""
    ys = frame.tau.y_probes
    k_probe = int(frame.provenance.get("k_probe", 4 * frame.tau_K))
    est, err = _profiles(model, ys, ys, k_probe, samples, rng)
    cls = frame.class_of(ys)
    valid = _valid_pairs(cls, cls) & (cls > 0)[None, :]
    table = frame.tau.table
    den = np.take_along_axis(est, (table - 1)[:, None, :], axis=1)[:, 0, :]
    num, _ = _sup_over_sources(est, err, valid)
    broken = valid & (num[None, :] > frame.c_K * den * (1 + 1e-12))
    total = int(valid.sum())
    return float(broken.sum()) / total if total else 0.0


def _profiles(
    model: KernelModel, xs: np.ndarray, ys: np.ndarray, k_max: int, samples: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """rho^k estimates with x_init as row 0: arrays of shape (1 + len(xs), k_max, len(ys))."""
    est = np.zeros((1 + xs.shape[0], k_max, ys.shape[0]))
    err = np.zeros_like(est)
    for row, x in enumerate([X_INIT, *xs]):
        est[row], err[row] = iterated_profile(model, x, ys, k_max, samples, rng)
    return est, err


def _valid_pairs(x_class: np.ndarray, y_class: np.ndarray) -> np.ndarray:
    """(x, y) in K_j^- x K_j; row 0 (x_init) reaches every class."""
    inner = (x_class[:, None] <= y_class[None, :]) & (x_class[:, None] > 0)
    return np.vstack([np.ones((1, y_class.shape[0]), dtype=bool), inner])


def _tau_from_profiles(est: np.ndarray, err: np.ndarray, tau_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    head, head_err = est[:, :tau_max, :], err[:, :tau_max, :]
    best = head.argmax(axis=1)
    best_val = np.take_along_axis(head, best[:, None, :], axis=1)[:, 0, :]
    slack = TIE_Z * np.take_along_axis(head_err, best[:, None, :], axis=1)[:, 0, :]
    near = head >= (best_val - slack)[:, None, :]
    near &= head > 0
    table = np.where(near.any(axis=1), near.argmax(axis=1), best) + 1
    pick = (table - 1)[:, None, :]
    den = np.take_along_axis(head, pick, axis=1)[:, 0, :]
    den_err = np.take_along_axis(head_err, pick, axis=1)[:, 0, :]
    return table.astype(int), den, den_err


def _sup_over_sources(est: np.ndarray, err: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """sup over x1 in K_j^- and k <= k_probe of rho^k(x1, y), per y, with the standard error at the maximiser."""
    k_best = est.argmax(axis=1)[:, None, :]
    peak = np.where(valid, np.take_along_axis(est, k_best, axis=1)[:, 0, :], -np.inf)
    peak_err = np.take_along_axis(err, k_best, axis=1)[:, 0, :]
    row = peak.argmax(axis=0)[None, :]
    num = np.maximum(np.take_along_axis(peak, row, axis=0)[0], 0.0)
    return num, np.take_along_axis(peak_err, row, axis=0)[0]


def _region_bounds(region: Region) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(region, Interval):
        return np.array([region.lo]), np.array([region.hi])
    if isinstance(region, Orthant):
        neg = np.array([i in region.negative for i in range(region.dim)])
        return np.where(neg, -np.inf, 0.0), np.where(neg, 0.0, np.inf)
    if isinstance(region, CellUnion):
        return region.bounds
    if isinstance(region, Box):
        return np.asarray(region.lo, dtype=float), np.asarray(region.hi, dtype=float)
    raise RuntimeError(f"Unknown region kind: {region.kind}")


def _compact_slice(
    region: Region, label: str, quantile: float, delta: float, core: PiecewiseDensity | None
) -> Box:
    lo, hi = _region_bounds(region)
    if core is not None:
        base_lo, base_hi = core.lows.min(axis=0) - delta, core.highs.max(axis=0) + delta
    else:
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise PreconditionError(f"class {label} is unbounded; give a compact core")
        mid, half = 0.5 * (lo + hi), 0.5 * quantile * (hi - lo)
        base_lo, base_hi = mid - half - delta, mid + half + delta
    # Keep K_j strictly inside the open class.
    span = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
    margin = np.maximum(1e-6 * span, 1e-9)
    k_lo = np.maximum(base_lo, lo + margin)
    k_hi = np.minimum(base_hi, hi - margin)
    if np.any(k_hi < k_lo):
        raise PreconditionError(f"compact core of class {label} lies outside the class")
    return Box(lo=tuple(float(v) for v in k_lo), hi=tuple(float(v) for v in k_hi))
