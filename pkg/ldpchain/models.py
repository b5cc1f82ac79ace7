from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ldpchain.config import settings
from ldpchain.kernels.base import XInit
from ldpchain.measures import Word, as_word


# ---------------------------------------------------------------------------
# Region descriptors. Classes are open sets; points within the boundary
# tolerance of a class boundary count as outside.
# ---------------------------------------------------------------------------


class Region:
    kind: str = "region"

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closure_contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        raise NotImplementedError

    def to_record(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Region):
    lo: float
    hi: float
    kind: str = "interval"

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = as_word(points)[:, 0]
        tol = settings.ldp_boundary_tol
        return (x > self.lo + tol) & (x < self.hi - tol)

    def closure_contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        x = as_word(points)[:, 0]
        tol = settings.ldp_closure_tol if tol is None else tol
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo": _num(self.lo), "hi": _num(self.hi)}


@dataclass(frozen=True)
class Orthant(Region):
    """Sign orthant: x_i < 0 for i in `negative`, x_i > 0 otherwise (0-based indices)."""

    negative: frozenset[int]
    dim: int
    kind: str = "orthant"

    def _signs(self) -> np.ndarray:
        return np.array([-1.0 if i in self.negative else 1.0 for i in range(self.dim)])

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = as_word(points, dim=self.dim)
        return np.all(x * self._signs() > settings.ldp_boundary_tol, axis=1)

    def closure_contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        x = as_word(points, dim=self.dim)
        tol = settings.ldp_closure_tol if tol is None else tol
        return np.all(x * self._signs() >= -tol, axis=1)

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "negative": sorted(i + 1 for i in self.negative), "dim": self.dim}


@dataclass(frozen=True, eq=False)
class CellUnion(Region):
    """Union of open grid cells given by centres and per-axis half widths."""

    centres: np.ndarray
    half_width: np.ndarray
    kind: str = "cells"

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = as_word(points, dim=self.centres.shape[1])
        gap = np.abs(x[:, None, :] - self.centres[None, :, :])
        return np.any(np.all(gap < self.half_width - settings.ldp_boundary_tol, axis=2), axis=1)

    def closure_contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        x = as_word(points, dim=self.centres.shape[1])
        tol = settings.ldp_closure_tol if tol is None else tol
        gap = np.abs(x[:, None, :] - self.centres[None, :, :])
        return np.any(np.all(gap <= self.half_width + tol, axis=2), axis=1)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.centres.min(axis=0) - self.half_width, self.centres.max(axis=0) + self.half_width

    def to_record(self) -> dict[str, Any]:
        lo, hi = self.bounds
        return {
            "kind": self.kind,
            "cells": int(self.centres.shape[0]),
            "half_width": [float(v) for v in self.half_width],
            "bounds": [[float(v) for v in lo], [float(v) for v in hi]],
        }


@dataclass(frozen=True)
class Box(Region):
    """Closed axis-aligned box; the compact pieces K_j are boxes."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    kind: str = "box"

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = as_word(points, dim=len(self.lo))
        return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=1)

    def closure_contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        tol = settings.ldp_closure_tol if tol is None else tol
        x = as_word(points, dim=len(self.lo))
        return np.all((x >= np.asarray(self.lo) - tol) & (x <= np.asarray(self.hi) + tol), axis=1)

    def grid(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(l, h, per_axis) if h > l else np.array([l]) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, len(self.lo))

    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo": [float(v) for v in self.lo], "hi": [float(v) for v in self.hi]}


def _num(v: float) -> float | str:
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


# ---------------------------------------------------------------------------
# Orders
# ---------------------------------------------------------------------------


def order_closure(order: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean relation matrix."""
    rel = np.array(order, dtype=bool) | np.eye(len(order), dtype=bool)
    for k in range(len(rel)):
        rel = rel | (rel[:, [k]] & rel[[k], :])
    return rel


def is_partial_order(order: np.ndarray) -> bool:
    rel = np.asarray(order, dtype=bool)
    if rel.size == 0:
        return True
    if not np.all(np.diag(rel)):
        return False
    if not np.array_equal(order_closure(rel), rel):
        return False
    off = rel & rel.T & ~np.eye(len(rel), dtype=bool)
    return not off.any()


@dataclass
class ClassStructure:
    classes: list[Region]
    order: np.ndarray
    beta_reach: list[bool]
    labels: list[str]
    kind: str
    inconclusive: list[list[float]] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.order = np.asarray(self.order, dtype=bool).reshape(len(self.classes), len(self.classes))
        if not is_partial_order(self.order):
            raise ValueError("class order is not a partial order")
        if len(self.beta_reach) != len(self.classes) or len(self.labels) != len(self.classes):
            raise ValueError("one beta flag and one label per class")

    @property
    def size(self) -> int:
        return len(self.classes)

    def class_index(self, points: np.ndarray) -> np.ndarray:
        """Index of the class containing each point, -1 outside every class."""
        pts = as_word(points)
        idx = np.full(pts.shape[0], -1, dtype=int)
        for j, region in enumerate(self.classes):
            idx[(idx < 0) & region.contains(pts)] = j
        return idx

    def in_closure(self, points: np.ndarray) -> np.ndarray:
        pts = as_word(points)
        hit = np.zeros(pts.shape[0], dtype=bool)
        for region in self.classes:
            hit |= region.closure_contains(pts)
        return hit

    def leads_to(self, i: int, j: int) -> bool:
        return bool(self.order[i, j])

    def relation_pairs(self) -> list[tuple[int, int]]:
        """Strict relations (i, j) with i leading to j, 0-based."""
        return [(i, j) for i in range(self.size) for j in range(self.size) if i != j and self.order[i, j]]

    def relation_labels(self) -> list[str]:
        return [f"{i + 1}⤳{j + 1}" for i, j in self.relation_pairs()]


# ---------------------------------------------------------------------------
# Compact frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TauTable:
    """tau(x, y) on probe points, extended to all (x, y) by nearest probe.

    Row 0 of `table` holds x = x_init; row 1 + p holds x = x_probes[p].
    """

    x_probes: np.ndarray
    y_probes: np.ndarray
    table: np.ndarray

    def __call__(self, x, y) -> int:
        yp = as_word(np.atleast_1d(np.asarray(y, dtype=float))[None, :], dim=self.y_probes.shape[1])
        col = int(np.argmin(np.sum((self.y_probes - yp) ** 2, axis=1)))
        if isinstance(x, XInit) or self.x_probes.shape[0] == 0:
            row = 0
        else:
            xp = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
            row = 1 + int(np.argmin(np.sum((self.x_probes - xp) ** 2, axis=1)))
        return int(self.table[row, col])

    @classmethod
    def constant(cls, value: int, dim: int) -> TauTable:
        origin = np.zeros((1, dim))
        return cls(x_probes=origin, y_probes=origin, table=np.full((2, 1), int(value)))

    def to_record(self) -> dict[str, Any]:
        return {
            "x_probes": self.x_probes.tolist(),
            "y_probes": self.y_probes.tolist(),
            "rows": ["x_init"] + [f"x{p}" for p in range(self.x_probes.shape[0])],
            "table": self.table.astype(int).tolist(),
        }


@dataclass(eq=False)
class CompactFrame:
    slices: list[Box]
    class_regions: list[Region]
    class_labels: list[str]
    tau: TauTable
    tau_K: int
    c_K: float
    source_classes: list[int] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.slices:
            raise ValueError("a compact frame needs at least one class")
        if len(self.slices) != len(self.class_regions):
            raise ValueError("one compact slice per class")
        if self.tau_K < 1:
            raise ValueError("tau_K must be >= 1")
        if self.c_K < 1:
            raise ValueError("c_K must be >= 1")

    @property
    def r(self) -> int:
        return len(self.slices)

    @property
    def dim(self) -> int:
        return len(self.slices[0].lo)

    def class_of(self, letters: np.ndarray) -> np.ndarray:
        """1..r for letters in K_j, 0 for letters outside K."""
        pts = as_word(letters, dim=self.dim)
        out = np.zeros(pts.shape[0], dtype=int)
        for j, (piece, region) in enumerate(zip(self.slices, self.class_regions), start=1):
            out[(out == 0) & piece.contains(pts) & region.contains(pts)] = j
        return out

    def side_counts(self, letters: np.ndarray, partition: dict[int, int]) -> dict[int, int]:
        """Letters of the word inside C^(1) and C^(2) (class regions, not K)."""
        pts = as_word(letters, dim=self.dim)
        counts = {1: 0, 2: 0}
        taken = np.zeros(pts.shape[0], dtype=bool)
        for j, region in enumerate(self.class_regions, start=1):
            hit = region.contains(pts) & ~taken
            counts[partition[j]] += int(hit.sum())
            taken |= hit
        return counts

    def to_record(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "classes": [
                {"index": j, "label": label, "region": region.to_record(), "K": piece.to_record()}
                for j, (label, region, piece) in enumerate(
                    zip(self.class_labels, self.class_regions, self.slices), start=1
                )
            ],
            "order": " ⤳ ".join(["beta"] + [str(j) for j in range(1, self.r + 1)]),
            "tau_K": self.tau_K,
            "c_K": self.c_K,
            "tau": self.tau.to_record(),
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# Words under the maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SlicedWord:
    subwords: tuple[Word, ...]
    source_length: int
    # Half-open [start, end) per class, None for e.
    positions: tuple[tuple[int, int] | None, ...]
    frame: CompactFrame

    @property
    def total_length(self) -> int:
        return sum(w.shape[0] for w in self.subwords)

    @property
    def class_ordered(self) -> bool:
        """Slices follow the class order without overlapping; chain paths always are."""
        spans = [p for p in self.positions if p is not None]
        return all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))

    def is_empty(self) -> bool:
        return self.total_length == 0


@dataclass(frozen=True, eq=False)
class StitchTemplate:
    """W_tau1 x {v1} x W_tau2 x ... x {vk} x W_tau(k+1) as fixed/free segments."""

    free_lengths: tuple[int, ...]
    fixed: tuple[Word, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.free_lengths) != len(self.fixed) + 1:
            raise ValueError("a template alternates k+1 free segments with k fixed words")
        if any(t < 0 for t in self.free_lengths):
            raise ValueError("free segment lengths must be >= 0")

    @property
    def fixed_length(self) -> int:
        return sum(w.shape[0] for w in self.fixed)

    @property
    def total_length(self) -> int:
        return self.fixed_length + sum(self.free_lengths)

    @property
    def segments(self) -> list[tuple[str, Any]]:
        out: list[tuple[str, Any]] = []
        for tau, word in zip(self.free_lengths, self.fixed):
            out.append(("free", tau))
            out.append(("fixed", word))
        out.append(("free", self.free_lengths[-1]))
        return out

    def fixed_words(self) -> list[Word]:
        return [w for w in self.fixed if w.shape[0] > 0]

    def to_records(self) -> tuple[list[str], dict[str, list[list[float]]]]:
        """`free <len>` / `fixed <word-id>` lines and the word table."""
        lines, table = [], {}
        for kind, value in self.segments:
            if kind == "free":
                lines.append(f"free {value}")
            else:
                word_id = f"w{len(table)}"
                table[word_id] = value.tolist()
                lines.append(f"fixed {word_id}")
        return lines, table


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    absolutely_continuous: bool
    support_in_closure: bool
    beta_reachable: bool
    totally_ordered: bool
    charged: list[int]
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        return self.absolutely_continuous and self.support_in_closure and self.beta_reachable and self.totally_ordered

    def to_record(self) -> dict[str, Any]:
        return {
            "admissible": self.admissible,
            "absolutely_continuous": self.absolutely_continuous,
            "support_in_closure": self.support_in_closure,
            "beta_reachable": self.beta_reachable,
            "totally_ordered": self.totally_ordered,
            "charged_classes": [j + 1 for j in self.charged],
            **self.details,
        }


@dataclass
class RateEntry:
    n: int
    delta: float
    hits: int
    samples: int
    ci_low: float
    ci_high: float

    @property
    def p_hat(self) -> float:
        return self.hits / self.samples

    @property
    def censored(self) -> bool:
        return self.hits == 0

    @property
    def estimate(self) -> float | None:
        """(1/n) log p_hat; None below resolution."""
        if self.censored or self.n == 0:
            return None if self.censored else 0.0
        return math.log(self.p_hat) / self.n

    @property
    def rate_ci(self) -> tuple[float | None, float | None]:
        lo = math.log(self.ci_low) / self.n if self.ci_low > 0 and self.n else None
        hi = math.log(self.ci_high) / self.n if self.ci_high > 0 and self.n else None
        return lo, hi

    def to_row(self) -> dict[str, Any]:
        lo, hi = self.rate_ci
        return {
            "n": self.n,
            "delta": self.delta,
            "hits": self.hits,
            "samples": self.samples,
            "p_hat": self.p_hat,
            "p_ci_low": self.ci_low,
            "p_ci_high": self.ci_high,
            "estimate": "below resolution" if self.censored else self.estimate,
            "rate_ci_low": "" if lo is None else lo,
            "rate_ci_high": "" if hi is None else hi,
        }


@dataclass
class RateSurface:
    entries: list[RateEntry]
    target: str
    seed: int
    monotonicity_violations: int = 0

    def entry(self, n: int, delta: float) -> RateEntry:
        for e in self.entries:
            if e.n == n and e.delta == delta:
                return e
        raise KeyError((n, delta))

    @property
    def corner(self) -> RateEntry | None:
        """Largest n, smallest delta with at least one hit."""
        n_max = max(e.n for e in self.entries)
        live = sorted((e for e in self.entries if e.n == n_max and not e.censored), key=lambda e: e.delta)
        return live[0] if live else None

    @property
    def rl_proxy(self) -> float | None:
        c = self.corner
        return None if c is None or c.estimate is None else -c.estimate

    def rows(self) -> list[dict[str, Any]]:
        return [e.to_row() for e in self.entries]


@dataclass
class DvBound:
    value: float
    witness: dict[str, Any]
    family: str
    integration_error: float

    def to_record(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "family": self.family,
            "integration_error": self.integration_error,
            "witness": self.witness,
        }


PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class InequalityReport:
    """Two-sided Monte Carlo comparison held in log space (the constants overflow floats)."""

    name: str
    log_lhs: float
    log_lhs_ci: tuple[float, float]
    log_rhs: float
    log_rhs_ci: tuple[float, float]
    log_constant: float
    verdict: str
    details: dict[str, Any] = field(default_factory=dict)

    def to_row(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "verdict": self.verdict,
            "log_lhs": self.log_lhs,
            "log_lhs_ci_low": self.log_lhs_ci[0],
            "log_lhs_ci_high": self.log_lhs_ci[1],
            "log_rhs_without_constant": self.log_rhs,
            "log_rhs_ci_low": self.log_rhs_ci[0],
            "log_rhs_ci_high": self.log_rhs_ci[1],
            "log_constant": self.log_constant,
        }


@dataclass
class SweepReport:
    """Outcome of one randomized sweep of a geographic inequality."""

    kind: str
    instances: int
    checked: int = 0
    skipped: int = 0
    violations: int = 0
    counterexamples: list[dict[str, Any]] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return PASS if self.violations == 0 else FAIL

    def to_row(self) -> dict[str, Any]:
        return {
            "check": self.kind,
            "verdict": self.verdict,
            "instances": self.instances,
            "checked": self.checked,
            "skipped": self.skipped,
            "violations": self.violations,
        }


@dataclass
class ProbeReport:
    name: str
    passed: bool
    rows: list[dict[str, Any]] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return PASS if self.passed else FAIL
