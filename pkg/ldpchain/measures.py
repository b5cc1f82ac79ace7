from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import networkx as nx
import networkx.algorithms.flow as flow
import numpy as np
from scipy.spatial.distance import cdist

from ldpchain.config import settings

WEIGHT_TOL = 1e-12
# Slack used when comparing a deficiency against a radius.
DECISION_TOL = 1e-12
# Upper bound on floats held by one brute-force block (subsets x nu atoms x mu atoms).
BRUTE_BLOCK = 2_000_000

logger = logging.getLogger("ldpchain.measures")

Word = np.ndarray
MaskFn = Callable[[np.ndarray], np.ndarray]


def as_word(letters: Iterable | np.ndarray, dim: int | None = None) -> Word:
    """Return letters as a float array of shape (n, d).

    A flat sequence is read as n scalar letters (d = 1).
    """
    arr = np.asarray(letters, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"a word must be a sequence of points, got shape {arr.shape}")
    if arr.shape[0] == 0 and dim is not None:
        arr = arr.reshape(0, dim)
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: word has d={arr.shape[1]}, expected d={dim}")
    return arr


def empty_word(dim: int) -> Word:
    return np.zeros((0, dim), dtype=float)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    atoms: np.ndarray
    weights: np.ndarray
    # Set when the atoms stand in for an absolutely continuous law (fine-grid proxy).
    density_proxy: bool = False

    def __post_init__(self) -> None:
        if self.atoms.ndim != 2 or self.weights.ndim != 1:
            raise ValueError("atoms must be (m, d) and weights (m,)")
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise ValueError("atoms and weights differ in length")
        if self.atoms.shape[0] == 0:
            raise ValueError("a probability measure needs at least one atom")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(self.weights.sum())!r}, not 1")

    @property
    def dim(self) -> int:
        return int(self.atoms.shape[1])

    @property
    def size(self) -> int:
        return int(self.atoms.shape[0])

    @classmethod
    def from_points(
        cls,
        points: np.ndarray,
        weights: np.ndarray | None = None,
        density_proxy: bool = False,
    ) -> EmpiricalMeasure:
        """Merge exactly equal points by adding weights (no fuzzy merging)."""
        pts = as_word(points)
        if pts.shape[0] == 0:
            raise ValueError("a probability measure needs at least one atom")
        w = np.full(pts.shape[0], 1.0 / pts.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        total = float(w.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total!r}, not 1")
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=w, minlength=uniq.shape[0])
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        return cls(atoms=uniq, weights=merged / merged.sum(), density_proxy=density_proxy)

    def weight_of(self, point: Sequence[float] | float) -> float:
        p = as_word([point] if np.ndim(point) == 0 else [list(point)], dim=self.dim)[0]
        hit = np.all(self.atoms == p, axis=1)
        return float(self.weights[hit].sum())

    def to_text(self) -> str:
        """One `coords... weight` row per atom; repr-exact decimal notation."""
        rows = []
        for atom, w in zip(self.atoms, self.weights):
            rows.append(" ".join(format(float(v), ".17g") for v in [*atom, w]))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str, density_proxy: bool = False) -> EmpiricalMeasure:
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("no atoms in measure record")
        table = np.array([[float(v) for v in row] for row in rows], dtype=float)
        if table.shape[1] < 2:
            raise ValueError("each measure row needs coordinates and a weight")
        return cls.from_points(table[:, :-1], table[:, -1], density_proxy=density_proxy)


def empirical_measure(u: Word | Sequence) -> EmpiricalMeasure:
    word = as_word(u)
    if word.shape[0] == 0:
        raise ValueError("empirical measure undefined for e")
    return EmpiricalMeasure.from_points(word)


def empirical_of_list(us: Sequence[Word | Sequence]) -> EmpiricalMeasure:
    """Length-weighted mixture of the empirical measures of the non-empty words."""
    words = [as_word(u) for u in us]
    words = [w for w in words if w.shape[0] > 0]
    if not words:
        raise ValueError("empirical measure undefined for a list of empty words")
    dims = {w.shape[1] for w in words}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: words of dimensions {sorted(dims)}")
    return empirical_measure(np.vstack(words))


def mixture(measures: Sequence[EmpiricalMeasure], weights: Sequence[float]) -> EmpiricalMeasure:
    lam = np.asarray(weights, dtype=float)
    if lam.shape[0] != len(measures) or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("mixture weights must be a probability vector matching the measures")
    _check_dims(*measures)
    atoms = np.vstack([m.atoms for m in measures])
    w = np.concatenate([l * m.weights for l, m in zip(lam, measures)])
    proxy = all(m.density_proxy for m, l in zip(measures, lam) if l > 0)
    return EmpiricalMeasure.from_points(atoms, w / w.sum(), density_proxy=proxy)


@dataclass(frozen=True, eq=False)
class PiecewiseDensity:
    """Absolutely continuous law, uniform inside each box with the given box masses."""

    lows: np.ndarray
    highs: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        if self.lows.shape != self.highs.shape or self.lows.ndim != 2:
            raise ValueError("box corners must be (k, d) arrays of equal shape")
        if self.masses.shape != (self.lows.shape[0],):
            raise ValueError("one mass per box")
        if np.any(self.highs <= self.lows):
            raise ValueError("every box needs positive volume")
        if np.any(self.masses < 0) or abs(float(self.masses.sum()) - 1.0) > 1e-9:
            raise ValueError("box masses must form a probability vector")

    @classmethod
    def from_boxes(
        cls, boxes: Sequence[tuple[Sequence[float], Sequence[float]]], masses: Sequence[float] | None = None
    ) -> PiecewiseDensity:
        lows = np.array([np.atleast_1d(np.asarray(lo, dtype=float)) for lo, _ in boxes])
        highs = np.array([np.atleast_1d(np.asarray(hi, dtype=float)) for _, hi in boxes])
        m = np.full(len(boxes), 1.0 / len(boxes)) if masses is None else np.asarray(masses, dtype=float)
        return cls(lows=lows, highs=highs, masses=m)

    @property
    def dim(self) -> int:
        return int(self.lows.shape[1])

    def mixed(self, other: PiecewiseDensity, lam: float) -> PiecewiseDensity:
        """lam * self + (1 - lam) * other, dropping boxes of zero mass."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch between densities")
        masses = np.concatenate([lam * self.masses, (1.0 - lam) * other.masses])
        keep = masses > 0
        return PiecewiseDensity(
            lows=np.vstack([self.lows, other.lows])[keep],
            highs=np.vstack([self.highs, other.highs])[keep],
            masses=masses[keep] / masses[keep].sum(),
        )

    def proxy(self, cells_per_axis: int = 16) -> EmpiricalMeasure:
        """Fine-grid stand-in: equal-mass atoms at the cell centres of every box."""
        points, weights = [], []
        for lo, hi, m in zip(self.lows, self.highs, self.masses):
            if m <= 0:
                continue
            grid = _box_grid(lo, hi, cells_per_axis, centres=True)
            points.append(grid)
            weights.append(np.full(grid.shape[0], m / grid.shape[0]))
        return EmpiricalMeasure.from_points(np.vstack(points), np.concatenate(weights), density_proxy=True)

    def probe_points(self, per_axis: int = 5) -> list[tuple[float, np.ndarray]]:
        """Per charged box: (mass, points spanning the closed box, corners included)."""
        return [
            (float(m), _box_grid(lo, hi, per_axis, centres=False))
            for lo, hi, m in zip(self.lows, self.highs, self.masses)
            if m > 0
        ]

    def interior_points(self, per_axis: int = 5) -> list[tuple[float, np.ndarray]]:
        return [
            (float(m), _box_grid(lo, hi, per_axis, centres=True))
            for lo, hi, m in zip(self.lows, self.highs, self.masses)
            if m > 0
        ]


def _box_grid(lo: np.ndarray, hi: np.ndarray, per_axis: int, centres: bool) -> np.ndarray:
    if centres:
        axes = [l + (np.arange(per_axis) + 0.5) * (h - l) / per_axis for l, h in zip(lo, hi)]
    else:
        axes = [np.linspace(l, h, per_axis) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(lo))


def mass(mu: EmpiricalMeasure, mask_fn: MaskFn) -> float:
    return float(mu.weights[np.asarray(mask_fn(mu.atoms), dtype=bool)].sum())


def restrict(mu: EmpiricalMeasure, mask_fn: MaskFn) -> EmpiricalMeasure:
    """Normalised restriction of mu to the set described by mask_fn."""
    mask = np.asarray(mask_fn(mu.atoms), dtype=bool)
    m = float(mu.weights[mask].sum())
    if m <= 0:
        raise ValueError("restriction to a null set")
    return EmpiricalMeasure(atoms=mu.atoms[mask], weights=mu.weights[mask] / m, density_proxy=mu.density_proxy)


def h_gauge(x: float) -> float:
    """Return |1/x - 1| + |1 - x|."""
    if not x > 0:
        raise ValueError(f"h(x) requires x > 0, got {x!r}")
    return abs(1.0 / x - 1.0) + abs(1.0 - x)


def tv_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """sup_A |mu(A) - nu(A)|, i.e. half the Jordan mass of mu - nu."""
    _check_dims(mu, nu)
    pts = np.vstack([mu.atoms, nu.atoms])
    signed = np.concatenate([mu.weights, -nu.weights])
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    diff = np.bincount(inverse.ravel(), weights=signed, minlength=uniq.shape[0])
    return float(min(1.0, 0.5 * np.abs(diff).sum()))


def lp_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, method: str = "auto") -> float:
    """Exact Levy-Prokhorov distance between finitely supported measures.

    method: "brute" enumerates subsets of the smaller support, "search" runs a
    binary search over the candidate radii with a deficiency oracle, "auto"
    picks brute force when the smaller support has at most
    settings.ldp_lp_brute_force_max atoms.
    """
    _check_dims(mu, nu)
    # d_LP is symmetric, so enumerate over the smaller support.
    if nu.size > mu.size:
        mu, nu = nu, mu
    if method == "auto":
        method = "brute" if nu.size <= settings.ldp_lp_brute_force_max else "search"
    if method == "brute":
        if nu.size > 24:
            raise ValueError(f"brute-force LP over {nu.size} atoms is not tractable")
        return _lp_brute(mu, nu)
    if method == "search":
        return _lp_search(mu, nu)
    raise ValueError(f"Unknown LP method: {method}")


def lp_within(mu: EmpiricalMeasure, nu: EmpiricalMeasure, delta: float) -> bool:
    """Decide d_LP(mu, nu) <= delta with one deficiency evaluation."""
    _check_dims(mu, nu)
    if delta >= 1.0:
        return True
    if delta < 0:
        return False
    if nu.size > mu.size:
        mu, nu = nu, mu
    dist = _pairwise(nu.atoms, mu.atoms)
    adjacency = dist <= delta
    lower = _deficiency_lower(mu, nu, adjacency)
    if lower > delta + DECISION_TOL:
        return False
    upper = _deficiency_upper(mu, nu, adjacency)
    if upper <= delta + DECISION_TOL:
        return True
    return _deficiency(mu, nu, adjacency) <= delta + DECISION_TOL


def deficiency(mu: EmpiricalMeasure, nu: EmpiricalMeasure, radius: float) -> float:
    """max over A of nu(A) - mu({x : d(x, A) <= radius})."""
    _check_dims(mu, nu)
    return _deficiency(mu, nu, _pairwise(nu.atoms, mu.atoms) <= radius)


def ball_support_radius(
    mu: EmpiricalMeasure,
    inside: MaskFn,
    distance_to_complement: Callable[[np.ndarray], np.ndarray],
) -> tuple[float, float]:
    """Return (delta, kappa) with nu(O) >= kappa for every nu in the closed delta-ball of mu.

    K is made of the atoms of O deepest inside O, just enough of them to carry
    two thirds of mu(O); delta = min(d(K, O^c) / 2, mu(O) / 3), kappa = mu(O) / 3.
    """
    mask = np.asarray(inside(mu.atoms), dtype=bool)
    mu_o = float(mu.weights[mask].sum())
    if mu_o <= 0:
        raise ValueError("mu(O) must be positive")
    depth = np.asarray(distance_to_complement(mu.atoms[mask]), dtype=float)
    w = mu.weights[mask]
    order = np.argsort(-depth, kind="stable")
    cum = np.cumsum(w[order])
    cut = int(np.searchsorted(cum, (2.0 / 3.0) * mu_o - 1e-15))
    d_k = float(depth[order[min(cut, len(order) - 1)]])
    # Strictly inside the neighbourhood bound; the ball here is closed.
    delta = min(0.5 * d_k, mu_o / 3.0) * (1.0 - 1e-9)
    return delta, mu_o / 3.0


def _check_dims(*measures: EmpiricalMeasure) -> None:
    dims = {m.dim for m in measures}
    if len(dims) > 1:
        raise ValueError(f"dimension mismatch: measures of dimensions {sorted(dims)}")


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] == 1:
        return np.abs(a[:, 0][:, None] - b[:, 0][None, :])
    return cdist(a, b)


def _deficiency(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    """adjacency[j, i]: mu atom i lies in the neighbourhood of nu atom j."""
    if nu.dim == 1:
        return _deficiency_interval(mu, nu, adjacency)
    return _deficiency_flow(mu, nu, adjacency)


def _deficiency_interval(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    # On the line the neighbourhood of A meets a new atom's interval only through
    # the previous (largest) atom of A, which makes a quadratic recursion exact.
    order = np.argsort(nu.atoms[:, 0], kind="stable")
    nbr = adjacency[order].astype(float)
    own = nbr @ mu.weights
    shared = (nbr * mu.weights) @ nbr.T
    nu_w = nu.weights[order]
    best = np.empty(len(order))
    for j in range(len(order)):
        carry = 0.0
        if j:
            carry = max(0.0, float(np.max(best[:j] + shared[j, :j])))
        best[j] = nu_w[j] - own[j] + carry
    return float(max(0.0, best.max()))


def _deficiency_flow(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    graph = nx.DiGraph()
    for j, w in enumerate(nu.weights):
        graph.add_edge("s", ("nu", j), capacity=float(w))
    for i, w in enumerate(mu.weights):
        graph.add_edge(("mu", i), "t", capacity=float(w))
    rows, cols = np.nonzero(adjacency)
    for j, i in zip(rows.tolist(), cols.tolist()):
        graph.add_edge(("nu", j), ("mu", i))
    if not graph.has_node("t"):
        return float(nu.weights.sum())
    value = flow.maximum_flow_value(graph, "s", "t", flow_func=flow.edmonds_karp)
    return float(max(0.0, nu.weights.sum() - value))


def _deficiency_lower(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    singles = nu.weights - adjacency.astype(float) @ mu.weights
    whole = float(nu.weights.sum()) - float(mu.weights[adjacency.any(axis=0)].sum())
    return float(max(0.0, singles.max(), whole))


def _deficiency_upper(mu: EmpiricalMeasure, nu: EmpiricalMeasure, adjacency: np.ndarray) -> float:
    # Any feasible transport certifies deficiency <= unmatched mass.
    room = mu.weights.astype(float).copy()
    unmatched = 0.0
    for j in np.argsort(adjacency.sum(axis=1), kind="stable"):
        need = float(nu.weights[j])
        for i in np.flatnonzero(adjacency[j]):
            if need <= 0:
                break
            take = min(need, room[i])
            room[i] -= take
            need -= take
        unmatched += need
    return unmatched


def _lp_search(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    dist = _pairwise(nu.atoms, mu.atoms)
    radii = np.unique(np.concatenate([[0.0], dist.ravel()]))
    radii = radii[radii <= 1.0]
    # Between consecutive radii the deficiency is constant; the answer lies in the
    # first gap (r_k, r_{k+1}] where it drops below r_{k+1}, at max(r_k, deficiency).
    values: dict[int, float] = {}

    def gap_value(k: int) -> float:
        if k not in values:
            values[k] = _deficiency(mu, nu, dist <= radii[k])
        return values[k]

    def settled(k: int) -> bool:
        upper = radii[k + 1] if k + 1 < len(radii) else np.inf
        return gap_value(k) <= upper

    lo, hi = 0, len(radii) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if settled(mid):
            hi = mid
        else:
            lo = mid + 1
    return float(min(1.0, max(radii[lo], gap_value(lo))))


def _lp_brute(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    m = nu.size
    dist = _pairwise(nu.atoms, mu.atoms)
    subsets = np.array(list(itertools.product([False, True], repeat=m))[1:], dtype=bool)
    block = max(1, BRUTE_BLOCK // max(1, m * mu.size))
    answer = 0.0
    for start in range(0, subsets.shape[0], block):
        chosen = subsets[start : start + block]
        # distance from every mu atom to each subset A
        masked = np.where(chosen[:, :, None], dist[None, :, :], np.inf)
        reach = masked.min(axis=1)
        need = chosen.astype(float) @ nu.weights
        for row, target in zip(reach, need):
            answer = max(answer, _subset_radius(row, mu.weights, float(target)))
    return float(min(1.0, answer))


def _subset_radius(reach: np.ndarray, weights: np.ndarray, target: float) -> float:
    """inf{d > 0 : mu({x : dist(x, A) < d}) + d >= target}."""
    order = np.argsort(reach, kind="stable")
    r, w = reach[order], weights[order]
    radii, first = np.unique(r, return_index=True)
    covered = np.concatenate([[0.0], np.cumsum(w)])
    # mass at distance <= radii[k]
    upto = covered[np.concatenate([first[1:], [len(r)]])]
    if radii[0] > 0:
        radii = np.concatenate([[0.0], radii])
        upto = np.concatenate([[0.0], upto])
    nxt = np.concatenate([radii[1:], [np.inf]])
    cand = np.maximum(radii, target - upto)
    ok = np.flatnonzero(cand <= nxt)
    return float(cand[ok[0]])


def build_measure(spec) -> PiecewiseDensity | EmpiricalMeasure:
    """Measure described by a validated MeasureSpec."""
    if spec.kind == "density":
        return PiecewiseDensity.from_boxes(spec.boxes, spec.masses)
    if spec.kind == "atoms":
        return EmpiricalMeasure.from_points(np.asarray(spec.atoms, dtype=float), spec.weights)
    raise RuntimeError(f"Unknown measure kind: {spec.kind}")


def as_proxy(measure: PiecewiseDensity | EmpiricalMeasure, cells_per_axis: int = 16) -> EmpiricalMeasure:
    if isinstance(measure, PiecewiseDensity):
        return measure.proxy(cells_per_axis)
    return measure
