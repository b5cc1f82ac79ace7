from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import integrate, optimize

from ldpchain.errors import EstimateRejected, PreconditionError
from ldpchain.kernels.base import KernelModel
from ldpchain.measures import (
    EmpiricalMeasure,
    PiecewiseDensity,
    as_proxy,
    empirical_of_list,
    lp_within,
    mixture,
)
from ldpchain.models import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    ClassStructure,
    CompactFrame,
    DvBound,
    InequalityReport,
    ProbeReport,
    RateEntry,
    RateSurface,
)
from ldpchain.services.classes_service import check_admissible
from ldpchain.services.sampling_service import clopper_pearson, count_grid, count_hits
from ldpchain.trajectory_ops import (
    coupling_count,
    couple,
    decouple,
    decoupling_lengths,
    fine_coupling_bound,
    fine_coupling_violations,
    log_coupling_constant,
    stitching_bound,
)

logger = logging.getLogger("ldpchain.estimator")

Target = PiecewiseDensity | EmpiricalMeasure

# DV bounds are rejected when the pf integration error exceeds this share of the value ...
DV_REL_ERROR = 0.10
# ... and this absolute floor (a bound near 0 has no meaningful relative error).
DV_ERROR_FLOOR = 1e-6
# Fewer hits than this and an estimate is flagged as low resolution.
LOW_HITS = 10


def describe_measure(mu: Target) -> str:
    if isinstance(mu, PiecewiseDensity):
        parts = [
            f"{list(np.round(lo, 6))}-{list(np.round(hi, 6))}:{m:.6g}"
            for lo, hi, m in zip(mu.lows, mu.highs, mu.masses)
        ]
        return "density[" + "; ".join(parts) + "]"
    return f"atoms[{mu.size}]"


# ---------------------------------------------------------------------------
# Batch events (picklable: they travel to pool workers)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LpBall:
    """L[w] within each of the nested LP radii of the centre; one column per radius."""

    center: EmpiricalMeasure
    deltas: tuple[float, ...]

    def __call__(self, paths: np.ndarray) -> np.ndarray:
        m = len(self.deltas)
        out = np.zeros((paths.shape[0], m), dtype=bool)
        for i, word in enumerate(paths):
            emp = EmpiricalMeasure.from_points(word)
            lo, hi = 0, m
            # Balls nest, so the first radius that holds settles the row.
            while lo < hi:
                mid = (lo + hi) // 2
                if lp_within(emp, self.center, self.deltas[mid]):
                    hi = mid
                else:
                    lo = mid + 1
            out[i, lo:] = True
        return out[:, 0] if m == 1 else out


@dataclass(frozen=True, eq=False)
class CouplingEvent:
    """Psi(u^1..u^N) lies inside {w : d_LP(L[w], centre) <= radius}.

    Decided through the stitching bound: every member w satisfies
    d_LP(L[w], L[v]) <= 2h(|v|/T), v the reordered slices.
    """

    frame: CompactFrame
    T: int
    center: EmpiricalMeasure | None
    radius: float

    def __call__(self, tuples: np.ndarray) -> np.ndarray:
        if tuples.ndim == 3:
            tuples = tuples[:, None]
        out = np.zeros(tuples.shape[0], dtype=bool)
        for i, words in enumerate(tuples):
            try:
                template = couple(list(words), self.T, self.frame)
            except PreconditionError:
                continue
            out[i] = _template_inside(template.fixed_words(), self.T, self.center, self.radius)
        return out


@dataclass(frozen=True, eq=False)
class DecouplingEvent:
    """Phi(u) lies inside W1 x W2; a side without a centre is the full word space."""

    frame: CompactFrame
    partition: dict[int, int]
    eps: float
    lambdas: tuple[float, float]
    centers: tuple[EmpiricalMeasure | None, EmpiricalMeasure | None]
    radii: tuple[float, float]

    def __call__(self, paths: np.ndarray) -> np.ndarray:
        out = np.zeros(paths.shape[0], dtype=bool)
        for i, word in enumerate(paths):
            try:
                templates = decouple(word, self.frame, self.partition, self.eps, self.lambdas)
            except PreconditionError:
                continue
            out[i] = all(
                _template_inside(t.fixed_words(), t.total_length, center, radius)
                for t, center, radius in zip(templates, self.centers, self.radii)
            )
        return out


def _template_inside(fixed: list[np.ndarray], T: int, center: EmpiricalMeasure | None, radius: float) -> bool:
    if center is None or radius >= 1.0:
        return True
    if not fixed:
        return False
    length = sum(w.shape[0] for w in fixed)
    return lp_within(empirical_of_list(fixed), center, radius - stitching_bound(length, T))


# ---------------------------------------------------------------------------
# Ball probabilities and rate surfaces
# ---------------------------------------------------------------------------


def estimate_ball_probability(
    model: KernelModel,
    mu: Target,
    delta: float,
    n: int,
    samples: int,
    seed: int | np.random.SeedSequence,
    workers: int = 1,
    proxy_cells: int = 16,
) -> tuple[float, float, float]:
    """(p_hat, ci_low, ci_high) for P(d_LP(L_n, mu) <= delta)."""
    if samples < 1:
        raise PreconditionError("samples >= 1 violated")
    if not delta > 0:
        raise PreconditionError("delta > 0 violated")
    if delta >= 1.0:
        hits = samples
    else:
        ball = LpBall(center=as_proxy(mu, proxy_cells), deltas=(float(delta),))
        hits = count_hits(model, n, ball, samples, seed, workers=workers)
    lo, hi = clopper_pearson(hits, samples)
    logger.info("ball probability: n=%s hits=%s/%s", n, hits, samples)
    return hits / samples, lo, hi


def rl_diagnostic(
    model: KernelModel,
    mu: Target,
    deltas: Sequence[float],
    ns: Sequence[int],
    samples: int,
    seed: int,
    workers: int = 1,
    proxy_cells: int = 16,
) -> RateSurface:
    """Ball-probability surface over (n, delta); one path set per n shared by every delta."""
    if not deltas or not ns:
        raise PreconditionError("rate grids must be nonempty")
    if any(b <= a for a, b in zip(deltas, deltas[1:])) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise PreconditionError("rate grids must be strictly increasing")
    center = as_proxy(mu, proxy_cells)
    entries: list[RateEntry] = []
    violations = 0
    for n in ns:
        hits = np.atleast_1d(
            count_grid(model, n, LpBall(center, tuple(float(d) for d in deltas)), samples,
                       np.random.SeedSequence([seed, n]), workers=workers)
        )
        violations += int(np.count_nonzero(np.diff(hits) < 0))
        for delta, h in zip(deltas, hits):
            lo, hi = clopper_pearson(int(h), samples)
            entries.append(RateEntry(n=n, delta=float(delta), hits=int(h), samples=samples, ci_low=lo, ci_high=hi))
        logger.info("rate surface: n=%s hits=%s", n, hits.tolist())
    if violations:
        logger.warning("rate surface: %s monotonicity violations in delta", violations)
    return RateSurface(entries=entries, target=describe_measure(mu), seed=seed, monotonicity_violations=violations)


# ---------------------------------------------------------------------------
# Donsker-Varadhan entropy
# ---------------------------------------------------------------------------


@dataclass
class PiecewiseConstant:
    """f equal to values[c] on grid cell c of the box and to `outside` elsewhere."""

    lows: np.ndarray
    highs: np.ndarray
    per_axis: int
    values: np.ndarray
    outside: float = 1.0

    @classmethod
    def constant(cls, lows: Sequence[float], highs: Sequence[float], per_axis: int, value: float = 1.0) -> PiecewiseConstant:
        lo = np.asarray(lows, dtype=float)
        return cls(
            lows=lo,
            highs=np.asarray(highs, dtype=float),
            per_axis=per_axis,
            values=np.full(per_axis ** lo.shape[0], float(value)),
        )

    @property
    def dim(self) -> int:
        return int(self.lows.shape[0])

    @property
    def cells(self) -> int:
        return int(self.values.shape[0])

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(self.lows[axis], self.highs[axis], self.per_axis + 1)

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Row-major cell of each point; -1 outside the box."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        width = (self.highs - self.lows) / self.per_axis
        raw = np.floor((pts - self.lows) / width).astype(int)
        inside = np.all((pts >= self.lows) & (pts <= self.highs), axis=1)
        raw = np.clip(raw, 0, self.per_axis - 1)
        flat = np.ravel_multi_index(tuple(raw.T), (self.per_axis,) * self.dim)
        return np.where(inside, flat, -1)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        idx = self.cell_index(points)
        return np.where(idx >= 0, self.values[np.maximum(idx, 0)], self.outside)

    def to_record(self) -> dict[str, Any]:
        return {
            "box_low": self.lows.tolist(),
            "box_high": self.highs.tolist(),
            "cells_per_axis": self.per_axis,
            "values": self.values.tolist(),
            "outside": self.outside,
        }


@dataclass
class AtomIndicator:
    """f = 1 + a * 1_A for a finite set A of points."""

    atoms: np.ndarray
    a: float

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.atoms.shape[1])
        hit = np.any(np.all(pts[:, None, :] == self.atoms[None, :, :], axis=2), axis=1)
        return 1.0 + self.a * hit


@dataclass
class _PfTable:
    """Cell probabilities P[i, c] = p(x_i, cell c) at the quadrature nodes of mu."""

    nodes: np.ndarray
    node_weights: np.ndarray
    cell_mass: np.ndarray
    outside_mass: float
    probs: np.ndarray
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def objective(self, values: np.ndarray, outside: float) -> tuple[float, float]:
        """(integral of log(f/pf) dmu, bound on the error carried over from P)."""
        stay = 1.0 - self.probs.sum(axis=1)
        pf = self.probs @ values + outside * stay
        first = float(np.dot(self.cell_mass, np.log(values)))
        if self.outside_mass > 0:
            first += self.outside_mass * math.log(outside)
        value = first - float(np.dot(self.node_weights, np.log(pf)))
        slack = self.errors * max(float(values.max()), outside)
        gap = pf - slack
        if np.any(gap <= 0):
            return value, math.inf
        return value, float(np.dot(self.node_weights, slack / gap))


def _cell_masses(mu: Target, f: PiecewiseConstant) -> tuple[np.ndarray, float]:
    masses = np.zeros(f.cells)
    if isinstance(mu, EmpiricalMeasure):
        idx = f.cell_index(mu.atoms)
        inside = idx >= 0
        np.add.at(masses, idx[inside], mu.weights[inside])
        return masses, float(mu.weights[~inside].sum())
    for lo, hi, m in zip(mu.lows, mu.highs, mu.masses):
        share = np.ones(1)
        for axis in range(f.dim):
            e = f.edges(axis)
            overlap = np.clip(np.minimum(e[1:], hi[axis]) - np.maximum(e[:-1], lo[axis]), 0.0, None)
            share = np.multiply.outer(share, overlap / (hi[axis] - lo[axis])).ravel()
        masses += m * share
    return masses, max(0.0, 1.0 - float(masses.sum()))


def _pf_table(
    model: KernelModel,
    mu: Target,
    f: PiecewiseConstant,
    mc_samples: int,
    rng: np.random.Generator,
) -> _PfTable:
    if mu.dim != f.dim or model.dim != f.dim:
        raise ValueError(f"dimension mismatch: measure d={mu.dim}, grid d={f.dim}, kernel d={model.dim}")
    cell_mass, outside_mass = _cell_masses(mu, f)
    nodes = as_proxy(mu, 4 * f.per_axis if f.dim == 1 else f.per_axis)
    xs = nodes.atoms
    if f.dim == 1:
        edges = f.edges(0)
        probs = np.zeros((xs.shape[0], f.cells))
        errors = np.zeros(xs.shape[0])

        def column(y: float) -> np.ndarray:
            return model.transition_density(xs, np.full_like(xs, y))

        for c in range(f.cells):
            val, err = integrate.quad_vec(column, edges[c], edges[c + 1], norm="max")
            probs[:, c] = val
            errors += err
    else:
        probs = np.zeros((xs.shape[0], f.cells))
        for i, x in enumerate(xs):
            ys = model.step(np.repeat(x[None, :], mc_samples, axis=0), rng)
            idx = f.cell_index(ys)
            probs[i] = np.bincount(idx[idx >= 0], minlength=f.cells) / mc_samples
        floor = np.maximum(probs, 1.0 / mc_samples)
        errors = 2.0 * np.sqrt(floor * (1.0 - floor) / mc_samples).sum(axis=1)
    return _PfTable(
        nodes=xs,
        node_weights=nodes.weights,
        cell_mass=cell_mass,
        outside_mass=outside_mass,
        probs=probs,
        errors=errors,
    )


def dv_objective(
    model: KernelModel,
    mu: Target,
    f: PiecewiseConstant | AtomIndicator,
    mc_samples: int = 4000,
    seed: int = 0,
) -> tuple[float, float]:
    """(integral of log(f/pf) dmu, integration error) for one test function.

    For AtomIndicator, A is Lebesgue-null, so pf = 1 under an absolutely
    continuous kernel and the objective reduces to mu(A) log(1 + a).
    """
    if isinstance(f, AtomIndicator):
        if isinstance(mu, PiecewiseDensity):
            return 0.0, 0.0
        return float(np.dot(mu.weights, np.log(f(mu.atoms)))), 0.0
    if isinstance(f, PiecewiseConstant):
        table = _pf_table(model, mu, f, mc_samples, np.random.default_rng(seed))
        return table.objective(f.values, f.outside)
    raise RuntimeError(f"Unknown test function family: {type(f).__name__}")


def dv_entropy_lower_bound(
    model: KernelModel,
    mu: Target,
    box_low: Sequence[float],
    box_high: Sequence[float],
    cells: int = 64,
    eps: float = 1e-3,
    sweeps: int = 5,
    mc_samples: int = 4000,
    seed: int = 0,
) -> DvBound:
    """Coordinate ascent in log f over grid functions with values in [eps, 1/eps]."""
    if not 0 < eps < 1:
        raise PreconditionError("0 < eps < 1 violated")
    d = len(box_low)
    per_axis = cells if d == 1 else max(1, int(round(cells ** (1.0 / d))))
    f = PiecewiseConstant.constant(box_low, box_high, per_axis)
    table = _pf_table(model, mu, f, mc_samples, np.random.default_rng(seed))
    lo, hi = math.log(eps), -math.log(eps)
    logv = np.zeros(f.cells)
    best, _ = table.objective(np.exp(logv), f.outside)

    for sweep in range(sweeps):
        start = best
        for c in range(f.cells):
            old = logv[c]

            def negative(t: float, c: int = c) -> float:
                logv[c] = t
                return -table.objective(np.exp(logv), f.outside)[0]

            res = optimize.minimize_scalar(negative, bounds=(lo, hi), method="bounded")
            if -res.fun > best:
                logv[c] = float(res.x)
                best = -float(res.fun)
            else:
                logv[c] = old
        logger.debug("dv ascent: sweep=%s value=%.6g", sweep, best)
        if best - start <= 1e-12:
            break

    f.values = np.exp(logv)
    value, error = table.objective(f.values, f.outside)
    if error > max(DV_REL_ERROR * abs(value), DV_ERROR_FLOOR):
        logger.warning("dv bound rejected: value=%.6g error=%.3g", value, error)
        raise EstimateRejected(f"pf integration error {error:.3g} exceeds 10% of the objective {value:.6g}")
    family = f"piecewise_constant[{per_axis}^{d}] in [{eps:g}, {1 / eps:g}]"
    return DvBound(value=value, witness=f.to_record(), family=family, integration_error=error)


# ---------------------------------------------------------------------------
# Probability inequalities
# ---------------------------------------------------------------------------


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass
class _Side:
    """log of a product of estimated probabilities, with CI and relative slack."""

    log_value: float = 0.0
    log_low: float = 0.0
    log_high: float = 0.0
    slack: float = 0.0
    zero: bool = False
    counts: list[dict[str, Any]] = field(default_factory=list)

    def times(self, label: str, hits: int, samples: int, power: int = 1) -> _Side:
        lo, hi = clopper_pearson(hits, samples)
        p = hits / samples
        self.counts.append({"event": label, "hits": hits, "samples": samples, "power": power})
        if power == 0:
            return self
        self.log_value += power * _log(p)
        self.log_low += power * _log(lo)
        self.log_high += power * _log(hi)
        if hits == 0:
            self.zero = True
        else:
            self.slack += power * (hi - lo) / (2.0 * p)
        return self

    def exact(self, label: str) -> _Side:
        self.counts.append({"event": label, "hits": "exact", "samples": 0, "power": 1})
        return self


def _compare(name: str, lhs: _Side, rhs: _Side, log_constant: float, details: dict[str, Any]) -> InequalityReport:
    if lhs.zero:
        verdict = PASS
    elif rhs.zero:
        verdict = INCONCLUSIVE
    else:
        margin = log_constant + rhs.log_value + math.log1p(lhs.slack + rhs.slack)
        verdict = PASS if lhs.log_value <= margin else FAIL
    details = {**details, "lhs_events": lhs.counts, "rhs_events": rhs.counts}
    report = InequalityReport(
        name=name,
        log_lhs=lhs.log_value,
        log_lhs_ci=(lhs.log_low, lhs.log_high),
        log_rhs=rhs.log_value,
        log_rhs_ci=(rhs.log_low, rhs.log_high),
        log_constant=log_constant,
        verdict=verdict,
        details=details,
    )
    log = logger.warning if verdict == FAIL else logger.info
    log("%s: verdict=%s log_lhs=%.4g log_rhs=%.4g log_C=%.4g", name, verdict, lhs.log_value, rhs.log_value, log_constant)
    return report


def verify_coupling_probability(
    model: KernelModel,
    frame: CompactFrame,
    center: Target | None,
    radius: float,
    N: int,
    n: int,
    T: int,
    samples: int,
    seed: int,
    workers: int = 1,
    proxy_cells: int = 16,
) -> InequalityReport:
    """P^{xN}(U) <= (c_K^r (tau_K+1)^r (n+1)^(2r+1))^N P(W), W an LP ball (full when centre is None)."""
    if T < N * n + N * frame.r * frame.tau_K:
        raise PreconditionError(f"T >= N*n + N*r*tau_K violated: {T} < {N}*{n} + {N}*{frame.r}*{frame.tau_K}")
    log_c = log_coupling_constant(frame.c_K, frame.tau_K, frame.r, n, N)
    root = np.random.SeedSequence(seed)
    lhs_seed, rhs_seed = root.spawn(2)
    lhs, rhs = _Side(), _Side()
    full = center is None or radius >= 1.0
    ball_center = None if center is None else as_proxy(center, proxy_cells)
    event = CouplingEvent(frame=frame, T=T, center=None if full else ball_center, radius=radius)
    hits = count_hits(model, n, event, samples, lhs_seed, workers=workers, copies=N)
    lhs.times("U", hits, samples, power=1)
    if full:
        rhs.exact("W")
    else:
        rhs.times("W", count_hits(model, T, LpBall(ball_center, (radius,)), samples, rhs_seed, workers=workers), samples)
    return _compare("coupling", lhs, rhs, log_c, {"N": N, "n": n, "T": T, "radius": radius, "samples": samples})


def verify_supermultiplicative(
    model: KernelModel,
    frame: CompactFrame,
    mu1: Target,
    mu2: Target,
    eps: float,
    delta: float,
    n: int,
    T: int,
    samples: int,
    seed: int,
    workers: int = 1,
    proxy_cells: int = 16,
) -> InequalityReport:
    """P(A1)^ceil(N/2) P(A2)^floor(N/2) <= C_{n,T} P(B_T(eps, delta))."""
    r, tau_K = frame.r, frame.tau_K
    N = coupling_count(n, T, r, tau_K)
    if delta >= 1.0:
        log_c = log_coupling_constant(frame.c_K, tau_K, r, n, max(N, 1))
        lhs, rhs = _Side().exact("A1").exact("A2"), _Side().exact("B")
        return _compare("supermultiplicative", lhs, rhs, log_c, {"N": N, "n": n, "T": T, "trivial": "delta >= 1"})
    p1, p2 = as_proxy(mu1, proxy_cells), as_proxy(mu2, proxy_cells)
    problems = fine_coupling_violations(n, T, eps, delta, r, tau_K)
    for label, p in (("mu_1", p1), ("mu_2", p2)):
        in_k = float(p.weights[frame.class_of(p.atoms) > 0].sum())
        if in_k < 1.0 - eps:
            problems.append(f"{label}(K) >= 1-eps ({in_k:.4g} < {1.0 - eps:g})")
    if N < 1:
        problems.append("N = floor(T/(n + r*tau_K)) >= 1")
    if problems:
        raise PreconditionError("side conditions violated: " + "; ".join(problems))
    log_c = log_coupling_constant(frame.c_K, tau_K, r, n, N)
    bound = fine_coupling_bound(eps, delta, r)
    s1, s2, s3 = np.random.SeedSequence(seed).spawn(3)
    lhs = _Side()
    lhs.times("A1", count_hits(model, n, LpBall(p1, (delta,)), samples, s1, workers=workers), samples, power=(N + 1) // 2)
    lhs.times("A2", count_hits(model, n, LpBall(p2, (delta,)), samples, s2, workers=workers), samples, power=N // 2)
    rhs = _Side()
    details = {"N": N, "n": n, "T": T, "eps": eps, "delta": delta, "f_eps_delta": bound, "samples": samples}
    if bound >= 1.0:
        rhs.exact("B")
        details["trivial"] = "f(eps, delta) >= 1"
        logger.info("supermultiplicative: f(eps, delta) = %.4g >= 1, right-hand side is certain", bound)
    else:
        mu = mixture([p1, p2], [0.5, 0.5])
        rhs.times("B", count_hits(model, T, LpBall(mu, (bound,)), samples, s3, workers=workers), samples)
    return _compare("supermultiplicative", lhs, rhs, log_c, details)


def verify_decoupling_probability(
    model: KernelModel,
    frame: CompactFrame,
    partition: dict[int, int],
    n: int,
    eps: float,
    lambdas: tuple[float, float],
    centers: tuple[Target | None, Target | None],
    radii: tuple[float, float],
    samples: int,
    seed: int,
    workers: int = 1,
    proxy_cells: int = 16,
) -> InequalityReport:
    """P(U) <= (n+1)^(2r+1) (tau_K+1)^r c_K^r P(W1) P(W2) with U = Phi^{-1}-domain inside W1 x W2."""
    T1, T2 = decoupling_lengths(n, frame, partition, eps, lambdas)
    log_c = log_coupling_constant(frame.c_K, frame.tau_K, frame.r, n, 1)
    balls = tuple(
        None if c is None or rad >= 1.0 else as_proxy(c, proxy_cells) for c, rad in zip(centers, radii)
    )
    event = DecouplingEvent(
        frame=frame,
        partition=dict(partition),
        eps=eps,
        lambdas=(float(lambdas[0]), float(lambdas[1])),
        centers=balls,  # type: ignore[arg-type]
        radii=(float(radii[0]), float(radii[1])),
    )
    s0, s1, s2 = np.random.SeedSequence(seed).spawn(3)
    lhs = _Side().times("U", count_hits(model, n, event, samples, s0, workers=workers), samples)
    rhs = _Side()
    for label, ball, radius, T_side, stream in (("W1", balls[0], radii[0], T1, s1), ("W2", balls[1], radii[1], T2, s2)):
        if ball is None:
            rhs.exact(label)
        else:
            rhs.times(label, count_hits(model, T_side, LpBall(ball, (radius,)), samples, stream, workers=workers), samples)
    details = {"n": n, "eps": eps, "lambdas": list(lambdas), "T1": T1, "T2": T2, "samples": samples}
    return _compare("decoupling", lhs, rhs, log_c, details)


# ---------------------------------------------------------------------------
# Convexity of the rate
# ---------------------------------------------------------------------------


def mix_measures(mu1: Target, mu2: Target, lam: float, proxy_cells: int) -> Target:
    if lam >= 1.0:
        return mu1
    if lam <= 0.0:
        return mu2
    if isinstance(mu1, PiecewiseDensity) and isinstance(mu2, PiecewiseDensity):
        return mu1.mixed(mu2, lam)
    return mixture([as_proxy(mu1, proxy_cells), as_proxy(mu2, proxy_cells)], [lam, 1.0 - lam])


def _rate_band(entry: RateEntry) -> tuple[float, float]:
    """Rate I = -(1/n) log p as (low, high) from the binomial interval."""
    lo = -math.log(entry.ci_high) / entry.n if entry.ci_high > 0 else math.inf
    hi = -math.log(entry.ci_low) / entry.n if entry.ci_low > 0 else math.inf
    return lo, hi


def convexity_scan(
    model: KernelModel,
    mu1: Target,
    mu2: Target,
    lambdas: Sequence[float],
    delta: float,
    n: int,
    samples: int,
    seed: int,
    workers: int = 1,
    cs: ClassStructure | None = None,
    proxy_cells: int = 16,
) -> ProbeReport:
    """Rate of lam*mu1 + (1-lam)*mu2 against the chord between the endpoint rates.

    Every mixture is scored on the same paths, so equal measures give equal rows.
    """
    grid = sorted({0.0, 1.0, *(float(l) for l in lambdas)})
    entries: dict[float, RateEntry] = {}
    verdicts: dict[float, bool | None] = {}
    measures: dict[float, Target] = {}
    for lam in grid:
        nu = mix_measures(mu1, mu2, lam, proxy_cells)
        measures[lam] = nu
        verdicts[lam] = None if cs is None else check_admissible(nu, cs).admissible
        hits = count_hits(model, n, LpBall(as_proxy(nu, proxy_cells), (delta,)), samples, np.random.SeedSequence(seed), workers=workers)
        lo, hi = clopper_pearson(hits, samples)
        entries[lam] = RateEntry(n=n, delta=delta, hits=hits, samples=samples, ci_low=lo, ci_high=hi)

    disjoint = False
    if cs is not None:
        c1 = set(check_admissible(mu1, cs).charged)
        c2 = set(check_admissible(mu2, cs).charged)
        disjoint = not (c1 & c2)

    end1, end0 = entries[1.0], entries[0.0]
    chord_ok = not (end1.censored or end0.censored)
    rows: list[dict[str, Any]] = []
    broken = 0
    for lam in grid:
        e = entries[lam]
        low, high = _rate_band(e)
        rate = None if e.censored else -math.log(e.p_hat) / n
        row: dict[str, Any] = {
            "lambda": lam,
            "admissible": "" if verdicts[lam] is None else verdicts[lam],
            "hits": e.hits,
            "samples": samples,
            "rate": "censored" if rate is None else rate,
            "rate_ci_low": low,
            "rate_ci_high": high,
            "low_resolution": e.hits < LOW_HITS,
            "convex": "n/a",
            "linearity_deviation": "",
        }
        if chord_ok and verdicts[lam] is not False:
            chord = lam * _rate_band(end1)[1] + (1.0 - lam) * _rate_band(end0)[1]
            row["convex"] = "yes" if low <= chord else "no"
            broken += row["convex"] == "no"
            if disjoint and rate is not None:
                r1, r0 = -math.log(end1.p_hat) / n, -math.log(end0.p_hat) / n
                row["linearity_deviation"] = rate - (lam * r1 + (1.0 - lam) * r0)
        rows.append(row)
    if broken:
        logger.warning("convexity scan: %s mixtures above the chord", broken)
    details = {"n": n, "delta": delta, "disjoint_classes": disjoint, "endpoints_resolved": chord_ok}
    return ProbeReport(name="convexity", passed=broken == 0, rows=rows, details=details)
