from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ldpchain.errors import PreconditionError
from ldpchain.measures import (
    EmpiricalMeasure,
    PiecewiseDensity,
    Word,
    ball_support_radius,
    empirical_measure,
    empirical_of_list,
    lp_distance,
    lp_within,
    mixture,
    restrict,
    tv_distance,
)
from ldpchain.models import Box, CompactFrame, Interval, StitchTemplate, SweepReport, TauTable
from ldpchain.schemas import MAP_KINDS
from ldpchain.trajectory_ops import (
    couple,
    coupling_bound,
    coupling_count,
    decouple,
    decoupling_bound,
    fine_coupling_bound,
    fine_coupling_violations,
    fine_decoupling_bound,
    fine_decoupling_violations,
    random_fillers,
    slice_word,
    slicing_bound,
    slicing_list_bound,
    stitch_template,
    stitching_bound,
    template_member,
)

logger = logging.getLogger("ldpchain.maps")

# Slack for float rounding in the bound comparisons.
BOUND_TOL = 1e-9

# Synthetic 1-D geometry: class j is (off, off + 2) with off = 3(j - 1),
# K_j = [off + 0.5, off + 1.5], junk letters sit in the gaps between classes.
CLASS_GAP = 3.0
CLASS_WIDTH = 2.0
K_LO, K_HI = 0.5, 1.5
JUNK_HALF = 0.2
# Jittered copies move each letter by at most this share of delta.
JITTER_SHARE = 0.45


def synthetic_frame(r: int, tau_K: int, rng: np.random.Generator) -> CompactFrame:
    """r unit classes on the line with a random tau table valued in 1..tau_K."""
    offsets = CLASS_GAP * np.arange(r)
    probes = (offsets + 0.5 * (K_LO + K_HI))[:, None]
    table = rng.integers(1, tau_K + 1, size=(r + 1, r))
    return CompactFrame(
        slices=[Box(lo=(o + K_LO,), hi=(o + K_HI,)) for o in offsets],
        class_regions=[Interval(float(o), float(o + CLASS_WIDTH)) for o in offsets],
        class_labels=[f"C{j}" for j in range(1, r + 1)],
        tau=TauTable(x_probes=probes, y_probes=probes, table=table),
        tau_K=int(tau_K),
        c_K=1.0,
        source_classes=list(range(r)),
        provenance={"synthetic": True},
    )


class _Geometry:
    """Letter sources for class-ordered random words over a frame."""

    def __init__(self, frame: CompactFrame) -> None:
        self.frame = frame
        self.r = frame.r
        self.dim = frame.dim

    def k_letters(self, rng: np.random.Generator, j: int, size: int, shrink: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def c_letters(self, rng: np.random.Generator, j: int, size: int, margin: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def junk_letters(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def filler_box(self) -> tuple[float, float]:
        raise NotImplementedError

    # ---- words ----

    def ordered_word(self, rng: np.random.Generator, n: int, k_share: float = 0.6, junk_share: float = 0.2) -> Word:
        """Class-ordered word: blocks inside C_j in increasing j, junk only between blocks."""
        m = self.r
        weights = np.concatenate([np.full(m + 1, junk_share / (m + 1)), np.full(m, (1.0 - junk_share) / m)])
        counts = rng.multinomial(n, weights / weights.sum())
        junk, blocks = counts[: m + 1], counts[m + 1 :]
        if blocks.sum() == 0:
            slot = int(np.argmax(junk))
            junk[slot] -= 1
            blocks[rng.integers(m)] += 1
        parts = [self.junk_letters(rng, int(junk[0]))]
        for j in range(1, m + 1):
            parts.append(self._block(rng, j, int(blocks[j - 1]), k_share))
            parts.append(self.junk_letters(rng, int(junk[j])))
        word = np.vstack(parts)
        if not np.any(self.frame.class_of(word)):
            j = 1 + int(np.flatnonzero(blocks)[0])
            start = int(junk[0] + sum(blocks[: j - 1]) + sum(junk[1:j]))
            word[start] = self.k_letters(rng, j, 1)[0]
        return word

    def stitchable_list(self, rng: np.random.Generator, k: int, empty_share: float = 0.2) -> list[Word]:
        js = np.sort(rng.integers(1, self.r + 1, size=k))
        out = []
        for j in js.tolist():
            if rng.random() < empty_share:
                out.append(np.zeros((0, self.dim)))
                continue
            length = int(rng.integers(1, 8))
            body = self._block(rng, j, length, 0.5)
            body[0] = self.k_letters(rng, j, 1)[0]
            body[-1] = self.k_letters(rng, j, 1)[0]
            out.append(body)
        return out

    def measure_blocks(
        self, rng: np.random.Generator, classes: Sequence[int], n: int, eps: float, delta: float
    ) -> dict[int, Word]:
        """Blocks over `classes` with total length n and at most eps*n letters outside K^0.

        K^0 is K shrunk by delta; the remaining letters keep delta from the class boundary.
        """
        split = rng.multinomial(n - len(classes), np.full(len(classes), 1.0 / len(classes))) + 1
        outside = int(rng.integers(0, int(math.floor(eps * n)) + 1))
        flags = np.zeros(n, dtype=bool)
        flags[rng.choice(n, size=outside, replace=False)] = True
        blocks, pos = {}, 0
        for j, size in zip(classes, split.tolist()):
            mine = flags[pos : pos + size]
            letters = self.k_letters(rng, j, size, shrink=delta)
            if mine.any():
                letters[mine] = self.c_letters(rng, j, int(mine.sum()), margin=delta + 0.01)
            blocks[j] = letters
            pos += size
        return blocks

    def _block(self, rng: np.random.Generator, j: int, size: int, k_share: float) -> np.ndarray:
        if size == 0:
            return np.zeros((0, self.dim))
        in_k = rng.random(size) < k_share
        letters = self.c_letters(rng, j, size)
        if in_k.any():
            letters[in_k] = self.k_letters(rng, j, int(in_k.sum()))
        return letters


class _SyntheticGeometry(_Geometry):
    def _offset(self, j: int) -> float:
        return CLASS_GAP * (j - 1)

    def k_letters(self, rng, j, size, shrink=0.0):
        off = self._offset(j)
        return rng.uniform(off + K_LO + shrink, off + K_HI - shrink, size=(size, 1))

    def c_letters(self, rng, j, size, margin=0.0):
        off = self._offset(j)
        lo_margin = max(margin, 1e-3)
        left = rng.random(size) < 0.5
        out = rng.uniform(off + K_HI + 1e-6, off + CLASS_WIDTH - lo_margin, size=size)
        out[left] = rng.uniform(off + lo_margin, off + K_LO - 1e-6, size=int(left.sum()))
        return out[:, None]

    def junk_letters(self, rng, size):
        gap = rng.integers(0, self.r + 1, size=size)
        centres = np.where(gap == 0, -0.5, CLASS_GAP * (gap - 1) + CLASS_WIDTH + 0.5)
        return (centres + rng.uniform(-JUNK_HALF, JUNK_HALF, size=size))[:, None]

    def filler_box(self):
        return -1.0, CLASS_GAP * self.r


class _FrameGeometry(_Geometry):
    """Rejection sampling around the K boxes of a caller-supplied frame."""

    MAX_TRIES = 200

    def __init__(self, frame: CompactFrame) -> None:
        super().__init__(frame)
        lows = np.array([s.lo for s in frame.slices])
        highs = np.array([s.hi for s in frame.slices])
        span = np.maximum(highs - lows, 1e-3)
        self._outer = (lows.min(axis=0) - 2 * span.max(axis=0), highs.max(axis=0) + 2 * span.max(axis=0))

    def k_letters(self, rng, j, size, shrink=0.0):
        box = self.frame.slices[j - 1]
        lo = np.minimum(np.asarray(box.lo) + shrink, np.asarray(box.hi))
        hi = np.maximum(np.asarray(box.hi) - shrink, lo)
        return rng.uniform(lo, hi, size=(size, self.dim))

    def c_letters(self, rng, j, size, margin=0.0):
        box = self.frame.slices[j - 1]
        lo, hi = np.asarray(box.lo), np.asarray(box.hi)
        width = np.maximum(hi - lo, 1e-3)
        region = self.frame.class_regions[j - 1]
        out = self.k_letters(rng, j, size)
        for i in range(size):
            for _ in range(self.MAX_TRIES):
                cand = rng.uniform(lo - 0.5 * width, hi + 0.5 * width)[None, :]
                probe = np.vstack([cand, cand - margin, cand + margin])
                if region.contains(probe).all():
                    out[i] = cand[0]
                    break
        return out

    def junk_letters(self, rng, size):
        out = np.empty((size, self.dim))
        lo, hi = self._outer
        for i in range(size):
            for _ in range(self.MAX_TRIES):
                cand = rng.uniform(lo, hi)[None, :]
                if not any(region.closure_contains(cand)[0] for region in self.frame.class_regions):
                    break
            out[i] = cand[0]
        return out

    def filler_box(self):
        lo, hi = self._outer
        return float(lo.min()), float(hi.max())


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@dataclass
class _Outcome:
    checked: int = 0
    failures: list[dict[str, Any]] = field(default_factory=list)


def _jitter(word: Word, amplitude: float, rng: np.random.Generator) -> Word:
    return word + rng.uniform(-amplitude, amplitude, size=word.shape)


def _holds(mu: EmpiricalMeasure, nu: EmpiricalMeasure, bound: float) -> bool:
    return math.isinf(bound) or lp_within(mu, nu, bound + BOUND_TOL)


def _failure(mu: EmpiricalMeasure, nu: EmpiricalMeasure, bound: float, **extra: Any) -> dict[str, Any]:
    return {"lhs": lp_distance(mu, nu, method="search"), "bound": bound, **extra}


def _template_record(t: StitchTemplate) -> dict[str, Any]:
    lines, table = t.to_records()
    return {"template": lines, "words": table}


def _members(t: StitchTemplate, geo: _Geometry, members: int, rng: np.random.Generator):
    lo, hi = geo.filler_box()
    for _ in range(members):
        yield template_member(t, random_fillers(t, rng, lo, hi))


def _check_slicing(rng, geo, members) -> _Outcome | None:
    n = int(rng.integers(1, 40))
    u = geo.ordered_word(rng, n)
    sliced = slice_word(u, geo.frame)
    if sliced.is_empty():
        return None
    lhs = tv_distance(empirical_measure(u), empirical_of_list(sliced.subwords))
    bound = slicing_bound(n, sliced.total_length)
    if lhs <= bound + BOUND_TOL:
        return _Outcome(1)
    return _Outcome(1, [{"lhs": lhs, "bound": bound, "word": u.tolist()}])


def _check_slicing_list(rng, geo, members) -> _Outcome | None:
    n, k = int(rng.integers(1, 25)), int(rng.integers(1, 6))
    us = [geo.ordered_word(rng, n) for _ in range(k)]
    sliced = [slice_word(u, geo.frame) for u in us]
    if any(s.is_empty() for s in sliced):
        return None
    v = [w for s in sliced for w in s.subwords]
    mu, nu = empirical_of_list(us), empirical_of_list(v)
    bound = slicing_list_bound(n, [s.total_length for s in sliced])
    if _holds(mu, nu, bound):
        return _Outcome(1)
    return _Outcome(1, [_failure(mu, nu, bound, words=[u.tolist() for u in us])])


def _check_stitching(rng, geo, members) -> _Outcome | None:
    k = int(rng.integers(1, 2 * geo.r + 2))
    vs = geo.stitchable_list(rng, k)
    total = sum(v.shape[0] for v in vs)
    if total == 0:
        return None
    T = total + k * geo.frame.tau_K + int(rng.integers(0, 3 * total + 6))
    t = stitch_template(vs, T, geo.frame)
    nu = empirical_of_list(vs)
    bound = stitching_bound(total, T)
    out = _Outcome()
    for w in _members(t, geo, members, rng):
        out.checked += 1
        mu = empirical_measure(w)
        if not _holds(mu, nu, bound):
            out.failures.append(_failure(mu, nu, bound, member=w.tolist(), **_template_record(t)))
    return out


def _check_coupling(rng, geo, members) -> _Outcome | None:
    N, n = int(rng.integers(1, 5)), int(rng.integers(2, 20))
    us = [geo.ordered_word(rng, n) for _ in range(N)]
    lengths = [slice_word(u, geo.frame).total_length for u in us]
    if min(lengths) == 0:
        return None
    T = N * n + N * geo.r * geo.frame.tau_K + int(rng.integers(0, 2 * N * n + 1))
    t = couple(us, T, geo.frame)
    nu = empirical_of_list(us)
    bound = coupling_bound(n, lengths, T)
    out = _Outcome()
    for w in _members(t, geo, members, rng):
        out.checked += 1
        mu = empirical_measure(w)
        if not _holds(mu, nu, bound):
            out.failures.append(_failure(mu, nu, bound, member=w.tolist(), **_template_record(t)))
    return out


def _check_fine_coupling(rng, geo, members) -> _Outcome | None:
    frame = geo.frame
    r, tau_K = frame.r, frame.tau_K
    eps, delta = float(rng.uniform(0.02, 0.2)), float(rng.uniform(0.05, 0.2))
    n = max(int(math.ceil(tau_K / delta)), int(math.ceil(1.0 / (1.0 - eps - delta))), int(rng.integers(5, 20)))
    T = int(math.ceil((n + r * tau_K) / delta)) + int(rng.integers(0, n + 1))
    if fine_coupling_violations(n, T, eps, delta, r, tau_K):
        return None
    N = coupling_count(n, T, r, tau_K)
    bases = []
    for _ in range(2):
        classes = sorted(rng.choice(np.arange(1, r + 1), size=int(rng.integers(1, r + 1)), replace=False).tolist())
        blocks = geo.measure_blocks(rng, classes, n, eps, delta)
        bases.append(np.vstack([blocks[j] for j in classes]))
    targets = [empirical_measure(b) for b in bases]
    mu = mixture(targets, [0.5, 0.5])
    us = []
    for i in range(N):
        u = _jitter(bases[i % 2], JITTER_SHARE * delta, rng)
        if not lp_within(empirical_measure(u), targets[i % 2], delta):
            return None
        us.append(u)
    t = couple(us, T, frame)
    bound = fine_coupling_bound(eps, delta, r)
    out = _Outcome()
    for w in _members(t, geo, members, rng):
        out.checked += 1
        lw = empirical_measure(w)
        if not _holds(lw, mu, bound):
            out.failures.append(_failure(lw, mu, bound, eps=eps, delta=delta, n=n, T=T, **_template_record(t)))
    return out


def _random_partition(rng: np.random.Generator, r: int, both_sides: bool) -> dict[int, int]:
    while True:
        sides = rng.integers(1, 3, size=r)
        if not both_sides or len(set(sides.tolist())) == 2:
            return {j: int(s) for j, s in enumerate(sides.tolist(), start=1)}


def _side_mask(frame: CompactFrame, partition: dict[int, int], side: int) -> Callable[[np.ndarray], np.ndarray]:
    regions = [frame.class_regions[j - 1] for j, g in partition.items() if g == side]

    def inside(points: np.ndarray) -> np.ndarray:
        hit = np.zeros(points.shape[0], dtype=bool)
        for region in regions:
            hit |= region.contains(points)
        return hit

    return inside


def _check_decoupling(rng, geo, members) -> _Outcome | None:
    frame = geo.frame
    n = int(rng.integers(2, 40))
    u = geo.ordered_word(rng, n)
    partition = _random_partition(rng, frame.r, both_sides=False)
    counts = frame.side_counts(u, partition)
    total = counts[1] + counts[2]
    if total == 0:
        return None
    lambdas = (counts[1] / total, counts[2] / total)
    eps = float(rng.uniform(0.01, 0.2))
    templates = decouple(u, frame, partition, eps, lambdas)
    lu = empirical_measure(u)
    out = _Outcome()
    for side, t in zip((1, 2), templates):
        if counts[side] == 0 or t.fixed_length == 0:
            continue
        target = restrict(lu, _side_mask(frame, partition, side))
        bound = decoupling_bound(t.fixed_length, counts[side], t.total_length)
        for w in _members(t, geo, members, rng):
            out.checked += 1
            lw = empirical_measure(w)
            if not _holds(lw, target, bound):
                out.failures.append(_failure(lw, target, bound, side=side, word=u.tolist(), **_template_record(t)))
    return out if out.checked else None


def _check_fine_decoupling(rng, geo, members) -> _Outcome | None:
    frame = geo.frame
    r, tau_K = frame.r, frame.tau_K
    if r < 2:
        return None
    partition = _random_partition(rng, r, both_sides=True)
    side_classes = {g: [j for j in range(1, r + 1) if partition[j] == g] for g in (1, 2)}
    lam1 = float(rng.uniform(0.3, 0.7))
    eps = float(rng.uniform(0.03, min(0.2, 0.45 * min(lam1, 1.0 - lam1))))
    n = max(int(math.ceil((1 + r * tau_K) / eps)), int(rng.integers(10, 40)))
    m1 = int(round(lam1 * n))
    m1 = min(max(m1, len(side_classes[1])), n - len(side_classes[2]))
    lambdas = (m1 / n, (n - m1) / n)
    if fine_decoupling_violations(n, eps, lambdas, r, tau_K):
        return None
    delta = float(rng.uniform(0.2, 0.99)) * min(0.2, 0.5 * (min(lambdas) - eps))
    blocks = {
        **geo.measure_blocks(rng, side_classes[1], m1, eps, delta),
        **geo.measure_blocks(rng, side_classes[2], n - m1, eps, delta),
    }
    targets = {g: empirical_measure(np.vstack([blocks[j] for j in side_classes[g]])) for g in (1, 2)}
    mu = mixture([targets[1], targets[2]], lambdas)
    u = np.vstack([_jitter(blocks[j], JITTER_SHARE * delta, rng) for j in range(1, r + 1)])
    if not lp_within(empirical_measure(u), mu, delta * (1.0 - 1e-9)):
        return None
    try:
        templates = decouple(u, frame, partition, eps, lambdas)
    except PreconditionError:
        return None
    out = _Outcome()
    for side, t in zip((1, 2), templates):
        bound = fine_decoupling_bound(eps, delta, lambdas[side - 1], lambdas[2 - side])
        for w in _members(t, geo, members, rng):
            out.checked += 1
            lw = empirical_measure(w)
            if not _holds(lw, targets[side], bound):
                out.failures.append(
                    _failure(lw, targets[side], bound, side=side, eps=eps, delta=delta, **_template_record(t))
                )
    return out


# ---- distance lemmas (1-D, independent of the frame) ----


def _check_lemma_ball(rng, geo, members) -> _Outcome | None:
    k = int(rng.integers(1, 4))
    lows = np.sort(rng.uniform(0.0, 1.0, size=k))
    widths = rng.uniform(0.05, 0.4, size=k)
    density = PiecewiseDensity.from_boxes(
        [([lo], [lo + w]) for lo, w in zip(lows, widths)], rng.dirichlet(np.ones(k))
    )
    mu = density.proxy(16)
    a = float(rng.uniform(-0.2, 1.0))
    b = a + float(rng.uniform(0.05, 0.8))

    def inside(points: np.ndarray) -> np.ndarray:
        return (points[:, 0] > a) & (points[:, 0] < b)

    if not inside(mu.atoms).any():
        return None
    delta, kappa = ball_support_radius(mu, inside, lambda p: np.minimum(p[:, 0] - a, b - p[:, 0]))
    out = _Outcome()
    for _ in range(members):
        shift = float(rng.uniform(0.0, 0.5)) * delta
        moved = float(rng.uniform(0.0, 0.45)) * delta
        atoms = np.vstack([_jitter(mu.atoms, shift, rng), rng.uniform(-1.0, 2.0, size=(1, 1))])
        weights = np.concatenate([(1.0 - moved) * mu.weights, [moved]])
        nu = EmpiricalMeasure.from_points(atoms, weights / weights.sum())
        if not lp_within(mu, nu, delta):
            continue
        out.checked += 1
        mass_o = float(nu.weights[inside(nu.atoms)].sum())
        if mass_o < kappa - BOUND_TOL:
            out.failures.append({"lhs": mass_o, "bound": kappa, "delta": delta, "interval": [a, b]})
    return out if out.checked else None


def _random_measure(rng: np.random.Generator, dim: int) -> EmpiricalMeasure:
    m = int(rng.integers(1, 6))
    return EmpiricalMeasure.from_points(rng.uniform(0.0, 1.0, size=(m, dim)), rng.dirichlet(np.ones(m)))


def _check_lemma_mixture(rng, geo, members) -> _Outcome | None:
    dim, k = int(rng.integers(1, 3)), int(rng.integers(1, 5))
    mus, nus = [], []
    for _ in range(k):
        mu = _random_measure(rng, dim)
        shift = float(rng.uniform(0.0, 0.2))
        w = mu.weights * rng.uniform(0.8, 1.2, size=mu.size)
        mus.append(mu)
        nus.append(EmpiricalMeasure.from_points(_jitter(mu.atoms, shift, rng), w / w.sum()))
    delta = max(lp_distance(m, v) for m, v in zip(mus, nus)) + 1e-9
    out = _Outcome()
    for _ in range(members):
        lam, gam = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        mu, nu = mixture(mus, lam), mixture(nus, gam)
        bound = delta + float(np.abs(lam - gam).sum())
        out.checked += 1
        if not _holds(mu, nu, bound):
            out.failures.append(_failure(mu, nu, bound, lambdas=lam.tolist(), gammas=gam.tolist()))
    return out


def _check_lemma_restriction(rng, geo, members) -> _Outcome | None:
    frame = synthetic_frame(2, 1, rng)
    local = _SyntheticGeometry(frame)
    partition = {1: 1, 2: 2}
    lam1 = float(rng.uniform(0.3, 0.7))
    lambdas = (lam1, 1.0 - lam1)
    eps = float(rng.uniform(0.02, 0.45 * min(lambdas)))
    delta = 0.99 * float(rng.uniform(0.1, 1.0)) * min(0.2, 0.5 * (min(lambdas) - eps))
    targets = {}
    for side in (1, 2):
        size = int(rng.integers(3, 15))
        targets[side] = empirical_measure(local.measure_blocks(rng, [side], size, eps, delta)[side])
    mu = mixture([targets[1], targets[2]], lambdas)
    masks = {g: _side_mask(frame, partition, g) for g in (1, 2)}
    out = _Outcome()
    for _ in range(members):
        moved = float(rng.uniform(0.0, 0.45)) * delta
        atoms = np.vstack([_jitter(mu.atoms, JITTER_SHARE * delta, rng), local.junk_letters(rng, 1)])
        weights = np.concatenate([(1.0 - moved) * mu.weights, [moved]])
        nu = EmpiricalMeasure.from_points(atoms, weights / weights.sum())
        if not lp_within(mu, nu, delta * (1.0 - 1e-9)):
            continue
        alphas = {g: float(nu.weights[masks[g](nu.atoms)].sum()) for g in (1, 2)}
        if any(alphas[g] < lambdas[g - 1] - eps for g in (1, 2)):
            continue
        for side in (1, 2):
            lam, other = lambdas[side - 1], lambdas[2 - side]
            bound = (eps / lam) * (1.0 + other) + delta * (1.0 + 1.0 / lam)
            part = restrict(nu, masks[side])
            out.checked += 1
            if not _holds(targets[side], part, bound):
                out.failures.append(_failure(targets[side], part, bound, side=side, eps=eps, delta=delta))
    return out if out.checked else None


_CHECKS: dict[str, Callable[..., _Outcome | None]] = {
    "slicing": _check_slicing,
    "slicing_list": _check_slicing_list,
    "stitching": _check_stitching,
    "coupling": _check_coupling,
    "fine_coupling": _check_fine_coupling,
    "decoupling": _check_decoupling,
    "fine_decoupling": _check_fine_decoupling,
    "lemma_ball": _check_lemma_ball,
    "lemma_mixture": _check_lemma_mixture,
    "lemma_restriction": _check_lemma_restriction,
}


def geographic_sweep(
    kind: str,
    instances: int,
    seed: int,
    members: int = 3,
    dump_limit: int = 20,
    frame: CompactFrame | None = None,
) -> SweepReport:
    """Check one geographic inequality on `instances` random class-ordered instances.

    Without a frame every instance draws a fresh synthetic 1-D frame with
    1..3 classes (2..4 for the fine decoupling bound) and tau_K in {1, 2}.
    """
    check = _CHECKS.get(kind)
    if check is None:
        raise RuntimeError(f"Unknown map check: {kind}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, MAP_KINDS.index(kind)]))
    report = SweepReport(kind=kind, instances=instances)
    for i in range(instances):
        if frame is not None:
            geo: _Geometry = _FrameGeometry(frame)
        else:
            low = 2 if kind == "fine_decoupling" else 1
            geo = _SyntheticGeometry(synthetic_frame(int(rng.integers(low, low + 3)), int(rng.integers(1, 3)), rng))
        outcome = check(rng, geo, members)
        if outcome is None:
            report.skipped += 1
            continue
        report.checked += outcome.checked
        report.violations += len(outcome.failures)
        for failure in outcome.failures:
            if len(report.counterexamples) < dump_limit:
                report.counterexamples.append({"instance": i, **failure})
    if report.violations:
        logger.warning("map check %s: %s violations over %s checks", kind, report.violations, report.checked)
    else:
        logger.info("map check %s: %s checks, %s skipped instances", kind, report.checked, report.skipped)
    return report
