from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ldpchain.errors import PreconditionError
from ldpchain.kernels.base import X_INIT, KernelModel, sample_path
from ldpchain.measures import Word, as_word, empty_word, h_gauge
from ldpchain.models import CompactFrame, SlicedWord, StitchTemplate


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------


def slice_word(u: Word, frame: CompactFrame) -> SlicedWord:
    """F_n(u): per class j, the subword from the first to the last letter of u in K_j."""
    word = as_word(u, dim=frame.dim)
    if word.shape[0] == 0:
        raise ValueError("slicing needs a non-empty word")
    labels = frame.class_of(word)
    subwords: list[Word] = []
    positions: list[tuple[int, int] | None] = []
    for j in range(1, frame.r + 1):
        hits = np.flatnonzero(labels == j)
        if hits.size == 0:
            subwords.append(empty_word(frame.dim))
            positions.append(None)
            continue
        start, end = int(hits[0]), int(hits[-1]) + 1
        subwords.append(word[start:end])
        positions.append((start, end))
    return SlicedWord(subwords=tuple(subwords), source_length=word.shape[0], positions=tuple(positions), frame=frame)


def stitchable(vs: Sequence[Word], frame: CompactFrame) -> tuple[bool, list[int]]:
    """Smallest nondecreasing class assignment placing both ends of each non-empty word in its K_j."""
    assignment: list[int] = []
    current = 1
    for v in vs:
        word = as_word(v, dim=frame.dim)
        if word.shape[0] == 0:
            assignment.append(current)
            continue
        first, last = frame.class_of(word[[0, -1]])
        if first == 0 or first != last or first < current:
            return False, []
        current = int(first)
        assignment.append(current)
    return True, assignment


def stitch_template(vs: Sequence[Word], T: int, frame: CompactFrame) -> StitchTemplate:
    """G_{k,T}(v): free segments of tau(x, v_1) letters before every non-empty word."""
    words = [as_word(v, dim=frame.dim) for v in vs]
    ok, _ = stitchable(words, frame)
    if not ok:
        raise PreconditionError("word list is not stitchable")
    k = len(words)
    total = sum(w.shape[0] for w in words)
    if total + k * frame.tau_K > T:
        raise PreconditionError(f"|v|+k*tau_K <= T violated: {total}+{k}*{frame.tau_K} > {T}")
    taus: list[int] = []
    prev = X_INIT
    for w in words:
        if w.shape[0] == 0:
            taus.append(0)
            continue
        taus.append(int(frame.tau(prev, w[0])))
        prev = w[-1]
    taus.append(T - total - sum(taus))
    return StitchTemplate(free_lengths=tuple(taus), fixed=tuple(words), dim=frame.dim)


def reorder(sliced: Sequence[SlicedWord]) -> list[Word]:
    """Column-major reading of the N x r subword matrix."""
    if not sliced:
        return []
    frame = sliced[0].frame
    if any(s.frame is not frame for s in sliced):
        raise ValueError("sliced words come from different frames")
    return [s.subwords[j] for j in range(frame.r) for s in sliced]


def couple(us: Sequence[Word], T: int, frame: CompactFrame) -> StitchTemplate:
    """Psi_{N,n,T}(u) = G_{Nr,T}(sigma(F_n(u^1), ..., F_n(u^N)))."""
    words = [as_word(u, dim=frame.dim) for u in us]
    if not words:
        raise ValueError("coupling needs at least one word")
    n = words[0].shape[0]
    if any(w.shape[0] != n for w in words):
        raise ValueError("coupled words must share one length n")
    N = len(words)
    if T < N * n + N * frame.r * frame.tau_K:
        raise PreconditionError(f"T >= N*n + N*r*tau_K violated: {T} < {N}*{n} + {N}*{frame.r}*{frame.tau_K}")
    return stitch_template(reorder([slice_word(w, frame) for w in words]), T, frame)


def decoupling_lengths(n: int, frame: CompactFrame, partition: dict[int, int], eps: float, lambdas) -> tuple[int, int]:
    """T_gamma = ceil(n (lambda_gamma + eps)) + r_gamma tau_K."""
    _check_partition(partition, frame)
    out = []
    for side in (1, 2):
        r_side = sum(1 for g in partition.values() if g == side)
        out.append(int(math.ceil(n * (lambdas[side - 1] + eps))) + r_side * frame.tau_K)
    return out[0], out[1]


def decouple(
    u: Word,
    frame: CompactFrame,
    partition: dict[int, int],
    eps: float,
    lambdas: Sequence[float],
) -> tuple[StitchTemplate, StitchTemplate]:
    """Phi_n(u): the subwords of F_n(u) routed to two sides and stitched at T_1, T_2."""
    word = as_word(u, dim=frame.dim)
    n = word.shape[0]
    T1, T2 = decoupling_lengths(n, frame, partition, eps, lambdas)
    counts = frame.side_counts(word, partition)
    for side in (1, 2):
        cap = (lambdas[side - 1] + eps) * n
        if counts[side] > cap:
            raise PreconditionError(f"|u|_{side} <= (lambda_{side}+eps)*n violated: {counts[side]} > {cap:g}")
    sliced = slice_word(word, frame)
    routed = {1: [], 2: []}
    for j, sub in enumerate(sliced.subwords, start=1):
        routed[partition[j]].append(sub)
    return stitch_template(routed[1], T1, frame), stitch_template(routed[2], T2, frame)


def template_member(t: StitchTemplate, fillers: Sequence[Word]) -> Word:
    if len(fillers) != len(t.free_lengths):
        raise ValueError(f"template has {len(t.free_lengths)} free segments, got {len(fillers)} fillers")
    parts: list[Word] = []
    for (kind, value), filler in zip(t.segments[::2], fillers):
        parts.append(_filler(filler, value, t.dim))
    pieces: list[Word] = []
    for i, fixed in enumerate(t.fixed):
        pieces.extend([parts[i], fixed])
    pieces.append(parts[-1])
    return np.vstack(pieces) if pieces else empty_word(t.dim)


def template_contains(t: StitchTemplate, w: Word) -> bool:
    try:
        word = as_word(w, dim=t.dim)
    except ValueError:
        return False
    if word.shape[0] != t.total_length:
        return False
    pos = 0
    for kind, value in t.segments:
        if kind == "free":
            pos += value
            continue
        length = value.shape[0]
        if not np.array_equal(word[pos : pos + length], value):
            return False
        pos += length
    return True


def random_fillers(t: StitchTemplate, rng: np.random.Generator, lo: float, hi: float) -> list[Word]:
    """Arbitrary fillers, uniform in the box [lo, hi]^d."""
    return [rng.uniform(lo, hi, size=(tau, t.dim)) for tau in t.free_lengths]


def kernel_fillers(t: StitchTemplate, model: KernelModel, rng: np.random.Generator) -> list[Word]:
    """Fillers drawn from the chain, each started after the preceding letter (x_init first)."""
    out: list[Word] = []
    prev = X_INIT
    for i, tau in enumerate(t.free_lengths):
        seg = sample_path(model, prev, tau, rng)
        out.append(seg)
        if seg.shape[0]:
            prev = seg[-1]
        if i < len(t.fixed) and t.fixed[i].shape[0]:
            prev = t.fixed[i][-1]
    return out


def _filler(filler: Word, length: int, dim: int) -> Word:
    word = as_word(filler, dim=dim) if np.size(filler) else empty_word(dim)
    if word.shape[0] != length:
        raise ValueError(f"filler of length {word.shape[0]} for a free segment of length {length}")
    return word


def _check_partition(partition: dict[int, int], frame: CompactFrame) -> None:
    if sorted(partition) != list(range(1, frame.r + 1)):
        raise ValueError(f"partition must assign each class 1..{frame.r} to a side")
    if any(g not in (1, 2) for g in partition.values()):
        raise ValueError("partition sides must be 1 or 2")


# ---------------------------------------------------------------------------
# Geographic bounds (all in LP distance)
# ---------------------------------------------------------------------------


def _h(x: float) -> float:
    return h_gauge(x) if x > 0 else math.inf


def slicing_bound(n: int, sliced_length: int) -> float:
    return _h(sliced_length / n)


def slicing_list_bound(n: int, sliced_lengths: Sequence[int]) -> float:
    k, total = len(sliced_lengths), sum(sliced_lengths)
    if total == 0:
        return math.inf
    return sum(_h(k * w / total) + _h(w / n) for w in sliced_lengths) / k


def stitching_bound(fixed_length: int, T: int) -> float:
    return 2.0 * _h(fixed_length / T)


def coupling_bound(n: int, sliced_lengths: Sequence[int], T: int) -> float:
    return slicing_list_bound(n, sliced_lengths) + stitching_bound(sum(sliced_lengths), T)


def decoupling_bound(routed_length: int, side_count: int, T_side: int) -> float:
    if side_count == 0:
        return math.inf
    return _h(routed_length / side_count) + stitching_bound(routed_length, T_side)


def fine_coupling_bound(eps: float, delta: float, r: int) -> float:
    """f(eps, delta) = 4 h((1-eps-delta)(1-delta)/(1+r delta)) + 3 delta."""
    return 4.0 * _h((1.0 - eps - delta) * (1.0 - delta) / (1.0 + r * delta)) + 3.0 * delta


def fine_decoupling_bound(eps: float, delta: float, lam: float, lam_other: float) -> float:
    if not lam > eps:
        return math.inf
    return (
        _h(lam / (lam + eps) - (eps + delta) / (lam - eps))
        + 2.0 * _h((lam - eps - delta) / (lam + 2.0 * eps))
        + (eps / lam) * (1.0 + lam_other)
        + delta * (1.0 + 1.0 / lam)
    )


def fine_coupling_violations(n: int, T: int, eps: float, delta: float, r: int, tau_K: int) -> list[str]:
    """Side conditions under which the fine coupling bound holds; empty when all hold."""
    out = []
    if tau_K / n > delta:
        out.append(f"tau_K/n <= delta ({tau_K}/{n} > {delta})")
    if n * (1.0 - eps - delta) < 1.0:
        out.append(f"n(1-eps-delta) >= 1 ({n}*(1-{eps}-{delta}) < 1)")
    if n + r * tau_K > T * delta:
        out.append(f"n + r*tau_K <= T*delta ({n}+{r}*{tau_K} > {T}*{delta})")
    return out


def coupling_count(n: int, T: int, r: int, tau_K: int) -> int:
    """N = floor(T / (n + r tau_K))."""
    return T // (n + r * tau_K)


def fine_decoupling_violations(n: int, eps: float, lambdas: Sequence[float], r: int, tau_K: int) -> list[str]:
    out = []
    if n * eps < 1 + r * tau_K:
        out.append(f"n*eps >= 1 + r*tau_K ({n}*{eps} < 1+{r}*{tau_K})")
    for side, lam in enumerate(lambdas, start=1):
        if not 0 < eps < lam / 2:
            out.append(f"0 < eps < lambda_{side}/2 ({eps} vs {lam})")
    if abs(sum(lambdas) - 1.0) > 1e-12:
        out.append("lambda_1 + lambda_2 = 1")
    return out


def log_coupling_constant(c_K: float, tau_K: int, r: int, n: int, N: int = 1) -> float:
    """log of (c_K^r (tau_K+1)^r (n+1)^(2r+1))^N."""
    return N * (r * math.log(c_K) + r * math.log(tau_K + 1) + (2 * r + 1) * math.log(n + 1))
