from __future__ import annotations

from typing import Any, Union

import numpy as np

from ldpchain.errors import PreconditionError
from ldpchain.measures import Word, as_word


class XInit:
    """The extra initial state: p(x_init, .) = beta."""

    _instance: XInit | None = None

    def __new__(cls) -> XInit:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "x_init"

    def __reduce__(self):
        return (XInit, ())


X_INIT = XInit()

State = Union[np.ndarray, XInit]


class KernelModel:
    """Markov kernel with a density on R^d, batch samplers and the initial law beta.

    Subclasses implement the four batch hooks; everything else is built on them.
    """

    name: str = "kernel"
    dim: int = 1
    # M with rho <= M (beta included); None when the density is unbounded.
    density_bound: float | None = None

    def initial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def initial_density(self, ys: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Elementwise rho(xs[i], ys[i])."""
        raise NotImplementedError

    def density_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """rho(xs[i], ys[j]) as an (len(xs), len(ys)) array."""
        s, m = xs.shape[0], ys.shape[0]
        flat = self.transition_density(np.repeat(xs, m, axis=0), np.tile(ys, (s, 1)))
        return flat.reshape(s, m)

    def params(self) -> dict[str, Any]:
        return {}

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "dim": self.dim, "density_bound": self.density_bound, **self.params()}

    # ---- single-state helpers ----

    def densities(self, x: State, ys: np.ndarray) -> np.ndarray:
        ys = as_word(ys, dim=self.dim)
        if isinstance(x, XInit):
            return self.initial_density(ys)
        xs = np.broadcast_to(_point(x, self.dim), ys.shape)
        return self.transition_density(np.ascontiguousarray(xs), ys)

    def density(self, x: State, y) -> float:
        return float(self.densities(x, _point(y, self.dim)[None, :])[0])

    def sample(self, x: State, rng: np.random.Generator) -> np.ndarray:
        if isinstance(x, XInit):
            return self.initial(rng, 1)[0]
        return self.step(_point(x, self.dim)[None, :], rng)[0]


def sample_paths(model: KernelModel, x0: State | np.ndarray, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `size` independent words of length n from p(x0, .); shape (size, n, d).

    x0 may be x_init, one point, or one starting point per path (size, d).
    """
    if n < 0:
        raise ValueError("path length must be >= 0")
    out = np.empty((size, n, model.dim))
    if n == 0:
        return out
    if isinstance(x0, XInit):
        cur = model.initial(rng, size)
    else:
        starts = np.asarray(x0, dtype=float)
        if starts.ndim <= 1:
            starts = np.broadcast_to(_point(starts, model.dim), (size, model.dim))
        if starts.shape != (size, model.dim):
            raise ValueError(f"dimension mismatch: starting states of shape {starts.shape}")
        cur = model.step(np.ascontiguousarray(starts), rng)
    out[:, 0] = cur
    for t in range(1, n):
        cur = model.step(cur, rng)
        out[:, t] = cur
    return out


def sample_path(model: KernelModel, x0: State, n: int, rng: np.random.Generator) -> Word:
    return sample_paths(model, x0, n, 1, rng)[0]


def word_density(model: KernelModel, x: State, u: Word) -> float:
    """rho(x, u_1) * prod rho(u_i, u_{i+1}); 1 for the empty word."""
    word = as_word(u, dim=model.dim)
    if word.shape[0] == 0:
        return 1.0
    value = model.densities(x, word[:1])[0]
    if word.shape[0] > 1:
        value *= float(np.prod(model.transition_density(word[:-1], word[1:])))
    return float(value)


def iterated_profile(
    model: KernelModel,
    x: State,
    ys: np.ndarray,
    k_max: int,
    samples: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Estimates of rho^k(x, y) for k = 1..k_max and every y; (k_max, m) arrays.

    Row 0 is exact. Row k-1 averages rho(xi_{k-1}, y) over paths xi of length
    k-1 from x; all rows share the same paths.
    """
    if k_max < 1 or samples < 1:
        raise ValueError("k_max and samples must be >= 1")
    ys = as_word(ys, dim=model.dim)
    est = np.zeros((k_max, ys.shape[0]))
    err = np.zeros((k_max, ys.shape[0]))
    est[0] = model.densities(x, ys)
    if k_max == 1:
        return est, err
    paths = sample_paths(model, x, k_max - 1, samples, rng)
    for k in range(2, k_max + 1):
        values = model.density_matrix(paths[:, k - 2, :], ys)
        est[k - 1] = values.mean(axis=0)
        if samples > 1:
            err[k - 1] = values.std(axis=0, ddof=1) / np.sqrt(samples)
    return est, err


def iterated_density(
    model: KernelModel, x: State, y, k: int, samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    est, err = iterated_profile(model, x, _point(y, model.dim)[None, :], k, samples, rng)
    return float(est[k - 1, 0]), float(err[k - 1, 0])


def tilde_density(
    model: KernelModel,
    x: State,
    y,
    k_max: int,
    samples_per_k: int,
    rng: np.random.Generator,
    z: float = 3.0,
) -> tuple[float, float]:
    """Truncated sum of 2^-k rho^k(x, y) and an error bound (z standard errors + tail)."""
    if model.density_bound is None:
        raise PreconditionError(f"tilde density of {model.name!r} needs a density bound M")
    est, err = iterated_profile(model, x, _point(y, model.dim)[None, :], k_max, samples_per_k, rng)
    w = 0.5 ** np.arange(1, k_max + 1)
    value = float(w @ est[:, 0])
    # Rows share their paths, so add standard errors instead of variances.
    stat = z * float(w @ err[:, 0])
    tail = 0.5**k_max * model.density_bound
    return value, stat + tail


def _point(y, dim: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    if p.shape[0] != dim:
        raise ValueError(f"dimension mismatch: point has d={p.shape[0]}, model has d={dim}")
    return p
