from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate

from ldpchain.config import settings
from ldpchain.errors import PreconditionError
from ldpchain.kernels.base import KernelModel
from ldpchain.kernels.flow import lotka_volterra_field, rk4, steps_for

logger = logging.getLogger("ldpchain.zoo")

# f - x lies in (-1, 1) exactly on (0, 1) and (2, 3), and f - x <= -1 on [1, 2],
# so the perturbed system has two classes with 2 ⤳ 1.
TWO_CLASS_KNOTS: tuple[tuple[float, float], ...] = (
    (-1.0, -2.5),
    (-0.5, -2.0),
    (0.0, -1.0),
    (0.5, 0.0),
    (1.0, 0.0),
    (1.5, 0.0),
    (2.0, 1.0),
    (2.5, 2.0),
    (3.0, 2.0),
    (3.5, 2.0),
    (4.0, 2.5),
)


# ==== Maps f for the perturbed system ====


@dataclass(frozen=True, eq=False)
class PiecewiseLinearMap:
    """Continuous nondecreasing f through the knots, extended linearly past both ends."""

    xs: np.ndarray
    ys: np.ndarray
    kind: str = "piecewise_linear"

    def __post_init__(self) -> None:
        if self.xs.shape != self.ys.shape or self.xs.shape[0] < 2:
            raise ValueError("a piecewise linear map needs at least two knots")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        if np.any(np.diff(self.ys) < 0):
            raise PreconditionError("f must be nondecreasing")

    @classmethod
    def from_knots(cls, knots, kind: str = "piecewise_linear") -> PiecewiseLinearMap:
        arr = np.asarray(knots, dtype=float)
        return cls(xs=arr[:, 0].copy(), ys=arr[:, 1].copy(), kind=kind)

    @classmethod
    def identity(cls) -> PiecewiseLinearMap:
        return cls.from_knots([(0.0, 0.0), (1.0, 1.0)], kind="identity")

    @classmethod
    def shift(cls, s: float) -> PiecewiseLinearMap:
        return cls.from_knots([(0.0, s), (1.0, 1.0 + s)], kind="shift")

    @classmethod
    def two_class(cls) -> PiecewiseLinearMap:
        return cls.from_knots(TWO_CLASS_KNOTS, kind="two_class")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.xs, self.ys)
        lo_slope = (self.ys[1] - self.ys[0]) / (self.xs[1] - self.xs[0])
        hi_slope = (self.ys[-1] - self.ys[-2]) / (self.xs[-1] - self.xs[-2])
        out = np.where(x < self.xs[0], self.ys[0] + lo_slope * (x - self.xs[0]), out)
        out = np.where(x > self.xs[-1], self.ys[-1] + hi_slope * (x - self.xs[-1]), out)
        return out

    def ratchet_intervals(self, lo: float, hi: float, resolution: float = 1e-3) -> list[tuple[float, float, str]]:
        """Maximal scan intervals where f - x <= -1 ("left") or >= 1 ("right")."""
        grid = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / resolution)) + 1))
        gap = self(grid) - grid
        side = np.where(gap <= -1.0, 1, np.where(gap >= 1.0, 2, 0))
        out: list[tuple[float, float, str]] = []
        start = 0
        for i in range(1, len(grid) + 1):
            if i == len(grid) or side[i] != side[start]:
                if side[start]:
                    out.append((float(grid[start]), float(grid[i - 1]), "left" if side[start] == 1 else "right"))
                start = i
        return out

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "knots": [[float(a), float(b)] for a, b in zip(self.xs, self.ys)]}


def build_map(spec) -> PiecewiseLinearMap:
    if spec.kind == "identity":
        return PiecewiseLinearMap.identity()
    if spec.kind == "shift":
        return PiecewiseLinearMap.shift(spec.shift)
    if spec.kind == "piecewise_linear":
        return PiecewiseLinearMap.from_knots(spec.knots)
    if spec.kind == "two_class":
        return PiecewiseLinearMap.two_class()
    raise RuntimeError(f"Unknown map kind: {spec.kind}")


# ==== Noise shapes ====


def _epanechnikov_pdf(z: np.ndarray) -> np.ndarray:
    return np.where(np.abs(z) < 1.0, 0.75 * (1.0 - z * z), 0.0)


def _epanechnikov_ppf(u: np.ndarray) -> np.ndarray:
    # Root in [-1, 1] of z^3 - 3z + 4u - 2 = 0.
    return 2.0 * np.sin(np.arcsin(2.0 * u - 1.0) / 3.0)


def _uniform_pdf(z: np.ndarray) -> np.ndarray:
    return np.where(np.abs(z) < 1.0, 0.5, 0.0)


def _uniform_ppf(u: np.ndarray) -> np.ndarray:
    return 2.0 * u - 1.0


def _triangular_pdf(z: np.ndarray) -> np.ndarray:
    return np.where(np.abs(z) < 1.0, 1.0 - np.abs(z), 0.0)


def _triangular_ppf(u: np.ndarray) -> np.ndarray:
    return np.where(u < 0.5, -1.0 + np.sqrt(2.0 * u), 1.0 - np.sqrt(2.0 * (1.0 - u)))


def _positive_triangular_pdf(z: np.ndarray) -> np.ndarray:
    return np.where((z > 0.0) & (z < 1.0), 2.0 * (1.0 - z), 0.0)


def _positive_triangular_ppf(u: np.ndarray) -> np.ndarray:
    return 1.0 - np.sqrt(1.0 - u)


def _exponential_pdf(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0.0, np.exp(-np.maximum(z, 0.0)), 0.0)


def _exponential_ppf(u: np.ndarray) -> np.ndarray:
    return -np.log1p(-u)


@dataclass(frozen=True)
class NoiseShape:
    """Noise density with exact inverse-CDF sampler; pdf/ppf must be module-level (picklable)."""

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]
    bound: float

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.ppf(rng.random(shape))

    def check_symmetric_support(self, probes: int = 601) -> None:
        """Support must be exactly (-1, 1) and the density bounded by `bound`."""
        z = np.linspace(-1.5, 1.5, probes)
        values = self.pdf(z)
        inside = np.abs(z) < 1.0
        if np.any(values[~inside] != 0.0):
            raise PreconditionError(f"phi {self.name!r} charges points outside (-1, 1)")
        if np.any(values[inside] <= 0.0):
            raise PreconditionError(f"phi {self.name!r} vanishes inside (-1, 1)")
        if np.any(values > self.bound):
            raise PreconditionError(f"phi {self.name!r} exceeds its declared bound {self.bound}")


PHI_SHAPES: dict[str, NoiseShape] = {
    "epanechnikov": NoiseShape("epanechnikov", _epanechnikov_pdf, _epanechnikov_ppf, 0.75),
    "uniform": NoiseShape("uniform", _uniform_pdf, _uniform_ppf, 0.5),
    "triangular": NoiseShape("triangular", _triangular_pdf, _triangular_ppf, 1.0),
}

G_SHAPES: dict[str, NoiseShape] = {
    "triangular": NoiseShape("triangular", _positive_triangular_pdf, _positive_triangular_ppf, 2.0),
    "exponential": NoiseShape("exponential", _exponential_pdf, _exponential_ppf, 1.0),
}


# ==== Simple models ====


class _UniformStart(KernelModel):
    """beta = uniform law on the open box (init_low, init_high)^d."""

    init_low: float = 0.0
    init_high: float = 1.0

    def _init_volume(self) -> float:
        return (self.init_high - self.init_low) ** self.dim

    def initial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.init_low, self.init_high, size=(size, self.dim))

    def initial_density(self, ys: np.ndarray) -> np.ndarray:
        inside = np.all((ys > self.init_low) & (ys < self.init_high), axis=1)
        return np.where(inside, 1.0 / self._init_volume(), 0.0)


class IidUniform(_UniformStart):
    """rho(x, y) = 1/(high-low)^d on (low, high)^d for every x; beta is the same law."""

    name = "iid"

    def __init__(self, low: float = 0.0, high: float = 1.0, dim: int = 1) -> None:
        if not high > low:
            raise ValueError("iid model needs low < high")
        self.low, self.high, self.dim = float(low), float(high), int(dim)
        self.init_low, self.init_high = self.low, self.high
        self.density_bound = 1.0 / self._init_volume()

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=xs.shape)

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.initial_density(ys)

    def params(self) -> dict[str, Any]:
        return {"low": self.low, "high": self.high}


class UniformStep(_UniformStart):
    """rho(x, y) = 1_(x+low, x+high)(y) / (high - low) on R."""

    name = "uniform_step"

    def __init__(self, low: float = 0.0, high: float = 1.0, init_low: float = 0.0, init_high: float = 1.0) -> None:
        if not high > low or not init_high > init_low:
            raise ValueError("uniform step needs low < high and init_low < init_high")
        self.low, self.high = float(low), float(high)
        self.init_low, self.init_high = float(init_low), float(init_high)
        self.dim = 1
        self.density_bound = max(1.0 / (self.high - self.low), 1.0 / (self.init_high - self.init_low))

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return xs + rng.uniform(self.low, self.high, size=xs.shape)

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        z = ys[:, 0] - xs[:, 0]
        return np.where((z > self.low) & (z < self.high), 1.0 / (self.high - self.low), 0.0)

    def params(self) -> dict[str, Any]:
        return {"low": self.low, "high": self.high, "init_low": self.init_low, "init_high": self.init_high}


class MonotoneWalk(_UniformStart):
    """X_{n+1} = X_n + E with E of density (1-alpha) z^-alpha on (0, 1); no classes."""

    name = "monotone_walk"

    def __init__(self, alpha: float, init_low: float = 0.0, init_high: float = 1.0) -> None:
        if not 0.0 < alpha < 1.0:
            raise PreconditionError(f"alpha must lie in (0, 1), got {alpha!r}")
        self.alpha = float(alpha)
        self.init_low, self.init_high = float(init_low), float(init_high)
        self.dim = 1
        # h is unbounded near 0.
        self.density_bound = None

    def increments(self, rng: np.random.Generator, shape) -> np.ndarray:
        u = rng.random(shape)
        # 1 - u lies in (0, 1], which keeps increments away from 0.
        return (1.0 - u) ** (1.0 / (1.0 - self.alpha))

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return xs + self.increments(rng, xs.shape)

    def h(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        inside = (z > 0.0) & (z < 1.0)
        safe = np.where(inside, z, 1.0)
        return np.where(inside, (1.0 - self.alpha) * safe ** (-self.alpha), 0.0)

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.h(ys[:, 0] - xs[:, 0])

    def mean_increment(self) -> float:
        return (1.0 - self.alpha) / (2.0 - self.alpha)

    def params(self) -> dict[str, Any]:
        return {"alpha": self.alpha, "init_low": self.init_low, "init_high": self.init_high}


class PerturbedSystem(_UniformStart):
    """X_{n+1} = f(X_n) + Z with Z of density phi supported on (-1, 1)."""

    name = "perturbed"

    def __init__(self, f: PiecewiseLinearMap, phi: NoiseShape, init_low: float = -1.0, init_high: float = 4.0) -> None:
        phi.check_symmetric_support()
        self.f, self.phi = f, phi
        self.init_low, self.init_high = float(init_low), float(init_high)
        self.dim = 1
        self.density_bound = max(phi.bound, 1.0 / (self.init_high - self.init_low))

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.f(xs) + self.phi.sample(rng, xs.shape)

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.phi.pdf(ys[:, 0] - self.f(xs[:, 0]))

    def density_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.phi.pdf(ys[None, :, 0] - self.f(xs[:, 0])[:, None])

    def params(self) -> dict[str, Any]:
        return {"f": self.f.describe(), "phi": self.phi.name, "init_low": self.init_low, "init_high": self.init_high}


# ==== Lotka-Volterra ====


@dataclass(frozen=True, eq=False)
class LotkaVolterraParams:
    d: int
    a: np.ndarray
    r: np.ndarray
    noise_density: NoiseShape = field(default_factory=lambda: G_SHAPES["triangular"])
    integrator_step: float = field(default_factory=lambda: settings.ldp_rk4_step)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.a.shape != (self.d, self.d) or self.r.shape != (self.d,):
            raise ValueError(f"dimension mismatch: a must be {self.d}x{self.d} and r of length {self.d}")
        if np.any(self.a < 0):
            raise PreconditionError("interaction matrix entries must be >= 0")
        if np.any(self.r <= 0):
            raise PreconditionError("growth rates must be > 0")
        if not self.integrator_step > 0:
            raise ValueError("integrator_step must be > 0")
        g = self.noise_density.pdf
        head, _ = integrate.quad(lambda z: float(g(np.array(z))), 0.0, 1.0, epsabs=1e-12)
        tail, _ = integrate.quad(lambda z: float(g(np.array(z))), 1.0, np.inf, epsabs=1e-12)
        if abs(head + tail - 1.0) > 1e-6:
            raise PreconditionError(f"noise density integrates to {head + tail!r} on (0, inf), not 1")


class LotkaVolterra(_UniformStart):
    """X_{n+1,i} = F_i(1, X_n^+) - Z_{n+1,i}; extinct coordinates stay <= 0."""

    name = "lotka_volterra"

    def __init__(self, p: LotkaVolterraParams, init_low: float = -0.5, init_high: float = 1.0) -> None:
        self.p = p
        self.dim = p.d
        self.init_low, self.init_high = float(init_low), float(init_high)
        self._steps = steps_for(1.0, p.integrator_step)
        self.density_bound = max(p.noise_density.bound**p.d, 1.0 / self._init_volume())

    def flow(self, xs: np.ndarray) -> np.ndarray:
        """F(1, x^+) for a batch of states, fixed-step RK4."""
        start = np.maximum(np.asarray(xs, dtype=float), 0.0)
        return rk4(0.0, 1.0, lotka_volterra_field, self._steps, start, args=(self.p.r, self.p.a))

    def step(self, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.flow(xs) - self.p.noise_density.sample(rng, xs.shape)

    def transition_density(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return np.prod(self.p.noise_density.pdf(self.flow(xs) - ys), axis=1)

    def density_matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        moved = self.flow(xs)
        return np.prod(self.p.noise_density.pdf(moved[:, None, :] - ys[None, :, :]), axis=2)

    def params(self) -> dict[str, Any]:
        return {
            "a": self.p.a.tolist(),
            "r": self.p.r.tolist(),
            "noise": self.p.noise_density.name,
            "integrator_step": self.p.integrator_step,
            "init_low": self.init_low,
            "init_high": self.init_high,
        }


# ==== Constructors ====


def lotka_volterra_kernel(p: LotkaVolterraParams, init_low: float = -0.5, init_high: float = 1.0) -> LotkaVolterra:
    return LotkaVolterra(p, init_low=init_low, init_high=init_high)


def monotone_walk_kernel(alpha: float, init_low: float = 0.0, init_high: float = 1.0) -> MonotoneWalk:
    return MonotoneWalk(alpha, init_low=init_low, init_high=init_high)


def perturbed_system_kernel(
    f: PiecewiseLinearMap, phi: NoiseShape | str = "epanechnikov", init_low: float = -1.0, init_high: float = 4.0
) -> PerturbedSystem:
    shape = PHI_SHAPES[phi] if isinstance(phi, str) else phi
    return PerturbedSystem(f, shape, init_low=init_low, init_high=init_high)


def build_kernel(spec) -> KernelModel:
    """Single place mapping validated model specs to kernels."""
    name = spec.name
    if name == "iid":
        model: KernelModel = IidUniform(spec.low, spec.high, spec.dim)
    elif name == "uniform_step":
        model = UniformStep(spec.low, spec.high, spec.init_low, spec.init_high)
    elif name == "monotone_walk":
        model = monotone_walk_kernel(spec.alpha, spec.init_low, spec.init_high)
    elif name == "perturbed":
        model = perturbed_system_kernel(build_map(spec.f), spec.phi, spec.init_low, spec.init_high)
    elif name == "lotka_volterra":
        params = LotkaVolterraParams(
            d=spec.d,
            a=np.asarray(spec.a, dtype=float),
            r=np.asarray(spec.r, dtype=float),
            noise_density=G_SHAPES[spec.noise],
            integrator_step=spec.integrator_step or settings.ldp_rk4_step,
        )
        model = lotka_volterra_kernel(params, spec.init_low, spec.init_high)
    else:
        raise RuntimeError(f"Unknown model: {name}")
    logger.debug("built kernel %s", model.describe())
    return model


def bounded_lsc_constant(density_max: float, density_min: float) -> float:
    """c_K = M / m for a density bounded by M and bounded below by m > 0 on K."""
    if not density_min > 0:
        raise PreconditionError("the lower density bound m must be > 0")
    return max(1.0, density_max / density_min)


def c_prime(c_K: float, tau_K: int) -> float:
    return c_K * tau_K
