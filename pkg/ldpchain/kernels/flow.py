from __future__ import annotations

from typing import Callable

import numpy as np

VectorField = Callable[..., np.ndarray]


def rk4(
    t_start: float,
    t_end: float,
    fun: VectorField,
    n_steps: int,
    init_cond: np.ndarray,
    args: tuple = (),
) -> np.ndarray:
    """
    Runge-Kutta 4 integration scheme, fixed step, returning the state at t_end.

    init_cond may be a single state (d,) or a batch (B, d); fun must broadcast.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = (t_end - t_start) / n_steps
    x = np.array(init_cond, dtype=float, copy=True)
    t = t_start
    for _ in range(n_steps):
        k1 = fun(t, x, *args)
        k2 = fun(t + dt / 2, x + 0.5 * dt * k1, *args)
        k3 = fun(t + dt / 2, x + 0.5 * dt * k2, *args)
        k4 = fun(t + dt, x + dt * k3, *args)
        x = x + (1 / 6) * dt * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return x


def rk4_path(t_start: float, t_end: float, fun: VectorField, n_points: int, init_cond, args: tuple = ()) -> np.ndarray:
    """All n_points states on the uniform time grid (first row = init_cond)."""
    t = np.linspace(t_start, t_end, n_points)
    x0 = np.asarray(init_cond, dtype=float)
    out = np.zeros((n_points, *x0.shape))
    out[0] = x0
    for i in range(n_points - 1):
        out[i + 1] = rk4(t[i], t[i + 1], fun, 1, out[i], args)
    return out


def steps_for(t_end: float, step: float) -> int:
    return max(1, int(round(t_end / step)))


def lotka_volterra_field(t: float, x: np.ndarray, r: np.ndarray, a: np.ndarray) -> np.ndarray:
    """dx_i/dt = r_i x_i (1 - sum_j a_ij x_j)."""
    return r * x * (1.0 - x @ a.T)


def logistic_solution(x0: float, t: float) -> float:
    """Closed form of dx/dt = x(1 - x)."""
    e = np.exp(t)
    return float(x0 * e / (1.0 + x0 * (e - 1.0)))
