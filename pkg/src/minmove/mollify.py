"""Exponential time mollification of nodal time series.

[v]_h(t) = exp(-t/h) v_o + (1/h) int_0^t exp((s-t)/h) v(s) ds

v is treated as piecewise linear in time between grid values, for which the
kernel integral over each interval has a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


class InitialMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeriesField:
    times: Array      # (K+1,), times[0] == 0
    values: Array     # (K+1, N)
    initial: Array    # (N,)

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, float).reshape(len(t), -1)))
        object.__setattr__(self, "initial", np.asarray(self.initial, float).reshape(-1))

    @classmethod
    def from_function(cls, fun, times, initial=None):
        times = np.asarray(times, float)
        vals = np.array([np.atleast_1d(fun(t)) for t in times], dtype=float)
        init = vals[0] if initial is None else np.atleast_1d(np.asarray(initial, float))
        return cls(times, vals, init)

    def at(self, t):
        """Piecewise-linear evaluation at a single time."""
        return np.array([np.interp(t, self.times, col) for col in self.values.T])

    def table(self):
        return np.column_stack([self.times, self.values])


def _weights(dt, h):
    """A = 1 - e^{-x} and B/dt with B = h(1 - e^{-x}(1+x)), x = dt/h."""
    x = dt / h
    A = -np.expm1(-x)
    small = x < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        Bd = np.where(small, x / 2 - x**2 / 3 + x**3 / 8, (A - x * np.exp(-x)) / np.where(small, 1.0, x))
    return A, Bd


def _recurrence(times, values, start, h):
    out = np.empty_like(values)
    out[0] = start
    dt = np.diff(times)
    decay = np.exp(-dt / h)
    A, Bd = _weights(dt, h)
    for k in range(len(dt)):
        vk, vk1 = values[k], values[k + 1]
        out[k + 1] = decay[k] * out[k] + A[k] * vk1 - Bd[k] * (vk1 - vk)
    return out


def mollify(v: TimeSeriesField, h: float) -> TimeSeriesField:
    if h <= 0:
        raise ValueError("h must be positive")
    return TimeSeriesField(v.times, _recurrence(v.times, v.values, v.initial, h), v.initial)


def evaluate(v: TimeSeriesField, h: float, t_eval):
    """[v]_h at arbitrary times (each inside the grid), exact for the linear interpolant."""
    m = mollify(v, h).values
    t_eval = np.atleast_1d(np.asarray(t_eval, float))
    out = np.empty((len(t_eval), v.values.shape[1]))
    for j, t in enumerate(t_eval):
        k = int(np.clip(np.searchsorted(v.times, t, side="right") - 1, 0, len(v.times) - 2))
        t0, t1 = v.times[k], v.times[k + 1]
        dt = t - t0
        vt = v.values[k] + (v.values[k + 1] - v.values[k]) * dt / (t1 - t0)
        A, Bd = _weights(np.array([dt]), h)
        out[j] = np.exp(-dt / h) * m[k] + A[0] * vt - Bd[0] * (vt - v.values[k])
    return out


def mollify_time_derivative(v: TimeSeriesField, h: float, tol: float = 1e-10) -> TimeSeriesField:
    """d/dt [v]_h computed as the mollification of dv/dt with zero initial value.

    Needs v_o = v(0); raises InitialMismatch otherwise."""
    if np.max(np.abs(v.initial - v.values[0])) > tol * max(1.0, np.max(np.abs(v.values[0]))):
        raise InitialMismatch("the initial value must equal v(0)")
    dt = np.diff(v.times)
    slopes = np.diff(v.values, axis=0) / dt[:, None]
    decay = np.exp(-dt / h)
    A, _ = _weights(dt, h)
    out = np.zeros_like(v.values)
    for k in range(len(dt)):
        out[k + 1] = decay[k] * out[k] + A[k] * slopes[k]
    d = TimeSeriesField(v.times, out, np.zeros_like(v.initial))
    lhs = _lr_norm_exact_pc(v.times, out, slopes, h)
    rhs = np.sqrt(np.sum(dt * np.sum(slopes**2, axis=1)))
    if lhs > rhs * (1 + 1e-10) + 1e-12:
        raise RuntimeError(f"time-derivative contraction failed: {lhs:.6e} > {rhs:.6e}")
    return d


def _lr_norm_exact_pc(times, nodes, slopes, h):
    """L^2(0,T; l^2) norm of d/dt[v]_h, which on each interval equals
    e^{-(s-t_k)/h} d_k + (1 - e^{-(s-t_k)/h}) c_k (c_k the interval slope)."""
    total = 0.0
    x, w = np.polynomial.legendre.leggauss(8)
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        s = 0.5 * (t1 - t0) * (x + 1)
        e = np.exp(-s / h)[:, None]
        vals = e * nodes[k] + (1 - e) * slopes[k]
        total += 0.5 * (t1 - t0) * np.sum(w * np.sum(vals**2, axis=1))
    return np.sqrt(total)


def ode_residual(v: TimeSeriesField, h: float) -> float:
    """max over grid points of |d/dt [v]_h - (v - [v]_h)/h| with the derivative taken
    from the kernel identity (independent of the recurrence for [v]_h)."""
    m = mollify(v, h).values
    d = mollify_time_derivative(v, h).values
    return float(np.max(np.abs(d - (v.values - m) / h)))


@dataclass
class NormCheck:
    lhs: float
    rhs: float
    passed: bool


def _space_norm(vals, weights):
    if weights is None:
        return np.sqrt(np.sum(vals**2, axis=-1))
    return np.sqrt(np.sum(weights * vals**2, axis=-1))


def mollifier_norm_check(v: TimeSeriesField, h: float, r: float, t_o: float,
                         weights=None, gauss_points: int = 8) -> NormCheck:
    """Both sides of ||[v]_h||_{L^r(0,t_o;X)} <= ||v||_{L^r(0,t_o;X)} + [h/r (1-e^{-t_o r/h})]^{1/r} ||v_o||_X.

    X is the (optionally weighted) discrete L^2 norm over nodes.  Time integrals use
    Gauss-Legendre per grid interval with exact point values of [v]_h and v."""
    if t_o <= 0 or t_o > v.times[-1] + 1e-14:
        raise ValueError("t_o must lie in (0, T]")
    edges = v.times[v.times < t_o]
    edges = np.append(edges, t_o)
    x, w = np.polynomial.legendre.leggauss(gauss_points)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (b - a) * (x + 1) + a)
        ws.append(0.5 * (b - a) * w)
    ts, ws = np.concatenate(ts), np.concatenate(ws)
    vo = _space_norm(v.initial, weights)
    mv = _space_norm(evaluate(v, h, ts), weights)
    vv = _space_norm(np.array([v.at(t) for t in ts]), weights)
    if np.isinf(r):
        grid = np.concatenate([edges, ts])
        m_grid = _space_norm(evaluate(v, h, grid), weights)
        v_grid = _space_norm(np.array([v.at(t) for t in grid]), weights)
        lhs = float(np.max(m_grid))
        rhs = float(np.max(v_grid) + vo)
    else:
        lhs = float(np.sum(ws * mv**r) ** (1 / r))
        bracket = (h / r * (-np.expm1(-t_o * r / h))) ** (1 / r)
        rhs = float(np.sum(ws * vv**r) ** (1 / r) + bracket * vo)
    return NormCheck(lhs, rhs, lhs <= rhs + 1e-8)
