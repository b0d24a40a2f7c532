"""Time evolution ``u_t + u = Gamma(u)`` and the estimates built on it.

The default integrator works on the integral form

    u(t + dt) = e^{-dt} u(t) + int_0^dt e^{-(dt - s)} Gamma(u(t + s)) ds

with an exponential predictor-corrector.  Every stage is a convex
combination of functions in the unit ball, so ``||u|| <= 1`` and
``u(0, t) = 1`` hold for any step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import GridFunction, mix
from .model import MaxwellModel, abs_diff_bound, gamma_apply
from .selfsim import slope_at_zero
from .spectral import lambda_p

__all__ = [
    "EvolutionTrace",
    "evolve",
    "picard_solve",
    "rescaled_deviation",
    "decay_rate",
    "lipschitz_check",
    "contraction_check",
    "weighted_norm",
]


@dataclass(frozen=True)
class EvolutionTrace:
    """Recorded states of one run, with per-time diagnostics."""

    times: tuple
    states: tuple
    model: MaxwellModel
    diagnostics: tuple
    dt: float

    @property
    def final(self) -> GridFunction:
        return self.states[-1]

    def column(self, key: str) -> np.ndarray:
        return np.array([d[key] for d in self.diagnostics])


def _diagnostics(u: GridFunction) -> dict:
    return {"u0": u.value_at_zero, "slope0": slope_at_zero(u), "supnorm": u.sup_norm()}


def _step(model: MaxwellModel, u: GridFunction, decay: float) -> GridFunction:
    g0 = gamma_apply(model, u)
    pred = mix([u, g0], [decay, 1.0 - decay])
    g1 = gamma_apply(model, pred)
    return mix([u, mix([g0, g1], [0.5, 0.5])], [decay, 1.0 - decay])


def evolve(model: MaxwellModel, u0: GridFunction, t_end: float, dt: float = 1e-2,
           output_every: float = 0.1, scheme: str = "pc") -> EvolutionTrace:
    """Integrate from ``u0`` to ``t_end``, recording states every ``output_every``.

    ``scheme`` is ``"pc"`` (predictor-corrector, second order) or ``"euler"``
    (the predictor alone, first order).  ``dt`` is shrunk slightly, if
    needed, so that the output times fall on steps.
    """
    if u0.sup_norm() > 1.0 + 1e-12:
        raise ValueError("evolve requires ||u0|| <= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if scheme not in ("pc", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    output_every = min(output_every, t_end)
    stride = max(1, int(math.ceil(output_every / dt - 1e-9)))
    dt = output_every / stride
    n_steps = int(round(t_end / dt))
    decay = math.exp(-dt)
    u = u0
    times, states, diags = [0.0], [u0], [_diagnostics(u0)]
    for k in range(1, n_steps + 1):
        if scheme == "pc":
            u = _step(model, u, decay)
        else:
            u = mix([u, gamma_apply(model, u)], [decay, 1.0 - decay])
        if k % stride == 0 or k == n_steps:
            times.append(k * dt)
            states.append(u)
            diags.append(_diagnostics(u))
    return EvolutionTrace(tuple(times), tuple(states), model, tuple(diags), dt)


def _lagrange_weights(nodes: np.ndarray, upper: np.ndarray, n_sub: int = 64) -> np.ndarray:
    """``M[i, j] = int_0^{upper_i} exp(-(upper_i - s)) l_j(s) ds``."""
    z, wz = np.polynomial.legendre.leggauss(n_sub)
    out = np.empty((upper.size, nodes.size))
    for i, b in enumerate(upper):
        s = 0.5 * b * (z + 1.0)
        ws = 0.5 * b * wz * np.exp(-(b - s))
        # Lagrange basis at s
        basis = np.ones((nodes.size, s.size))
        for j in range(nodes.size):
            for m in range(nodes.size):
                if m != j:
                    basis[j] *= (s - nodes[m]) / (nodes[j] - nodes[m])
        out[i] = basis @ ws
    return out


def picard_solve(model: MaxwellModel, u0: GridFunction, t: float, n_iter: int,
                 n_tau: int = 32) -> GridFunction:
    """Picard iterates of the integral equation on ``[0, t]``, returned at ``t``.

    The time integral uses a fixed ``n_tau``-point Gauss-Legendre
    collocation in ``tau`` with Lagrange interpolation of ``Gamma(u(tau))``.
    ``n_iter = 0`` returns ``u0``.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be nonnegative")
    if not t > 0:
        raise ValueError("t must be positive")
    c = lambda_p(model, 0.0)
    if c > 1 and t >= math.log(c / (c - 1)):
        raise ValueError(f"t={t} outside the contraction window t < ln(C/(C-1)) = "
                         f"{math.log(c / (c - 1)):.6f}")
    if n_iter == 0:
        return u0
    z, _ = np.polynomial.legendre.leggauss(n_tau)
    tau = 0.5 * t * (z + 1.0)
    m_nodes = _lagrange_weights(tau, tau)
    m_final = _lagrange_weights(tau, np.array([t]))[0]
    base = u0.values
    decay_nodes = np.exp(-tau)
    states = [base] * n_tau
    kw = dict(value_at_zero=u0.value_at_zero, tail_limit=u0.tail_limit)
    gam = None
    for _ in range(n_iter):
        gam = np.array([gamma_apply(model, GridFunction(u0.grid, v, **kw), strict=False).values
                        for v in states])
        states = list(decay_nodes[:, None] * base + m_nodes @ gam)
    gam = np.array([gamma_apply(model, GridFunction(u0.grid, v, **kw), strict=False).values
                    for v in states]) if n_iter > 1 else gam
    final = math.exp(-t) * base + m_final @ gam
    return GridFunction(u0.grid, final, **kw)


def _window_points(trace: EvolutionTrace, mu: float, window, n_points: int):
    grid = trace.states[0].grid
    x = np.geomspace(window[0], window[1], n_points)
    for t in trace.times:
        lo, hi = window[0] * math.exp(-mu * t), window[1] * math.exp(-mu * t)
        if lo < grid.x_min or hi > grid.x_max:
            raise ValueError(f"rescaled window [{lo:.3g}, {hi:.3g}] at t={t:g} leaves the grid")
    return x


def rescaled_deviation(trace: EvolutionTrace, mu: float, ref, p: float = 1.0,
                       window=(1e-3, 1e2), n_points: int = 400) -> dict:
    """Deviation of ``u(x e^{-mu t}, t)`` from a reference on a fixed window.

    ``ref`` is a :class:`GridFunction` or a sequence of them, one per
    recorded time.  Returns arrays ``times``, ``sup`` and ``weighted`` (the
    sup of ``|.|/x**p``).
    """
    x = _window_points(trace, mu, window, n_points)
    sup, weighted = [], []
    for k, (t, u) in enumerate(zip(trace.times, trace.states)):
        r = ref[k] if isinstance(ref, (list, tuple)) else ref
        d = np.abs(u(x * math.exp(-mu * t)) - r(x))
        sup.append(float(np.max(d)))
        weighted.append(float(np.max(d / x ** p)))
    return {"times": np.array(trace.times), "sup": np.array(sup), "weighted": np.array(weighted)}


def decay_rate(times: Sequence[float], values: Sequence[float], t_min: float = 0.0,
               floor: float = 1e-13) -> float:
    """Least-squares exponential rate ``r`` in ``values ~ exp(-r t)`` for ``t >= t_min``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (t >= t_min) & (v > floor)
    if sel.sum() < 2:
        raise ValueError("not enough points above the floor to fit a rate")
    slope, _ = np.polyfit(t[sel], np.log(v[sel]), 1)
    return float(-slope)


def lipschitz_check(model: MaxwellModel, u1: GridFunction, u2: GridFunction) -> float:
    """Largest nodal value of ``|Gamma(u1) - Gamma(u2)| - L(|u1 - u2|)``."""
    if u1.sup_norm() > 1.0 + 1e-12 or u2.sup_norm() > 1.0 + 1e-12:
        raise ValueError("lipschitz_check requires ||u1||, ||u2|| <= 1")
    lhs = np.abs(gamma_apply(model, u1).values - gamma_apply(model, u2).values)
    return float(np.max(lhs - abs_diff_bound(model, u1, u2)))


def weighted_norm(u1: GridFunction, u2: GridFunction, p: float, x_lo: float = 1e-4) -> float:
    """``sup |u1 - u2| / x**p`` over nodes ``x >= x_lo``, using complements."""
    x = u1.x_nodes
    sel = x >= x_lo
    d = np.abs(u2.complement - u1.complement)[sel]
    return float(np.max(d / x[sel] ** p))


def contraction_check(model: MaxwellModel, u1_0: GridFunction, u2_0: GridFunction, p: float,
                      t_end: float, dt: float = 1e-2, output_every: float = 0.1,
                      x_lo: float = 1e-4, margin: float = 0.02) -> dict:
    """Compare ``||(u1 - u2)/x**p||`` along two runs with ``exp(-t(1 - lambda(p)))``.

    Raises
    ------
    ValueError
        If the initial weighted difference is not finite, detected as a
        weighted difference below ``x_lo`` far larger than above it.
    """
    n0 = weighted_norm(u1_0, u2_0, p, x_lo)
    x = u1_0.x_nodes
    d = np.abs(u2_0.complement - u1_0.complement)
    below = x < x_lo
    if np.any(below) and np.max(d[below] / x[below] ** p) > 1e3 * max(n0, 1e-300):
        raise ValueError("initial weighted difference is not finite at the origin")
    tr1 = evolve(model, u1_0, t_end, dt, output_every)
    tr2 = evolve(model, u2_0, t_end, dt, output_every)
    times = np.array(tr1.times)
    if n0 == 0:
        ratio = np.zeros_like(times)
    else:
        ratio = np.array([weighted_norm(a, b, p, x_lo) for a, b in zip(tr1.states, tr2.states)]) / n0
    bound = np.exp(-times * (1.0 - lambda_p(model, p)))
    return {"times": times, "ratio": ratio, "bound": bound,
            "worst": float(np.max(ratio / bound - 1.0)),
            "passed": bool(np.all(ratio <= bound * (1.0 + margin)))}
