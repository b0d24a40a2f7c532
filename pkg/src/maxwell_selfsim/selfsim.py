"""Self-similar profiles ``mu x w' + w = Gamma(w)``.

The equation is solved in integral form ``w = Gamma_mu(Gamma(w))`` with

    Gamma_mu(g)(x) = int_0^1 g(x tau**mu) dtau,

iterated from ``w_0 = exp(-x)``.  Any admissible order ``p`` is reduced to
``p = 1`` by the substitution ``x -> x**p``, which maps the model to one
with scales ``a**p`` and the exponent to ``p mu(p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, signal, special

from .errors import NonConvergenceError
from .grid import GridFunction, LogGrid, exp_power, exponent_from_parts
from .model import InteractionTerm, MaxwellModel, gamma_apply
from .spectral import find_p0, find_s_star, lambda_p, mu_p

__all__ = [
    "PropertyReport",
    "SelfSimilarProfile",
    "gamma_mu_apply",
    "i_mu",
    "rescale_model",
    "solve_profile",
    "residual",
    "profile_check",
    "slope_at_zero",
    "local_order",
    "complete_monotonicity_violation",
    "small_x_order",
    "iteration_rate_bound",
]

N_GL_INTERVAL = 8
SLOPE_NODES = 8


# ---------------------------------------------------------------------------
# the averaging operator


def _interval_rule(q: float, h: float, n: int = N_GL_INTERVAL):
    """Gauss-Legendre nodes/weights on ``[exp(-q h), 1]``."""
    lo = math.exp(-q * h)
    z, wz = np.polynomial.legendre.leggauss(n)
    return lo, 0.5 * (1 - lo) * z + 0.5 * (1 + lo), 0.5 * (1 - lo) * wz


def gamma_mu_apply(model: Optional[MaxwellModel], mu: float, g: GridFunction) -> GridFunction:
    """Average ``g(x tau**mu)`` over ``tau`` in ``[0, 1]``.

    Writing ``q = 1/|mu|``, the value at one node follows from its neighbour by
    ``w_i = exp(-q h) w_(i -/+ 1) + int_{exp(-q h)}^1 g(x_i z**mu) dz``; each
    step is a convex combination, so ``||w|| <= ||g||``.  For ``mu > 0`` the
    recurrence runs upward from the first node (where ``g`` is linear in
    ``x``); for ``mu < 0`` it runs downward from the last node using the tail
    rule of ``g``.  ``model`` is not used and may be ``None``.
    """
    if mu <= -1:
        raise ValueError("gamma_mu_apply requires mu > -1")
    if abs(mu) < 1e-14:
        return g
    grid = g.grid
    h = grid.h
    q = 1.0 / abs(mu)
    decay, z, wz = _interval_rule(q, h)
    n = grid.n
    idx = np.broadcast_to(np.arange(n - 1), (z.size, n - 1)).ravel()
    if mu > 0:
        theta = 1.0 + mu * np.log(z) / h
    else:
        theta = mu * np.log(z) / h
    theta = np.clip(theta, 0.0, 1.0)
    th = np.repeat(theta, n - 1)
    a = [1.0, -decay]

    def sweep(vals, start):
        incr = wz @ vals.reshape(z.size, n - 1)  # contribution of [x_i, x_{i+1}]
        if mu > 0:
            return signal.lfilter([1.0], a, np.concatenate([[start], incr]))
        return signal.lfilter([1.0], a, np.concatenate([[start], incr[::-1]]))[::-1]

    g0, c = g.value_at_zero, g.tail_limit
    if mu > 0:
        start = g0 + (g.values[0] - g0) / (1.0 + mu)
    elif g.tail_exponent is None:
        start = c
    else:
        start = c + (g.values[-1] - c) / (1.0 + abs(mu) * g.tail_exponent)
    kw = dict(value_at_zero=g0, tail_limit=c)
    if g.exponent is None or g0 != 1.0:
        return GridFunction(grid, sweep(g._interp(idx, th), start), **kw)
    # run the recurrence on u and on 1 - u and keep the accurate one
    e = g._interp_exponent(idx, th)
    w = sweep(np.exp(-e), start)
    fit = g.origin_fit
    if mu > 0 and fit is not None:
        # 1 - u = alpha x + (beta - alpha^2/2) x^2 + O(x^3) below the first
        # node; average it term by term
        alpha, beta = fit
        x0 = grid.x_min
        cstart = alpha * x0 / (1.0 + mu) + (beta - 0.5 * alpha * alpha) * x0 * x0 / (1.0 + 2.0 * mu)
        start = 1.0 - cstart
        w = sweep(np.exp(-e), start)
    elif mu > 0:
        cstart = g.complement[0] / (1.0 + mu)
    else:
        cstart = 1.0 - start
    comp = sweep(-np.expm1(-e), cstart)
    return GridFunction.from_exponent(grid, exponent_from_parts(w, comp), **kw)


def _gamma_series(a: float, y: float) -> float:
    """``sum_k y**k / (a (a+1) ... (a+k-1))``, the scaled lower incomplete gamma."""
    term, total, k = 1.0, 1.0, 0
    while term > 1e-17 * total:
        term *= y / (a + k)
        total += term
        k += 1
    return total


def _laplace_power(y: float, nu: float) -> float:
    """``int_0^inf exp(-y s) (1 + s)**(-nu) ds`` for ``y > 0`` and ``nu > 1``.

    With ``t = y s`` the exponential has unit scale.  For ``y < 1`` the
    algebraic factor decays over many decades above ``t = y``; that part is
    integrated in ``v = ln(t/y)`` up to ``t = 50``, past which ``exp(-t)``
    is negligible.
    """
    f = lambda t: math.exp(-t) * (1.0 + t / y) ** (-nu)
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    if y >= 1.0:
        total, _ = integrate.quad(f, 0.0, math.inf, **kw)
        return total / y
    head, _ = integrate.quad(f, 0.0, y, **kw)
    g = lambda v: f(y * math.exp(v)) * y * math.exp(v)
    body, _ = integrate.quad(g, 0.0, math.log(50.0 / y), **kw)
    return (head + body) / y


def i_mu(y: float, mu: float) -> tuple:
    """``I_mu(y) = int_0^1 exp(-y tau**mu) dtau`` with remainder and bound.

    Returns ``(value, r, B)`` where ``r`` is the remainder of the expansion
    ``I = exp(-y)(1 + mu y/(1+mu)) + mu**2/(1+mu) r`` and ``B`` its bound.
    The remainder is evaluated from its own integral representation (closed
    forms through incomplete gamma functions where available), not by
    subtraction, which would cancel badly for small ``mu``.
    """
    if mu <= -1:
        raise ValueError("i_mu requires mu > -1")
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y == 0:
        return 1.0, 0.0, 0.0
    q = 1.0 / abs(mu) if mu != 0 else math.inf
    if mu == 0:
        value = math.exp(-y)
        r = y * y * math.exp(-y)
    elif mu > 0:
        # t = y tau**mu gives lower incomplete gammas; their series has
        # positive terms, so no cancellation for any y
        value = math.exp(-y) * _gamma_series(q + 1, y)
        r = q * y * y * math.exp(-y) * _gamma_series(q + 3, y) / (q + 2)
    else:
        # t = y (1 + sigma): integrals over [y, inf) with a smooth integrand
        value = q * math.exp(-y) * _laplace_power(y, q + 1)
        if mu == -0.5:
            r = 2.0 * y * y * special.exp1(y)
        elif mu < -0.5:
            r = q * y ** q * special.gammaincc(2 - q, y) * special.gamma(2 - q)
        else:
            r = q * y * y * math.exp(-y) * _laplace_power(y, q - 1)

    if mu > -0.5:
        bound = y * y / (2 * mu + 1)
    elif mu == -0.5:
        bound = 2 * y * y * (-math.log(y) + y)
    else:
        bound = special.gamma(2 - 1 / abs(mu)) / abs(mu) * y ** (1 / abs(mu))
    return value, r, bound


# ---------------------------------------------------------------------------
# profiles


def rescale_model(model: MaxwellModel, p: float) -> MaxwellModel:
    """Model acting in the variable ``x**p``: every scale ``a`` becomes ``a**p``."""
    if p <= 0:
        raise ValueError("p must be positive")
    if p == 1:
        return model
    terms = tuple(InteractionTerm(t.order, t.weights, np.power(t.scales, p)) for t in model.terms)
    return MaxwellModel(terms, name=f"{model.name}^{p:g}", dimension_hint=model.dimension_hint,
                        transform_kind=model.transform_kind,
                        params=model.params + (("rescale_p", p),))


@dataclass(frozen=True)
class PropertyReport:
    """Checks of the proved properties of a converged profile."""

    lower_violation: float  # max(exp(-x) - w), should be <= 0
    upper_violation: float  # max(w - 1)
    max_increase: float  # largest w_{i+1} - w_i
    slope_at_zero: float
    tail_value: float
    local_order: float
    expected_order: float
    bound_tol: float = 1e-10
    slope_tol: float = 1e-3
    tail_tol: float = 1e-8
    order_tol: float = 0.3

    @property
    def bounds_ok(self) -> bool:
        return self.lower_violation <= self.bound_tol and self.upper_violation <= self.bound_tol

    @property
    def monotone_ok(self) -> bool:
        return self.max_increase <= self.bound_tol

    @property
    def slope_ok(self) -> bool:
        return abs(self.slope_at_zero + 1.0) <= self.slope_tol

    @property
    def tail_ok(self) -> bool:
        return abs(self.tail_value) <= self.tail_tol

    @property
    def order_ok(self) -> bool:
        return self.local_order >= self.expected_order - self.order_tol

    @property
    def all_ok(self) -> bool:
        return self.bounds_ok and self.monotone_ok and self.slope_ok and self.tail_ok and self.order_ok

    def flags(self) -> dict:
        return {"bounds": self.bounds_ok, "monotone": self.monotone_ok, "slope": self.slope_ok,
                "tail": self.tail_ok, "order": self.order_ok}


@dataclass(frozen=True)
class SelfSimilarProfile:
    """Converged profile in the tilde variable ``x~ = x**p``."""

    w: GridFunction
    p: float
    mu_star: float
    mu_tilde: float
    iterations: int
    sup_residual: float
    diff_residual: float
    property_report: PropertyReport
    model: MaxwellModel
    model_tilde: MaxwellModel
    deltas: tuple = ()
    min_increments: tuple = ()
    eps_hat: float = math.nan

    def physical(self, x):
        """The profile in the original variable, ``psi(x) = w(x**p)``."""
        return self.w(np.power(np.asarray(x, dtype=float), self.p))

    def as_dict(self) -> dict:
        out = {"p": self.p, "mu_star": self.mu_star, "mu_tilde": self.mu_tilde,
               "iterations": self.iterations, "residual": self.sup_residual,
               "diff_residual": self.diff_residual, "eps_hat": self.eps_hat}
        out.update({f"flag_{k}": v for k, v in self.property_report.flags().items()})
        return out


def residual(model: MaxwellModel, mu: float, w: GridFunction) -> tuple:
    """Residuals of the profile equation.

    Returns ``(integral, differential)``: the sup over nodes of
    ``|w - Gamma_mu(Gamma(w))|`` and of ``|mu x w' + w - Gamma(w)|`` with
    ``x w'`` from centred differences in ``ln x`` at interior nodes.
    """
    if w.grid.n < 3:
        raise ValueError("residual needs at least 3 grid nodes")
    gw = gamma_apply(model, w)
    integral = float(np.max(np.abs(w.values - gamma_mu_apply(model, mu, gw).values)))
    xw = (w.values[2:] - w.values[:-2]) / (2.0 * w.grid.h)
    diff = mu * xw + w.values[1:-1] - gw.values[1:-1]
    return integral, float(np.max(np.abs(diff)))


def slope_at_zero(u: GridFunction, n_nodes: int = SLOPE_NODES) -> float:
    """Least-squares slope of ``u - u(0)`` against ``x`` over the first nodes."""
    x = u.x_nodes[:n_nodes]
    return float(np.dot(x, u.values[:n_nodes] - u.value_at_zero) / np.dot(x, x))


def local_order(x: np.ndarray, d: np.ndarray, floor: float = 1e-10) -> float:
    """Power ``k`` in ``|d| ~ x**k`` fitted over the first decade above ``floor``.

    Returns ``inf`` when ``|d|`` never rises above the floor (identically
    small deviation) and ``nan`` when fewer than three points are usable.
    """
    ad = np.abs(d)
    above = np.flatnonzero(ad > floor)
    if above.size == 0:
        return math.inf
    x0 = x[above[0]]
    sel = (x >= x0) & (x <= 10 * x0) & (ad > 0)
    if sel.sum() < 3:
        return math.nan
    slope, _ = np.polyfit(np.log(x[sel]), np.log(ad[sel]), 1)
    return float(slope)


def small_x_order(mu_tilde: float, s_star: float = math.inf) -> float:
    """Expected order of ``w - exp(-x)`` at the origin.

    The averaging bound gives 2 for ``mu > -1/2`` and ``1/|mu|`` below; a
    finite moment order ``s* < 2`` caps it, since ``w`` is a Laplace
    transform whose moments of order above ``s*`` diverge.
    """
    if mu_tilde > -0.5:
        base = 2.0
    elif mu_tilde == -0.5:
        base = 2.0 - 1e-6
    else:
        base = 1.0 / abs(mu_tilde)
    return min(base, s_star) if math.isfinite(s_star) else base


def profile_check(profile_or_w, mu_tilde: Optional[float] = None,
                  s_star: float = math.inf) -> PropertyReport:
    """Evaluate the profile properties on a grid function or a solved profile.

    ``tail_value`` is the largest ``|w|`` over the last 1% of the nodes.
    """
    if isinstance(profile_or_w, SelfSimilarProfile):
        w, mu_tilde = profile_or_w.w, profile_or_w.mu_tilde
        s_star = _tilde_s_star(profile_or_w.model_tilde)
    else:
        w = profile_or_w
        if mu_tilde is None:
            raise ValueError("mu_tilde is required for a bare grid function")
    x = w.x_nodes
    v = w.values
    barrier = np.exp(-x)
    return PropertyReport(
        lower_violation=float(np.max(barrier - v)),
        upper_violation=float(max(np.max(v) - 1.0, w.value_at_zero - 1.0)),
        max_increase=float(np.max(np.diff(v))),
        slope_at_zero=slope_at_zero(w),
        tail_value=float(np.max(np.abs(v[-max(2, v.size // 100):]))),
        local_order=local_order(x, v - barrier),
        expected_order=small_x_order(mu_tilde, s_star),
    )


def _tilde_s_star(model_tilde: MaxwellModel) -> float:
    try:
        return find_s_star(model_tilde)
    except ValueError:
        return math.nan


def complete_monotonicity_violation(w: GridFunction, order: int = 4, step: float = 0.5,
                                    n_points: int = 24) -> float:
    """Largest violation of ``(-1)**k Delta**k w >= 0`` for ``k <= order``.

    A Laplace transform of a nonnegative measure has alternating finite
    differences of every order on any uniform sub-grid.
    """
    vals = w(step * np.arange(n_points))
    worst = 0.0
    d = vals
    for k in range(1, order + 1):
        d = np.diff(d)
        worst = max(worst, float(np.max(-((-1) ** k) * d)))
    return worst


def solve_profile(model: MaxwellModel, p: float = 1.0, tol: float = 1e-10,
                  max_iter: int = 1000, grid: Optional[LogGrid] = None,
                  w0: Optional[GridFunction] = None,
                  pin_slope: bool = True) -> SelfSimilarProfile:
    """Fixed-point iteration ``w <- Gamma~_mu~(Gamma~(w))`` in the tilde variable.

    The exact iteration preserves ``w'(0)``, and every dilation ``w(c x)`` of
    a solution is again a solution, so the slope is a neutral direction in
    which grid errors below the first node accumulate from sweep to sweep.
    With ``pin_slope`` each iterate is dilated by a factor within rounding
    distance of 1 so that its slope at the origin equals that of ``w0``.

    Raises
    ------
    ValueError
        If the model is linear, ``p`` is not below ``p0`` or ``p mu(p) <= -1``.
    NonConvergenceError
        If the sup-node change stays above ``tol`` after ``max_iter`` sweeps.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    p0, _ = find_p0(model)
    if not p < p0:
        raise ValueError(f"p={p} must lie below p0={p0}")
    mu_star = mu_p(model, p)
    mu_t = p * mu_star
    if mu_t <= -1:
        raise ValueError("p mu(p) must exceed -1")
    grid = grid or (w0.grid if w0 is not None else LogGrid())
    mt = rescale_model(model, p)
    w = w0 if w0 is not None else exp_power(grid)
    if w.sup_norm() > 1.0 + 1e-12:
        raise ValueError("initial profile must satisfy ||w0|| <= 1")
    slope0 = w.origin_fit[0] if w.origin_fit is not None else None
    deltas, incs = [], []
    eps_hat = math.nan
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = gamma_mu_apply(mt, mu_t, gamma_apply(mt, w))
        new = new.replace(characteristic=w.characteristic)
        if pin_slope and slope0 is not None and new.origin_fit is not None:
            new = new.dilate(slope0 / new.origin_fit[0])
        step = new.values - w.values
        if it == 1:
            eps_hat = local_order(grid.nodes, step) - 1.0
        deltas.append(float(np.max(np.abs(step))))
        incs.append(float(np.min(step)))
        w = new
        if deltas[-1] <= tol:
            converged = True
            break
    if not converged:
        ratio = deltas[-1] / deltas[-2] if len(deltas) > 1 and deltas[-2] > 0 else math.nan
        raise NonConvergenceError(
            f"profile iteration did not reach tol={tol} in {max_iter} steps "
            f"(last change {deltas[-1]:.3e}, observed ratio {ratio:.4f})",
            iterations=it, ratio=ratio)
    integral, diff = residual(mt, mu_t, w)
    report = profile_check(w, mu_t, _tilde_s_star(mt))
    return SelfSimilarProfile(w=w, p=p, mu_star=mu_star, mu_tilde=mu_t, iterations=it,
                              sup_residual=integral, diff_residual=diff,
                              property_report=report, model=model, model_tilde=mt,
                              deltas=tuple(deltas), min_increments=tuple(incs),
                              eps_hat=eps_hat)


def iteration_rate_bound(model_tilde: MaxwellModel, mu_tilde: float, eps_hat: float) -> float:
    """Predicted contraction ``lambda(1+eps)/(1 + (1+eps) mu)`` in the tilde variable."""
    k = 1.0 + eps_hat
    return lambda_p(model_tilde, k) / (1.0 + k * mu_tilde)
