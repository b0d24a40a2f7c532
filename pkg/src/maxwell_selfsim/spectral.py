"""Spectral function of the linear operator ``L``.

``L`` acts diagonally on powers, ``L x**p = lambda(p) x**p``, and the
spectral function is ``mu(p) = (lambda(p) - 1)/p``.  Everything here works
directly on the atoms of a :class:`~maxwell_selfsim.model.MaxwellModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .model import GSpec, MaxwellModel, _angular, _check_dim

__all__ = [
    "SpectralProfile",
    "lambda_p",
    "lambda_prime",
    "mu_p",
    "psi",
    "find_p0",
    "invert_mu",
    "find_s_star",
    "classify",
    "theta_star",
    "contraction_factor",
    "spectral_profile",
]

P_LO, P_HI = 1e-3, 64.0
ROOT_TOL = 1e-12


def _powers(a: np.ndarray, p: float) -> np.ndarray:
    # 0**p is 0 for p > 0 and 1 for p == 0: numpy already follows this
    return np.power(a, p)


def lambda_p(model: MaxwellModel, p: float) -> float:
    """Eigenvalue ``lambda(p) = sum w sum_k a_k**p``."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    return float(sum(t.weights @ _powers(t.scales, p).sum(axis=1) for t in model.terms))


def lambda_prime(model: MaxwellModel, p: float) -> float:
    """``d lambda/dp = sum w sum_k a_k**p ln a_k``; zero scales contribute 0."""
    total = 0.0
    for t in model.terms:
        a = t.scales
        pos = a > 0
        la = np.zeros_like(a)
        la[pos] = np.log(a[pos])
        total += t.weights @ (np.where(pos, _powers(a, p), 0.0) * la).sum(axis=1)
    return float(total)


def mu_p(model: MaxwellModel, p: float) -> float:
    """Spectral function ``(lambda(p) - 1)/p``."""
    if p <= 0:
        raise ValueError("p must be positive")
    return (lambda_p(model, p) - 1.0) / p


def psi(model: MaxwellModel, p: float) -> float:
    """``p lambda'(p) - lambda(p) + 1``; its zero is the minimizer of ``mu``."""
    return p * lambda_prime(model, p) - lambda_p(model, p) + 1.0


def _brent(f, lo, hi, tol=ROOT_TOL):
    root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) > tol:
        # bracket at machine resolution; keep the smaller end on ties
        root = lo if abs(f(lo)) <= abs(f(root)) else root
    return root


def find_p0(model: MaxwellModel, tol: float = ROOT_TOL, p_lo: float = P_LO,
            p_hi: float = P_HI) -> tuple:
    """Minimizer ``p0`` of ``mu`` and ``mu(p0)``; ``(inf, nan)`` if no minimum.

    Raises
    ------
    ValueError
        For purely linear models, which have no minimum by construction.
    """
    if model.is_linear:
        raise ValueError("mu has no minimum for a purely linear model")
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = lambda p: psi(model, p)
    f_lo, f_hi = f(p_lo), f(p_hi)
    if f_hi < 0:
        return math.inf, math.nan
    if f_lo > 0:
        raise ValueError(f"minimum of mu lies below p = {p_lo}")
    p0 = p_lo if f_lo == 0 else _brent(f, p_lo, p_hi, tol)
    return p0, mu_p(model, p0)


def invert_mu(model: MaxwellModel, mu_star: float, p0: Optional[float] = None) -> float:
    """The unique ``p`` in ``(0, p0)`` with ``mu(p) = mu_star``."""
    if p0 is None:
        p0, mu0 = find_p0(model)
    else:
        mu0 = mu_p(model, p0) if math.isfinite(p0) else math.nan
    hi = p0 if math.isfinite(p0) else P_HI
    if math.isfinite(p0) and mu_star <= mu0:
        raise ValueError(f"mu_star={mu_star} is not above the minimum {mu0}")
    f = lambda p: mu_p(model, p) - mu_star
    if f(hi) > 0:
        raise ValueError("mu_star below the sampled range of mu")
    lo = P_LO
    while f(lo) < 0:
        lo *= 0.1
        if lo < 1e-300:
            raise ValueError("mu_star above the range of mu")
    return _brent(f, lo, hi)


def find_s_star(model: MaxwellModel, s_hi: float = P_HI) -> float:
    """Largest root ``s* > 1`` of ``mu(s) = mu(1)``, or ``inf`` if none."""
    p0, _ = find_p0(model)
    if p0 <= 1:
        raise ValueError("s* is defined only when p0 > 1")
    mu1 = mu_p(model, 1.0)
    f = lambda s: mu_p(model, s) - mu1
    lo = min(p0, s_hi)
    if f(s_hi) <= 0:
        return math.inf
    return _brent(f, lo, s_hi)


def classify(model: MaxwellModel, p0: Optional[float] = None,
             mu0: Optional[float] = None) -> str:
    """Qualitative class of the graph of ``mu``: ``'a'``, ``'b'``, ``'c'`` or ``'d'``."""
    if model.is_linear:
        return "a"
    if p0 is None:
        p0, mu0 = find_p0(model)
    if not math.isfinite(p0):
        return "a"
    if model.max_scale <= 1.0:
        return "b"
    return "c" if mu0 > 0 else "d"


def _xlogx_sum(s):
    # s ln s + (1-s) ln(1-s), zero at the end points
    out = np.zeros_like(s)
    m = (s > 0) & (s < 1)
    out[m] = s[m] * np.log(s[m]) + (1 - s[m]) * np.log1p(-s[m])
    return out


def _beta_term(x):
    """``x + (1-x) ln(1-x)`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.05
    xs = x[small]
    k = np.arange(2, 40)
    out[small] = np.sum(xs[:, None] ** k / (k * (k - 1)), axis=1)
    xl = x[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = np.where(xl < 1, xl + (1 - xl) * np.log1p(-xl), 1.0)
    return out


def theta_star(d: int = 3, g_spec: GSpec = None, m: float = 1.0) -> float:
    """Critical thermostat coupling for finite-energy self-similar asymptotics."""
    _check_dim(d)
    if not m > 0:
        raise ValueError("mass ratio m must be positive")
    beta = 4.0 * m / (1.0 + m) ** 2

    def weight(t):
        s = 0.5 * (1.0 - np.cos(t))
        return (0.5 * np.sin(t)) ** (d - 2) * _angular(g_spec, np.atleast_1d(s))[0], s

    def num(t):
        w, s = weight(t)
        return -w * _xlogx_sum(np.atleast_1d(s))[0]

    def den(t):
        w, s = weight(t)
        return w * _beta_term(np.atleast_1d(beta * s))[0]

    kw = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    a, _ = integrate.quad(num, 0.0, math.pi, **kw)
    b, _ = integrate.quad(den, 0.0, math.pi, **kw)
    if b <= 1e-300:
        return math.inf
    return a / b


def contraction_factor(model: MaxwellModel, p: float, mu: float) -> float:
    """Iteration contraction factor ``lambda(p)/(1 + p mu)``."""
    if p <= 0:
        raise ValueError("p must be positive")
    if p * mu <= -1:
        raise ValueError("contraction factor needs p*mu > -1")
    return lambda_p(model, p) / (1.0 + p * mu)


@dataclass(frozen=True)
class SpectralProfile:
    """Immutable summary of the spectral data of a model."""

    model: MaxwellModel
    p0: float
    mu_p0: float
    fig1_class: str
    lambda0: float
    s_star: float
    mu1: float

    def as_dict(self) -> dict:
        return {"p0": self.p0, "mu_p0": self.mu_p0, "class": self.fig1_class,
                "lambda0": self.lambda0, "s_star": self.s_star, "mu1": self.mu1}


def spectral_profile(model: MaxwellModel) -> SpectralProfile:
    lam0 = lambda_p(model, 0.0)
    mu1 = mu_p(model, 1.0)
    if model.is_linear:
        return SpectralProfile(model, math.inf, math.nan, "a", lam0, math.nan, mu1)
    p0, mu0 = find_p0(model)
    s_star = find_s_star(model) if p0 > 1 else math.nan
    return SpectralProfile(model, p0, mu0, classify(model, p0, mu0), lam0, s_star, mu1)
