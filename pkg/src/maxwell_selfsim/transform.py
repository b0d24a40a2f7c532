"""Radial Fourier inversion of isotropic characteristic functions.

With ``x = |k|**2`` an isotropic characteristic function ``u(x)`` is the
Fourier transform of a radial density ``f(|v|)``.  In three dimensions

    f(r) = 1/(2 pi**2 r) int_0^inf k sin(k r) u(k**2) dk,

and in one dimension ``f(r) = (1/pi) int_0^inf cos(k r) u(k**2) dk``.  Both
integrals are evaluated with composite Gauss-Legendre panels no wider than
``pi/(4 r)``, truncated where ``|u| < 1e-12``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .grid import GridFunction

__all__ = [
    "RadialDistribution",
    "TailFit",
    "inverse_radial_fourier",
    "forward_radial_fourier",
    "tail_fit",
]

PANEL_NODES = 16
U_CUTOFF = 1e-12
# relative tolerance for negative ringing
EPS_POS = 1e-4
# slope drift across the window above which a fit is not a power law
POWER_LAW_DRIFT = 0.5
R_CHUNK = 32


@dataclass(frozen=True)
class RadialDistribution:
    """Density ``f(r)`` of an isotropic distribution in ``dimension`` dimensions."""

    r_nodes: np.ndarray
    density: np.ndarray
    dimension: int
    mass_estimate: float

    @property
    def min_density(self) -> float:
        return float(np.min(self.density))

    @property
    def positivity_ok(self) -> bool:
        """Negative values, if any, stay within the ringing tolerance."""
        return self.min_density >= -EPS_POS * float(np.max(np.abs(self.density)))


def _check_dim(d: int):
    if d not in (1, 3):
        raise ValueError(f"only d = 1 and d = 3 are supported, got d={d}")


def _cutoff(u: GridFunction) -> float:
    """Wave number beyond which ``|u(k**2)| < U_CUTOFF`` on the grid."""
    x = u.x_nodes
    big = np.flatnonzero(np.abs(u.values) >= U_CUTOFF)
    if big.size == 0:
        return math.sqrt(x[0])
    i = big[-1]
    return math.sqrt(x[min(i + 1, x.size - 1)])


def _mass(r: np.ndarray, f: np.ndarray, d: int) -> float:
    weight = 4.0 * np.pi * r ** 2 if d == 3 else 2.0 * np.ones_like(r)
    if r.size < 2:
        return math.nan
    return float(integrate.simpson(weight * f, x=r))


def inverse_radial_fourier(u: GridFunction, d: int, r_nodes: Sequence[float]) -> RadialDistribution:
    """Density of the distribution whose characteristic function is ``u(|k|**2)``.

    Raises
    ------
    ValueError
        For ``d`` other than 1 or 3, a nonzero ``tail_limit`` or ``u = 0``.
    """
    _check_dim(d)
    if u.tail_limit != 0.0:
        raise ValueError("u must decay: tail_limit must be 0")
    if u.value_at_zero == 0.0 and not np.any(u.values):
        raise ValueError("u is identically zero")
    r = np.asarray(r_nodes, dtype=float)
    if r.ndim != 1 or np.any(r < 0) or np.any(np.diff(r) <= 0):
        raise ValueError("r_nodes must be increasing and nonnegative")
    k_max = _cutoff(u)
    r_top = float(r[-1]) if r.size else 0.0
    width = k_max / 32.0
    if r_top > 0:
        width = min(width, math.pi / (4.0 * r_top))
    n_panels = max(1, int(math.ceil(k_max / width)))
    z, wz = np.polynomial.legendre.leggauss(PANEL_NODES)
    edges = np.linspace(0.0, k_max, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    k = ((edges[:-1] + half)[:, None] + half[:, None] * z[None, :]).ravel()
    wk = (half[:, None] * wz[None, :]).ravel()
    uk = u(k * k)
    f = np.empty(r.size)
    for lo in range(0, r.size, R_CHUNK):
        rc = r[lo:lo + R_CHUNK]
        kr = np.outer(rc, k)
        if d == 3:
            # sin(kr)/(kr) -> 1 at r = 0
            kern = np.sinc(kr / np.pi) * (k * k)[None, :]
            f[lo:lo + R_CHUNK] = kern @ (wk * uk) / (2.0 * np.pi ** 2)
        else:
            f[lo:lo + R_CHUNK] = np.cos(kr) @ (wk * uk) / np.pi
    return RadialDistribution(r, f, d, _mass(r, f, d))


def forward_radial_fourier(dist: RadialDistribution, k: Sequence[float]) -> np.ndarray:
    """Characteristic function at wave numbers ``k`` (Simpson rule in ``r``).

    Accurate when ``dist.r_nodes`` resolves the density and covers its
    support.
    """
    _check_dim(dist.dimension)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    r, f = dist.r_nodes, dist.density
    kr = np.outer(k, r)
    if dist.dimension == 3:
        integrand = 4.0 * np.pi * (r * r * f)[None, :] * np.sinc(kr / np.pi)
    else:
        integrand = 2.0 * f[None, :] * np.cos(kr)
    return integrate.simpson(integrand, x=r, axis=1)


class TailFit(NamedTuple):
    """Power-law decay order and the drift of the local slope across the window."""

    exponent: float
    fit_quality: float

    @property
    def power_law(self) -> bool:
        return self.fit_quality < POWER_LAW_DRIFT


def tail_fit(dist: RadialDistribution, r_window: Sequence[float]) -> TailFit:
    """Least-squares fit of ``log f`` against ``log r`` on ``r_window``.

    ``fit_quality`` is the change of the local slope across the window from
    a quadratic fit in ``log r``: near 0 for a power law, large for a
    log-concave tail such as a Gaussian.

    Raises
    ------
    ValueError
        If the window is outside the nodes, holds fewer than 3 nodes or the
        density is not positive on it.
    """
    lo, hi = float(r_window[0]), float(r_window[1])
    r = dist.r_nodes
    if not (0 < lo < hi) or lo < r[0] or hi > r[-1]:
        raise ValueError("window must lie inside the r nodes")
    sel = (r >= lo) & (r <= hi)
    if sel.sum() < 3:
        raise ValueError("window holds fewer than 3 nodes")
    f = dist.density[sel]
    if np.any(f <= 0):
        raise ValueError("density is not positive on the window; refusing to fit")
    lr, lf = np.log(r[sel]), np.log(f)
    slope, _ = np.polyfit(lr, lf, 1)
    c2, _, _ = np.polyfit(lr, lf, 2)
    drift = abs(2.0 * c2 * (lr[-1] - lr[0]))
    return TailFit(float(-slope), float(drift))
