"""Bounded functions of x >= 0 sampled on a logarithmic grid.

A :class:`GridFunction` stores node values on a log-uniform grid plus the
value at ``x = 0`` and a rule for ``x`` beyond the last node.  Evaluation
between nodes interpolates the exponent ``E = -ln u`` log-log whenever both
neighbouring values lie strictly inside ``(0, 1)``; otherwise it falls back
to linear interpolation in ``(ln x, u)``.  The log-log rule reproduces
stretched exponentials ``exp(-c x**q)`` exactly, is order preserving and
never leaves the range spanned by the two node values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

__all__ = [
    "LogGrid",
    "Stencil",
    "GridFunction",
    "eval_grid",
    "gaussian_damp",
    "sample",
    "exp_power",
    "mix",
    "E_MAX",
]

# exponents beyond this are stored as this value; exp(-E_MAX) underflows to 0
E_MAX = 1e4


@dataclass(frozen=True)
class LogGrid:
    """Log-uniform nodes on ``[x_min, x_max]``; the point ``x = 0`` is implicit."""

    x_min: float = 1e-8
    x_max: float = 1e6
    n: int = 2048

    def __post_init__(self):
        if not (0 < self.x_min < self.x_max):
            raise ValueError("grid range must satisfy 0 < x_min < x_max")
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")

    @cached_property
    def log_nodes(self) -> np.ndarray:
        return np.linspace(np.log(self.x_min), np.log(self.x_max), self.n)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.exp(self.log_nodes)
        # pin the end points so range checks are exact
        x[0], x[-1] = self.x_min, self.x_max
        return x

    @property
    def h(self) -> float:
        """Spacing in ``ln x``."""
        return float(np.log(self.x_max / self.x_min) / (self.n - 1))

    def stencil(self, points) -> "Stencil":
        return Stencil.build(self, np.asarray(points, dtype=float))


@dataclass(frozen=True, eq=False)
class Stencil:
    """Precomputed interpolation data for a fixed set of evaluation points.

    Building the stencil is the expensive part of evaluation; operators that
    repeatedly evaluate functions at the same scaled points cache it.
    """

    grid: LogGrid
    shape: tuple
    zero: np.ndarray
    below: np.ndarray
    above: np.ndarray
    inside: np.ndarray
    idx: np.ndarray
    theta: np.ndarray
    y_below: np.ndarray
    y_above: np.ndarray
    rows: Optional["RowShift"] = None

    @classmethod
    def for_scales(cls, grid: LogGrid, scales: np.ndarray) -> "Stencil":
        """Stencil for the points ``a * nodes`` for every scale ``a`` in ``scales``.

        On a log-uniform grid each such row is a constant index shift with a
        constant interpolation weight, which allows evaluation by row copies
        instead of per-point gathers.
        """
        scales = np.asarray(scales, dtype=float)
        st = cls.build(grid, scales[..., None] * grid.nodes)
        a = scales.ravel()
        n = grid.n
        k = np.zeros(a.size, dtype=np.int64)
        theta = np.zeros(a.size)
        usable = a > 0
        t = np.log(a[usable]) / grid.h
        kk = np.floor(t)
        th = t - kk
        up = th > 1.0 - 1e-10
        kk[up] += 1.0
        th[up | (th < 1e-10)] = 0.0
        k[usable], theta[usable] = kk, th
        usable[usable] = np.abs(kk) < n
        k[~usable] = 0
        i = np.arange(n)[None, :] + k[:, None]
        exact = theta == 0.0
        valid = usable[:, None] & (i >= 0) & ((i <= n - 2) | ((i == n - 1) & exact[:, None]))
        flat_valid = valid.ravel()
        sel = ~flat_valid[st.inside]
        pad = int(np.max(np.abs(k))) + 1
        rows = RowShift(k + pad, theta[:, None], exact, pad, st.inside[sel], st.idx[sel],
                        st.theta[sel])
        return cls(grid, st.shape, st.zero, st.below, st.above, st.inside, st.idx, st.theta,
                   st.y_below, st.y_above, rows)

    @classmethod
    def build(cls, grid: LogGrid, y: np.ndarray) -> "Stencil":
        flat = y.ravel()
        if np.any(flat < 0) or np.any(~np.isfinite(flat)):
            raise ValueError("evaluation points must be finite and >= 0")
        zero = np.flatnonzero(flat == 0)
        below = np.flatnonzero((flat > 0) & (flat < grid.x_min))
        above = np.flatnonzero(flat > grid.x_max)
        inside = np.flatnonzero((flat >= grid.x_min) & (flat <= grid.x_max))
        yin = flat[inside]
        x = grid.nodes
        idx = np.searchsorted(x, yin, side="right") - 1
        idx = np.clip(idx, 0, grid.n - 2)
        t = grid.log_nodes
        theta = (np.log(yin) - t[idx]) / (t[idx + 1] - t[idx])
        theta[yin == x[idx]] = 0.0
        theta[yin == x[idx + 1]] = 1.0
        return cls(grid, y.shape, zero, below, above, inside, idx,
                   np.clip(theta, 0.0, 1.0), flat[below], flat[above])


def _exp_neg_exp(a):
    # u = exp(-exp(ln E)) in place
    np.exp(a, out=a)
    np.negative(a, out=a)
    return np.exp(a, out=a)


@dataclass(frozen=True, eq=False)
class RowShift:
    """Row-constant interpolation data of a :meth:`Stencil.for_scales` stencil.

    Points not covered by the row rule but inside the grid are listed in
    ``fix`` with their generic interpolation data.
    """

    start: np.ndarray
    theta: np.ndarray
    exact: np.ndarray
    pad: int
    fix: np.ndarray
    fix_idx: np.ndarray
    fix_theta: np.ndarray

    def window(self, arr: np.ndarray, n_out: int, offset: int = 0) -> np.ndarray:
        """Rows ``arr[j + k_r + offset]``, ``j < n_out``; zero outside ``arr``."""
        padded = np.zeros(arr.size + 2 * self.pad + 1, dtype=arr.dtype)
        padded[self.pad:self.pad + arr.size] = arr
        return np.lib.stride_tricks.sliding_window_view(padded, n_out)[self.start + offset]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Function of ``x >= 0`` known at the nodes of a :class:`LogGrid`.

    ``characteristic`` marks functions that are characteristic functions
    (``u(0) = 1`` and ``|u| <= 1``); the flag is checked at construction.

    Strictly positive functions may also carry ``exponent = -ln u`` at the
    nodes.  Values close to 1 cannot resolve ``1 - u`` below ``1e-16`` in
    double precision, while the exponent keeps full relative accuracy at
    both ends of the grid; operators use it whenever it is present.
    """

    grid: LogGrid
    values: np.ndarray
    value_at_zero: float = 1.0
    tail_limit: float = 0.0
    tail_exponent: Optional[float] = None
    characteristic: bool = False
    exponent: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.exponent is not None:
            e = np.minimum(np.asarray(self.exponent, dtype=float), E_MAX)
            if e.shape != (self.grid.n,) or np.any(np.isnan(e)):
                raise ValueError("exponent must be a real array with one entry per node")
            e.setflags(write=False)
            object.__setattr__(self, "exponent", e)
            if self.values is None:
                object.__setattr__(self, "values", np.exp(-e))
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.characteristic:
            if self.value_at_zero != 1.0:
                raise ValueError("characteristic-type functions need u(0) = 1")
            if self.sup_norm() > 1.0 + 1e-12:
                raise ValueError("characteristic-type functions need |u| <= 1")

    @property
    def x_nodes(self) -> np.ndarray:
        return self.grid.nodes

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.values)), abs(self.value_at_zero),
                         abs(self.tail_limit)))

    @classmethod
    def from_exponent(cls, grid: LogGrid, exponent, **kw) -> "GridFunction":
        """Build ``exp(-exponent)`` keeping the exponent."""
        return cls(grid, None, exponent=exponent, **kw)

    @property
    def complement(self) -> np.ndarray:
        """``1 - u`` at the nodes, accurate near ``u = 1`` when possible."""
        if self.exponent is not None:
            return -np.expm1(-self.exponent)
        return 1.0 - self.values

    def replace(self, values=None, **kw) -> "GridFunction":
        """Copy with some fields changed; new ``values`` drop the exponent."""
        kw.setdefault("value_at_zero", self.value_at_zero)
        kw.setdefault("tail_limit", self.tail_limit)
        kw.setdefault("tail_exponent", self.tail_exponent)
        kw.setdefault("characteristic", self.characteristic)
        if values is None and "exponent" not in kw:
            kw["exponent"] = self.exponent
        if values is None and kw.get("exponent") is None:
            values = self.values
        return GridFunction(self.grid, values, **kw)

    @cached_property
    def _log_exponent(self):
        """Per-node ``ln E`` (0 where undefined), its increments and interval flags."""
        if self.exponent is not None:
            e = self.exponent
            ok = e > 0
        else:
            v = self.values
            ok = (v > 0) & (v < 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                e = -np.log(v)
        le = np.zeros(e.shape)
        le[ok] = np.log(e[ok])
        interval_ok = ok[:-1] & ok[1:]
        dle = np.where(interval_ok, np.diff(le), 0.0)
        return le, dle, interval_ok

    @cached_property
    def origin_fit(self):
        """``(alpha, beta)`` with ``E = alpha x + beta x**2`` through the first two nodes.

        Used below the first node when ``u(0) = 1`` and an exponent is stored;
        ``None`` when the fit would not be increasing on ``[0, x_min]``.
        """
        if self.exponent is None or self.value_at_zero != 1.0:
            return None
        x0, x1 = self.grid.nodes[:2]
        e0, e1 = self.exponent[:2]
        beta = (e1 / x1 - e0 / x0) / (x1 - x0)
        alpha = e0 / x0 - beta * x0
        if not (alpha > 0 and alpha + 2 * beta * x0 > 0):
            return None
        return float(alpha), float(beta)

    def _interp_exponent(self, idx, theta):
        """Interpolated exponent inside the grid (requires ``exponent``)."""
        return self._interp_log(self.exponent, idx, theta, lambda a: np.exp(a, out=a))

    def _interp_log(self, v, idx, theta, from_log):
        # linear in (log x, v) where the interval is not log-log admissible;
        # in-place updates keep large temporaries to a minimum
        le, dle, interval_ok = self._log_exponent
        v0 = v[idx]
        lin = v[idx + 1]
        lin -= v0
        lin *= theta
        lin += v0
        lg = dle[idx]
        lg *= theta
        lg += le[idx]
        np.copyto(lin, from_log(lg), where=interval_ok[idx])
        # exact nodes reproduce stored values bit for bit
        at0 = np.flatnonzero(theta == 0.0)
        lin[at0] = v0[at0]
        at1 = np.flatnonzero(theta == 1.0)
        lin[at1] = v[idx[at1] + 1]
        return lin

    def _interp_rows(self, v, rs: RowShift, from_log):
        le, dle, interval_ok = self._log_exponent
        n = self.grid.n
        lg = rs.window(dle, n)
        lg *= rs.theta
        lg += rs.window(le, n)
        if interval_ok.all():
            out = from_log(lg)
            if rs.exact.any():
                out[rs.exact] = rs.window(v, n)[rs.exact]
            return out.ravel()
        v0 = rs.window(v, n)
        lin = rs.window(v, n, 1) - v0
        lin *= rs.theta
        lin += v0
        use_log = rs.window(interval_ok, n)
        use_log &= ~rs.exact[:, None]
        np.copyto(lin, from_log(lg), where=use_log)
        return lin.ravel()

    def _inside_values(self, st: Stencil, v, from_log, generic):
        """Flat array with interpolated values at the inside points of ``st``."""
        if st.rows is None:
            out = np.empty(int(np.prod(st.shape)) if st.shape else 1)
            out[st.inside] = generic(st.idx, st.theta)
            return out
        rs = st.rows
        out = self._interp_rows(v, rs, from_log)
        if rs.fix.size:
            out[rs.fix] = generic(rs.fix_idx, rs.fix_theta)
        return out

    def evaluate_stencil_exponent(self, st: Stencil) -> np.ndarray:
        """Exponent ``-ln u`` at the stencil points (requires ``exponent``)."""
        if self.exponent is None:
            raise ValueError("function carries no exponent")
        out = self._inside_values(st, self.exponent, lambda a: np.exp(a, out=a),
                                  self._interp_exponent)
        u0 = self.value_at_zero
        c0 = 1.0 - u0
        out[st.zero] = -np.log(u0) if u0 > 0 else E_MAX
        y = st.y_below
        fit = self.origin_fit
        if fit is not None:
            out[st.below] = y * (fit[0] + fit[1] * y)
        else:
            t = y / self.grid.x_min
            comp = c0 * (1.0 - t) - np.expm1(-self.exponent[0]) * t
            out[st.below] = -np.log1p(-comp)
        with np.errstate(divide="ignore"):
            out[st.above] = np.minimum(-np.log(self._tail(st.y_above)), E_MAX)
        return out.reshape(st.shape)

    def _interp(self, idx, theta):
        if self.exponent is not None:
            out = self._interp_exponent(idx, theta)
            np.negative(out, out=out)
            return np.exp(out, out=out)

        return self._interp_log(self.values, idx, theta, _exp_neg_exp)

    def _tail(self, y):
        c = self.tail_limit
        if self.tail_exponent is None:
            return np.full(y.shape, c)
        return c + (self.values[-1] - c) * (y / self.grid.x_max) ** (-self.tail_exponent)

    def evaluate_stencil(self, st: Stencil) -> np.ndarray:
        if st.grid != self.grid:
            raise ValueError("stencil built for a different grid")
        if self.exponent is not None:
            out = self._inside_values(st, self.exponent, lambda a: np.exp(a, out=a),
                                      self._interp_exponent)
            np.negative(out, out=out)
            np.exp(out, out=out)
        else:
            out = self._inside_values(st, self.values, _exp_neg_exp, self._interp)
        out[st.zero] = self.value_at_zero
        u0 = self.value_at_zero
        out[st.below] = u0 + (self.values[0] - u0) * (st.y_below / self.grid.x_min)
        out[st.above] = self._tail(st.y_above)
        return out.reshape(st.shape)

    def __call__(self, x):
        """Evaluate at arbitrary ``x >= 0`` (scalar or array)."""
        x_arr = np.asarray(x, dtype=float)
        out = self.evaluate_stencil(self.grid.stencil(x_arr))
        return float(out) if x_arr.ndim == 0 else out

    def dilate(self, factor: float) -> "GridFunction":
        """Return ``x -> u(factor * x)`` resampled on the same grid."""
        if factor <= 0:
            raise ValueError("dilation factor must be positive")
        st = self.grid.stencil(self.x_nodes * factor)
        if self.exponent is not None:
            return self.replace(exponent=self.evaluate_stencil_exponent(st))
        return self.replace(self.evaluate_stencil(st))


def eval_grid(u: GridFunction, x):
    """Evaluate ``u`` at ``x``; raises for negative ``x``."""
    if np.any(np.asarray(x) < 0):
        raise ValueError("x must be nonnegative")
    return u(x)


def gaussian_damp(u: GridFunction, c: float) -> GridFunction:
    """Multiply ``u`` by ``exp(-c x)``: undoes the cold-thermostat substitution."""
    if not c > 0:
        raise ValueError("damping constant must be positive")
    if u.exponent is not None:
        return u.replace(exponent=u.exponent + c * u.x_nodes, tail_limit=0.0,
                         tail_exponent=None)
    return u.replace(u.values * np.exp(-c * u.x_nodes), tail_limit=0.0,
                     tail_exponent=None)


def sample(grid: LogGrid, f: Callable[[np.ndarray], np.ndarray], *,
           value_at_zero: Optional[float] = None, tail_limit: float = 0.0,
           characteristic: bool = False, **kw) -> GridFunction:
    """Sample a vectorised callable on ``grid``."""
    if value_at_zero is None:
        value_at_zero = float(f(np.array([0.0]))[0])
    return GridFunction(grid, np.asarray(f(grid.nodes), dtype=float),
                        value_at_zero=value_at_zero, tail_limit=tail_limit,
                        characteristic=characteristic, **kw)


def exp_power(grid: LogGrid, p: float = 1.0, c: float = 1.0) -> GridFunction:
    """The stretched exponential ``exp(-c x**p)`` as a characteristic function."""
    return GridFunction.from_exponent(grid, c * grid.nodes ** p, value_at_zero=1.0,
                                      tail_limit=0.0, characteristic=True)


def exponent_from_parts(u: np.ndarray, comp: np.ndarray) -> np.ndarray:
    """``-ln u`` from ``u`` and ``1 - u``, choosing the accurate one."""
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(u > 0.5, -np.log1p(-comp), -np.log(np.maximum(u, 0.0)))
    return np.minimum(e, E_MAX)


def mix(functions, coeffs) -> GridFunction:
    """Linear combination ``sum c_i u_i`` on a common grid.

    When every input carries an exponent, all values are positive, the
    coefficients are nonnegative and sum to 1, the result keeps an exponent
    computed from both ``u`` and ``1 - u``.
    """
    functions = list(functions)
    coeffs = [float(c) for c in coeffs]
    first = functions[0]
    vals = sum(c * f.values for c, f in zip(coeffs, functions))
    at0 = sum(c * f.value_at_zero for c, f in zip(coeffs, functions))
    tail = sum(c * f.tail_limit for c, f in zip(coeffs, functions))
    convex = all(c >= 0 for c in coeffs) and abs(sum(coeffs) - 1.0) < 1e-14
    kw = dict(value_at_zero=at0, tail_limit=tail,
              characteristic=convex and all(f.characteristic for f in functions))
    if kw["characteristic"]:
        kw["value_at_zero"] = 1.0
    if convex and all(f.exponent is not None for f in functions):
        comp = sum(c * f.complement for c, f in zip(coeffs, functions))
        return GridFunction.from_exponent(first.grid, exponent_from_parts(vals, comp), **kw)
    return GridFunction(first.grid, vals, **kw)
