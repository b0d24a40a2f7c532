"""Generalized Maxwell models stored as discrete measures.

A model is a finite list of interaction terms.  A term of order ``n`` is a
set of atoms ``(weight, (a_1, ..., a_n))`` and acts on a bounded function
``u`` of ``x >= 0`` by

    Gamma_n(u)(x) = sum_j weight_j * prod_k u(a_jk x).

The positive linear operator ``L`` replaces the product by a sum over the
slots.  Continuous angular kernels are discretized once, at construction,
by Gauss-Legendre quadrature in the angle variable ``s = (1 - cos t)/2``.

When the kernel data are rational (odd dimension, constant angular kernel,
rational parameters, or custom atoms given as fractions) the model also
carries an exact description used by the rational moment recursion.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .grid import GridFunction, LogGrid, Stencil, exponent_from_parts

__all__ = [
    "ExactTerm",
    "InteractionTerm",
    "MaxwellModel",
    "make_elastic",
    "make_thermostat",
    "make_inelastic",
    "make_custom",
    "gamma_apply",
    "l_apply",
    "abs_diff_bound",
    "format_model",
    "parse_model",
    "read_model",
    "write_model",
]

Number = Union[float, int, Fraction]
GSpec = Union[None, float, Callable[[np.ndarray], np.ndarray]]

SUP_SLACK = 1e-12


# ---------------------------------------------------------------------------
# exact polynomial data


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    return Fraction(repr(float(v)))


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _poly_pow(p, k):
    out = [Fraction(1)]
    for _ in range(k):
        out = _poly_mul(out, p)
    return out


def _poly_integral01(p) -> Fraction:
    return sum((c / (i + 1) for i, c in enumerate(p)), Fraction(0))


@dataclass(frozen=True)
class ExactTerm:
    """Rational description of one term.

    The term is ``int_0^1 ds W(s) prod_k u((c0_k + c1_k s) x)`` with ``W`` a
    polynomial with rational coefficients.  A single atom is the special case
    of constant ``W`` and constant scales.
    """

    order: int
    weight_poly: tuple
    slots: tuple  # ((c0, c1), ...) one per slot

    def moment(self, k: Sequence[int]) -> Fraction:
        """``int W(s) prod_i (c0_i + c1_i s)**k_i ds`` exactly."""
        poly = list(self.weight_poly)
        for (c0, c1), ki in zip(self.slots, k):
            if ki:
                poly = _poly_mul(poly, _poly_pow([c0, c1], ki))
        return _poly_integral01(poly)

    @property
    def mass(self) -> Fraction:
        return _poly_integral01(self.weight_poly)

    def scaled(self, factor: Fraction) -> "ExactTerm":
        return ExactTerm(self.order, tuple(c * factor for c in self.weight_poly),
                         self.slots)


# ---------------------------------------------------------------------------
# terms and models


@dataclass(frozen=True, eq=False)
class InteractionTerm:
    """Weighted atoms of one multilinearity order.

    Attributes
    ----------
    order : int
        Number of slots ``n``.
    weights : ndarray, shape (m,)
    scales : ndarray, shape (m, n)
    exact : tuple of ExactTerm or None
        Rational description of the same measure when available.
    """

    order: int
    weights: np.ndarray
    scales: np.ndarray
    exact: Optional[tuple] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        a = np.asarray(self.scales, dtype=float)
        if self.order < 1:
            raise ValueError("term order must be a positive integer")
        if a.ndim == 1:
            a = a.reshape(-1, self.order)
        if a.shape != (w.size, self.order):
            raise ValueError(f"scales must have shape ({w.size}, {self.order})")
        if w.size == 0:
            raise ValueError("a term needs at least one node")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("scales must be finite and nonnegative")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scales", a)

    @classmethod
    def from_nodes(cls, nodes: Iterable[tuple]) -> "InteractionTerm":
        """Build from ``[(weight, (a_1, ..., a_n)), ...]``.

        If every weight and scale is an ``int`` or ``Fraction`` the exact
        description is attached automatically.
        """
        nodes = [(wt, tuple(sc)) for wt, sc in nodes]
        if not nodes:
            raise ValueError("a term needs at least one node")
        orders = {len(sc) for _, sc in nodes}
        if len(orders) != 1:
            raise ValueError("all nodes of a term must have the same order")
        n = orders.pop()
        exact = None
        if all(isinstance(v, Rational) for wt, sc in nodes for v in (wt, *sc)):
            exact = tuple(
                ExactTerm(n, (Fraction(wt),), tuple((Fraction(a), Fraction(0)) for a in sc))
                for wt, sc in nodes
            )
        return cls(n, np.array([float(wt) for wt, _ in nodes]),
                   np.array([[float(a) for a in sc] for _, sc in nodes]), exact)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def radius(self) -> float:
        """Bound ``R`` with ``sum_k a_k**2 <= R**2`` for every node."""
        return float(np.sqrt(np.max(np.sum(self.scales ** 2, axis=1))))

    @property
    def n_nodes(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class MaxwellModel:
    """A finite mixture of interaction terms.

    ``transform_kind`` is ``"fourier"`` when ``x = |k|**2`` and ``"laplace"``
    for the one-dimensional Laplace-variable models.
    """

    terms: tuple
    name: str = "custom"
    dimension_hint: Optional[int] = None
    transform_kind: str = "fourier"
    params: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a model needs at least one term")
        object.__setattr__(self, "terms", terms)
        if self.transform_kind not in ("fourier", "laplace"):
            raise ValueError("transform_kind must be 'fourier' or 'laplace'")
        m = self.total_mass
        if not (0.0 < m <= 1.0 + 1e-12):
            raise ValueError(f"total mass must lie in (0, 1], got {m!r}")

    @property
    def total_mass(self) -> float:
        return float(math.fsum(float(w) for t in self.terms for w in t.weights))

    @property
    def sub_stochastic(self) -> bool:
        return self.total_mass < 1.0 - 1e-12

    @property
    def max_order(self) -> int:
        return max(t.order for t in self.terms)

    @property
    def is_linear(self) -> bool:
        return self.max_order == 1

    @property
    def max_scale(self) -> float:
        return float(max(np.max(t.scales) for t in self.terms))

    @property
    def exact(self) -> Optional[tuple]:
        """Concatenated exact terms, or ``None`` if any term lacks them."""
        if any(t.exact is None for t in self.terms):
            return None
        return tuple(e for t in self.terms for e in t.exact)

    def fingerprint(self) -> str:
        return hashlib.sha256(format_model(self).encode()).hexdigest()[:16]

    def stencils(self, grid: LogGrid) -> list:
        """Per-term stencils for the points ``a_jk * x_i`` (cached)."""
        key = ("stencil", grid)
        if key not in self._cache:
            self._cache[key] = [Stencil.for_scales(grid, t.scales) for t in self.terms]
        return self._cache[key]


# ---------------------------------------------------------------------------
# preset constructors


def _gl_theta(n_quad: int):
    """Gauss-Legendre nodes in the angle ``t`` on ``[0, pi]`` mapped to ``s``."""
    if n_quad < 2:
        raise ValueError("n_quad must be at least 2")
    z, wz = np.polynomial.legendre.leggauss(n_quad)
    t = 0.5 * np.pi * (z + 1.0)
    wt = 0.5 * np.pi * wz
    s = 0.5 * (1.0 - np.cos(t))
    return t, wt, s


def _angular(g_spec: GSpec, s: np.ndarray) -> np.ndarray:
    z = 1.0 - 2.0 * s
    if g_spec is None:
        g = np.ones_like(s)
    elif callable(g_spec):
        g = np.asarray(g_spec(z), dtype=float) * np.ones_like(s)
    else:
        g = np.full_like(s, float(g_spec))
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("angular kernel must be finite and nonnegative at the quadrature nodes")
    return g


def _check_dim(d: int):
    if int(d) != d or d < 2:
        raise ValueError("dimension d must be an integer >= 2")


def _elastic_weights(d: int, g_spec: GSpec, n_quad: int):
    """Nodes ``s_j`` and normalized weights of ``g(1-2s)[s(1-s)]^((d-3)/2) ds``."""
    t, wt, s = _gl_theta(n_quad)
    # [s(1-s)]^((d-3)/2) ds = (sin t / 2)^(d-2) dt
    w = wt * (0.5 * np.sin(t)) ** (d - 2) * _angular(g_spec, s)
    total = w.sum()
    if not total > 0:
        raise ValueError("angular kernel has zero mass")
    return s, w / total


def _const_g(g_spec: GSpec) -> bool:
    return g_spec is None or (not callable(g_spec) and float(g_spec) > 0)


def _exact_weight_poly(base, half_power: int):
    """Normalized rational polynomial ``base(s)**half_power``."""
    poly = _poly_pow(base, half_power)
    mass = _poly_integral01(poly)
    return [c / mass for c in poly]


def make_elastic(d: int = 3, g_spec: GSpec = None, n_quad: int = 64) -> MaxwellModel:
    """Elastic Boltzmann model: one bilinear term with scales ``(s, 1 - s)``.

    Parameters
    ----------
    d : int
        Space dimension, ``d >= 2``.
    g_spec : None, float or callable
        Angular kernel ``g(z)`` on ``[-1, 1]``; ``None`` means constant.
    n_quad : int
        Number of Gauss-Legendre nodes in the angle variable.
    """
    _check_dim(d)
    s, w = _elastic_weights(d, g_spec, n_quad)
    exact = None
    if d % 2 == 1 and _const_g(g_spec):
        W = _exact_weight_poly([Fraction(0), Fraction(1), Fraction(-1)], (d - 3) // 2)
        exact = (ExactTerm(2, tuple(W), ((Fraction(0), Fraction(1)), (Fraction(1), Fraction(-1)))),)
    term = InteractionTerm(2, w, np.column_stack([s, 1.0 - s]), exact)
    return MaxwellModel((term,), name="elastic", dimension_hint=d,
                        params=(("d", d), ("n_quad", n_quad)))


def make_thermostat(d: int = 3, g_spec: GSpec = None, m: Number = 1.0,
                    theta: Number = 1.0, n_quad: int = 64) -> MaxwellModel:
    """Elastic model coupled to a cold thermostat of mass ratio ``m``.

    The bilinear part carries weight ``1/(1+theta)``; the linear part has
    scale ``1 - beta s`` with ``beta = 4m/(1+m)**2`` and weight
    ``theta/(1+theta)``.
    """
    _check_dim(d)
    if not m > 0:
        raise ValueError("mass ratio m must be positive")
    if not theta > 0:
        raise ValueError("coupling theta must be positive")
    s, w = _elastic_weights(d, g_spec, n_quad)
    beta = 4.0 * float(m) / (1.0 + float(m)) ** 2
    th = float(theta)
    bil_exact = lin_exact = None
    if d % 2 == 1 and _const_g(g_spec):
        W = _exact_weight_poly([Fraction(0), Fraction(1), Fraction(-1)], (d - 3) // 2)
        fm, fth = _as_fraction(m), _as_fraction(theta)
        fb = 4 * fm / (1 + fm) ** 2
        c_bil, c_lin = 1 / (1 + fth), fth / (1 + fth)
        bil_exact = (ExactTerm(2, tuple(c * c_bil for c in W),
                               ((Fraction(0), Fraction(1)), (Fraction(1), Fraction(-1)))),)
        lin_exact = (ExactTerm(1, tuple(c * c_lin for c in W), ((Fraction(1), -fb),)),)
    bil = InteractionTerm(2, w / (1.0 + th), np.column_stack([s, 1.0 - s]), bil_exact)
    lin = InteractionTerm(1, w * th / (1.0 + th), (1.0 - beta * s)[:, None], lin_exact)
    return MaxwellModel((bil, lin), name="thermostat", dimension_hint=d,
                        params=(("d", d), ("m", float(m)), ("theta", th), ("n_quad", n_quad)))


def make_inelastic(d: int = 3, e: Number = 0.5, n_quad: int = 64) -> MaxwellModel:
    """Inelastic Maxwell model with restitution coefficient ``e``.

    Scales are ``(a s, 1 - b s)`` with ``a = (1+e)**2/4`` and
    ``b = (1+e)(3-e)/4``; the weight is ``(1-s)**((d-3)/2)`` normalized.
    """
    _check_dim(d)
    if not (0 < e <= 1):
        raise ValueError("restitution coefficient must lie in (0, 1]")
    t, wt, s = _gl_theta(n_quad)
    # (1-s)^((d-3)/2) ds = cos(t/2)^(d-3) * sin(t)/2 dt
    w = wt * np.cos(0.5 * t) ** (d - 3) * 0.5 * np.sin(t)
    w = w / w.sum()
    ef = float(e)
    a = (1.0 + ef) ** 2 / 4.0
    b = (1.0 + ef) * (3.0 - ef) / 4.0
    exact = None
    if d % 2 == 1:
        fe = _as_fraction(e)
        W = _exact_weight_poly([Fraction(1), Fraction(-1)], (d - 3) // 2)
        fa, fb = (1 + fe) ** 2 / 4, (1 + fe) * (3 - fe) / 4
        exact = (ExactTerm(2, tuple(W), ((Fraction(0), fa), (Fraction(1), -fb))),)
    term = InteractionTerm(2, w, np.column_stack([a * s, 1.0 - b * s]), exact)
    return MaxwellModel((term,), name="inelastic", dimension_hint=d,
                        params=(("d", d), ("e", ef), ("n_quad", n_quad)))


def make_custom(terms: Sequence[InteractionTerm], transform_kind: str = "fourier",
                name: str = "custom", dimension_hint: Optional[int] = None) -> MaxwellModel:
    """Store a user supplied list of terms verbatim."""
    terms = tuple(terms)
    if not terms:
        raise ValueError("empty term list")
    return MaxwellModel(terms, name=name, dimension_hint=dimension_hint,
                        transform_kind=transform_kind)


# ---------------------------------------------------------------------------
# operators


def _slot_values(model: MaxwellModel, u: GridFunction):
    """Yield ``(term, values)`` with values of shape ``(m, n, N)``."""
    for term, st in zip(model.terms, model.stencils(u.grid)):
        yield term, u.evaluate_stencil(st)


def _limit_values(term: InteractionTerm, u: GridFunction) -> np.ndarray:
    """Slot values as ``x -> infinity``: the tail for positive scales."""
    return np.where(term.scales > 0, u.tail_limit, u.value_at_zero)


def gamma_apply(model: MaxwellModel, u: GridFunction, strict: bool = True) -> GridFunction:
    """Apply the multilinear operator on the unit ball.

    ``strict=False`` skips the norm check; it is meant for iterates of
    schemes with signed quadrature weights that may leave the unit ball by
    a rounding-sized amount.
    """
    if strict and u.sup_norm() > 1.0 + SUP_SLACK:
        raise ValueError("gamma_apply requires ||u|| <= 1")
    if u.exponent is not None and u.value_at_zero == 1.0:
        return _gamma_apply_exponent(model, u)
    # near 1 a normalized model is evaluated as 1 - sum w (1 - prod u),
    # which is exact for u = 1; small values use the direct sum, which
    # stays nonnegative
    mass_one = not model.sub_stochastic
    out = np.zeros(u.grid.n)
    deficit = np.zeros(u.grid.n)
    at_zero = 0.0
    tail = 0.0
    for term, vals in _slot_values(model, u):
        prod = np.prod(vals, axis=1)
        out += term.weights @ prod
        if mass_one:
            deficit += term.weights @ (1.0 - prod)
        at_zero += term.mass * u.value_at_zero ** term.order
        tail += float(term.weights @ np.prod(_limit_values(term, u), axis=1))
    if mass_one:
        out = np.where(out > 0.5, 1.0 - deficit, out)
        if u.value_at_zero == 1.0:
            at_zero = 1.0
    return GridFunction(u.grid, out, value_at_zero=at_zero, tail_limit=tail,
                        characteristic=u.characteristic and at_zero == 1.0)


def _gamma_apply_exponent(model: MaxwellModel, u: GridFunction) -> GridFunction:
    # products become sums of exponents; 1 - Gamma(u) is accumulated from
    # expm1 terms so that it keeps full relative accuracy near x = 0
    total = np.zeros(u.grid.n)
    # a normalized model has mass 1 up to rounding; treat it as exactly 1
    deficit = np.full(u.grid.n, model.total_mass - 1.0 if model.sub_stochastic else 0.0)
    tail = 0.0
    for term, st in zip(model.terms, model.stencils(u.grid)):
        s = u.evaluate_stencil_exponent(st).sum(axis=1)
        total += term.weights @ np.exp(-s)
        deficit += term.weights @ np.expm1(-s)
        tail += float(term.weights @ np.prod(_limit_values(term, u), axis=1))
    mass_one = not model.sub_stochastic
    return GridFunction.from_exponent(
        u.grid, exponent_from_parts(total, -deficit),
        value_at_zero=1.0 if mass_one else model.total_mass, tail_limit=tail,
        characteristic=u.characteristic and mass_one)


def l_apply(model: MaxwellModel, u: GridFunction) -> GridFunction:
    """Apply the positive linear operator ``L u = sum w sum_k u(a_k x)``."""
    out = np.zeros(u.grid.n)
    at_zero = 0.0
    tail = 0.0
    for term, vals in _slot_values(model, u):
        out += term.weights @ np.sum(vals, axis=1)
        at_zero += term.mass * term.order * u.value_at_zero
        tail += float(term.weights @ np.sum(_limit_values(term, u), axis=1))
    return GridFunction(u.grid, out, value_at_zero=at_zero, tail_limit=tail)


def abs_diff_bound(model: MaxwellModel, u1: GridFunction, u2: GridFunction) -> np.ndarray:
    """Node values of ``L(|u1 - u2|)``.

    The absolute difference is formed after interpolation, so the result is
    the exact right-hand side of the Lipschitz inequality for the
    interpolated functions.
    """
    out = np.zeros(u1.grid.n)
    for term, st in zip(model.terms, model.stencils(u1.grid)):
        d = np.abs(u1.evaluate_stencil(st) - u2.evaluate_stencil(st))
        out += term.weights @ np.sum(d, axis=1)
    return out


# ---------------------------------------------------------------------------
# model files


def format_model(model: MaxwellModel) -> str:
    """Serialize to the line-oriented model file format."""
    d = model.dimension_hint if model.dimension_hint is not None else 0
    lines = [f"model {model.name} transform={model.transform_kind} d={d}"]
    for term in model.terms:
        for w, a in zip(term.weights, term.scales):
            lines.append(f"term n={term.order} w={float(w)!r} a=" + ",".join(repr(float(x)) for x in a))
    return "\n".join(lines) + "\n"


def _parse_number(text: str) -> Number:
    try:
        if "/" in text:
            return Fraction(text)
        if text.lstrip("+-").isdigit():
            return int(text)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad number {text!r}") from exc


def parse_model(text: str) -> MaxwellModel:
    """Parse the model file format.

    Numbers written as integers or ``p/q`` fractions keep an exact
    description; floats do not.
    """
    header = None
    by_order: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "model":
                if header is not None:
                    raise ValueError("duplicate model header")
                kv = dict(p.split("=", 1) for p in parts[2:])
                header = (parts[1], kv.pop("transform", "fourier"), int(kv.pop("d", 0)))
                if kv:
                    raise ValueError(f"unknown header keys {sorted(kv)}")
            elif parts[0] == "term":
                if header is None:
                    raise ValueError("term before model header")
                kv = dict(p.split("=", 1) for p in parts[1:])
                n = int(kv.pop("n"))
                w = _parse_number(kv.pop("w"))
                a = tuple(_parse_number(x) for x in kv.pop("a").split(","))
                if kv:
                    raise ValueError(f"unknown term keys {sorted(kv)}")
                if len(a) != n:
                    raise ValueError(f"expected {n} scales, got {len(a)}")
                by_order.setdefault(n, []).append((w, a))
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
        except (KeyError, IndexError, ValueError) as exc:
            raise ValueError(f"model file line {lineno}: {exc}") from exc
    if header is None:
        raise ValueError("model file has no header")
    terms = [InteractionTerm.from_nodes(by_order[n]) for n in sorted(by_order)]
    name, kind, d = header
    return make_custom(terms, transform_kind=kind, name=name,
                       dimension_hint=d if d > 0 else None)


def read_model(path) -> MaxwellModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def write_model(model: MaxwellModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_model(model))
