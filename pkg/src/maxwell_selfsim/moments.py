"""Integer moments of the measure ``R`` behind a self-similar profile.

For the canonical profile ``w(x) = int R(tau) exp(-tau x) dtau`` with
``mu_* = mu(1)``, expanding ``mu(1) x w' + w = Gamma(w)`` in powers of ``x``
gives, for ``s >= 2``,

    s (mu(1) - mu(s)) m_s = sum_n sum_k  s!/(k_1!...k_n!) lambda_k  m_{k_1}...m_{k_n}

where the inner sum runs over compositions ``k`` of ``s`` into ``n >= 2``
positive parts and ``lambda_k = sum w prod a_i**k_i``.  The left coefficient
is positive exactly for ``1 < s < s*``; beyond ``s*`` the moment diverges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .model import MaxwellModel
from .spectral import find_p0, find_s_star, lambda_p, mu_p

__all__ = [
    "MomentTable",
    "compositions",
    "mixed_moment",
    "moment_denominator",
    "moment_table",
    "moment_verdict",
]

FINITE, DIVERGENT, BOUNDARY = "finite", "divergent", "boundary"
BOUNDARY_TOL = 1e-12

Value = Union[Fraction, float]


def compositions(s: int, n: int) -> Iterator[tuple]:
    """All ``n``-tuples of positive integers summing to ``s``."""
    if n == 1:
        if s >= 1:
            yield (s,)
        return
    for first in range(1, s - n + 2):
        for rest in compositions(s - first, n - 1):
            yield (first,) + rest


def _multinomial(k: Sequence[int]) -> int:
    out = math.factorial(sum(k))
    for ki in k:
        out //= math.factorial(ki)
    return out


def mixed_moment(model: MaxwellModel, k: Sequence[int], exact: bool = False) -> Value:
    """``sum w prod_i a_i**k_i`` over the terms whose order equals ``len(k)``.

    With ``exact=True`` the rational description of the model is used and a
    :class:`~fractions.Fraction` is returned.
    """
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError("moment exponents must be nonnegative")
    if exact:
        terms = model.exact
        if terms is None:
            raise ValueError("model has no exact rational description")
        return sum((t.moment(k) for t in terms if t.order == len(k)), Fraction(0))
    total = 0.0
    for t in model.terms:
        if t.order == len(k):
            total += float(t.weights @ np.prod(t.scales ** np.array(k, dtype=float), axis=1))
    return total


def _lambda_exact(model: MaxwellModel, s: int) -> Fraction:
    total = Fraction(0)
    for t in model.exact:
        for i in range(t.order):
            k = [0] * t.order
            k[i] = s
            total += t.moment(k)
    return total


def moment_denominator(model: MaxwellModel, s: float) -> float:
    """``s (mu(1) - mu(s)) = s mu(1) - lambda(s) + 1`` for real ``s > 0``."""
    return s * mu_p(model, 1.0) - lambda_p(model, s) + 1.0


@dataclass(frozen=True)
class MomentTable:
    """Moments ``m_0 .. m_S`` with per-order verdicts.

    ``values[s]`` is ``None`` when the moment is divergent.
    """

    orders: tuple
    values: tuple
    verdicts: tuple
    s_star: float
    p0: float
    mu1: float
    exact: bool

    def as_float(self) -> list:
        return [None if v is None else float(v) for v in self.values]

    def rows(self) -> list:
        return list(zip(self.orders, self.values, self.verdicts))


def moment_table(model: MaxwellModel, S: int, exact: Optional[bool] = None,
                 max_order: int = 4) -> MomentTable:
    """Moments of the ``p = 1`` profile measure up to order ``S``.

    Parameters
    ----------
    exact : bool or None
        Use rational arithmetic; ``None`` selects it whenever the model
        carries an exact description.
    max_order : int
        Largest interaction order expanded by compositions.

    Raises
    ------
    ValueError
        If ``S < 2``, ``p0 <= 1`` or the model order exceeds ``max_order``.
    RuntimeError
        If a computed moment or right-hand side is not positive.
    """
    if S < 2:
        raise ValueError("S must be at least 2")
    if model.max_order > max_order:
        raise ValueError(f"model order {model.max_order} exceeds max_order={max_order}")
    p0, _ = find_p0(model)
    if p0 <= 1:
        raise ValueError(f"moments need p0 > 1, got p0 = {p0}")
    s_star = find_s_star(model)
    if exact is None:
        exact = model.exact is not None
    if exact:
        mu1 = _lambda_exact(model, 1) - 1
    else:
        mu1 = mu_p(model, 1.0)
    orders = sorted({t.order for t in model.terms if t.order >= 2})
    values: list = [Fraction(1), Fraction(1)] if exact else [1.0, 1.0]
    verdicts = [FINITE, FINITE]
    diverged = False
    for s in range(2, S + 1):
        if exact:
            den = s * mu1 - _lambda_exact(model, s) + 1
        else:
            den = moment_denominator(model, float(s))
        if diverged or den <= 0 or abs(den) < BOUNDARY_TOL:
            boundary = not diverged and abs(den) < BOUNDARY_TOL
            verdicts.append(BOUNDARY if boundary else DIVERGENT)
            values.append(None)
            diverged = True
            continue
        rhs = Fraction(0) if exact else 0.0
        for n in orders:
            for k in compositions(s, n):
                prod = values[k[0]]
                for ki in k[1:]:
                    prod = prod * values[ki]
                rhs += _multinomial(k) * mixed_moment(model, k, exact) * prod
        if rhs < 0:
            raise RuntimeError(f"negative right-hand side at s={s}")
        m = rhs / den
        if not m > 0:
            raise RuntimeError(f"nonpositive moment m_{s} = {m}")
        values.append(m)
        verdicts.append(FINITE)
    return MomentTable(tuple(range(S + 1)), tuple(values), tuple(verdicts), s_star, p0,
                       float(mu1), bool(exact))


def moment_verdict(model: Optional[MaxwellModel], s: float, p: float = 1.0,
                   s_star: Optional[float] = None) -> str:
    """Finiteness of the order-``s`` moment for a profile of order ``p``.

    For ``p < 1`` the moment is finite iff ``s < p``; for ``p = 1`` iff
    ``s < s*``.  Equality gives ``"boundary"``.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if not 0 < p <= 1:
        raise ValueError("profile order p must lie in (0, 1]")
    limit = p if p < 1 else (s_star if s_star is not None else find_s_star(model))
    if math.isinf(limit):
        return FINITE
    if abs(s - limit) <= BOUNDARY_TOL * max(1.0, limit):
        return BOUNDARY
    return FINITE if s < limit else DIVERGENT
