"""Constant parameters of the model as exact rational-function coefficients.

Every coefficient in the jet algebra is a polynomial over QQ in the formal
constants ``a`` (pencil mixing), ``b`` (flow parameter), ``beta``, ``gamma``
and the spectral parameter ``lam``.  ``alpha`` is not a generator: it is
always the polynomial ``-(beta + gamma)``.
"""

from __future__ import annotations

from fractions import Fraction

import flint

PARAM_NAMES = ("a", "b", "beta", "gamma", "lam")
PCTX = flint.fmpq_mpoly_ctx.get(PARAM_NAMES)
_NP = len(PARAM_NAMES)

PZERO = PCTX.from_dict({})
PONE = PCTX.constant(1)
A, B, BETA, GAMMA, LAM = PCTX.gens()
ALPHA = -(BETA + GAMMA)


def pconst(value) -> flint.fmpq_mpoly:
    """Constant coefficient from an int, Fraction or fmpq."""
    if isinstance(value, Fraction):
        value = flint.fmpq(value.numerator, value.denominator)
    return PCTX.constant(value)


def pgen(name: str) -> flint.fmpq_mpoly:
    return PCTX.gens()[PARAM_NAMES.index(name)]


def is_one(p) -> bool:
    return p.is_one()


def as_fraction(q: flint.fmpq) -> Fraction:
    return Fraction(int(q.p), int(q.q))


def constant_value(p) -> Fraction | None:
    """Return the rational value of a constant polynomial, else None."""
    if p.is_zero():
        return Fraction(0)
    if not p.is_constant():
        return None
    return as_fraction(p.leading_coefficient())


def pkey(p) -> tuple:
    """Hashable, order-stable key of a parameter polynomial."""
    return tuple(sorted((tuple(e), as_fraction(c)) for e, c in p.terms()))


def from_key(key) -> flint.fmpq_mpoly:
    return PCTX.from_dict({tuple(e): flint.fmpq(c.numerator, c.denominator) for e, c in key})


def pstr(p) -> str:
    return str(p) if not p.is_zero() else "0"


def degree_in(p, name: str) -> int:
    return p.degrees()[PARAM_NAMES.index(name)] if not p.is_zero() else 0


def split_by(p, names) -> dict:
    """Split ``p`` into parts keyed by the exponent tuple of the named gens."""
    idx = [PARAM_NAMES.index(n) for n in names]
    parts: dict[tuple, dict] = {}
    for e, c in p.terms():
        k = tuple(e[i] for i in idx)
        parts.setdefault(k, {})[tuple(e)] = c
    return {k: PCTX.from_dict(d) for k, d in parts.items()}


def substitute(p, name: str, num, den=None):
    """Substitute ``name -> num/den``; returns (numerator, denominator)."""
    den = PONE if den is None else den
    i = PARAM_NAMES.index(name)
    if p.is_zero():
        return PZERO, PONE
    n = p.degrees()[i]
    out = PZERO
    npow = [PONE]
    dpow = [PONE]
    for _ in range(n):
        npow.append(npow[-1] * num)
        dpow.append(dpow[-1] * den)
    for e, c in p.terms():
        k = e[i]
        rest = list(e)
        rest[i] = 0
        out += PCTX.from_dict({tuple(rest): c}) * npow[k] * dpow[n - k]
    return out, dpow[n]


def psubs_value(p, values: dict):
    """Substitute rational numbers for some generators (exact)."""
    if not values:
        return p
    vals = {}
    for k, v in values.items():
        v = Fraction(v)
        vals[k] = flint.fmpq(v.numerator, v.denominator)
    return p.subs(vals)


class PFrac:
    """Minimal fraction-field element over the parameter polynomials."""

    __slots__ = ("n", "d")

    def __init__(self, n, d=None):
        d = PONE if d is None else d
        if n.is_zero():
            self.n, self.d = PZERO, PONE
            return
        if not d.is_constant():
            g = n.gcd(d)
            if not g.is_constant():
                n, d = n / g, d / g
        lc = d.leading_coefficient()
        if lc != 1:
            n, d = n / lc, d / lc
        self.n, self.d = n, d

    def is_zero(self):
        return self.n.is_zero()

    def __add__(self, o):
        if self.d == o.d:
            return PFrac(self.n + o.n, self.d)
        return PFrac(self.n * o.d + o.n * self.d, self.d * o.d)

    def __sub__(self, o):
        return self + (-o)

    def __neg__(self):
        return PFrac(-self.n, self.d)

    def __mul__(self, o):
        return PFrac(self.n * o.n, self.d * o.d)

    def __truediv__(self, o):
        if o.is_zero():
            raise ZeroDivisionError("division by zero parameter fraction")
        return PFrac(self.n * o.d, self.d * o.n)

    def __repr__(self):
        return f"({self.n})/({self.d})"
