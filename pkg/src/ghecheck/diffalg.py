"""Jet-space differential algebra with exact coefficients.

A :class:`DiffExpr` is ``N / (m * p)`` where ``N`` is a sparse polynomial in
jet variables with parameter-polynomial coefficients, ``m`` is a monomial in
jet variables and ``p`` is a monic parameter polynomial.  Denominators that
are not monomials in the jets are rejected; every denominator met in this
system (powers of ``u_yz``, ``u_34``, ``u_12``) is of that shape.

Variables are plain tuples so that they hash and sort deterministically:

* ``("j", dep, (i0, i1, i2, i3))`` -- derivative of a dependent field
* ``("f", name, n)`` -- ``n``-th derivative of a one-argument function
* ``("c", axis)`` -- an independent coordinate
* ``("w", payload_text, (i0, i1, i2, i3))`` -- derivative of a nonlocal atom
  ``InvW(payload)``; only y/z derivatives are stored, ``D_x`` is rewritten.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable

from . import params as P
from .params import PCTX, PONE, PZERO

# axis positions: chart "txyz" uses t, x, y, z; chart "z" uses z1..z4
T, X, Y, Z = 0, 1, 2, 3
AXIS_NAMES = {"txyz": "txyz", "z": "1234"}
AXIS_INDEX = {"t": 0, "x": 1, "y": 2, "z": 3, "z1": 0, "z2": 1, "z3": 2, "z4": 3,
              "1": 0, "2": 1, "3": 2, "4": 3}
SPACE = (X, Y, Z)
ALL_AXES = (T, X, Y, Z)

# one-argument functions: gradient of the argument in the four axis slots
FUNCTIONS = {
    "f": (0, 0, 0, 1),   # f(z)
    "g": (0, 0, 1, 0),   # g(y)
    "h": (0, 0, 1, 0),   # h(y)
    "k": (0, 0, 0, 1),   # k(z)
    "c": (1, 1, 0, 0),   # c(t+x)
    "d": (1, -1, 0, 0),  # d(t-x)
}

FIELDS = ("u", "v")


class AlgebraError(ValueError):
    pass


def axis(name) -> int:
    if isinstance(name, int):
        return name
    return AXIS_INDEX[name]


def index(*axes, chart_dims=4) -> tuple:
    idx = [0] * chart_dims
    for a in axes:
        idx[axis(a)] += 1
    return tuple(idx)


def idx_from(spec: str) -> tuple:
    """``"xyz"`` -> (0,1,1,1); ``"134"`` -> (1,0,1,1)."""
    return index(*list(spec))


def idx_add(i, j):
    return tuple(a + b for a, b in zip(i, j))


def idx_sub(i, j):
    return tuple(a - b for a, b in zip(i, j))


def unit(ax) -> tuple:
    idx = [0, 0, 0, 0]
    idx[axis(ax)] = 1
    return tuple(idx)


def jet(dep: str, spec="") -> tuple:
    if isinstance(spec, tuple):
        return ("j", dep, spec)
    return ("j", dep, idx_from(spec))


# ---------------------------------------------------------------- monomials

def mono_mul(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def mono_div(m1: tuple, m2: tuple) -> tuple:
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        r = d.get(v, 0) - e
        if r < 0:
            raise AlgebraError("monomial not divisible")
        if r:
            d[v] = r
        else:
            del d[v]
    return tuple(sorted(d.items()))


def mono_lcm(m1: tuple, m2: tuple) -> tuple:
    d = dict(m1)
    for v, e in m2:
        if e > d.get(v, 0):
            d[v] = e
    return tuple(sorted(d.items()))


def mono_remove_one(m: tuple, i: int) -> tuple:
    v, e = m[i]
    if e == 1:
        return m[:i] + m[i + 1:]
    return m[:i] + ((v, e - 1),) + m[i + 1:]


def mono_degree(m: tuple) -> int:
    return sum(e for _, e in m)


# ---------------------------------------------------------------- expressions

class DiffExpr:
    """Exact rational expression in jet variables (immutable)."""

    __slots__ = ("num", "den", "pden", "_key")

    def __init__(self, num: dict, den: tuple = (), pden=PONE):
        self.num = num
        self.den = den
        self.pden = pden
        self._key = None

    # -- construction
    @staticmethod
    def const(value) -> "DiffExpr":
        if isinstance(value, DiffExpr):
            return value
        if not isinstance(value, (int, Fraction)):
            c = value  # parameter polynomial
        else:
            c = P.pconst(value)
        if c.is_zero():
            return ZERO
        return DiffExpr({(): c})

    @staticmethod
    def var(v: tuple) -> "DiffExpr":
        return DiffExpr({((v, 1),): PONE})

    @staticmethod
    def param(name: str) -> "DiffExpr":
        return DiffExpr({(): P.pgen(name)})

    # -- predicates
    def is_zero(self) -> bool:
        return not self.num

    def is_polynomial(self) -> bool:
        return not self.den and self.pden.is_one()

    def is_constant(self) -> bool:
        return not self.den and all(m == () for m in self.num)

    def constant_coeff(self):
        """Parameter polynomial if this expression is constant, else None."""
        if not self.num:
            return PZERO
        if self.den or len(self.num) != 1 or () not in self.num:
            return None
        if not self.pden.is_one():
            return None
        return self.num[()]

    def variables(self) -> set:
        out = set()
        for m in self.num:
            for v, _ in m:
                out.add(v)
        for v, _ in self.den:
            out.add(v)
        return out

    def jets(self, dep=None) -> set:
        return {v for v in self.variables() if v[0] == "j" and (dep is None or v[1] == dep)}

    def atoms(self) -> set:
        return {v for v in self.variables() if v[0] == "w"}

    def has_atoms(self) -> bool:
        return any(v[0] == "w" for v in self.variables())

    # -- arithmetic
    def __add__(self, other):
        if not _coercible(other):
            return NotImplemented
        other = _coerce(other)
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den == other.den and self.pden == other.pden:
            num = dict(self.num)
            for m, c in other.num.items():
                if m in num:
                    num[m] = num[m] + c
                else:
                    num[m] = c
            return _canon(num, self.den, self.pden)
        den = mono_lcm(self.den, other.den)
        f1 = mono_div(den, self.den)
        f2 = mono_div(den, other.den)
        if self.pden == other.pden:
            pd, k1, k2 = self.pden, PONE, PONE
        elif self.pden.is_one():
            pd, k1, k2 = other.pden, other.pden, PONE
        elif other.pden.is_one():
            pd, k1, k2 = self.pden, PONE, self.pden
        else:
            g = self.pden.gcd(other.pden)
            k1 = other.pden / g
            k2 = self.pden / g
            pd = self.pden * k1
        num = {}
        for m, c in self.num.items():
            mm = mono_mul(m, f1)
            num[mm] = num[mm] + c * k1 if mm in num else c * k1
        for m, c in other.num.items():
            mm = mono_mul(m, f2)
            num[mm] = num[mm] + c * k2 if mm in num else c * k2
        return _canon(num, den, pd)

    __radd__ = __add__

    def __neg__(self):
        return DiffExpr({m: -c for m, c in self.num.items()}, self.den, self.pden)

    def __sub__(self, other):
        if not _coercible(other):
            return NotImplemented
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if not _coercible(other):
            return NotImplemented
        other = _coerce(other)
        if not self.num or not other.num:
            return ZERO
        n1, n2 = self.num, other.num
        if len(n1) == 1 and () in n1 and not self.den and self.pden.is_one():
            c = n1[()]
            if c.is_one():
                return other
            return _canon({m: c * x for m, x in n2.items()}, other.den, other.pden)
        if len(n2) == 1 and () in n2 and not other.den and other.pden.is_one():
            c = n2[()]
            if c.is_one():
                return self
            return _canon({m: c * x for m, x in n1.items()}, self.den, self.pden)
        num = {}
        for m1, c1 in n1.items():
            for m2, c2 in n2.items():
                mm = mono_mul(m1, m2)
                if mm in num:
                    num[mm] = num[mm] + c1 * c2
                else:
                    num[mm] = c1 * c2
        return _canon(num, mono_mul(self.den, other.den), self.pden * other.pden)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not _coercible(other):
            return NotImplemented
        other = _coerce(other)
        if not other.num:
            raise ZeroDivisionError("division by zero expression")
        if len(other.num) != 1:
            raise AlgebraError(f"non-monomial denominator: {other}")
        (m, c), = other.num.items()
        num = {mm: x * other.pden for mm, x in self.num.items()}
        num = {mono_mul(mm, other.den): x for mm, x in num.items()}
        return _canon(num, mono_mul(self.den, m), self.pden * c)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return ONE / (self ** (-n))
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other):
        if not isinstance(other, DiffExpr):
            try:
                other = _coerce(other)
            except TypeError:
                return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self) -> tuple:
        if self._key is None:
            self._key = (
                tuple(sorted((m, P.pkey(c)) for m, c in self.num.items())),
                self.den,
                P.pkey(self.pden),
            )
        return self._key

    # -- calculus
    def diff(self, ax) -> "DiffExpr":
        """Total derivative along an axis."""
        return total_derivative(self, ax)

    def partial(self, v: tuple) -> "DiffExpr":
        """Partial derivative with respect to one variable."""
        num = {}
        for m, c in self.num.items():
            for i, (w, e) in enumerate(m):
                if w == v:
                    mm = mono_remove_one(m, i)
                    num[mm] = num[mm] + c * e if mm in num else c * e
        out = _canon(num, self.den, self.pden)
        for w, e in self.den:
            if w == v:
                out = out - self * DiffExpr.const(e) / DiffExpr.var(v)
        return out

    def coefficient(self, v: tuple) -> "DiffExpr":
        """Coefficient of ``v`` in an expression linear in ``v``."""
        return self.partial(v)

    def __repr__(self):
        return f"DiffExpr({to_str(self)})"

    def __str__(self):
        return to_str(self)


def _coercible(x) -> bool:
    return isinstance(x, (DiffExpr, int, Fraction)) or (hasattr(x, "is_zero") and hasattr(x, "terms"))


def _coerce(x) -> DiffExpr:
    if isinstance(x, DiffExpr):
        return x
    if isinstance(x, (int, Fraction)):
        return DiffExpr.const(x)
    if hasattr(x, "is_zero") and hasattr(x, "terms"):
        return DiffExpr.const(x)
    raise TypeError(f"cannot coerce {type(x)} to DiffExpr")


def _canon(num: dict, den: tuple, pden) -> DiffExpr:
    num = {m: c for m, c in num.items() if not c.is_zero()}
    if not num:
        return ZERO
    if den:
        dd = dict(den)
        for v in list(dd):
            mn = dd[v]
            for m in num:
                e = 0
                for w, k in m:
                    if w == v:
                        e = k
                        break
                if e < mn:
                    mn = e
                    if mn == 0:
                        break
            if mn:
                dd[v] -= mn
                if not dd[v]:
                    del dd[v]
                cut = ((v, mn),)
                num = {mono_div(m, cut): c for m, c in num.items()}
        den = tuple(sorted(dd.items()))
    if pden.is_constant():
        if not pden.is_one():
            inv = 1 / pden.leading_coefficient()
            num = {m: c * inv for m, c in num.items()}
            pden = PONE
    else:
        g = pden
        for c in num.values():
            g = g.gcd(c)
            if g.is_constant():
                break
        if not g.is_constant():
            pden = pden / g
            num = {m: c / g for m, c in num.items()}
        lc = pden.leading_coefficient()
        if lc != 1:
            pden = pden / lc
            num = {m: c / lc for m, c in num.items()}
    return DiffExpr(num, den, pden)


ZERO = DiffExpr({})
ONE = DiffExpr({(): PONE})


def const(x) -> DiffExpr:
    return DiffExpr.const(x)


def var(v) -> DiffExpr:
    return DiffExpr.var(v)


def J(dep: str, spec="") -> DiffExpr:
    """Jet expression, e.g. ``J("u", "yz")`` or ``J("u", "34")``."""
    return DiffExpr.var(jet(dep, spec))


def fn(name: str, n: int = 0) -> DiffExpr:
    if name not in FUNCTIONS:
        raise AlgebraError(f"unknown function tag {name!r}")
    return DiffExpr.var(("f", name, n))


def coord(ax) -> DiffExpr:
    return DiffExpr.var(("c", axis(ax)))


def param(name: str) -> DiffExpr:
    return DiffExpr.param(name)


def pexpr(p) -> DiffExpr:
    return DiffExpr.const(p)


# ---------------------------------------------------------------- nonlocal atoms
# Atom payload registry: canonical text -> payload expression.

_PAYLOADS: dict[str, DiffExpr] = {}


def atom_var(payload: DiffExpr, idx=(0, 0, 0, 0)) -> tuple:
    text = to_text(payload)
    _PAYLOADS.setdefault(text, payload)
    return ("w", text, idx)


def atom_payload(v: tuple) -> DiffExpr:
    text = v[1]
    if text not in _PAYLOADS:
        _PAYLOADS[text] = from_text(text)
    return _PAYLOADS[text]


def atom_depth(e: DiffExpr) -> int:
    depth = 0
    for v in e.atoms():
        depth = max(depth, 1 + atom_depth(atom_payload(v)))
    return depth


U_YZ = ("j", "u", (0, 0, 1, 1))
U_XZ = ("j", "u", (0, 1, 0, 1))

# ---------------------------------------------------------------- derivatives

_DVAR_CACHE: dict = {}


def _dvar(v: tuple, ax: int):
    key = (v, ax)
    if key in _DVAR_CACHE:
        return _DVAR_CACHE[key]
    kind = v[0]
    if kind == "j":
        idx = list(v[2])
        idx[ax] += 1
        out = DiffExpr.var(("j", v[1], tuple(idx)))
    elif kind == "f":
        s = FUNCTIONS[v[1]][ax]
        out = None if s == 0 else DiffExpr.var(("f", v[1], v[2] + 1)) * s
    elif kind == "c":
        out = ONE if v[1] == ax else None
    elif kind == "w":
        if ax in (Y, Z):
            idx = list(v[2])
            idx[ax] += 1
            out = DiffExpr.var(("w", v[1], tuple(idx)))
        elif ax == X:
            # D_x InvW(r) = r/u_yz + (u_xz/u_yz) D_y InvW(r), then D_J
            payload = atom_payload(v)
            base = payload / DiffExpr.var(U_YZ) + DiffExpr.var(U_XZ) / DiffExpr.var(U_YZ) * \
                DiffExpr.var(("w", v[1], (0, 0, 1, 0)))
            out = base
            for a in (Y, Z):
                for _ in range(v[2][a]):
                    out = total_derivative(out, a)
        else:
            raise AlgebraError("time derivative of a nonlocal atom is not defined")
    else:
        raise AlgebraError(f"unknown variable kind {v!r}")
    _DVAR_CACHE[key] = out
    return out


def _diff_num(num: dict, ax: int) -> DiffExpr:
    acc: dict = {}
    extra = []
    for m, c in num.items():
        for i, (v, e) in enumerate(m):
            dv = _dvar(v, ax)
            if dv is None:
                continue
            rest = mono_remove_one(m, i)
            coeff = c * e if e != 1 else c
            if not dv.den and dv.pden.is_one():
                for m2, c2 in dv.num.items():
                    mm = mono_mul(rest, m2)
                    val = coeff * c2 if not c2.is_one() else coeff
                    acc[mm] = acc[mm] + val if mm in acc else val
            else:
                extra.append(DiffExpr({rest: coeff}) * dv)
    out = _canon(acc, (), PONE)
    for x in extra:
        out = out + x
    return out


def total_derivative(e: DiffExpr, ax) -> DiffExpr:
    """Total derivative ``D_ax e`` (Leibniz and chain rules)."""
    ax = axis(ax)
    if not e.num:
        return ZERO
    dn = _diff_num(e.num, ax)
    if not e.den and e.pden.is_one():
        return dn
    inv_den = DiffExpr({(): PONE}, e.den, e.pden) if (e.den or not e.pden.is_one()) else ONE
    out = dn * inv_den
    if e.den:
        s = ZERO
        for v, k in e.den:
            dv = _dvar(v, ax)
            if dv is None:
                continue
            s = s + dv * k / DiffExpr.var(v)
        if s.num:
            out = out - e * s
    return out


def D(e: DiffExpr, *axes) -> DiffExpr:
    for a in axes:
        if isinstance(a, str) and len(a) > 1 and a not in AXIS_INDEX:
            for ch in a:
                e = total_derivative(e, ch)
        else:
            e = total_derivative(e, a)
    return e


def D_index(e: DiffExpr, idx: tuple) -> DiffExpr:
    for a, n in enumerate(idx):
        for _ in range(n):
            e = total_derivative(e, a)
    return e


# ---------------------------------------------------------------- substitution

def subs(e: DiffExpr, rule: Callable[[tuple], DiffExpr | None]) -> DiffExpr:
    """Replace variables by expressions; ``rule`` returns None to keep a var."""
    cache: dict = {}

    def image(v):
        if v not in cache:
            r = rule(v)
            cache[v] = r
        return cache[v]

    changed = any(image(v) is not None for v in e.variables())
    if not changed:
        return e
    powcache: dict = {}

    def power(v, k):
        key = (v, k)
        if key not in powcache:
            r = image(v)
            base = DiffExpr.var(v) if r is None else r
            powcache[key] = base ** k
        return powcache[key]

    out = ZERO
    groups: dict = {}
    for m, c in e.num.items():
        keep = []
        term = None
        for v, k in m:
            if image(v) is None:
                keep.append((v, k))
            else:
                p = power(v, k)
                term = p if term is None else term * p
        groups.setdefault(tuple(keep), []).append((c, term))
    for keep, items in groups.items():
        plain = {}
        for c, term in items:
            if term is None:
                plain[keep] = plain[keep] + c if keep in plain else c
            else:
                out = out + DiffExpr({keep: c}) * term
        if plain:
            out = out + _canon(plain, (), PONE)
    if e.den or not e.pden.is_one():
        den = DiffExpr({(): e.pden})
        for v, k in e.den:
            den = den * power(v, k)
        out = out / den
    return out


def subs_vars(e: DiffExpr, mapping: dict) -> DiffExpr:
    return subs(e, lambda v: mapping.get(v))


def subs_params(e: DiffExpr, name: str, value) -> DiffExpr:
    """Substitute a parameter by a rational number or parameter fraction.

    ``value`` is a number, a parameter polynomial, or a pair (num, den).
    """
    if isinstance(value, (int, Fraction)):
        vals = {name: value}
        num = {m: P.psubs_value(c, vals) for m, c in e.num.items()}
        pd = P.psubs_value(e.pden, vals)
        if pd.is_zero():
            raise ZeroDivisionError("parameter specialization zeroes a denominator")
        return _canon(num, e.den, pd) if not pd.is_constant() else \
            _canon({m: c / pd.leading_coefficient() for m, c in num.items()}, e.den, PONE)
    if isinstance(value, tuple):
        vn, vd = value
    else:
        vn, vd = value, PONE
    i = P.PARAM_NAMES.index(name)
    n = max([c.degrees()[i] for c in e.num.values()] + [e.pden.degrees()[i] if not e.pden.is_zero() else 0])
    num = {}
    for m, c in e.num.items():
        cn, cd = P.substitute(c, name, vn, vd)
        # bring to common power vd**n
        num[m] = cn * vd ** (n - c.degrees()[i]) if n > c.degrees()[i] else cn
    pn, pdn = P.substitute(e.pden, name, vn, vd)
    k = e.pden.degrees()[i]
    pn = pn * vd ** (n - k) if n > k else pn
    return _canon(num, e.den, pn)


def specialize_b(e: DiffExpr) -> DiffExpr:
    """Replace the flow parameter by ``(beta - gamma)/alpha``."""
    return subs_params(e, "b", (P.BETA - P.GAMMA, P.ALPHA))


# ---------------------------------------------------------------- Euler operator

def _jets_by_base(e: DiffExpr, dep: str, axes: tuple) -> dict:
    groups: dict = {}
    for v in e.jets(dep):
        base = tuple(0 if a in axes else v[2][a] for a in range(4))
        groups.setdefault(base, []).append(v)
    return groups


def euler_operator(e: DiffExpr, dep: str, axes=ALL_AXES, base=(0, 0, 0, 0)) -> DiffExpr:
    """``sum_J (-D)_J d e / d dep_J`` over multi-indices in ``axes``.

    Jets carrying derivatives along axes outside ``axes`` are separate fields;
    ``base`` selects which of them (default: the undifferentiated field).
    """
    axes = tuple(axis(a) for a in axes)
    for v in e.atoms():
        if atom_payload(v).jets(dep):
            raise AlgebraError("field appears inside a nonlocal atom; use the nonlocal module")
    out = ZERO
    for v in e.jets(dep):
        vb = tuple(0 if a in axes else v[2][a] for a in range(4))
        if vb != tuple(base):
            continue
        J_ = idx_sub(v[2], base)
        p = e.partial(v)
        for a in axes:
            for _ in range(J_[a]):
                p = -total_derivative(p, a)
        out = out + p
    return out


def is_total_divergence(e: DiffExpr, axes=ALL_AXES, fields=None) -> bool:
    """True iff every Euler operator of ``e`` vanishes (exact test)."""
    return not divergence_obstruction(e, axes, fields)


def divergence_obstruction(e: DiffExpr, axes=ALL_AXES, fields=None) -> dict:
    """Nonzero Euler operators of ``e`` keyed by (field, base index)."""
    axes = tuple(axis(a) for a in axes)
    deps = sorted({v[1] for v in e.jets()}) if fields is None else fields
    bad = {}
    for dep in deps:
        for base in _jets_by_base(e, dep, axes):
            r = euler_operator(e, dep, axes, base)
            if not r.is_zero():
                bad[(dep, base)] = r
    return bad


# ---------------------------------------------------------------- flow

def q_expr() -> DiffExpr:
    """Right-hand side of ``v_t`` in the two-component flow."""
    u = lambda s: J("u", s)
    v = lambda s: J("v", s)
    b = param("b")
    return (u("xx") * u("yz") - u("xy") * u("xz") + v("y") * v("z")
            + b * (v("y") * u("xz") - v("z") * u("xy"))) / u("yz")


_FLOW_CACHE: dict = {}


def _flow_value(v: tuple):
    if v[0] != "j" or v[1] not in FIELDS or v[2][T] == 0:
        return None
    if v in _FLOW_CACHE:
        return _FLOW_CACHE[v]
    dep, idx = v[1], v[2]
    k = idx[T]
    spatial = (0,) + idx[1:]
    if dep == "u":
        out = J("v", (k - 1,) + idx[1:])
        if k - 1 > 0:
            out = substitute_flow(out)
    else:
        if k == 1:
            out = D_index(q_expr(), spatial)
        else:
            prev = _flow_value(("j", "v", (k - 1,) + idx[1:]))
            out = substitute_flow(total_derivative(prev, T))
    _FLOW_CACHE[v] = out
    return out


def substitute_flow(e: DiffExpr) -> DiffExpr:
    """Eliminate all t-derivatives of u, v using ``u_t = v, v_t = q``."""
    return subs(e, _flow_value)


# ---------------------------------------------------------------- prolongation

class _DerivTower:
    """Memoized ``D_J(expr)`` for all multi-indices J."""

    def __init__(self, e: DiffExpr):
        self.cache = {(0, 0, 0, 0): e}

    def get(self, idx: tuple) -> DiffExpr:
        if idx in self.cache:
            return self.cache[idx]
        for a in range(4):
            if idx[a]:
                prev = list(idx)
                prev[a] -= 1
                out = total_derivative(self.get(tuple(prev)), a)
                self.cache[idx] = out
                return out
        raise AssertionError


def prolong_evolutionary(Q, e: DiffExpr, fields=FIELDS) -> DiffExpr:
    """``pr v_Q(e) = sum_J D_J(Q_i) d e / d (field_i)_J``."""
    towers = [_DerivTower(q) for q in Q]
    out = ZERO
    for v in sorted(e.jets()):
        if v[1] not in fields:
            continue
        i = fields.index(v[1])
        dq = towers[i].get(v[2])
        if dq.is_zero():
            continue
        out = out + dq * e.partial(v)
    return out


def characteristic_bracket(Q1, Q2, fields=FIELDS):
    """Componentwise ``pr v_{Q1}(Q2) - pr v_{Q2}(Q1)``."""
    return tuple(prolong_evolutionary(Q1, b, fields) - prolong_evolutionary(Q2, a, fields)
                 for a, b in zip(Q1, Q2))


# ---------------------------------------------------------------- text form

def _var_text(v: tuple) -> str:
    kind = v[0]
    if kind == "j":
        return "j:%s:%s" % (v[1], ".".join(map(str, v[2])))
    if kind == "f":
        return "f:%s:%d" % (v[1], v[2])
    if kind == "c":
        return "c:%d" % v[1]
    if kind == "w":
        return "(w %s %s)" % (".".join(map(str, v[2])), v[1])
    raise AlgebraError(f"bad variable {v!r}")


def _coef_text(c) -> str:
    parts = []
    for e, q in P.pkey(c):
        parts.append("(%s %s)" % (" ".join(map(str, e)), q))
    return "(p %s)" % " ".join(parts)


def _mono_text(m: tuple) -> str:
    return " ".join("(^ %s %d)" % (_var_text(v), k) for v, k in m)


def to_text(e: DiffExpr) -> str:
    """Deterministic prefix serialization (exact round trip via from_text)."""
    terms = []
    for m, c in sorted(e.num.items(), key=lambda it: it[0]):
        terms.append("(* %s%s)" % (_coef_text(c), (" " + _mono_text(m)) if m else ""))
    return "(/ (+%s) (*%s) %s)" % (
        "".join(" " + t for t in terms),
        (" " + _mono_text(e.den)) if e.den else "",
        _coef_text(e.pden),
    )


def _tokenize(s: str):
    return re.findall(r"\(|\)|[^\s()]+", s)


def _parse_sexpr(tokens, pos=0):
    tok = tokens[pos]
    if tok == "(":
        out = []
        pos += 1
        while tokens[pos] != ")":
            item, pos = _parse_sexpr(tokens, pos)
            out.append(item)
        return out, pos + 1
    return tok, pos + 1


def _var_from(node) -> tuple:
    if isinstance(node, list):
        assert node[0] == "w"
        idx = tuple(int(x) for x in node[1].split("."))
        payload = _expr_from(node[2])
        return atom_var(payload, idx)
    kind, *rest = node.split(":")
    if kind == "j":
        return ("j", rest[0], tuple(int(x) for x in rest[1].split(".")))
    if kind == "f":
        return ("f", rest[0], int(rest[1]))
    if kind == "c":
        return ("c", int(rest[0]))
    raise AlgebraError(f"bad variable text {node!r}")


def _coef_from(node):
    assert node[0] == "p"
    d = {}
    import flint
    for item in node[1:]:
        *es, q = item
        fq = Fraction(q)
        d[tuple(int(x) for x in es)] = flint.fmpq(fq.numerator, fq.denominator)
    return PCTX.from_dict(d)


def _mono_from(items) -> tuple:
    return tuple(sorted((_var_from(it[1]), int(it[2])) for it in items))


def _expr_from(node) -> DiffExpr:
    assert node[0] == "/"
    num = {}
    for term in node[1][1:]:
        c = _coef_from(term[1])
        num[_mono_from(term[2:])] = c
    den = _mono_from(node[2][1:])
    pden = _coef_from(node[3])
    return DiffExpr(num, den, pden)


def from_text(s: str) -> DiffExpr:
    node, _ = _parse_sexpr(_tokenize(s))
    return _expr_from(node)


# ---------------------------------------------------------------- pretty print

def var_str(v: tuple, chart="txyz") -> str:
    kind = v[0]
    if kind == "j":
        names = AXIS_NAMES[chart]
        sub = "".join(names[a] * n for a, n in enumerate(v[2]))
        return v[1] + ("_" + sub if sub else "")
    if kind == "f":
        arg = {"f": "z", "g": "y", "h": "y", "k": "z", "c": "t+x", "d": "t-x"}[v[1]]
        return "%s%s(%s)" % (v[1], "'" * v[2] if v[2] < 4 else "^(%d)" % v[2], arg)
    if kind == "c":
        return AXIS_NAMES[chart][v[1]] if chart == "txyz" else "z" + AXIS_NAMES[chart][v[1]]
    if kind == "w":
        sub = "".join("txyz"[a] * n for a, n in enumerate(v[2]))
        return "W[%s]%s" % (to_str(atom_payload(v), chart), ("_" + sub) if sub else "")
    return str(v)


def _mono_str(m, chart) -> str:
    return "*".join(var_str(v, chart) + (("^%d" % k) if k > 1 else "") for v, k in m)


def to_str(e: DiffExpr, chart="txyz") -> str:
    if not e.num:
        return "0"
    parts = []
    for m, c in sorted(e.num.items(), key=lambda it: (mono_degree(it[0]), it[0])):
        cs = P.pstr(c)
        multi = len(c.coeffs()) > 1
        ms = _mono_str(m, chart)
        if not ms:
            parts.append("(%s)" % cs if multi else cs)
        elif cs == "1":
            parts.append(ms)
        elif cs == "-1":
            parts.append("-" + ms)
        else:
            parts.append(("(%s)" % cs if multi else cs) + "*" + ms)
    s = " + ".join(parts).replace("+ -", "- ")
    den = []
    if not e.pden.is_one():
        den.append("(%s)" % P.pstr(e.pden))
    if e.den:
        den.append(_mono_str(e.den, chart))
    if den:
        s = "(%s)/(%s)" % (s, "*".join(den))
    return s


def split_by_params(e: DiffExpr, names) -> dict:
    """Split by monomials in the named parameters (denominator must be free of them)."""
    for n in names:
        if P.degree_in(e.pden, n):
            raise AlgebraError("parameter appears in a denominator; cannot split")
    parts: dict = {}
    for m, c in e.num.items():
        for k, piece in P.split_by(c, names).items():
            parts.setdefault(k, {})[m] = piece
    return {k: _canon(num, e.den, e.pden) for k, num in parts.items()}


def max_order(e: DiffExpr, dep=None) -> int:
    return max((sum(v[2]) for v in e.jets(dep)), default=-1)
