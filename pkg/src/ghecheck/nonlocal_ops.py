"""Nonlocal atom ``InvW = w^{-1}``, linear operators and 2x2 operator matrices.

``w = u_yz D_x - u_xz D_y``.  An atom ``InvW(P)`` is a jet variable of kind
``"w"`` (see :mod:`ghecheck.diffalg`) whose only structural rule is
``w(InvW(P)) = P``, used as ``D_x InvW(P) = P/u_yz + (u_xz/u_yz) D_y InvW(P)``.

Applying ``InvW`` to ``P`` first splits off an exact part: a top-down
elimination finds ``g`` with ``P = w(g) + R`` where ``R`` has no removable
``D_x`` derivative on its leading jet, so ``InvW(P) = g + InvW(R)``.  For
payloads linear in test fields the remainder is unique (x-free in the test
fields); for payloads in u, v alone the elimination is a rewriting heuristic
that always terminates and is exact whenever it reports a full collapse.
"""

from __future__ import annotations

import contextlib
import contextvars
from fractions import Fraction
from dataclasses import dataclass

from . import diffalg as da
from . import params as P
from .diffalg import (ONE, U_XZ, U_YZ, ZERO, AlgebraError, DiffExpr, J, X, Y, Z,
                      atom_depth, atom_payload, atom_var, total_derivative)

MAX_DEPTH = 2
TEST_FIELDS = ("F", "G")

_UYZ = DiffExpr.var(U_YZ)
_UXZ = DiffExpr.var(U_XZ)
_UXY = J("u", "xy")

_kernel_shift: contextvars.ContextVar = contextvars.ContextVar("kernel_shift", default=None)


@contextlib.contextmanager
def kernel_shift(expr: DiffExpr):
    """Within the block, ``InvW`` of a field-only argument gains ``+expr``.

    ``expr`` should lie in ``ker w`` (a function of z and u_z); used to probe
    which verdicts depend on the choice of inverse.
    """
    tok = _kernel_shift.set(expr)
    try:
        yield
    finally:
        _kernel_shift.reset(tok)


class NotInvertible(AlgebraError):
    pass


# ---------------------------------------------------------------- w, zeta

def w_apply(e: DiffExpr) -> DiffExpr:
    return _UYZ * total_derivative(e, X) - _UXZ * total_derivative(e, Y)


def zeta_apply(e: DiffExpr) -> DiffExpr:
    return _UYZ * total_derivative(e, X) - _UXY * total_derivative(e, da.Z)


def is_test_var(v) -> bool:
    return v[0] == "j" and v[1] not in da.FIELDS


def test_degree(e: DiffExpr) -> int:
    best = 0
    for m in e.num:
        best = max(best, sum(k for v, k in m if is_test_var(v)))
    return best


# ---------------------------------------------------------------- preimage

_EXCLUDED = {U_YZ, U_XZ}


def _rank(v):
    return (1 if is_test_var(v) else 0, v[2][X], sum(v[2]), v[1], v[2])


def _top_jet(e: DiffExpr):
    best = None
    for v in e.variables():
        if v[0] != "j" or v in _EXCLUDED:
            continue
        if best is None or _rank(v) > _rank(best):
            best = v
    return best


def integrate_in(e: DiffExpr, v: tuple):
    """Antiderivative of ``e`` in the variable ``v`` or None (logarithmic)."""
    d = dict(e.den).get(v, 0)
    den_rest = tuple((w, k) for w, k in e.den if w != v)
    out = ZERO
    for m, c in e.num.items():
        k = dict(m).get(v, 0)
        n = k - d + 1
        if n == 0:
            return None
        rest = tuple((w, j) for w, j in m if w != v)
        out = out + DiffExpr({rest: c * P.pconst(Fraction(1, n))}) * DiffExpr.var(v) ** n
    if den_rest or not e.pden.is_one():
        out = out * DiffExpr({(): P.PONE}, den_rest, e.pden)
    return out


def w_preimage(p: DiffExpr, max_steps: int = 200):
    """Split ``p = w(g) + r``; returns ``(g, r)``."""
    g = ZERO
    r = p
    for _ in range(max_steps):
        if r.is_zero():
            break
        top = _top_jet(r)
        if top is None or top[2][X] == 0:
            break
        c = r.partial(top)
        if not c.partial(top).is_zero():
            break
        if any(_rank(v) >= _rank(top) for v in c.jets() if v not in _EXCLUDED):
            break
        idx = list(top[2])
        idx[X] -= 1
        star = ("j", top[1], tuple(idx))
        g1 = integrate_in(c / _UYZ, star)
        if g1 is None:
            break
        rn = r - w_apply(g1)
        nt = _top_jet(rn)
        if not rn.is_zero() and nt is not None and _rank(nt) >= _rank(top):
            break
        g = g + g1
        r = rn
    return g, r


def _leading_const(e: DiffExpr):
    m = min(e.num)
    return e.num[m]


def invw(e: DiffExpr, shift: bool = True) -> DiffExpr:
    """``InvW(e)`` with the exact part split off and the atom normalized."""
    if e.is_zero():
        out = ZERO
    else:
        g, r = w_preimage(e)
        out = g
        if not r.is_zero():
            k = _leading_const(r)
            rhat = r / DiffExpr.const(k) if not k.is_one() else r
            if atom_depth(rhat) + 1 > MAX_DEPTH:
                raise AlgebraError("nonlocal nesting depth exceeds %d" % MAX_DEPTH)
            out = out + DiffExpr.const(k) * DiffExpr.var(atom_var(rhat))
    ks = _kernel_shift.get()
    if shift and ks is not None and test_degree(e) == 0:
        out = out + ks
    return out


# ---------------------------------------------------------------- normalization

def _atom_image(v: tuple) -> DiffExpr:
    base = invw(atom_payload(v), shift=False)
    return da.D_index(base, v[2])


def _normalize_once(e: DiffExpr) -> DiffExpr:
    if not e.has_atoms():
        return e
    local = {}
    groups: dict = {}
    nonlinear = []
    for m, c in e.num.items():
        atoms = [(v, k) for v, k in m if v[0] == "w"]
        if not atoms:
            local[m] = c
        elif len(atoms) == 1 and atoms[0][1] == 1:
            v = atoms[0][0]
            rest = tuple((w, k) for w, k in m if w != v)
            key = (rest, v[2])
            groups[key] = groups.get(key, ZERO) + DiffExpr.const(c) * atom_payload(v)
        else:
            nonlinear.append(DiffExpr({m: c}))
    out = da._canon(local, (), P.PONE)
    for (rest, idx), payload in sorted(groups.items(), key=lambda it: (it[0][0], it[0][1])):
        if payload.is_zero():
            continue
        out = out + DiffExpr({rest: P.PONE}) * da.D_index(invw(payload, shift=False), idx)
    for t in nonlinear:
        out = out + da.subs(t, lambda v: _atom_image(v) if v[0] == "w" else None)
    if e.den or not e.pden.is_one():
        out = out * DiffExpr({(): P.PONE}, e.den, e.pden)
    return out


def normalize_nonlocal(e: DiffExpr, max_iter: int = 8) -> DiffExpr:
    """Rewrite atoms to a fixed point (collapse, linearity, D_x elimination)."""
    for _ in range(max_iter):
        new = _normalize_once(e)
        if new == e:
            return new
        e = new
    return e


def is_zero_nonlocal(e: DiffExpr) -> bool:
    return normalize_nonlocal(e).is_zero()


# ---------------------------------------------------------------- prolongation

def pr_w(Q, f: DiffExpr) -> DiffExpr:
    """``pr v_Q(w)`` acting on ``f``: ``pr v(u_yz) f_x - pr v(u_xz) f_y``."""
    phi = Q[0]
    return da.D(phi, Y, Z) * total_derivative(f, X) - da.D(phi, X, Z) * total_derivative(f, Y)


def prolong_nonlocal(Q, e: DiffExpr, fields=da.FIELDS) -> DiffExpr:
    """``pr v_Q`` through atoms: ``pr v(InvW P) = InvW(pr v P - pr v(w) InvW P)``."""
    out = da.prolong_evolutionary(Q, e, fields)
    for v in sorted(e.atoms()):
        a0 = DiffExpr.var(("w", v[1], (0, 0, 0, 0)))
        payload = atom_payload(v)
        inner = prolong_nonlocal(Q, payload, fields) - pr_w(Q, a0)
        image = da.D_index(invw(inner, shift=False), v[2])
        out = out + e.partial(v) * image
    return out


# ---------------------------------------------------------------- operators

def _fac_str(f, chart) -> str:
    kind = f[0]
    if kind == "m":
        s = da.to_str(f[1], chart)
        return s if len(f[1].num) == 1 and not f[1].den else "(" + s + ")"
    if kind == "D":
        return "D" + da.AXIS_NAMES[chart][f[1]]
    if kind == "W":
        return "w"
    return "w^-1"


class LinOp:
    """Sum of words; a word is a composition of factors applied right-to-left.

    Factors: ``("m", expr)`` multiply, ``("D", axis)`` total derivative,
    ``("W",)`` the operator w, ``("I",)`` its inverse.
    """

    __slots__ = ("words",)

    def __init__(self, words=()):
        self.words = tuple(w for w in (_simplify_word(w) for w in words) if w is not None)

    @staticmethod
    def mult(e) -> "LinOp":
        e = da._coerce(e)
        return LinOp([(("m", e),)]) if not e.is_zero() else LinOp()

    @staticmethod
    def identity() -> "LinOp":
        return LinOp([()])

    @staticmethod
    def D(ax) -> "LinOp":
        return LinOp([(("D", da.axis(ax)),)])

    @staticmethod
    def w() -> "LinOp":
        return LinOp([(("W",),)])

    @staticmethod
    def winv() -> "LinOp":
        return LinOp([(("I",),)])

    @staticmethod
    def zeta() -> "LinOp":
        return LinOp.mult(_UYZ) * LinOp.D(X) - LinOp.mult(_UXY) * LinOp.D(da.Z)

    def __add__(self, other):
        other = _as_op(other)
        return LinOp(self.words + other.words)

    __radd__ = __add__

    def __neg__(self):
        return LinOp([(("m", -ONE),) + w for w in self.words])

    def __sub__(self, other):
        return self + (-_as_op(other))

    def __rsub__(self, other):
        return _as_op(other) - self

    def __mul__(self, other):
        if isinstance(other, OperatorMatrix):
            return NotImplemented
        other = _as_op(other)
        return LinOp([w1 + w2 for w1 in self.words for w2 in other.words])

    def __rmul__(self, other):
        return _as_op(other) * self

    def apply(self, e: DiffExpr) -> DiffExpr:
        return op_apply(self, e)

    __call__ = apply

    def adjoint(self) -> "LinOp":
        return op_adjoint(self)

    def is_zero(self) -> bool:
        return not self.words

    def pretty(self, chart="txyz") -> str:
        if not self.words:
            return "0"
        parts = []
        for w in self.words:
            parts.append(" ".join(_fac_str(f, chart) for f in w) or "1")
        return " + ".join(parts)

    __str__ = pretty

    def __repr__(self):
        return "LinOp(%s)" % self.pretty()


def _as_op(x) -> LinOp:
    if isinstance(x, LinOp):
        return x
    return LinOp.mult(x)


def _simplify_word(word):
    out = []
    for f in word:
        if f[0] == "m":
            if f[1].is_zero():
                return None
            if out and out[-1][0] == "m":
                out[-1] = ("m", out[-1][1] * f[1])
                continue
            if f[1] == ONE:
                continue
        elif f[0] in ("W", "I") and out and out[-1][0] in ("W", "I") and out[-1][0] != f[0]:
            out.pop()
            continue
        out.append(f)
    if out and out[-1][0] == "m" and out[-1][1] == ONE:
        out.pop()
    return tuple(out)


def op_apply(L: LinOp, e: DiffExpr) -> DiffExpr:
    """Apply factors right-to-left; InvW collapses exact payloads."""
    total = ZERO
    for word in L.words:
        r = e
        for f in reversed(word):
            if r.is_zero():
                break
            kind = f[0]
            if kind == "m":
                r = f[1] * r
            elif kind == "D":
                r = total_derivative(r, f[1])
            elif kind == "W":
                r = w_apply(r)
            else:
                r = invw(r)
        total = total + r
    return total


def op_adjoint(L: LinOp) -> LinOp:
    """Formal adjoint: reverse words; D, w, InvW are skew, multipliers symmetric."""
    words = []
    for word in L.words:
        sign = 1
        new = []
        for f in reversed(word):
            if f[0] != "m":
                sign = -sign
            new.append(f)
        if sign < 0:
            new.insert(0, ("m", -ONE))
        words.append(tuple(new))
    return LinOp(words)


def op_equal(L1: LinOp, L2: LinOp, field: str = "F") -> bool:
    f = J(field)
    return is_zero_nonlocal(op_apply(L1, f) - op_apply(L2, f))


# ---------------------------------------------------------------- matrices

@dataclass(frozen=True)
class OperatorMatrix:
    """2x2 matrix of LinOps acting on pairs of expressions."""

    a: LinOp
    b: LinOp
    c: LinOp
    d: LinOp

    @staticmethod
    def of(a, b, c, d) -> "OperatorMatrix":
        return OperatorMatrix(_as_op(a), _as_op(b), _as_op(c), _as_op(d))

    @staticmethod
    def identity() -> "OperatorMatrix":
        return OperatorMatrix.of(1, 0, 0, 1)

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def entry(self, i: int, j: int) -> LinOp:
        return self.entries()[2 * (i - 1) + (j - 1)]

    def __mul__(self, o):
        if not isinstance(o, OperatorMatrix):
            o = _as_op(o)
            return OperatorMatrix(self.a * o, self.b * o, self.c * o, self.d * o)
        return OperatorMatrix(self.a * o.a + self.b * o.c, self.a * o.b + self.b * o.d,
                              self.c * o.a + self.d * o.c, self.c * o.b + self.d * o.d)

    def __rmul__(self, o):
        o = _as_op(o)
        return OperatorMatrix(o * self.a, o * self.b, o * self.c, o * self.d)

    def __add__(self, o):
        return OperatorMatrix(*(x + y for x, y in zip(self.entries(), o.entries())))

    def __sub__(self, o):
        return OperatorMatrix(*(x - y for x, y in zip(self.entries(), o.entries())))

    def __neg__(self):
        return OperatorMatrix(*(-x for x in self.entries()))

    def apply(self, vec):
        f, g = vec
        return (op_apply(self.a, f) + op_apply(self.b, g),
                op_apply(self.c, f) + op_apply(self.d, g))

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(op_adjoint(self.a), op_adjoint(self.c),
                              op_adjoint(self.b), op_adjoint(self.d))

    def entry_residuals(self, other: "OperatorMatrix") -> dict:
        """Normalized ``(self - other)_ij`` applied to a test field, nonzero only."""
        out = {}
        f = J("F")
        for i in (1, 2):
            for j in (1, 2):
                r = normalize_nonlocal(op_apply(self.entry(i, j), f) - op_apply(other.entry(i, j), f))
                if not r.is_zero():
                    out[(i, j)] = r
        return out

    def equals(self, other: "OperatorMatrix") -> bool:
        return not self.entry_residuals(other)

    def is_identity(self) -> bool:
        return self.equals(OperatorMatrix.identity())

    def is_skew(self) -> bool:
        return not (self + self.adjoint()).entry_residuals(OperatorMatrix.of(0, 0, 0, 0))

    def pretty(self, chart="txyz") -> str:
        return "\n".join("[%d%d] %s" % (i, j, self.entry(i, j).pretty(chart))
                         for i in (1, 2) for j in (1, 2))


# ---------------------------------------------------------------- inversion

def _as_multiplier(L: LinOp):
    """Return m if L acts as multiplication by m, else None."""
    f = J("F")
    r = normalize_nonlocal(op_apply(L, f))
    m = r.partial(("j", "F", (0, 0, 0, 0)))
    if (r - m * f).is_zero() and not m.jets("F"):
        return m
    return None


def _as_w_multiple(L: LinOp):
    """Return constant k if L equals k*w, else None."""
    f = J("F")
    r = normalize_nonlocal(op_apply(L, f))
    cx = r.partial(("j", "F", (0, 1, 0, 0)))
    k = cx / _UYZ if not cx.is_zero() else ZERO
    if k.is_zero() or not k.is_constant():
        return None
    if normalize_nonlocal(r - k * w_apply(f)).is_zero():
        return k
    return None


def op_inverse(L: LinOp) -> LinOp:
    """Inverse of a multiplication operator or of a constant multiple of w."""
    m = _as_multiplier(L)
    if m is not None and not m.is_zero():
        if len(m.num) != 1:
            raise NotInvertible("multiplier %s has no monomial inverse" % m)
        return LinOp.mult(ONE / m)
    k = _as_w_multiple(L)
    if k is not None:
        return LinOp.mult(ONE / k) * LinOp.winv()
    raise NotInvertible("operator %s is not invertible via InvW or a reciprocal" % L.pretty())


def matrix_inverse_2x2(M: OperatorMatrix, verify: bool = True) -> OperatorMatrix:
    """Inverse via Schur complements; checks both products against identity.

    ``e = (a - b d^-1 c)^-1`` and ``f = (c - d b^-1 a)^-1`` as displayed;
    ``g = -d^-1 c e`` and ``h = -b^-1 a f`` are the same entries written so
    that only ``b``, ``d`` and the complements need inverting.
    """
    a, b, c, d = M.entries()
    dinv = op_inverse(d)
    binv = op_inverse(b)
    e = op_inverse(a - b * dinv * c)
    f = op_inverse(c - d * binv * a)
    g = -(dinv * c * e)
    h = -(binv * a * f)
    inv = OperatorMatrix(e, f, g, h)
    if verify:
        if not (inv * M).is_identity() or not (M * inv).is_identity():
            raise NotInvertible("inverse candidate fails the product identity")
    return inv


def frechet(f: DiffExpr, dep: str) -> LinOp:
    """Linearization ``sum_J (d f / d dep_J) D_J`` as an operator."""
    words = []
    for var in sorted(f.jets(dep)):
        c = f.partial(var)
        word = [("m", c)]
        for ax, n in enumerate(var[2]):
            word.extend([("D", ax)] * n)
        words.append(tuple(word))
    return LinOp(words)
