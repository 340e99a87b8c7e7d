"""Functional multivectors and the Jacobi identity for the Hamiltonian pencil.

Multivectors are stored polarized: a k-vector built from odd factors
``f1 ^ ... ^ fk`` is the ordinary product ``f1[1] * ... * fk[k]`` where
``f[i]`` renames every odd field jet to copy ``i``.  Antisymmetrizing over
copies recovers the wedge product, so everything else (total derivatives,
evolutionary fields, Euler operators) is the commutative machinery of
:mod:`ghecheck.diffalg`.

For the nonlocal operator the odd variable ``rho = w^-1(eta - D_y(v_z theta / u_yz))``
replaces ``eta``; then ``eta = w(rho) + D_y(v_z theta / u_yz)`` and the
criterion becomes a local trivector in ``(rho, theta)``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from . import diffalg as da
from .diffalg import ONE, ZERO, DiffExpr, J, X, Y, Z, param
from .hamiltonian import k_printed
from .model import B, u, v
from .nonlocal_ops import LinOp, OperatorMatrix
from .params import constant_value
from .verdict import Verdict

SPACE = (X, Y, Z)
A = param("a")
ODD_FIELDS = ("eta", "theta", "rho", "du", "dv")
M = LinOp.mult
Dx, Dy, Dz = LinOp.D(X), LinOp.D(Y), LinOp.D(Z)


# ---------------------------------------------------------------- polarized wedge algebra

def _base(dep: str):
    for f in ODD_FIELDS:
        if dep.startswith(f) and dep[len(f):].isdigit():
            return f, int(dep[len(f):])
    return None


def to_slot(e: DiffExpr, k: int) -> DiffExpr:
    """Move every slot-free odd factor of ``e`` into copy ``k``."""
    return da.subs(e, lambda var: J(var[1] + str(k), var[2]) if var[0] == "j" and var[1] in ODD_FIELDS else None)


def _relabel(e: DiffExpr, perm: dict) -> DiffExpr:
    def rule(var):
        if var[0] != "j":
            return None
        b = _base(var[1])
        if b is None or b[1] not in perm:
            return None
        return J(b[0] + str(perm[b[1]]), var[2])
    return da.subs(e, rule)


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


@dataclass(frozen=True)
class WedgeExpr:
    """Polarized multivector of a fixed degree (slots 1..degree)."""

    poly: DiffExpr
    degree: int

    @staticmethod
    def wedge(*factors: DiffExpr) -> "WedgeExpr":
        out = ONE
        for k, f in enumerate(factors, 1):
            out = out * to_slot(f, k)
        return WedgeExpr(out, len(factors))

    def __add__(self, other: "WedgeExpr") -> "WedgeExpr":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        return WedgeExpr(self.poly + other.poly, self.degree)

    def __sub__(self, other: "WedgeExpr") -> "WedgeExpr":
        return self + (-other)

    def __neg__(self) -> "WedgeExpr":
        return WedgeExpr(-self.poly, self.degree)

    def scale(self, c) -> "WedgeExpr":
        return WedgeExpr(self.poly * c, self.degree)

    def __xor__(self, other: "WedgeExpr") -> "WedgeExpr":
        shift = {k: k + self.degree for k in range(1, other.degree + 1)}
        return WedgeExpr(self.poly * _relabel(other.poly, shift), self.degree + other.degree)

    def D(self, ax) -> "WedgeExpr":
        return WedgeExpr(da.total_derivative(self.poly, ax), self.degree)

    def alternate(self) -> "WedgeExpr":
        out = ZERO
        slots = range(1, self.degree + 1)
        for p in itertools.permutations(slots):
            out = out + _perm_sign(p) * _relabel(self.poly, dict(zip(slots, p)))
        return WedgeExpr(out, self.degree)

    def equals(self, other: "WedgeExpr") -> bool:
        return (self - other).alternate().poly.is_zero()

    def is_zero(self) -> bool:
        return self.alternate().poly.is_zero()

    def fields(self) -> list:
        return sorted({_base(var[1])[0] for var in self.poly.jets() if _base(var[1])})

    def term_count(self) -> int:
        return len(self.poly.num)


def pr_v(Q, e):
    """Evolutionary field with uni-vector characteristic ``Q = (Q_u, Q_v)``.

    On a function it returns the degree-one variation; on a WedgeExpr it acts
    as an odd derivation, the new factor entering in front.  Odd factors are
    annihilated.
    """
    if isinstance(e, WedgeExpr):
        shifted = _relabel(e.poly, {k: k + 1 for k in range(1, e.degree + 1)})
        Q1 = tuple(to_slot(q, 1) for q in Q)
        return WedgeExpr(da.prolong_evolutionary(Q1, shifted), e.degree + 1)
    return da.prolong_evolutionary(tuple(Q), e)


def _slot1_fields(e: DiffExpr) -> list:
    return sorted({var[1] for var in e.jets() if _base(var[1]) and _base(var[1])[1] == 1})


def reduce_mod_divergence(e: WedgeExpr) -> WedgeExpr:
    """Canonical representative with every derivative moved off copy 1.

    For an alternating multilinear density ``T`` linear in the copy-1 fields
    ``f``, ``T = sum_f f * E_f(T)`` modulo total divergences, and the Euler
    images are unique, so the result is zero iff ``T`` is a divergence.
    """
    T = e.alternate().poly
    out = ZERO
    for dep in _slot1_fields(T):
        out = out + J(dep) * da.euler_operator(T, dep, SPACE)
    return WedgeExpr(out, e.degree)


def is_divergence_bruteforce(e: DiffExpr, fields, axes=SPACE) -> bool:
    """Independent oracle for constant-coefficient multilinear densities.

    ``e`` must be homogeneous of total derivative order n; it is then a
    divergence iff it lies in the span of ``D_a`` applied to the monomials
    of order n - 1 in the given fields.  Membership is decided by exact
    rank computation over the rationals.
    """
    import flint

    orders = {sum(sum(var[2]) * k for var, k in m) for m in e.num}
    if len(orders) != 1:
        raise da.AlgebraError("brute-force oracle needs a homogeneous derivative order")
    n = orders.pop() - 1
    if n < 0:
        return e.is_zero()
    idxs = []
    for k in range(n + 1):
        for c in itertools.combinations_with_replacement(axes, k):
            idx = [0, 0, 0, 0]
            for a in c:
                idx[a] += 1
            idxs.append((k, tuple(idx)))
    gens = []
    for combo in itertools.product(idxs, repeat=len(fields)):
        if sum(k for k, _ in combo) != n:
            continue
        mono = ONE
        for f, (_, idx) in zip(fields, combo):
            mono = mono * J(f, idx)
        for a in axes:
            gens.append(da.total_derivative(mono, a))
    keys = {}
    for g in gens + [e]:
        for m in g.num:
            keys.setdefault(m, len(keys))
    for g in gens + [e]:
        if g.den or not g.pden.is_one() or any(constant_value(c) is None for c in g.num.values()):
            raise da.AlgebraError("brute-force oracle needs constant coefficients")

    def row(g):
        r = [flint.fmpq(0)] * len(keys)
        for m, c in g.num.items():
            q = constant_value(c)
            r[keys[m]] = flint.fmpq(q.numerator, q.denominator)
        return r

    mat = flint.fmpq_mat([row(g) for g in gens]) if gens else None
    aug = flint.fmpq_mat([row(g) for g in gens] + [row(e)])
    return mat.rank() == aug.rank()


# ---------------------------------------------------------------- the pencil J = s*J1 + a*J0

LOCAL_TERMS = ("zeta", "zeta-w", "Dy vz", "Dz vy", "vyz", "c12", "c21")


@dataclass
class Pencil:
    """``s*J1 + a*J0`` with its local pieces named for mutation controls.

    ``coeffs`` maps each local term to its coefficient; the nonlocal part is
    present iff ``s`` is one.
    """

    a: DiffExpr = A
    b: DiffExpr = B
    s: int = 1
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        a, b, s = self.a, self.b, self.s
        base = {
            "zeta": -s * ONE,
            "zeta-w": b * (a + s * b),
            "Dy vz": a + 2 * s * b,
            "Dz vy": a,
            "vyz": -(a + s * b),
            "c12": a + s * b,
            "c21": -(a + s * b),
        }
        base.update(self.coeffs)
        self.coeffs = base

    def mutated(self, term: str, factor=-1) -> "Pencil":
        c = dict(self.coeffs)
        c[term] = c[term] * factor
        return Pencil(self.a, self.b, self.s, c)

    def local22(self) -> LinOp:
        inv = M(ONE / u("yz"))
        W = M(u("yz")) * Dx - M(u("xz")) * Dy
        Zeta = LinOp.zeta()
        c = self.coeffs
        inner = (M(c["zeta"]) * Zeta + M(c["zeta-w"]) * (Zeta - W) + M(c["Dy vz"]) * Dy * M(v("z"))
                 + M(c["Dz vy"]) * Dz * M(v("y")) + M(c["vyz"] * v("yz")))
        return inv * inner * inv

    def operator(self) -> OperatorMatrix:
        """The pencil as a 2x2 operator matrix (for comparison with displays)."""
        uyz = u("yz")
        vzu = M(v("z") / uyz)
        Winv = LinOp.winv()
        s = self.s
        c = self.coeffs
        j11 = M(s * ONE) * Winv
        j12 = M(c["c12"] / uyz) - M(s * ONE) * Winv * Dy * vzu
        j21 = M(c["c21"] / uyz) + M(s * ONE) * vzu * Dy * Winv
        j22 = self.local22() - M(s * ONE) * vzu * Dy * Winv * Dy * vzu
        return OperatorMatrix(j11, j12, j21, j22)


def eta_of_rho() -> DiffExpr:
    """``eta = w(rho) + D_y(v_z theta / u_yz)``."""
    rho, theta = J("rho"), J("theta")
    return u("yz") * da.D(rho, X) - u("xz") * da.D(rho, Y) + da.D(v("z") * theta / u("yz"), Y)


def characteristic(P: Pencil):
    """``J omega`` as slot-free uni-vectors (in rho, theta when nonlocal)."""
    uyz = u("yz")
    theta = J("theta")
    loc = _apply_local(P.local22(), theta)
    if P.s:
        rho = J("rho")
        eta = eta_of_rho()
        q1 = rho + P.coeffs["c12"] / uyz * theta
        q2 = P.coeffs["c21"] / uyz * eta + v("z") / uyz * da.D(rho, Y) + loc
    else:
        eta = J("eta")
        q1 = P.coeffs["c12"] / uyz * theta
        q2 = P.coeffs["c21"] / uyz * eta + loc
    return q1, q2


def _apply_word(word, e: DiffExpr) -> DiffExpr:
    for f in reversed(word):
        if f[0] == "m":
            e = f[1] * e
        elif f[0] == "D":
            e = da.total_derivative(e, f[1])
        else:
            raise da.AlgebraError("local operator expected")
    return e


def _apply_local(L: LinOp, e: DiffExpr) -> DiffExpr:
    out = ZERO
    for word in L.words:
        out = out + _apply_word(word, e)
    return out


def _variation_of_local(L: LinOp, Q, theta_slot: DiffExpr) -> DiffExpr:
    """``pr v(L) theta`` with the variation in copy 2 and theta in copy 3."""
    Q2 = tuple(to_slot(q, 2) for q in Q)
    out = ZERO
    for word in L.words:
        for k, f in enumerate(word):
            if f[0] != "m":
                continue
            dm = da.prolong_evolutionary(Q2, f[1])
            if dm.is_zero():
                continue
            inner = _apply_word(word[k + 1:], theta_slot)
            out = out + _apply_word(word[:k], dm * inner)
    return out


def jacobi_trivector(P: Pencil) -> WedgeExpr:
    """``omega ^ pr v_{J omega}(J omega)`` modulo divergences (unalternated).

    Slot 1 is the outer uni-vector, slot 2 the variation, slot 3 the inner
    argument.  The nonlocal terms are integrated by parts with the
    skew-adjointness of ``w^-1`` and collapse to ``-rho ^ Xi``.
    """
    Q = characteristic(P)
    uyz = u("yz")
    Xv = lambda expr: pr_v(tuple(to_slot(q, 2) for q in Q), expr)
    s3 = lambda e: to_slot(e, 3)
    s1 = lambda e: to_slot(e, 1)
    theta = J("theta")
    eta = eta_of_rho() if P.s else J("eta")
    c12 = P.coeffs["c12"] / uyz
    c21 = P.coeffs["c21"] / uyz
    T = s1(eta) * Xv(c12) * s3(theta) + s1(theta) * Xv(c21) * s3(eta)
    T = T + s1(theta) * _variation_of_local(P.local22(), Q, s3(theta))
    if P.s:
        rho = J("rho")
        vzu = v("z") / uyz
        Xvzu = Xv(vzu)
        T = T + s1(theta) * Xvzu * s3(da.D(rho, Y))
        Xi = (-da.D(Xvzu * s3(theta), Y) - Xv(uyz) * s3(da.D(rho, X)) + Xv(u("xz")) * s3(da.D(rho, Y)))
        T = T - s1(rho) * Xi
    return WedgeExpr(T, 3)


# ---------------------------------------------------------------- cells and the verdict

def _monomial_label(exps, names=("a", "b")) -> str:
    parts = []
    for n, e in zip(names, exps):
        if e == 1:
            parts.append(n)
        elif e > 1:
            parts.append("%s^%d" % (n, e))
    return "*".join(parts) or "1"


def cells(T: WedgeExpr, lead: str = "rho") -> dict:
    """Split an alternated trivector by (lead-degree, (a, b)-monomial)."""
    poly = T.poly
    out: dict = {}
    for m, c in poly.num.items():
        deg = sum(k for var, k in m if var[0] == "j" and (_base(var[1]) or ("",))[0] == lead)
        parts = da.split_by_params(DiffExpr({m: c}), ["a", "b"])
        for exps, part in parts.items():
            key = (deg, exps)
            out[key] = out.get(key, ZERO) + part
    if poly.den or not poly.pden.is_one():
        scale = DiffExpr({(): da.PONE}, poly.den, poly.pden)
        out = {k: e * scale for k, e in out.items()}
    return out


@dataclass
class CellTrace:
    label: str
    terms: int
    residual_terms: int
    residual: str = ""

    def to_json(self) -> dict:
        return {"cell": self.label, "terms": self.terms, "residual_terms": self.residual_terms,
                "residual": self.residual}


def cell_label(key, lead: str) -> str:
    deg, exps = key
    return "%s^%d theta^%d [%s]" % (lead, deg, 3 - deg, _monomial_label(exps))


def run_cells(T: WedgeExpr, lead: str) -> list:
    alt = T.alternate()
    traces = []
    for key, poly in sorted(cells(alt, lead).items()):
        red = reduce_mod_divergence(WedgeExpr(poly, 3)).poly
        traces.append(CellTrace(cell_label(key, lead), len(poly.num), len(red.num),
                                "" if red.is_zero() else da.to_str(red)[:400]))
    return traces


def jacobi_check(P: Pencil, name: str = "olver:jacobi") -> Verdict:
    t0 = time.time()
    T = jacobi_trivector(P)
    lead = "rho" if P.s else "eta"
    traces = run_cells(T, lead)
    bad = [t for t in traces if t.residual_terms]
    ok = not bad
    summary = ("%d cells reduce to zero" % len(traces) if ok
               else "surviving cells: " + ", ".join(t.label for t in bad))
    return Verdict(name, ok, summary, {"cells": [t.to_json() for t in traces],
                                       "seconds": round(time.time() - t0, 2)})


def jacobi_compatibility_check(a=A, b=B) -> Verdict:
    """``pr v_{J omega}(Theta) = 0`` modulo divergences for ``J = J1 + a J0``."""
    return jacobi_check(Pencil(a, b, 1))


def mutation_controls(P: Pencil = None, factor=-1) -> dict:
    """Jacobi verdict after flipping each named coefficient of the pencil."""
    P = P or Pencil()
    return {t: jacobi_check(P.mutated(t, factor), "olver:jacobi[%s x %s]" % (t, factor)) for t in LOCAL_TERMS}


def j0_jacobi_check() -> Verdict:
    return jacobi_check(Pencil(ONE, B, 0), "olver:j0")


# ---------------------------------------------------------------- bivector

def theta_display_operator(a=A, b=B) -> OperatorMatrix:
    """Operator ``D`` with ``Theta = 1/2 int omega ^ D omega`` read off the display."""
    uyz = u("yz")
    inv = M(ONE / uyz)
    vzu = M(v("z") / uyz)
    Winv = LinOp.winv()
    d11 = Winv
    d12 = M(2 * (a + b) / uyz) - Winv * Dy * vzu
    d21 = vzu * Dy * Winv
    d22 = (M(u("xy") / uyz) * Dz * inv - Dx * inv
           + M(b * (a + b)) * (M(u("xz") / uyz) * Dy * inv - M(u("xy") / uyz) * Dz * inv)
           + M(a + 2 * b) * vzu * Dy * inv + M(a) * M(v("y") / uyz) * Dz * inv
           - vzu * Dy * Winv * Dy * vzu)
    return OperatorMatrix(d11, d12, d21, d22)


@dataclass(frozen=True)
class Bivector:
    """``1/2 int omega ^ D omega`` stored through its skew operator."""

    operator: OperatorMatrix

    def skew_part(self) -> OperatorMatrix:
        D = self.operator
        half = M(ONE / 2)
        return OperatorMatrix(*(half * (x - y) for x, y in zip(D.entries(), D.adjoint().entries())))

    def equals(self, other: "Bivector") -> bool:
        return self.skew_part().equals(other.skew_part())


def build_bivector(Jm: OperatorMatrix) -> Bivector:
    return Bivector(Jm)


def bivector_check() -> Verdict:
    Jm = Pencil().operator()
    shown = Bivector(theta_display_operator())
    res = build_bivector(Jm).skew_part().entry_residuals(shown.skew_part())
    skew = Jm.is_skew()
    ok = skew and not res
    return Verdict("olver:bivector", ok,
                   "pencil is skew: %s; displayed integrand gives the same bivector: %s" % (skew, not res),
                   {"residuals": {str(k): str(r) for k, r in res.items()}})


def local_bivector(P: Pencil) -> WedgeExpr:
    """``1/2 omega ^ J omega`` for a local pencil (s = 0)."""
    if P.s:
        raise ValueError("local bivector needs s = 0")
    q1, q2 = characteristic(P)
    return WedgeExpr.wedge(J("eta"), q1).scale(ONE / 2) + WedgeExpr.wedge(J("theta"), q2).scale(ONE / 2)


# ---------------------------------------------------------------- symplectic form

def symplectic_form(b=B, scale_b=ONE) -> WedgeExpr:
    """The two-form in du, dv jets; ``scale_b`` multiplies the b/2 terms."""
    du, dv = J("du"), J("dv")
    w2 = lambda f, g: WedgeExpr.wedge(f, g)
    return (w2(du, da.D(du, Y)).scale(scale_b * b / 2 * u("xz"))
            - w2(du, da.D(du, Z)).scale(scale_b * b / 2 * u("xy"))
            + w2(du, da.D(du, Y)).scale(v("z") / 2)
            + w2(du, da.D(du, Z)).scale(v("y") / 2)
            - w2(du, dv).scale(u("yz")))


def vertical_d(form: WedgeExpr) -> WedgeExpr:
    """Vertical exterior derivative: the variation enters in front."""
    return pr_v((J("du"), J("dv")), form)


def symplectic_closure_check(scale_b=ONE) -> Verdict:
    form = symplectic_form(scale_b=scale_b)
    red = reduce_mod_divergence(vertical_d(form))
    # the form must also be the one defined by K
    K = k_printed()
    du, dv = J("du"), J("dv")
    from .nonlocal_ops import op_apply
    fromK = (WedgeExpr.wedge(du, op_apply(K.a, du) + op_apply(K.b, dv))
             + WedgeExpr.wedge(dv, op_apply(K.c, du) + op_apply(K.d, dv))).scale(ONE / 2)
    same = reduce_mod_divergence(fromK - form).poly.is_zero()
    closed = red.poly.is_zero()
    return Verdict("symplectic", closed and same,
                   "d omega = 0 mod divergence: %s; omega = 1/2 dU ^ K dU: %s" % (closed, same),
                   {"residual_terms": len(red.poly.num)})


CHECKS = {
    "olver:jacobi": jacobi_compatibility_check,
    "olver:j0": j0_jacobi_check,
    "olver:bivector": bivector_check,
    "symplectic": symplectic_closure_check,
}
