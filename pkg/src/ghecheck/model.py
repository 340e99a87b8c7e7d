"""The equation, its Lax pairs, the two-component flow and point symmetries.

Two charts share the same jet index tuples: in the ``z`` chart positions
0..3 stand for z1..z4, in the ``txyz`` chart for t, x, y, z.  The change of
variables is t = z1 + z2, x = z1 - z2, y = z3, z = z4.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import diffalg as da
from .diffalg import ONE, ZERO, DiffExpr, J, coord, fn, param
from .verdict import Verdict

BETA = param("beta")
GAMMA = param("gamma")
ALPHA = -(BETA + GAMMA)
LAM = param("lam")
B = param("b")


def uz(spec: str) -> DiffExpr:
    """u-jet in the z chart, e.g. ``uz("34")``."""
    return J("u", spec)


def u(spec: str = "") -> DiffExpr:
    return J("u", spec)


def v(spec: str = "") -> DiffExpr:
    return J("v", spec)


# ---------------------------------------------------------------- equation

def ghe_residual(chart: str = "z", alpha=ALPHA, beta=BETA, gamma=GAMMA) -> DiffExpr:
    if chart == "z":
        return alpha * uz("12") * uz("34") + beta * uz("13") * uz("24") + gamma * uz("14") * uz("23")
    if chart == "txyz":
        return (alpha * (u("tt") - u("xx")) * u("yz")
                + beta * (u("ty") + u("xy")) * (u("tz") - u("xz"))
                + gamma * (u("ty") - u("xy")) * (u("tz") + u("xz")))
    raise ValueError("unknown chart %r" % chart)


def z_to_txyz(e: DiffExpr) -> DiffExpr:
    """Rewrite z-chart jets of u by the chain rule D1 = Dt + Dx, D2 = Dt - Dx."""
    def rule(var):
        if var[0] != "j":
            return None
        n1, n2, n3, n4 = var[2]
        out = J(var[1], (0, 0, n3, n4))
        for _ in range(n1):
            out = da.D(out, da.T) + da.D(out, da.X)
        for _ in range(n2):
            out = da.D(out, da.T) - da.D(out, da.X)
        return out
    return da.subs(e, rule)


_REDUCE_CACHE: dict = {}

# index permutations mapping the first Lax pair to the n-th one (0-based)
PERMUTATIONS = {1: (0, 1, 2, 3), 2: (2, 3, 0, 1), 3: (3, 2, 1, 0)}


def _pair_jet(i, j):
    idx = [0, 0, 0, 0]
    idx[i] += 1
    idx[j] += 1
    return J("u", tuple(idx))


def _solution_for(perm):
    """Solve the equation for ``u_{p0 p1}`` (the equation is invariant under perm)."""
    p0, p1, p2, p3 = perm
    return -(BETA * _pair_jet(p0, p2) * _pair_jet(p1, p3) + GAMMA * _pair_jet(p0, p3) * _pair_jet(p1, p2)) / \
        (ALPHA * _pair_jet(p2, p3))


def _reduce_rule(var, perm):
    if var[0] != "j" or var[1] != "u":
        return None
    idx = var[2]
    p0, p1 = perm[0], perm[1]
    if idx[p0] < 1 or idx[p1] < 1:
        return None
    key = (var, perm)
    if key in _REDUCE_CACHE:
        return _REDUCE_CACHE[key]
    rest = list(idx)
    rest[p0] -= 1
    rest[p1] -= 1
    out = reduce_mod_ghe(da.D_index(_solution_for(perm), tuple(rest)), perm)
    _REDUCE_CACHE[key] = out
    return out


def reduce_mod_ghe(e: DiffExpr, perm=PERMUTATIONS[1]) -> DiffExpr:
    """Eliminate every prolongation of ``u_{p0 p1}`` using the equation.

    With the default permutation this is ``u_12`` and every jet u_J with
    J >= (1,1,0,0); the substitution strictly lowers the (1,2)-order so it
    terminates, and the remaining jets are the free Goursat data.
    """
    return da.subs(e, lambda var: _reduce_rule(var, tuple(perm)))


# ---------------------------------------------------------------- vector fields

class VectorField(dict):
    """First-order operator ``sum_i a_i D_i`` keyed by axis position."""

    def __call__(self, e: DiffExpr) -> DiffExpr:
        out = ZERO
        for ax, c in self.items():
            out = out + c * da.total_derivative(e, ax)
        return out

    def __add__(self, other):
        out = VectorField(self)
        for ax, c in other.items():
            out[ax] = out.get(ax, ZERO) + c
        return out

    def scale(self, k) -> "VectorField":
        return VectorField({ax: k * c for ax, c in self.items()})

    def __neg__(self):
        return self.scale(-ONE)

    def __sub__(self, other):
        return self + (-other)

    def bracket(self, other) -> "VectorField":
        axes = set(self) | set(other)
        return VectorField({ax: self(other.get(ax, ZERO)) - other(self.get(ax, ZERO)) for ax in axes})

    def to_linop(self):
        from .nonlocal_ops import LinOp
        out = LinOp()
        for ax in sorted(self):
            out = out + LinOp.mult(self[ax]) * LinOp.D(ax)
        return out


def _zpos(i) -> int:
    i = int(i)
    if i not in (1, 2, 3, 4):
        raise ValueError("axis label must be 1..4")
    return i - 1


def L_op(i, j, k) -> VectorField:
    """``L_{ij(k)} = u_jk D_i - u_ik D_j`` in the z chart."""
    if len({int(i), int(j), int(k)}) != 3:
        raise ValueError("indices of L_{ij(k)} must be distinct")
    pi, pj = _zpos(i), _zpos(j)
    return VectorField({pi: uz("%s%s" % tuple(sorted((str(j), str(k))))),
                        pj: -uz("%s%s" % tuple(sorted((str(i), str(k)))))})


def lax_pair(n: int, gamma=GAMMA, beta=BETA):
    """The n-th Lax pair (X1, X2) with spectral parameter ``lam``."""
    L = L_op
    if n == 1:
        return (L(1, 4, 3) + L(1, 3, 4).scale(LAM * gamma), -L(2, 4, 3) + L(2, 3, 4).scale(LAM * beta))
    if n == 2:
        return (L(2, 3, 1) + L(1, 3, 2).scale(LAM * gamma), L(2, 4, 1) - L(1, 4, 2).scale(LAM * beta))
    if n == 3:
        return (L(4, 1, 2) + L(4, 2, 1).scale(LAM * gamma), -L(3, 1, 2) + L(3, 2, 1).scale(LAM * beta))
    raise ValueError("Lax pair index must be 1, 2 or 3")


def lax_pivot(n: int) -> DiffExpr:
    """Jet dividing both fields of the n-th pair so that their D-coefficients
    along the two pivot axes become constant."""
    p = PERMUTATIONS[n]
    return _pair_jet(p[2], p[3])


def lax_commutator_check(n: int, mutate: bool = False) -> Verdict:
    """Bracket of the pivot-normalized Lax fields, reduced modulo the equation.

    The raw bracket ``[X1, X2]`` lies in the span of X1 and X2 on solutions;
    after dividing both fields by the pivot jet the bracket must vanish
    identically, coefficient by coefficient in each power of ``lam``.
    """
    name = "lax%d" % n
    if mutate:
        X1, _ = lax_pair(n, gamma=GAMMA + 1)
        _, X2 = lax_pair(n)
    else:
        X1, X2 = lax_pair(n)
    piv = lax_pivot(n)
    br = X1.scale(ONE / piv).bracket(X2.scale(ONE / piv))
    perm = PERMUTATIONS[n]
    count = 0
    residues = {}
    for ax in sorted(br):
        red = reduce_mod_ghe(br[ax], perm)
        parts = da.split_by_params(red, ["lam"]) if not red.is_zero() else {}
        for lam_pow, part in sorted(parts.items()):
            if not part.is_zero():
                residues["D%d lam^%d" % (ax + 1, lam_pow[0])] = da.to_str(part, "z")
        count += 1
    if residues:
        first = next(iter(residues.items()))
        return Verdict(name, False, "nonzero coefficient %s: %s" % first, {"residuals": residues})
    return Verdict(name, True, "%d normalized bracket coefficients vanish in lam^0, lam^1, lam^2" % count,
                   {"coefficients": count, "pivot": da.to_str(piv, "z")})


# ---------------------------------------------------------------- symmetry condition

def _phi_jet(phi, spec):
    return da.D(phi, *[_zpos(c) for c in spec])


def symmetry_operator_apply(phi: DiffExpr) -> DiffExpr:
    """Linearization of the equation applied to ``phi`` (z chart)."""
    return (ALPHA * (uz("34") * _phi_jet(phi, "12") + uz("12") * _phi_jet(phi, "34"))
            + BETA * (uz("24") * _phi_jet(phi, "13") + uz("13") * _phi_jet(phi, "24"))
            + GAMMA * (uz("23") * _phi_jet(phi, "14") + uz("14") * _phi_jet(phi, "23")))


def symmetry_operator_divergence_form(phi: DiffExpr) -> DiffExpr:
    """``beta(D3 L_14(2) - D2 L_14(3)) + gamma(D3 L_24(1) - D1 L_24(3))`` on phi."""
    D = lambda i, e: da.total_derivative(e, _zpos(i))
    return (BETA * (D(3, L_op(1, 4, 2)(phi)) - D(2, L_op(1, 4, 3)(phi)))
            + GAMMA * (D(3, L_op(2, 4, 1)(phi)) - D(1, L_op(2, 4, 3)(phi))))


def symmetry_operator_operator_form(phi: DiffExpr) -> DiffExpr:
    """``beta(L_14(2) D3 - L_14(3) D2) + gamma(L_24(1) D3 - L_24(3) D1)`` on phi."""
    D = lambda i, e: da.total_derivative(e, _zpos(i))
    return (BETA * (L_op(1, 4, 2)(D(3, phi)) - L_op(1, 4, 3)(D(2, phi)))
            + GAMMA * (L_op(2, 4, 1)(D(3, phi)) - L_op(2, 4, 3)(D(1, phi))))


# ---------------------------------------------------------------- two-component form

def two_component_flow():
    return (v(), da.q_expr())


def elimination_residual() -> DiffExpr:
    """``alpha u_yz (u_tt - q)`` at v = u_t minus the transformed equation."""
    q = da.specialize_b(da.q_expr())
    q_u = da.subs(q, lambda var: J("u", da.idx_add(var[2], da.unit(da.T))) if var[0] == "j" and var[1] == "v" else None)
    lhs = ALPHA * u("yz") * (u("tt") - q_u)
    return lhs - ghe_residual("txyz")


def lagrangian_density(b_coeff=None) -> DiffExpr:
    b3 = B / 3 if b_coeff is None else b_coeff
    return ((v() * u("t") - v() ** 2 / 2) * u("yz") - u("y") * u("z") * u("xx") / 2
            + b3 * u("t") * (u("z") * u("xy") - u("y") * u("xz")))


def _ut_to_v(var):
    if var[0] == "j" and var[1] == "u" and var[2][da.T] > 0:
        idx = list(var[2])
        idx[da.T] -= 1
        return J("v", tuple(idx))
    return None


def lagrangian_check(density: DiffExpr | None = None) -> Verdict:
    L = lagrangian_density() if density is None else density
    dv = da.euler_operator(L, "v")
    du = da.euler_operator(L, "u")
    forced = (u("t") - v()) * u("yz")
    if dv != forced:
        return Verdict("lagrangian", False, "delta_v L is not (u_t - v) u_yz", {"delta_v": str(dv)})
    red = da.subs(du, _ut_to_v)
    vt = ("j", "v", da.unit(da.T))
    c = red.partial(vt)
    rest = red - c * DiffExpr.var(vt)
    if c.is_zero() or not c.partial(vt).is_zero() or any(j[2][da.T] for j in rest.jets()):
        return Verdict("lagrangian", False, "delta_u L is not solvable for v_t", {"delta_u": str(red)})
    if any(j[2][da.T] for j in c.jets()):
        return Verdict("lagrangian", False, "coefficient of v_t contains time derivatives")
    vt_sol = -rest / c
    resid = vt_sol - da.q_expr()
    if not resid.is_zero():
        return Verdict("lagrangian", False, "v_t residual %s" % resid, {"residual": str(resid)})
    return Verdict("lagrangian", True, "Euler-Lagrange equations give u_t = v and v_t = q")


# ---------------------------------------------------------------- point symmetries

@dataclass(frozen=True)
class SymmetryCharacteristic:
    name: str
    phi: DiffExpr
    psi: DiffExpr

    @property
    def pair(self):
        return (self.phi, self.psi)


t_, x_ = coord("t"), coord("x")

# generator data (xi_t, xi_x, xi_y, xi_z, eta_u, eta_v)
GENERATORS = {
    "X1": (t_, x_, ZERO, ZERO, u(), ZERO),
    "X2": (ONE, -B, ZERO, ZERO, ZERO, ZERO),
    "X3": (ONE, ZERO, ZERO, ZERO, ZERO, ZERO),
    "X4": (ZERO, ZERO, ZERO, ZERO, u(), v()),
    "X5": (ZERO, ZERO, ZERO, ZERO, fn("f"), ZERO),
    "X6": (ZERO, ZERO, ZERO, ZERO, fn("g"), ZERO),
    "X7": (ZERO, ZERO, fn("h"), ZERO, ZERO, ZERO),
    "X8": (ZERO, ZERO, ZERO, fn("k"), ZERO, ZERO),
    "Xcd": (ZERO, ZERO, ZERO, ZERO, fn("c") + fn("d"), fn("c", 1) + fn("d", 1)),
}


def printed_characteristics() -> dict:
    """The characteristic table as published, used as golden data."""
    q = da.q_expr()
    return {
        "X1": (u() - t_ * v() - x_ * u("x"), -t_ * q - x_ * v("x")),
        "X2": (-v() + B * u("x"), -q + B * v("x")),
        "X3": (-v(), -q),
        "X4": (u(), v()),
        "X5": (fn("f"), ZERO),
        "X6": (fn("g"), ZERO),
        "X7": (-fn("h") * u("y"), -fn("h") * v("y")),
        "X8": (-fn("k") * u("z"), -fn("k") * v("z")),
        "Xcd": (fn("c") + fn("d"), fn("c", 1) + fn("d", 1)),
    }


def point_symmetry(name: str) -> SymmetryCharacteristic:
    """Characteristic computed from the generator coefficients."""
    if name not in GENERATORS:
        raise KeyError("unknown symmetry %r" % name)
    xt, xx, xy, xz, eu, ev = GENERATORS[name]
    q = da.q_expr()
    phi = eu - v() * xt - u("x") * xx - u("y") * xy - u("z") * xz
    psi = ev - q * xt - v("x") * xx - v("y") * xy - v("z") * xz
    return SymmetryCharacteristic(name, phi, psi)


def symmetry_table_check() -> Verdict:
    bad = {}
    for name, (p, s) in printed_characteristics().items():
        c = point_symmetry(name)
        if c.phi != p or c.psi != s:
            bad[name] = {"phi": str(c.phi), "psi": str(c.psi)}
    if bad:
        return Verdict("symmetry:table", False, "mismatch for %s" % ", ".join(sorted(bad)), bad)
    return Verdict("symmetry:table", True, "%d characteristics match the generators" % len(GENERATORS))


def symmetry_residuals(Q):
    """Linearized flow equations on ``Q`` with time derivatives eliminated."""
    phi, psi = Q
    flow = two_component_flow()
    r1 = da.substitute_flow(da.total_derivative(phi, da.T)) - da.prolong_evolutionary(Q, flow[0])
    r2 = da.substitute_flow(da.total_derivative(psi, da.T)) - da.prolong_evolutionary(Q, flow[1])
    return da.substitute_flow(r1), da.substitute_flow(r2)


def is_symmetry(Q, name: str = "symmetry") -> Verdict:
    r1, r2 = symmetry_residuals(Q)
    if r1.is_zero() and r2.is_zero():
        return Verdict(name, True, "linearized flow equations hold")
    return Verdict(name, False, "residuals (%s, %s)" % (r1, r2), {"residuals": [str(r1), str(r2)]})


def commuting_subalgebra(names=("X2", "X3", "X5", "X6")) -> dict:
    """Pairwise characteristic brackets, keyed by name pair."""
    out = {}
    for i, a in enumerate(names):
        for bname in names[i + 1:]:
            out[(a, bname)] = da.characteristic_bracket(point_symmetry(a).pair, point_symmetry(bname).pair)
    return out


CHECKS = {
    "lax1": lambda: lax_commutator_check(1),
    "lax2": lambda: lax_commutator_check(2),
    "lax3": lambda: lax_commutator_check(3),
    "lagrangian": lagrangian_check,
    "symmetry:table": symmetry_table_check,
}
for _name in GENERATORS:
    CHECKS["symmetry:" + _name] = (lambda n: lambda: is_symmetry(point_symmetry(n).pair, "symmetry:" + n))(_name)
